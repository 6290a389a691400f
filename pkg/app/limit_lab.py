"""Edge-crossing experiments: rolling across a rounded plate edge versus the no-slip collision map.

The rolling spin and the billiard spin live on opposite sides of the plate
edge, so the billiard spin is read off as minus the plate block of the
rolling spin. With that readout a straight edge reproduces the limit map
exactly for every r.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from app.billiard import BilliardOrbit, BilliardState, billiard_orbit, build_domain, chord_distance, collision_reduced
from app.geometry import FLAT_KINDS, PlanarPancake, RegionKind, build_pancake
from app.models import ConvergenceReport, ConvergenceRow, EdgeExperiment, PlateSpec
from app.rolling import RollingState, SeamEvent, Trajectory, energy, integrate
from app.skew import wedge


logger = logging.getLogger(__name__)

NON_EXIT_BUDGET = 1e3
# errors below this fraction of the incoming speed are treated as exact
ERROR_FLOOR = 1e-9


class NonExitError(RuntimeError):
    """The ball kept rolling along the edge past the time budget."""


@dataclass(frozen=True)
class EdgeIncoming:
    """Billiard data arriving at an edge point: u = u_bar + u_perp n, spin = tangential + n ^ W."""

    point: np.ndarray
    normal: np.ndarray
    u_bar: np.ndarray
    W: np.ndarray
    u_perp: float
    tangential: np.ndarray

    @property
    def velocity(self) -> np.ndarray:
        return self.u_bar + self.u_perp * self.normal

    @property
    def spin(self) -> np.ndarray:
        return self.tangential + wedge(self.normal, self.W)

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))


@dataclass(frozen=True)
class CrossingResult:
    u_bar: np.ndarray
    W: np.ndarray
    u_perp: float
    exit_frame: Tuple[np.ndarray, np.ndarray, float]
    exit_point: np.ndarray
    traversal_time: float
    exit_side: str
    tau_duration: float
    mu_drift: float
    energy_drift: float
    entry_state: RollingState
    exit_state: RollingState
    trajectory: Trajectory

    def vector(self) -> np.ndarray:
        return np.concatenate([self.u_bar, self.W, [self.u_perp]])

    def exit_frame_vector(self) -> np.ndarray:
        u_bar, W, u_perp = self.exit_frame
        return np.concatenate([u_bar, W, [u_perp]])


def edge_incoming(surface: PlanarPancake, point, u_bar, W, u_perp: float, tangential=None) -> EdgeIncoming:
    """Snap point onto the plate edge and strip normal parts from u_bar and W."""
    edge = surface.edge_frame(np.asarray(point, dtype=float))
    n = edge.inward
    k = n.size
    u_bar = np.asarray(u_bar, dtype=float)
    W = np.asarray(W, dtype=float)
    if tangential is None:
        tangential = np.zeros((k, k))
    proj = np.eye(k) - np.outer(n, n)
    tangential = proj @ np.asarray(tangential, dtype=float) @ proj
    return EdgeIncoming(edge.point, n, proj @ u_bar, proj @ W, float(u_perp), tangential)


def limit_map(incoming: EdgeIncoming, eta: float) -> np.ndarray:
    """(u_bar, W, u_perp) after the non-holonomic collision with angle pi * eta."""
    u_bar, W, u_perp = collision_reduced(incoming.u_bar, incoming.W, incoming.u_perp, math.pi * eta)
    return np.concatenate([u_bar, W, [u_perp]])


def _embed_spin(plate_spin: np.ndarray) -> np.ndarray:
    k = plate_spin.shape[0]
    spin = np.zeros((k + 1, k + 1))
    spin[:k, :k] = plate_spin
    return spin


def rolling_state_from_billiard(surface: PlanarPancake, p, u, spin_b, side: int = 1) -> RollingState:
    """Ball on the side sheet over plate point p with billiard velocity and spin."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    x = np.append(p, side * surface.r)
    return RollingState(x, np.append(u, 0.0), _embed_spin(-np.asarray(spin_b, dtype=float)))


def billiard_readout(state: RollingState) -> Tuple[np.ndarray, np.ndarray]:
    """Planar velocity and billiard spin of a ball on a flat sheet."""
    k = state.x.size - 1
    return state.u[:k].copy(), -state.spin[:k, :k]


def _split(u: np.ndarray, spin_b: np.ndarray, n: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    u_perp = float(np.dot(u, n))
    return u - u_perp * n, spin_b @ n, u_perp


def _is_exit(event: SeamEvent, _state: RollingState) -> bool:
    return event.source == RegionKind.EDGE_TUBE and event.target in FLAT_KINDS


def run_edge_crossing(
    surface: PlanarPancake,
    incoming: EdgeIncoming,
    eta: float,
    steps_per_turn: int = 1000,
    side: int = 1,
    budget: float = NON_EXIT_BUDGET,
) -> CrossingResult:
    """Roll from the seam over incoming.point around the edge until a flat sheet is reached.

    Outgoing (u_bar, W, u_perp) are split along the entry normal; the split
    at the exit point's own normal is kept in exit_frame.
    """
    if not isinstance(surface, PlanarPancake):
        raise TypeError("edge crossings need a planar pancake")
    if incoming.u_perp >= 0.0:
        raise ValueError("incoming u_perp must be negative (heading into the edge)")
    state0 = rolling_state_from_billiard(surface, incoming.point, incoming.velocity, incoming.spin, side)
    r = surface.r
    speed = float(np.linalg.norm(state0.u))
    h = math.pi * r / (steps_per_turn * speed)
    T = budget * math.pi * r / speed
    traj = integrate(surface, state0, eta, T, h, stop_when=_is_exit)
    if not traj.stopped:
        raise NonExitError(f"no exit from the edge tube within {T:.6g} (r={r:g}, eta={eta:g})")

    exit_event = traj.events[-1]
    exit_state = traj.final
    entry_kind = RegionKind.FLAT_SHEET_PLUS if side > 0 else RegionKind.FLAT_SHEET_MINUS
    exit_side = "same" if exit_event.target == entry_kind else "opposite"

    k = incoming.normal.size
    u_out, spin_out = billiard_readout(exit_state)
    u_bar, W, u_perp = _split(u_out, spin_out, incoming.normal)
    exit_point = exit_state.x[:k].copy()
    exit_normal = surface.edge_frame(exit_point).inward
    exit_frame = _split(u_out, spin_out, exit_normal)

    e0 = energy(state0)
    mu0 = float(np.dot(state0.u, surface.meridian_direction(state0.x)))
    mu_drift = max(
        abs(float(np.dot(s.u, surface.meridian_direction(s.x))) - mu0)
        for s, kind in zip(traj.states, traj.regions)
        if kind == RegionKind.EDGE_TUBE
    )
    c = math.sqrt(2.0 * e0)
    return CrossingResult(
        u_bar=u_bar,
        W=W,
        u_perp=u_perp,
        exit_frame=exit_frame,
        exit_point=exit_point,
        traversal_time=exit_event.t,
        exit_side=exit_side,
        tau_duration=c * exit_event.t / r,
        mu_drift=mu_drift,
        energy_drift=abs(energy(exit_state) - e0) / e0,
        entry_state=state0,
        exit_state=exit_state,
        trajectory=traj,
    )


def crossing_error(result: CrossingResult, incoming: EdgeIncoming, eta: float) -> float:
    return float(np.max(np.abs(result.vector() - limit_map(incoming, eta))))


def exit_frame_error(result: CrossingResult, incoming: EdgeIncoming, eta: float) -> float:
    """Same comparison with the outgoing data split at the exit point's own normal."""
    return float(np.max(np.abs(result.exit_frame_vector() - limit_map(incoming, eta))))


# ---------------------------------------------------------------------------
# Convergence study
# ---------------------------------------------------------------------------


def experiment_incoming(surface: PlanarPancake, experiment: EdgeExperiment) -> EdgeIncoming:
    return edge_incoming(
        surface,
        experiment.point,
        experiment.u_bar,
        experiment.W,
        experiment.u_perp,
        experiment.spin_tangential,
    )


def convergence_row(experiment: EdgeExperiment, r: float) -> ConvergenceRow:
    surface = build_pancake(experiment.plate, r)
    incoming = experiment_incoming(surface, experiment)
    try:
        result = run_edge_crossing(
            surface, incoming, experiment.eta, experiment.steps_per_turn, experiment.entry_side
        )
    except NonExitError as exc:
        logger.warning("Edge crossing at r=%g did not exit: %s", r, exc)
        return ConvergenceRow(r=r, non_exit=True)
    return ConvergenceRow(
        r=r,
        error=crossing_error(result, incoming, experiment.eta),
        traversal_time=result.traversal_time,
        exit_side=result.exit_side,
        tau_duration=result.tau_duration,
        mu_drift=result.mu_drift,
        exit_frame_error=exit_frame_error(result, incoming, experiment.eta),
        exit_shift=float(np.linalg.norm(result.exit_point - incoming.point)),
    )


def _fit_rate(rows: List[ConvergenceRow], floor: float) -> Optional[float]:
    usable = [row for row in rows if not row.non_exit and row.error is not None and row.error > floor]
    if len(usable) < 2:
        return None
    log_r = np.log([row.r for row in usable])
    log_e = np.log([row.error for row in usable])
    slope, _ = np.polyfit(log_r, log_e, 1)
    return float(slope)


def convergence_study(experiment: EdgeExperiment, workers: int = 1) -> ConvergenceReport:
    radii = experiment.radii
    if len(radii) < 4 or radii[0] / radii[-1] < 100.0:
        raise ValueError("a convergence study needs at least 4 radii spanning 2 decades")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(convergence_row, [experiment] * len(radii), radii))
    else:
        rows = [convergence_row(experiment, r) for r in radii]

    speed = math.sqrt(float(np.dot(experiment.u_bar, experiment.u_bar)) + experiment.u_perp**2)
    report = ConvergenceReport(eta=experiment.eta, plate=experiment.plate, rows=rows, incoming_speed=speed)

    spin_sq = 2.0 * float(np.dot(experiment.W, experiment.W))
    if experiment.spin_tangential is not None:
        spin_sq += float(np.sum(np.square(experiment.spin_tangential)))
    report.expected_tau = math.pi * math.sqrt(speed**2 + 0.5 * spin_sq) / abs(experiment.u_perp)

    for row in rows:
        if row.non_exit:
            report.warnings.append(f"r={row.r:g}: no exit within the time budget")
        else:
            logger.info(
                "r=%-10g error=%.3e traversal=%.6g exit=%s shift=%.3e",
                row.r,
                row.error,
                row.traversal_time,
                row.exit_side,
                row.exit_shift,
            )

    report.fitted_rate = _fit_rate(rows, ERROR_FLOOR * max(speed, 1.0))
    if report.fitted_rate is None:
        report.warnings.append("rate fit skipped: fewer than two errors above the floor")
        logger.info("Rate fit skipped; errors are at the floor")
    return report


# ---------------------------------------------------------------------------
# Rolling orbit versus billiard orbit
# ---------------------------------------------------------------------------


@dataclass
class PairedOrbits:
    billiard: BilliardOrbit
    trajectory: Trajectory
    entry_points: List[np.ndarray] = field(default_factory=list)
    exit_states: List[RollingState] = field(default_factory=list)
    divergence: List[float] = field(default_factory=list)
    rolling_chord_distances: List[float] = field(default_factory=list)


def rolling_vs_billiard_orbit(
    plate: PlateSpec,
    r: float,
    eta: float,
    state0: BilliardState,
    n_crossings: int,
    steps_per_turn: int = 1000,
    h_flat: Optional[float] = None,
    budget: float = NON_EXIT_BUDGET,
) -> PairedOrbits:
    """Run the rolling system and its billiard limit from the same data; compare hit by hit."""
    surface = build_pancake(plate, r)
    if not isinstance(surface, PlanarPancake):
        raise TypeError("paired orbits need a planar plate")
    domain = build_domain(plate)
    billiard = billiard_orbit(domain, state0, math.pi * eta, n_crossings)

    rolling0 = rolling_state_from_billiard(surface, state0.x, state0.u, state0.spin)
    speed = float(np.linalg.norm(state0.u))
    feature = min(plate.max_radius(), plate.L if plate.L is not None else math.inf, 1.0)
    h = math.pi * r / (steps_per_turn * speed)
    if h_flat is None:
        h_flat = 0.1 * feature / speed
    T = 2.0 * billiard.collisions[-1].t + budget * math.pi * r / speed

    paired = PairedOrbits(billiard=billiard, trajectory=Trajectory())
    entered_at = [0.0]

    def record(event: SeamEvent, state: RollingState) -> bool:
        if event.target == RegionKind.EDGE_TUBE:
            paired.entry_points.append(event.x[:-1].copy())
            entered_at[0] = event.t
            return False
        if _is_exit(event, state):
            paired.exit_states.append(state)
            return len(paired.exit_states) >= n_crossings
        return False

    traj = integrate(surface, rolling0, eta, T, h, h_flat=h_flat, stop_when=record)
    paired.trajectory = traj
    if not traj.stopped and traj.regions[-1] == RegionKind.EDGE_TUBE:
        if traj.times[-1] - entered_at[0] > budget * math.pi * r / speed:
            raise NonExitError(f"rolling orbit stuck on the edge after crossing {len(paired.exit_states)}")
    if len(paired.exit_states) < n_crossings:
        logger.warning("Rolling orbit completed %d of %d crossings", len(paired.exit_states), n_crossings)

    for point, hit in zip(paired.entry_points, billiard.collisions):
        paired.divergence.append(float(np.linalg.norm(domain.displacement(hit.point, point))))
    for state in paired.exit_states:
        u_planar, _ = billiard_readout(state)
        paired.rolling_chord_distances.append(chord_distance(domain, state.x[:-1], u_planar))
    return paired
