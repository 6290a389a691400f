from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from app.geometry import FLAT_KINDS, GeometryError, PancakeSurface, RegionKind, SurfaceRegion
from app.skew import is_skew, tangent_projector, wedge


logger = logging.getLogger(__name__)

# seam events are located to EVENT_TOL * T in time
EVENT_TOL = 1e-12
MAX_STALLED_EVENTS = 8
STATE_TOL = 1e-9


class CornerError(RuntimeError):
    """Trajectory reached a point where the surface is not piecewise smooth."""


class SeamCrossingError(GeometryError):
    """A single step left its region; use integrate() for event handling."""


class CrossCheckSkipped(ValueError):
    pass


# ---------------------------------------------------------------------------
# State types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RollingState:
    """Centre x, centre velocity u in T_x N and tangential spin (scaled by r * eta)."""

    x: np.ndarray
    u: np.ndarray
    spin: np.ndarray

    def reversed(self) -> "RollingState":
        return RollingState(self.x.copy(), -self.u, -self.spin)


@dataclass(frozen=True)
class InertiaParams:
    gamma: float
    eta: float

    def __post_init__(self) -> None:
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        if abs(self.eta - self.gamma / math.sqrt(1.0 + self.gamma**2)) > 1e-12:
            raise ValueError(f"eta={self.eta} does not match gamma={self.gamma}")

    @classmethod
    def from_gamma(cls, gamma: float) -> "InertiaParams":
        return cls(gamma=gamma, eta=gamma / math.sqrt(1.0 + gamma**2))

    @classmethod
    def from_eta(cls, eta: float) -> "InertiaParams":
        if not 0.0 <= eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {eta}")
        return cls(gamma=eta / math.sqrt(1.0 - eta**2), eta=eta)


@dataclass
class SeamEvent:
    t: float
    source: RegionKind
    target: RegionKind
    x: np.ndarray

    def to_record(self) -> dict:
        return {"t": self.t, "from": self.source.value, "to": self.target.value}


@dataclass
class Trajectory:
    times: List[float] = field(default_factory=list)
    states: List[RollingState] = field(default_factory=list)
    regions: List[RegionKind] = field(default_factory=list)
    events: List[SeamEvent] = field(default_factory=list)
    # sum over steps of |E_rk4 - E0| / E0, before renormalisation
    raw_drift: float = 0.0
    stopped: bool = False

    @property
    def final(self) -> RollingState:
        return self.states[-1]

    def positions(self) -> np.ndarray:
        return np.array([s.x for s in self.states])

    def velocities(self) -> np.ndarray:
        return np.array([s.u for s in self.states])


def make_state(surface: PancakeSurface, x, u, spin=None) -> RollingState:
    """Snap raw initial data onto the surface and its tangent bundle."""
    x = surface.project_to_surface(np.asarray(x, dtype=float))
    u = np.asarray(u, dtype=float)
    region = surface.region_for(x, u)
    proj = surface.tangent_projector(region, x)
    if spin is None:
        spin = np.zeros((surface.dim, surface.dim))
    spin = np.asarray(spin, dtype=float)
    if not is_skew(spin, tol=1e-9):
        raise ValueError("initial spin must be skew-symmetric")
    return RollingState(x, proj @ u, proj @ spin @ proj)


def constraint_residuals(surface: PancakeSurface, state: RollingState) -> Tuple[float, float]:
    """(|u . nu|, |spin - P spin P|) at the state's position."""
    region = surface.locate(state.x)
    nu = surface.region_normal(region, state.x)
    proj = tangent_projector(nu)
    return abs(float(np.dot(state.u, nu))), float(np.linalg.norm(state.spin - proj @ state.spin @ proj))


def energy(state: RollingState) -> float:
    return 0.5 * float(np.dot(state.u, state.u)) + 0.25 * float(np.sum(state.spin * state.spin))


# ---------------------------------------------------------------------------
# Right-hand side
# ---------------------------------------------------------------------------


def _field(surface, region, x, u, spin, eta):
    nu = surface.region_normal(region, x)
    shape_u = surface.region_shape_operator(region, x) @ u
    spin_shape_u = spin @ shape_u
    du = -eta * spin_shape_u + float(np.dot(shape_u, u)) * nu
    dspin = eta * wedge(shape_u, u) + wedge(nu, spin_shape_u)
    return u, du, dspin


def rhs(
    surface: PancakeSurface,
    state: RollingState,
    eta: float,
    region: Optional[SurfaceRegion] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time derivative (dx, du, dspin) of the rolling state.

    Without an explicit region the state must sit in the smooth interior of
    one; a seam point raises SeamPointError.
    """
    if region is None:
        surface.shape_operator(state.x)
        region = surface.locate(state.x)
    return _field(surface, region, state.x, state.u, state.spin, eta)


def orthogonality_residual(surface: PancakeSurface, state: RollingState, eta: float) -> float:
    """<e, f(e)> for the force term f of the rolling flow; zero for exact arithmetic."""
    region = surface.locate(state.x)
    shape_u = surface.region_shape_operator(region, state.x) @ state.u
    work = float(np.dot(state.u, -eta * state.spin @ shape_u))
    spin_work = 0.5 * float(np.trace(eta * wedge(shape_u, state.u) @ state.spin.T))
    return work + spin_work


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------


def _rk4(surface, region, state: RollingState, eta: float, h: float):
    x, u, s = state.x, state.u, state.spin
    k1 = _field(surface, region, x, u, s, eta)
    k2 = _field(surface, region, x + 0.5 * h * k1[0], u + 0.5 * h * k1[1], s + 0.5 * h * k1[2], eta)
    k3 = _field(surface, region, x + 0.5 * h * k2[0], u + 0.5 * h * k2[1], s + 0.5 * h * k2[2], eta)
    k4 = _field(surface, region, x + h * k3[0], u + h * k3[1], s + h * k3[2], eta)
    x_new = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    u_new = u + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    s_new = s + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    return RollingState(x_new, u_new, s_new)


def _renormalize(surface, region, raw: RollingState, energy_target: float) -> RollingState:
    speed = float(np.linalg.norm(raw.u))
    spin_norm = float(np.linalg.norm(raw.spin))
    x = surface.region_project(region, raw.x)
    proj = surface.tangent_projector(region, x)

    u = proj @ raw.u
    norm_u = float(np.linalg.norm(u))
    if norm_u > 0.0:
        u *= speed / norm_u

    spin = proj @ raw.spin @ proj
    spin = 0.5 * (spin - spin.T)
    norm_s = float(np.linalg.norm(spin))
    if norm_s > 0.0:
        spin *= spin_norm / norm_s

    state = RollingState(x, u, spin)
    current = energy(state)
    if current > 0.0 and energy_target > 0.0:
        scale = math.sqrt(energy_target / current)
        state = RollingState(x, u * scale, spin * scale)
    return state


def step(
    surface: PancakeSurface,
    state: RollingState,
    eta: float,
    h: float,
    region: Optional[SurfaceRegion] = None,
    energy_target: Optional[float] = None,
) -> RollingState:
    """One RK4 step followed by projection and energy renormalisation."""
    if h <= 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    if region is None:
        region = surface.region_for(state.x, state.u)
    target = energy(state) if energy_target is None else energy_target
    raw = _rk4(surface, region, state, eta, h)
    if surface.seam_function(region, raw.x) < 0.0:
        raise SeamCrossingError(f"step of size {h} leaves region {region.kind.value}")
    return _renormalize(surface, region, raw, target)


def _locate_event(surface, region, state, eta, dt, xtol) -> float:
    start = max(surface.seam_function(region, state.x), np.finfo(float).tiny)

    def seam_at(tau: float) -> float:
        if tau == 0.0:
            return start
        return surface.seam_function(region, _rk4(surface, region, state, eta, tau).x)

    return brentq(seam_at, 0.0, dt, xtol=xtol)


def integrate(
    surface: PancakeSurface,
    state0: RollingState,
    eta: float,
    T: float,
    h: float,
    h_flat: Optional[float] = None,
    stop_when: Optional[Callable[[SeamEvent, RollingState], bool]] = None,
) -> Trajectory:
    """Fixed-step RK4 with seam-crossing events.

    Flat sheets may use the larger step h_flat (RK4 is exact there). After
    each seam event stop_when(event, state) may end the run early.
    """
    if T <= 0.0 or h <= 0.0:
        raise ValueError(f"T and h must be positive, got T={T}, h={h}")
    e0 = energy(state0)
    region = surface.region_for(state0.x, state0.u)
    xtol = EVENT_TOL * T
    traj = Trajectory(times=[0.0], states=[state0], regions=[region.kind])
    t = 0.0
    state = state0
    stalled = 0

    while T - t > xtol:
        dt = h_flat if (h_flat and region.kind in FLAT_KINDS) else h
        dt = min(dt, T - t)
        raw = _rk4(surface, region, state, eta, dt)
        if e0 > 0.0:
            traj.raw_drift += abs(energy(raw) - e0) / e0

        seam_end = surface.seam_function(region, raw.x)
        upper = dt
        if seam_end >= 0.0 and region.kind in FLAT_KINDS:
            # a long flat step can pass through the tube and come back out
            fraction, seam_min = surface.chord_min_seam(region, state.x, raw.x)
            if seam_min < 0.0:
                logger.debug("Seam crossed inside a flat step at t=%.12g", t + fraction * dt)
                seam_end, upper = seam_min, fraction * dt

        if seam_end >= 0.0:
            state = _renormalize(surface, region, raw, e0)
            state = RollingState(surface.wrap(state.x), state.u, state.spin)
            t += dt
            traj.times.append(t)
            traj.states.append(state)
            traj.regions.append(region.kind)
            continue

        tau = _locate_event(surface, region, state, eta, upper, xtol)
        state = _renormalize(surface, region, _rk4(surface, region, state, eta, tau), e0)
        t += tau
        target = surface.neighbor(region, state.x)
        event = SeamEvent(t, region.kind, target.kind, state.x.copy())
        logger.debug("Seam event at t=%.12g: %s -> %s", t, region.kind.value, target.kind.value)
        traj.events.append(event)

        stalled = stalled + 1 if tau <= xtol else 0
        if stalled > MAX_STALLED_EVENTS:
            raise CornerError(f"trajectory stalled on a seam at t={t:.12g}, x={state.x.tolist()}")

        region = target
        state = RollingState(surface.wrap(state.x), state.u, state.spin)
        if tau > 0.0:
            traj.times.append(t)
            traj.states.append(state)
            traj.regions.append(region.kind)
        if stop_when is not None and stop_when(event, state):
            traj.stopped = True
            break

    return traj


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def parallel_transport_residual(surface: PancakeSurface, trajectory: Trajectory) -> float:
    """Sup of |P (dS/dt) P| along an eta = 0 trajectory.

    dS/dt is a five-point central difference over uniformly spaced samples of
    one region; windows that straddle an event are skipped.
    """
    times = np.asarray(trajectory.times)
    if times.size < 5:
        return 0.0
    worst = 0.0
    for i in range(2, times.size - 2):
        window = times[i - 2 : i + 3]
        spacing = np.diff(window)
        h = spacing[0]
        if h <= 0.0 or np.max(np.abs(spacing - h)) > 1e-9 * h:
            continue
        if len(set(trajectory.regions[i - 2 : i + 3])) != 1:
            continue
        s = [trajectory.states[j].spin for j in range(i - 2, i + 3)]
        derivative = (-s[4] + 8.0 * s[3] - 8.0 * s[1] + s[0]) / (12.0 * h)
        x = trajectory.states[i].x
        proj = surface.tangent_projector(surface.locate(x), x)
        worst = max(worst, float(np.linalg.norm(proj @ derivative @ proj)))
    return worst


@dataclass(frozen=True)
class UCrossCheck:
    U: np.ndarray
    constraint_residual: float
    step_difference: float


def full_U_crosscheck(
    surface: PancakeSurface,
    state: RollingState,
    r: float,
    gamma: float,
    h: float = 1e-4,
) -> UCrossCheck:
    """Rebuild the full angular velocity U and compare one step of its equation with rhs().

    U = S + nu ^ (u / r) with S = spin / (r eta); the U equation is
    dU/dt = -(r / (1 + gamma^2)) (U Sh U nu) ^ nu with dx/dt = r U nu.
    """
    if gamma <= 0.0:
        raise CrossCheckSkipped("eta = 0 leaves S undefined from the scaled spin")
    if r <= 0.0:
        raise ValueError(f"r must be positive, got {r}")
    eta = gamma / math.sqrt(1.0 + gamma**2)
    region = surface.region_for(state.x, state.u)
    nu = surface.region_normal(region, state.x)
    big_u = state.spin / (r * eta) + wedge(nu, state.u / r)
    residual = float(np.linalg.norm(r * big_u @ nu - state.u))

    def field_u(x, U):
        n = surface.region_normal(region, x)
        shape = surface.region_shape_operator(region, x)
        return r * U @ n, -(r / (1.0 + gamma**2)) * wedge(U @ shape @ U @ n, n)

    x0, U0 = state.x, big_u
    k1 = field_u(x0, U0)
    k2 = field_u(x0 + 0.5 * h * k1[0], U0 + 0.5 * h * k1[1])
    k3 = field_u(x0 + 0.5 * h * k2[0], U0 + 0.5 * h * k2[1])
    k4 = field_u(x0 + h * k3[0], U0 + h * k3[1])
    x1 = x0 + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    U1 = U0 + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])

    n1 = surface.region_normal(region, x1)
    proj = tangent_projector(n1)
    u1 = r * U1 @ n1
    spin1 = r * eta * proj @ U1 @ proj

    ref = _rk4(surface, region, state, eta, h)
    diff = max(
        float(np.linalg.norm(x1 - ref.x)),
        float(np.linalg.norm(u1 - ref.u)),
        float(np.linalg.norm(spin1 - ref.spin)),
    )
    return UCrossCheck(U=big_u, constraint_residual=residual, step_difference=diff)
