"""Scenario dispatch: one config in, data files and a run manifest out.

Every scenario is deterministic for a given config; random initial data is
drawn from ``numpy.random.default_rng(config.seed)``.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app import io_utils
from app.billiard import BilliardState, billiard_orbit, build_domain, caustic_radii
from app.geometry import PlanarPancake, ProductPancake, SemiInfinitePancake, SinaiPancake, build_pancake
from app.limit_lab import convergence_study, crossing_error, edge_incoming, run_edge_crossing
from app.models import EdgeExperiment, InitialState, PlateFamily, PlateSpec, ScenarioConfig, ScenarioKind
from app.oracles import (
    codim2_solution,
    codim3_invariant,
    cylinder_data,
    edge_roll_duration,
    gamma_correspondence,
    product_spin_blocks,
    semi_infinite_max_displacement,
    semi_infinite_start_state,
    sphere_data,
    sphere_exact,
)
from app.rolling import RollingState, Trajectory, constraint_residuals, energy, integrate, make_state
from app.settings import app_version


logger = logging.getLogger(__name__)

SINAI_ETAS = (0.05, 0.62)
CONVERGENCE_RADII = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
SEMI_INFINITE_DEFAULTS = {"u0_0": 1.0, "s_0": 0.5, "mu": 1.0}


class ScenarioError(RuntimeError):
    """A simulation failed; the message names the scenario."""


def load_config(path: Path) -> ScenarioConfig:
    """Read a scenario config, or the config echoed in a previous run manifest."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(payload, dict) and "config" in payload and "scenario" not in payload:
        payload = payload["config"]
    return ScenarioConfig.model_validate(payload)


def resolve_eta(config: ScenarioConfig) -> float:
    if config.eta is not None:
        return config.eta
    eta, _ = gamma_correspondence(config.gamma_b)
    return eta


def _radius(config: ScenarioConfig) -> float:
    r = config.r if config.r is not None else config.plate.r
    if r is None:
        raise ValueError(f"{config.scenario.value} needs a ball radius r")
    return r


def _eta_label(eta: float) -> str:
    return f"{eta:.6g}".replace(".", "p")


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


def _rolling_initial(surface, initial: Optional[InitialState], rng: np.random.Generator) -> RollingState:
    if initial is not None:
        return make_state(surface, initial.x, initial.u, initial.spin)
    x = surface.sample_point(rng)
    state = make_state(surface, x, rng.normal(size=surface.dim))
    speed = np.linalg.norm(state.u)
    return RollingState(state.x, state.u / speed, state.spin)


def _billiard_initial(plate: PlateSpec, initial: Optional[InitialState], rng: np.random.Generator) -> BilliardState:
    k = plate.ambient_dim - 1
    if initial is not None:
        spin = np.zeros((k, k)) if initial.spin is None else np.asarray(initial.spin, dtype=float)
        return BilliardState(np.asarray(initial.x, dtype=float), np.asarray(initial.u, dtype=float), spin)
    domain = build_domain(plate)
    u = rng.normal(size=k)
    return BilliardState(domain.center.copy(), u / np.linalg.norm(u), np.zeros((k, k)))


def sample_experiments(config: ScenarioConfig, eta: float, rng: np.random.Generator) -> List[EdgeExperiment]:
    """Random unit-speed incoming states at random edge points, u_perp bounded away from zero."""
    radii = list(config.radii or CONVERGENCE_RADII)
    pancake = build_pancake(config.plate, min(radii))
    if not isinstance(pancake, PlanarPancake):
        raise ValueError("edge convergence needs a planar plate")
    if config.initial is not None:
        return [_experiment_from_initial(config, pancake, eta, radii)]

    experiments = []
    for _ in range(config.n_samples):
        edge = pancake.boundary.sample(rng)
        u_perp = -rng.uniform(0.3, 1.0)
        tangent = edge.tangents.T @ rng.normal(size=edge.tangents.shape[0])
        u_bar = math.sqrt(1.0 - u_perp**2) * tangent / np.linalg.norm(tangent)
        W = edge.tangents.T @ rng.uniform(-1.0, 1.0, size=edge.tangents.shape[0])
        experiments.append(
            EdgeExperiment(
                plate=config.plate,
                point=edge.point.tolist(),
                u_bar=u_bar.tolist(),
                u_perp=float(u_perp),
                W=W.tolist(),
                eta=eta,
                radii=radii,
                steps_per_turn=config.steps_per_turn,
            )
        )
    return experiments


def _experiment_from_initial(config, pancake: PlanarPancake, eta: float, radii) -> EdgeExperiment:
    initial = config.initial
    edge = pancake.edge_frame(np.asarray(initial.x, dtype=float))
    n = edge.inward
    u = np.asarray(initial.u, dtype=float)
    u_perp = float(np.dot(u, n))
    spin = np.zeros((n.size, n.size)) if initial.spin is None else np.asarray(initial.spin, dtype=float)
    return EdgeExperiment(
        plate=config.plate,
        point=edge.point.tolist(),
        u_bar=(u - u_perp * n).tolist(),
        u_perp=u_perp,
        W=(spin @ n).tolist(),
        spin_tangential=spin.tolist(),
        eta=eta,
        radii=radii,
        steps_per_turn=config.steps_per_turn,
    )


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


def roll(plate: PlateSpec, r: float, eta: float, state0: RollingState, T: float, h: float, h_flat=None) -> Trajectory:
    """Module-level so that process pools can pickle it."""
    surface = build_pancake(plate, r)
    return integrate(surface, state0, eta, T, h, h_flat=h_flat)


def _trajectory_summary(surface, traj: Trajectory) -> Dict[str, Any]:
    e0 = energy(traj.states[0])
    energy_drift = max(abs(energy(s) - e0) / e0 for s in traj.states) if e0 > 0 else 0.0
    residuals = [constraint_residuals(surface, s) for s in traj.states]
    return {
        "steps": len(traj.states) - 1,
        "events": len(traj.events),
        "energy_drift": energy_drift,
        "raw_drift": traj.raw_drift,
        "max_u_dot_nu": max(a for a, _ in residuals),
        "max_spin_residual": max(b for _, b in residuals),
    }


def _run_rollings(config: ScenarioConfig, etas: List[float], out_dir: Path, workers: int, stem: str) -> List[Path]:
    r = _radius(config)
    surface = build_pancake(config.plate, r)
    rng = np.random.default_rng(config.seed)
    state0 = _rolling_initial(surface, config.initial, rng)

    args = [(config.plate, r, eta, state0, config.T, config.h, config.h_flat) for eta in etas]
    if workers > 1 and len(etas) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trajectories = list(pool.map(roll, *zip(*args)))
    else:
        trajectories = [roll(*a) for a in args]

    outputs: List[Path] = []
    summaries = {}
    for eta, traj in zip(etas, trajectories):
        suffix = "" if len(etas) == 1 else f"_eta{_eta_label(eta)}"
        outputs.append(io_utils.write_trajectory_csv(out_dir / f"{stem}{suffix}.csv", traj))
        outputs.append(io_utils.write_events_jsonl(out_dir / f"{stem}{suffix}_events.jsonl", traj))
        summaries[f"{eta:.17g}"] = _trajectory_summary(surface, traj)
        logger.info("eta=%g: %d steps, %d seam events", eta, len(traj.states) - 1, len(traj.events))
    outputs.append(
        io_utils.write_gnuplot_blocks(
            out_dir / f"{stem}.dat",
            [traj.positions() for traj in trajectories],
            comment="one block per eta: " + " ".join(f"{eta:g}" for eta in etas),
            period=surface.L if isinstance(surface, SinaiPancake) else None,
        )
    )
    outputs.append(io_utils.write_json(out_dir / f"{stem}_summary.json", summaries))
    return outputs


def run_roll_trajectory(config: ScenarioConfig, out_dir: Path, workers: int) -> List[Path]:
    etas = list(config.etas) if config.etas else [resolve_eta(config)]
    return _run_rollings(config, etas, out_dir, workers, "trajectory")


def run_figure_sinai(config: ScenarioConfig, out_dir: Path, workers: int) -> List[Path]:
    if config.plate.family != PlateFamily.SINAI_TORUS:
        raise ValueError("FigureSinai needs a SinaiTorus plate")
    etas = list(config.etas) if config.etas else list(SINAI_ETAS)
    return _run_rollings(config, etas, out_dir, workers, "sinai")


def _orbit(config: ScenarioConfig):
    eta = resolve_eta(config)
    domain = build_domain(config.plate)
    state0 = _billiard_initial(config.plate, config.initial, np.random.default_rng(config.seed))
    orbit = billiard_orbit(domain, state0, math.pi * eta, config.n_collisions)
    logger.info("Billiard orbit: %d collisions at theta=%g", len(orbit.collisions), math.pi * eta)
    return orbit


def _write_orbit(orbit, out_dir: Path) -> List[Path]:
    return [
        io_utils.write_orbit_csv(out_dir / "orbit.csv", orbit),
        io_utils.write_gnuplot_blocks(out_dir / "orbit.dat", [orbit.hit_points()]),
    ]


def run_billiard_orbit(config: ScenarioConfig, out_dir: Path, workers: int) -> List[Path]:
    return _write_orbit(_orbit(config), out_dir)


def run_disc_caustics(config: ScenarioConfig, out_dir: Path, workers: int) -> List[Path]:
    if config.plate.family != PlateFamily.DISC:
        raise ValueError("FigureDiscCaustics needs a Disc plate")
    eta = resolve_eta(config)
    orbit = _orbit(config)
    outputs = _write_orbit(orbit, out_dir)
    clusters = caustic_radii(orbit)
    logger.info("Disc caustics at eta=%g: %d clusters", eta, len(clusters))
    outputs.append(
        io_utils.write_json(
            out_dir / "caustics.json",
            {"eta": eta, "clusters": [{"radius": radius, "count": count} for radius, count in clusters]},
        )
    )
    return outputs


def run_edge_convergence(config: ScenarioConfig, out_dir: Path, workers: int) -> List[Path]:
    eta = resolve_eta(config)
    experiments = sample_experiments(config, eta, np.random.default_rng(config.seed))
    outputs: List[Path] = []
    reports = []
    for i, experiment in enumerate(experiments):
        report = convergence_study(experiment, workers=workers)
        reports.append(report.model_dump(mode="json"))
        outputs.append(io_utils.write_convergence_csv(out_dir / f"convergence_{i:02d}.csv", report))
        if report.fitted_rate is not None:
            logger.info("Sample %d: fitted rate %.3f", i, report.fitted_rate)
    outputs.append(io_utils.write_json(out_dir / "convergence.json", reports))
    return outputs


# ---------------------------------------------------------------------------
# Oracle checks
# ---------------------------------------------------------------------------


def _sphere_check(surface: ProductPancake, state0: RollingState, eta: float, config) -> Dict[str, Any]:
    traj = integrate(surface, state0, eta, config.T, config.h)
    x1, u1, s = sphere_data(surface, state0)
    x_exact, u_exact = sphere_exact(x1, u1, s, eta, traj.times[-1])
    k = surface.k
    inv0 = codim3_invariant(x1, u1, s, eta).I
    inv_drift = 0.0
    for state in traj.states:
        xs, us, ss = sphere_data(surface, state)
        inv_drift = max(inv_drift, float(np.linalg.norm(codim3_invariant(xs, us, ss, eta, surface.r).I - inv0)))
    flat0, _, _ = product_spin_blocks(state0, k)
    flat_drift = max(float(np.max(np.abs(product_spin_blocks(s, k)[0] - flat0))) for s in traj.states) if k else 0.0
    return {
        "position_error": float(np.linalg.norm(traj.final.x[k:] - x_exact)),
        "velocity_error": float(np.linalg.norm(traj.final.u[k:] - u_exact)),
        "invariant_drift": inv_drift,
        "flat_spin_drift": flat_drift,
    }


def _cylinder_check(surface: ProductPancake, state0: RollingState, eta: float, config) -> Dict[str, Any]:
    traj = integrate(surface, state0, eta, config.T, config.h)
    x0, u00, w0, mu = cylinder_data(surface, state0)
    exact = codim2_solution(w0, u00, x0, mu, eta, surface.r, traj.times[-1])
    k = surface.k
    flat0, _, _ = product_spin_blocks(state0, k)
    return {
        "position_error": float(np.linalg.norm(traj.final.x[:k] - exact.x)),
        "velocity_error": float(np.linalg.norm(traj.final.u[:k] - exact.u0)),
        "flat_spin_drift": max(float(np.max(np.abs(product_spin_blocks(s, k)[0] - flat0))) for s in traj.states),
    }


def _semi_infinite_check(surface: SemiInfinitePancake, eta: float, config) -> Dict[str, Any]:
    p = SEMI_INFINITE_DEFAULTS
    state0 = semi_infinite_start_state(surface.r, p["u0_0"], p["s_0"], p["mu"])
    omega = eta * p["mu"] / surface.r
    expected = semi_infinite_max_displacement(p["u0_0"], p["s_0"], omega)
    traj = integrate(surface, state0, eta, config.T, config.h)
    reached = float(np.max(traj.positions()[:, 0]))
    return {"expected_displacement": expected, "max_displacement": reached, "error": abs(reached - expected)}


def _straight_edge_check(surface: PlanarPancake, eta: float, config, rng) -> Dict[str, Any]:
    edge = surface.boundary.sample(rng)
    tangent = edge.tangents[0]
    incoming = edge_incoming(surface, edge.point, 0.6 * tangent, 0.4 * tangent, -0.8)
    result = run_edge_crossing(surface, incoming, eta, config.steps_per_turn)
    mu = float(np.dot(result.entry_state.u, surface.meridian_direction(result.entry_state.x)))
    return {
        "map_error": crossing_error(result, incoming, eta),
        "traversal_time": result.traversal_time,
        "expected_traversal_time": edge_roll_duration(surface.r, mu),
        "exit_side": result.exit_side,
    }


def run_oracle_check(config: ScenarioConfig, out_dir: Path, workers: int) -> List[Path]:
    eta = resolve_eta(config)
    surface = build_pancake(config.plate, _radius(config))
    rng = np.random.default_rng(config.seed)
    family = config.plate.family
    if family == PlateFamily.SPHERE_FACTOR:
        checks = _sphere_check(surface, _rolling_initial(surface, config.initial, rng), eta, config)
    elif family == PlateFamily.CYLINDER_FACTOR:
        checks = _cylinder_check(surface, _rolling_initial(surface, config.initial, rng), eta, config)
    elif family == PlateFamily.SEMI_INFINITE_LINE:
        checks = _semi_infinite_check(surface, eta, config)
    elif family == PlateFamily.HALF_PLANE:
        checks = _straight_edge_check(surface, eta, config, rng)
    else:
        state0 = _rolling_initial(surface, config.initial, rng)
        checks = _trajectory_summary(surface, integrate(surface, state0, eta, config.T, config.h, config.h_flat))
    logger.info("Oracle check on %s: %s", family.value, checks)
    return [io_utils.write_json(out_dir / "oracle.json", {"family": family.value, "eta": eta, "checks": checks})]


RUNNERS = {
    ScenarioKind.ROLL_TRAJECTORY: run_roll_trajectory,
    ScenarioKind.BILLIARD_ORBIT: run_billiard_orbit,
    ScenarioKind.EDGE_CONVERGENCE: run_edge_convergence,
    ScenarioKind.ORACLE_CHECK: run_oracle_check,
    ScenarioKind.FIGURE_SINAI: run_figure_sinai,
    ScenarioKind.FIGURE_DISC_CAUSTICS: run_disc_caustics,
}


def run(config: ScenarioConfig, out_dir: Path, workers: int = 1) -> Tuple[Path, List[Path]]:
    """Run one scenario; returns the manifest path and the data files written."""
    out_dir = Path(out_dir) / config.output
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    logger.info("Running %s on %s", config.scenario.value, config.plate.family.value)
    try:
        outputs = RUNNERS[config.scenario](config, out_dir, workers)
    except (ValueError, RuntimeError) as exc:
        logger.exception("Scenario %s failed", config.scenario.value)
        raise ScenarioError(f"{config.scenario.value}: {exc}") from exc
    manifest = {
        "config": config.model_dump(mode="json"),
        "version": app_version(),
        "wall_time_s": time.perf_counter() - started,
        "outputs": [p.name for p in outputs],
    }
    manifest_path = io_utils.write_json(out_dir / "manifest.json", manifest)
    logger.info("Wrote %d files to %s", len(outputs) + 1, out_dir)
    return manifest_path, outputs
