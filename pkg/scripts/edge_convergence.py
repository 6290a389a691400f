#!/usr/bin/env python3
from __future__ import annotations

import argparse
import json
import logging
import math
import os
from typing import Any, Dict, List

import numpy as np

from app.limit_lab import convergence_study
from app.models import ConvergenceReport, PlateSpec, ScenarioConfig
from app.oracles import gamma_correspondence
from app.scenarios import CONVERGENCE_RADII, sample_experiments


# uniform solid ball
UNIFORM_BALL_GAMMA = math.sqrt(0.4)
MAX_RELATIVE_ERROR = 1e-2


def _env(name: str) -> str | None:
    value = os.getenv(name)
    return value.strip() if value else None


def _summarize(report: ConvergenceReport) -> Dict[str, Any]:
    errors = [row.error for row in report.rows if row.error is not None]
    monotone = len(errors) == len(report.rows) and all(a > b for a, b in zip(errors, errors[1:]))
    smallest = report.rows[-1]
    relative = None if smallest.error is None else smallest.error / report.incoming_speed
    return {
        "fitted_rate": report.fitted_rate,
        "monotone": monotone,
        "relative_error_at_smallest_r": relative,
        "warnings": report.warnings,
    }


def main() -> None:
    default_eta = gamma_correspondence(UNIFORM_BALL_GAMMA)[0]
    parser = argparse.ArgumentParser(description="Run the r -> 0 edge-crossing sweep on the unit disc.")
    parser.add_argument("--eta", type=float, default=default_eta, help=f"Inertia parameter, default {default_eta:.6f}")
    parser.add_argument("--samples", type=int, default=10, help="Random incoming states, default 10")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--radii", type=float, nargs="+", default=list(CONVERGENCE_RADII))
    parser.add_argument("--steps-per-turn", type=int, default=1000)
    parser.add_argument("--workers", type=int, default=int(_env("ROLL_WORKERS") or 1))
    parser.add_argument("--check", action="store_true", help="Exit non-zero unless every sample converges")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO)
    config = ScenarioConfig(
        scenario="EdgeConvergence",
        plate=PlateSpec(family="Disc", R=1.0),
        eta=args.eta,
        radii=args.radii,
        n_samples=args.samples,
        steps_per_turn=args.steps_per_turn,
        seed=args.seed,
    )
    experiments = sample_experiments(config, args.eta, np.random.default_rng(args.seed))

    samples: List[Dict[str, Any]] = []
    for experiment in experiments:
        samples.append(_summarize(convergence_study(experiment, workers=args.workers)))

    failed = [
        i
        for i, sample in enumerate(samples)
        if not sample["monotone"]
        or sample["relative_error_at_smallest_r"] is None
        or sample["relative_error_at_smallest_r"] >= MAX_RELATIVE_ERROR
    ]
    print(json.dumps({"eta": args.eta, "radii": sorted(args.radii, reverse=True), "samples": samples}, indent=2))

    if args.check and failed:
        raise SystemExit(f"Samples failed the convergence check: {', '.join(str(i) for i in failed)}")


if __name__ == "__main__":
    main()
