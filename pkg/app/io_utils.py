from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np

from app.billiard import BilliardOrbit
from app.models import ConvergenceReport
from app.rolling import Trajectory, energy
from app.skew import upper_entries, upper_entry_labels


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def trajectory_header(dim: int) -> List[str]:
    return (
        ["t"]
        + [f"x{i + 1}" for i in range(dim)]
        + [f"u{i + 1}" for i in range(dim)]
        + upper_entry_labels(dim)
        + ["energy", "region"]
    )


def write_trajectory_csv(path: Path, trajectory: Trajectory) -> Path:
    dim = trajectory.states[0].x.size

    def rows():
        for t, state, region in zip(trajectory.times, trajectory.states, trajectory.regions):
            yield (
                [fmt(t)]
                + [fmt(v) for v in state.x]
                + [fmt(v) for v in state.u]
                + [fmt(v) for v in upper_entries(state.spin)]
                + [fmt(energy(state)), region.value]
            )

    return _write_rows(path, trajectory_header(dim), rows())


def write_events_jsonl(path: Path, trajectory: Trajectory) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for event in trajectory.events:
            handle.write(json.dumps(event.to_record()) + "\n")
    return path


def write_orbit_csv(path: Path, orbit: BilliardOrbit) -> Path:
    k = orbit.initial.x.size
    header = (
        ["n"]
        + [f"x{i + 1}" for i in range(k)]
        + [f"u{i + 1}" for i in range(k)]
        + [f"W{i + 1}" for i in range(k - 1)]
        + ["chord_dist"]
    )
    rows = (
        [str(c.n)]
        + [fmt(v) for v in c.point]
        + [fmt(v) for v in c.u_out]
        + [fmt(v) for v in c.W_out()]
        + [fmt(c.chord_dist)]
        for c in orbit.collisions
    )
    return _write_rows(path, header, rows)


def write_convergence_csv(path: Path, report: ConvergenceReport) -> Path:
    def cell(value):
        return "" if value is None else fmt(value)

    rows = ([fmt(row.r), cell(row.error), cell(row.traversal_time), row.exit_side] for row in report.rows)
    return _write_rows(path, ["r", "error", "traversal_time", "exit_side"], rows)


def _wrap_breaks(block: np.ndarray, period: Optional[float]) -> np.ndarray:
    """Row indices that start a new line segment because the planar position wrapped."""
    if period is None or len(block) < 2:
        return np.zeros(0, dtype=int)
    jumps = np.max(np.abs(np.diff(block[:, :2], axis=0)), axis=1)
    return np.flatnonzero(jumps > 0.5 * period) + 1


def write_gnuplot_blocks(
    path: Path, blocks: Sequence[np.ndarray], comment: str = "", period: Optional[float] = None
) -> Path:
    """One whitespace-separated block per trajectory, blocks split by two blank lines.

    With a period (torus cells), a single blank line breaks the line wherever
    the first two coordinates jump by more than half a period.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        if comment:
            handle.write(f"# {comment}\n")
        for i, block in enumerate(blocks):
            if i:
                handle.write("\n\n")
            block = np.atleast_2d(block)
            breaks = set(_wrap_breaks(block, period).tolist())
            for j, row in enumerate(block):
                if j in breaks:
                    handle.write("\n")
                handle.write(" ".join(fmt(v) for v in row) + "\n")
    return path


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
