"""Tests for output files, scenario dispatch and the command line entry point."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

import main as cli
from app import io_utils
from app.geometry import RegionKind
from app.models import ConvergenceReport, ConvergenceRow, PlateSpec, ScenarioConfig
from app.rolling import RollingState, SeamEvent, Trajectory
from app.scenarios import ScenarioError, load_config, run, sample_experiments


DISC = {"family": "Disc", "R": 1.0}
HALF_PLANE = {"family": "HalfPlane"}
ORBIT_START = {"x": [0.2, -0.3], "u": [math.cos(math.pi / 6), math.sin(math.pi / 6)], "spin": [[0.0, 0.4], [-0.4, 0.0]]}
CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _lines(path):
    return path.read_bytes().decode("utf-8").split("\r\n")


# ---------------------------------------------------------------------------
# Output formats
# ---------------------------------------------------------------------------


class TestIoUtils:
    def test_full_precision(self):
        assert io_utils.fmt(0.1) == "0.10000000000000001"
        assert io_utils.fmt(1.0) == "1"

    def test_trajectory_csv(self, tmp_path):
        state = RollingState(np.array([0.0, 0.0, 0.1]), np.array([1.0, 0.0, 0.0]), np.zeros((3, 3)))
        traj = Trajectory(times=[0.0, 0.5], states=[state, state], regions=[RegionKind.FLAT_SHEET_PLUS] * 2)
        path = io_utils.write_trajectory_csv(tmp_path / "t.csv", traj)
        lines = _lines(path)
        assert lines[0] == "t,x1,x2,x3,u1,u2,u3,S12,S13,S23,energy,region"
        assert lines[2] == "0.5,0,0,0.10000000000000001,1,0,0,0,0,0,0.5,FlatSheetPlus"
        assert lines[-1] == ""
        assert b"\n" not in path.read_bytes().replace(b"\r\n", b"")

    def test_events_jsonl(self, tmp_path):
        event = SeamEvent(0.25, RegionKind.FLAT_SHEET_PLUS, RegionKind.EDGE_TUBE, np.array([1.0, 0.0, 0.1]))
        traj = Trajectory(events=[event, event])
        path = io_utils.write_events_jsonl(tmp_path / "e.jsonl", traj)
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert records == [{"t": 0.25, "from": "FlatSheetPlus", "to": "EdgeTube"}] * 2

    def test_convergence_csv_blank_cells(self, tmp_path):
        report = ConvergenceReport(
            eta=0.3,
            plate=PlateSpec(**DISC),
            rows=[
                ConvergenceRow(r=0.1, error=1e-3, traversal_time=0.25, exit_side="opposite"),
                ConvergenceRow(r=0.01, non_exit=True),
            ],
        )
        lines = _lines(io_utils.write_convergence_csv(tmp_path / "c.csv", report))
        assert lines[0] == "r,error,traversal_time,exit_side"
        assert lines[1] == "0.10000000000000001,0.001,0.25,opposite"
        assert lines[2] == "0.01,,,none"

    def test_gnuplot_blocks(self, tmp_path):
        blocks = [np.array([[1.0, 2.0]]), np.array([[3.0, 4.0], [5.0, 6.0]])]
        path = io_utils.write_gnuplot_blocks(tmp_path / "b.dat", blocks, comment="two blocks")
        assert path.read_text() == "# two blocks\n1 2\n\n\n3 4\n5 6\n"

    def test_gnuplot_breaks_lines_at_wraps(self, tmp_path):
        block = np.array([[0.75, 0.5], [0.875, 0.5], [0.125, 0.5], [0.25, 0.5]])
        path = io_utils.write_gnuplot_blocks(tmp_path / "w.dat", [block], period=1.0)
        assert path.read_text() == "0.75 0.5\n0.875 0.5\n\n0.125 0.5\n0.25 0.5\n"

    def test_json_sorted(self, tmp_path):
        path = io_utils.write_json(tmp_path / "a" / "p.json", {"b": 1, "a": [0.5]})
        assert path.read_text().startswith('{\n  "a"')


# ---------------------------------------------------------------------------
# Config loading and sampling
# ---------------------------------------------------------------------------


class TestConfig:
    def test_load_from_manifest(self, tmp_path):
        config = {"scenario": "BilliardOrbit", "plate": DISC, "eta": 0.3}
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"config": config, "version": "v0"}))
        assert load_config(path).eta == 0.3

    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_configs_validate(self, path):
        assert load_config(path).output == path.stem

    def test_sample_experiments(self):
        config = ScenarioConfig(scenario="EdgeConvergence", plate=DISC, eta=0.3, n_samples=3)
        experiments = sample_experiments(config, 0.3, np.random.default_rng(1))
        assert len(experiments) == 3
        for exp in experiments:
            assert -1.0 <= exp.u_perp <= -0.3
            assert np.hypot(np.linalg.norm(exp.u_bar), exp.u_perp) == pytest.approx(1.0)
            assert np.linalg.norm(exp.point) == pytest.approx(1.0)
            assert len(exp.radii) == 5

    def test_experiment_from_initial(self):
        config = ScenarioConfig(
            scenario="EdgeConvergence", plate=DISC, eta=0.3, initial={"x": [1.0, 0.0], "u": [0.8, 0.6]}
        )
        (experiment,) = sample_experiments(config, 0.3, np.random.default_rng(0))
        assert experiment.u_perp == pytest.approx(-0.8)
        np.testing.assert_allclose(experiment.u_bar, [0.0, 0.6])
        np.testing.assert_allclose(experiment.W, [0.0, 0.0])

    def test_needs_planar_plate(self):
        config = ScenarioConfig(
            scenario="EdgeConvergence", plate={"family": "SphereFactor", "ambient_dim": 3}, eta=0.3
        )
        with pytest.raises(ValueError, match="planar"):
            sample_experiments(config, 0.3, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


class TestScenarios:
    @pytest.fixture(autouse=True)
    def out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("APP_VERSION", "v9.9.9-test")
        self.out = tmp_path

    def test_billiard_orbit(self):
        config = ScenarioConfig(scenario="BilliardOrbit", plate=DISC, eta=0.4, initial=ORBIT_START, n_collisions=20)
        manifest_path, outputs = run(config, self.out)
        manifest = json.loads(manifest_path.read_text())
        assert manifest["version"] == "v9.9.9-test"
        assert manifest["outputs"] == ["orbit.csv", "orbit.dat"]
        assert manifest["config"]["eta"] == 0.4
        lines = _lines(outputs[0])
        assert lines[0] == "n,x1,x2,u1,u2,W1,chord_dist"
        assert len([line for line in lines if line]) == 21

    def test_rerun_is_byte_identical(self):
        config = ScenarioConfig(scenario="BilliardOrbit", plate=DISC, gamma_b=0.5, n_collisions=50, seed=7)
        first = run(config.model_copy(update={"output": "a"}), self.out)[1][0]
        second = run(config.model_copy(update={"output": "b"}), self.out)[1][0]
        assert first.read_bytes() == second.read_bytes()

    def test_disc_caustics(self):
        config = ScenarioConfig(
            scenario="FigureDiscCaustics", plate=DISC, gamma_b=math.sqrt(0.4), initial=ORBIT_START, n_collisions=500
        )
        run(config, self.out)
        caustics = json.loads((self.out / "run" / "caustics.json").read_text())
        assert len(caustics["clusters"]) == 2
        assert sum(c["count"] for c in caustics["clusters"]) == 500

    def test_disc_caustics_needs_disc(self):
        config = ScenarioConfig(scenario="FigureDiscCaustics", plate=HALF_PLANE, eta=0.3)
        with pytest.raises(ScenarioError, match="FigureDiscCaustics"):
            run(config, self.out)

    def test_roll_trajectory(self):
        config = ScenarioConfig(
            scenario="RollTrajectory",
            plate=DISC,
            r=0.1,
            eta=0.3,
            T=1.0,
            initial={"x": [0.0, 0.0, 0.1], "u": [1.0, 0.3, 0.0]},
        )
        _, outputs = run(config, self.out)
        assert [p.name for p in outputs] == [
            "trajectory.csv",
            "trajectory_events.jsonl",
            "trajectory.dat",
            "trajectory_summary.json",
        ]
        (summary,) = json.loads(outputs[-1].read_text()).values()
        assert summary["events"] >= 1
        assert summary["energy_drift"] < 1e-10
        assert summary["max_u_dot_nu"] < 1e-9

    def test_roll_trajectory_eta_sweep(self):
        config = ScenarioConfig(
            scenario="RollTrajectory",
            plate=HALF_PLANE,
            r=0.1,
            eta=0.3,
            etas=[0.0, 0.5],
            T=0.5,
            initial={"x": [-1.0, 0.0, 0.1], "u": [1.0, 0.0, 0.0]},
        )
        _, outputs = run(config, self.out)
        names = {p.name for p in outputs}
        assert {"trajectory_eta0.csv", "trajectory_eta0p5.csv"} <= names
        blocks = (self.out / "run" / "trajectory.dat").read_text().split("\n\n\n")
        assert len(blocks) == 2

    def test_sphere_oracle(self):
        config = ScenarioConfig(
            scenario="OracleCheck",
            plate={"family": "SphereFactor", "ambient_dim": 3},
            r=0.5,
            eta=0.3,
            T=2.0,
            initial={"x": [0.5, 0.0, 0.0], "u": [0.0, 0.6, 0.8]},
        )
        run(config, self.out)
        oracle = json.loads((self.out / "run" / "oracle.json").read_text())
        assert oracle["family"] == "SphereFactor"
        assert oracle["checks"]["position_error"] < 1e-8
        assert oracle["checks"]["invariant_drift"] < 1e-8

    def test_straight_edge_oracle(self):
        config = ScenarioConfig(scenario="OracleCheck", plate=HALF_PLANE, r=0.1, eta=0.4)
        run(config, self.out)
        checks = json.loads((self.out / "run" / "oracle.json").read_text())["checks"]
        assert checks["map_error"] < 1e-8
        assert checks["traversal_time"] == pytest.approx(checks["expected_traversal_time"], rel=1e-6)
        assert checks["exit_side"] == "opposite"

    def test_edge_convergence(self):
        config = ScenarioConfig(scenario="EdgeConvergence", plate=HALF_PLANE, eta=0.4, n_samples=1)
        _, outputs = run(config, self.out)
        assert [p.name for p in outputs] == ["convergence_00.csv", "convergence.json"]
        assert len([line for line in _lines(outputs[0]) if line]) == 6
        (report,) = json.loads(outputs[1].read_text())
        assert report["fitted_rate"] is None

    def test_figure_sinai(self):
        config = ScenarioConfig(
            scenario="FigureSinai",
            plate={"family": "SinaiTorus", "L": 1.0, "rho": 0.25},
            r=0.1,
            eta=0.05,
            etas=[0.05, 0.62],
            T=2.0,
            h=1e-3,
            h_flat=0.01,
            initial={"x": [0.1, 0.5, 0.1], "u": [1.0, 0.1, 0.0]},
        )
        _, outputs = run(config, self.out)
        names = [p.name for p in outputs]
        assert {"sinai_eta0p05.csv", "sinai_eta0p62.csv", "sinai.dat", "sinai_summary.json"} <= set(names)
        for name in ("sinai_eta0p05.csv", "sinai_eta0p62.csv"):
            lines = [line for line in _lines(self.out / "run" / name) if line]
            assert lines[0] == "t,x1,x2,x3,u1,u2,u3,S12,S13,S23,energy,region"
            assert len(lines) > 100

        summaries = json.loads((self.out / "run" / "sinai_summary.json").read_text())
        assert len(summaries) == 2
        for summary in summaries.values():
            assert summary["events"] >= 2
            assert summary["max_u_dot_nu"] < 1e-9
            assert summary["max_spin_residual"] < 1e-9
            assert summary["energy_drift"] < 1e-10
            assert summary["raw_drift"] < 1e-6

        # wrapped positions never draw a line across the cell
        for segment in (self.out / "run" / "sinai.dat").read_text().split("\n\n"):
            rows = [[float(v) for v in line.split()] for line in segment.splitlines() if line and not line.startswith("#")]
            if len(rows) > 1:
                jumps = np.abs(np.diff(np.array(rows)[:, :2], axis=0))
                assert float(np.max(jumps)) < 0.5

    def test_missing_radius(self):
        config = ScenarioConfig(scenario="OracleCheck", plate=DISC, eta=0.3)
        with pytest.raises(ScenarioError, match="ball radius"):
            run(config, self.out)


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


class TestMain:
    @pytest.fixture(autouse=True)
    def paths(self, tmp_path):
        self.tmp = tmp_path
        self.config = tmp_path / "config.json"

    def _write(self, payload):
        self.config.write_text(json.dumps(payload) if not isinstance(payload, str) else payload)

    def _main(self):
        return cli.main(["--config", str(self.config), "--out-dir", str(self.tmp / "out"), "--quiet"])

    def test_success(self):
        self._write({"scenario": "BilliardOrbit", "plate": DISC, "eta": 0.3, "n_collisions": 5, "output": "orbit"})
        assert self._main() == 0
        assert (self.tmp / "out" / "orbit" / "manifest.json").exists()

    def test_missing_config(self):
        with pytest.raises(SystemExit, match="Config not found"):
            self._main()

    def test_invalid_config(self):
        self._write({"scenario": "BilliardOrbit", "plate": DISC, "eta": 1.5})
        with pytest.raises(SystemExit) as exc:
            self._main()
        assert exc.value.code == 2

    def test_malformed_json(self):
        self._write("{not json")
        with pytest.raises(SystemExit) as exc:
            self._main()
        assert exc.value.code == 2

    def test_scenario_failure(self):
        self._write({"scenario": "FigureSinai", "plate": DISC, "eta": 0.3, "r": 0.1})
        with pytest.raises(SystemExit) as exc:
            self._main()
        assert exc.value.code == 1
