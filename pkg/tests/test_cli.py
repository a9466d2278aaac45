import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sketchsolve.cli import main
from sketchsolve.config import ConfigError, build_distribution, build_problem, load_config

SRC = str(Path(__file__).resolve().parent.parent / "src")


def write_config(tmp_path, name="config.json", **overrides):
    cfg = {
        "seed": 20240801,
        "problem": {"kind": "diagonal", "diagonal": [1.0, 2.0], "planted": [1.0, 1.0]},
        "distribution": {"kind": "kaczmarz"},
        "solvers": [{"method": "basic", "omega": 1.0, "label": "basic-unit"}],
        "replications": 60,
        "iterations": 15,
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.seed == 20240801
        problem, planted = build_problem(cfg)
        assert np.allclose(problem.A, np.diag([1.0, 2.0]))
        assert np.allclose(planted, [1.0, 1.0])
        dist = build_distribution(cfg, problem)
        assert np.allclose(dist.probabilities, [0.2, 0.8])

    def test_missing_seed(self, tmp_path):
        path = tmp_path / "noseed.json"
        path.write_text(json.dumps({"problem": {"kind": "diagonal"}, "distribution": {"kind": "kaczmarz"}}))
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert "seed" in str(err.value)

    def test_unknown_problem_kind_names_path(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            json.dumps({"seed": 1, "problem": {"kind": "warp"}, "distribution": {"kind": "kaczmarz"}})
        )
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert str(err.value).startswith("problem.kind")

    def test_distribution_kinds(self, tmp_path):
        for dist_cfg, cls_name in [
            ({"kind": "fixed-identity"}, "FixedIdentity"),
            ({"kind": "coordinate", "probabilities": [0.5, 0.5]}, "Coordinate"),
            ({"kind": "block", "block_size": 2}, "Block"),
            ({"kind": "gaussian", "columns": 1}, "Gaussian"),
            ({"kind": "count-sketch", "columns": 2}, "CountSketch"),
            ({"kind": "count-min", "columns": 2}, "CountMin"),
        ]:
            cfg = load_config(write_config(tmp_path, distribution=dist_cfg))
            problem, _ = build_problem(cfg)
            assert type(build_distribution(cfg, problem)).__name__ == cls_name

    def test_metric_from_file(self, tmp_path):
        mtx = tmp_path / "metric.mtx"
        mtx.write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 4.0\n2 2 1.0\n"
        )
        cfg = load_config(write_config(tmp_path, metric={"kind": "file", "path": str(mtx)}))
        problem, _ = build_problem(cfg)
        assert np.allclose(problem.metric.mat, np.diag([4.0, 1.0]))

    def test_problem_from_files(self, tmp_path):
        mtx = tmp_path / "a.mtx"
        mtx.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 2.0\n")
        rhs = tmp_path / "b.txt"
        rhs.write_text("1.0\n2.0\n")
        cfg = load_config(
            write_config(tmp_path, problem={"kind": "files", "matrix": str(mtx), "rhs": str(rhs)})
        )
        problem, planted = build_problem(cfg)
        assert planted is None
        assert np.allclose(problem.A, np.diag([1.0, 2.0]))


class TestCliCommands:
    def test_diagnose_reports_reference_spectrum(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["diagnose", str(cfg), "--output-dir", str(out)]) == 0
        payload = json.loads((out / "diagnostics.json").read_text())
        assert payload["lambdas"] == [0.8, 0.2]
        assert payload["zeta"] == 4.0
        assert payload["exactness"] == "exact"
        assert payload["omega_star"] == pytest.approx(2.0, abs=1e-12)
        assert payload["rho_unit"] == pytest.approx(0.64, abs=1e-12)
        assert payload["rho_omega_star"] == pytest.approx(0.36, abs=1e-12)

    def test_run_writes_traces_and_summary(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--output-dir", str(out)]) == 0
        trace = (out / "trace_basic-unit.csv").read_text().splitlines()
        assert trace[0] == "iter,metric,value,replication"
        assert len(trace) > 60 * 15
        summary = json.loads((out / "summary.json").read_text())
        assert summary["failed_checks"] == []
        assert {c["anchor"] for c in summary["checks"]} == {
            "lemma:pathwise-step-identities",
            "lemma:spectrum-in-unit-interval",
        }

    def test_fixed_identity_converges_in_one_step(self, tmp_path):
        cfg = write_config(
            tmp_path,
            distribution={"kind": "fixed-identity"},
            replications=3,
            iterations=4,
        )
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--output-dir", str(out)]) == 0
        payload = json.loads((out / "diagnostics.json").read_text())
        assert payload["zeta"] == pytest.approx(1.0, abs=1e-9)
        rows = (out / "trace_basic-unit.csv").read_text().splitlines()[1:]
        final = [r for r in rows if r.startswith("4,error_sq")]
        assert all(float(r.split(",")[2]) <= 1e-20 for r in final)

    def test_validate_exit_zero_and_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, replications=200)
        out = tmp_path / "out"
        assert main(["validate", str(cfg), "--output-dir", str(out)]) == 0
        checks = (out / "checks.csv").read_text().splitlines()
        assert checks[0] == "anchor,passed,margin"
        assert all(line.split(",")[1] == "1" for line in checks[1:])
        summary = json.loads((out / "summary.json").read_text())
        assert summary["failed_checks"] == []

    def test_seed_override_changes_artifacts(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["run", str(cfg), "--output-dir", str(out1)])
        main(["run", str(cfg), "--output-dir", str(out2), "--seed", "7"])
        t1 = (out1 / "trace_basic-unit.csv").read_text()
        t2 = (out2 / "trace_basic-unit.csv").read_text()
        assert t1 != t2

    def test_missing_config_exits_two(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.json")]) == 2
        assert "nope.json" in capsys.readouterr().err

    def test_bad_field_exits_two(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"seed": 1, "problem": {"kind": "nope"}, "distribution": {"kind": "kaczmarz"}}))
        assert main(["run", str(path)]) == 2
        assert "problem.kind" in capsys.readouterr().err

    def test_missing_matrix_file_names_path(self, tmp_path, capsys):
        path = write_config(
            tmp_path,
            problem={"kind": "files", "matrix": str(tmp_path / "ghost.mtx"), "rhs": str(tmp_path / "b.txt")},
        )
        assert main(["run", str(path)]) == 2
        assert "ghost.mtx" in capsys.readouterr().err

    def test_inconsistent_system_exits_two(self, tmp_path, capsys):
        mtx = tmp_path / "a.mtx"
        mtx.write_text(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 1 1.0\n"
        )
        rhs = tmp_path / "b.txt"
        rhs.write_text("1.0\n2.0\n")
        path = write_config(
            tmp_path, problem={"kind": "files", "matrix": str(mtx), "rhs": str(rhs)}
        )
        assert main(["run", str(path)]) == 2
        assert "inconsistent" in capsys.readouterr().err

    def test_entry_point_runs_as_module(self, tmp_path):
        cfg = write_config(tmp_path, replications=5, iterations=5)
        env = dict(os.environ, PYTHONPATH=SRC)
        proc = subprocess.run(
            [sys.executable, "-m", "sketchsolve.cli", "diagnose", str(cfg), "--output-dir", str(tmp_path / "o")],
            capture_output=True,
            env=env,
        )
        assert proc.returncode == 0
