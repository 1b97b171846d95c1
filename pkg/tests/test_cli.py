import csv
import json

import jsonschema
import numpy as np
import pytest

import pwto.cli
from pwto.baselines import MANIFEST_SCHEMA
from pwto.cli import main
from pwto.dircol import Trajectory, save_trajectory
from pwto.scheduler import REPORT_SCHEMA, UnreachableError

SMALL = {"n_episode": 4, "k": 40, "nx": 60, "ny": 60, "n_nodes": 30, "d_h_thres": 3.0}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["genfield", "--m", "8", "--sigma", "0.004", "--seed", "2", "--out", str(d / "f.csv"),
                 "--nx", "60", "--ny", "60"]) == 0
    (d / "cfg.json").write_text(json.dumps(SMALL))
    return d


def plan(workdir, out, *extra):
    return main(["plan", "--field", str(workdir / "f.csv"), "--start", "0.15,0.2,0", "--goal", "0.85,0.75,0",
                 "--config", str(workdir / "cfg.json"), "--out-dir", str(out), *extra])


def test_genfield_is_deterministic(workdir, tmp_path):
    assert main(["genfield", "--m", "8", "--sigma", "0.004", "--seed", "2", "--out", str(tmp_path / "g.csv"),
                 "--nx", "60", "--ny", "60"]) == 0
    assert (tmp_path / "g.csv").read_bytes() == (workdir / "f.csv").read_bytes()


def test_genfield_sigma_range_and_svg(tmp_path):
    rc = main(["genfield", "--m", "3", "--sigma", "0.001,0.01", "--seed", "0", "--out", str(tmp_path / "g.csv"),
               "--nx", "20", "--ny", "20", "--svg", str(tmp_path / "g.svg")])
    assert rc == 0
    assert (tmp_path / "g.svg").read_text().lstrip().startswith("<svg")


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["genfield", "--m", "3", "--sigma", "0.01", "--seed", "0"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["plan", "--field", "x", "--start", "0.1,0.2", "--goal", "0.5,0.5,0", "--out-dir", str(tmp_path)])
    assert exc.value.code == 2


def test_bad_config_value_is_a_usage_error(workdir, tmp_path, capsys):
    assert plan(workdir, tmp_path, "--k", "0") == 2
    assert "error" in capsys.readouterr().err


def test_plan_writes_valid_report(workdir, tmp_path):
    assert plan(workdir, tmp_path / "a", "--svg") == 0
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    assert (tmp_path / "a" / "overlay.svg").exists()
    # the report is byte-identical on a second run
    assert plan(workdir, tmp_path / "b") == 0
    assert (tmp_path / "b" / "report.json").read_bytes() == (tmp_path / "a" / "report.json").read_bytes()


def test_plan_missing_field_file(workdir, tmp_path, capsys):
    rc = main(["plan", "--field", str(tmp_path / "nope.csv"), "--start", "0.1,0.1,0", "--goal", "0.8,0.8,0",
               "--out-dir", str(tmp_path)])
    assert rc == 3
    assert "error" in capsys.readouterr().err


def test_plan_malformed_config(workdir, tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    rc = main(["plan", "--field", str(workdir / "f.csv"), "--start", "0.1,0.1,0", "--goal", "0.8,0.8,0",
               "--config", str(tmp_path / "bad.json"), "--out-dir", str(tmp_path)])
    assert rc == 3


def test_plan_unreachable_exit_code(workdir, tmp_path, monkeypatch, capsys):
    # an obstacle-free lattice is strongly connected, so the search cannot fail on its own
    def unreachable(*args, **kwargs):
        raise UnreachableError("goal not reachable")

    monkeypatch.setattr(pwto.cli, "run_pwto", unreachable)
    assert plan(workdir, tmp_path) == 4
    assert "unreachable" in capsys.readouterr().err


def test_simulate(tmp_path):
    n, T = 41, 8.0
    t = np.linspace(0, T, n)
    X = np.column_stack([0.2 + 0.03 * t, np.full(n, 0.5), np.zeros(n), np.full(n, 0.03), np.zeros(n)])
    save_trajectory(Trajectory(X, np.zeros((n, 2)), T), tmp_path / "traj.csv")
    rc = main(["simulate", "--trajectory", str(tmp_path / "traj.csv"), "--gains", "5,100,10",
               "--out", str(tmp_path / "sim.csv")])
    assert rc == 0
    summary = json.loads((tmp_path / "sim.json").read_text())
    with (tmp_path / "sim.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert len(rows) - 1 == summary["steps"] == 81
    assert summary["final_position_error"] < 1e-9


def test_simulate_bad_trajectory(tmp_path):
    (tmp_path / "junk.csv").write_text("hello\n")
    assert main(["simulate", "--trajectory", str(tmp_path / "junk.csv"), "--out", str(tmp_path / "s.csv")]) == 3
    assert main(["simulate", "--trajectory", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "s.csv")]) == 3


def test_tiny_bench(workdir, tmp_path):
    rc = main(["bench", "--fields", str(workdir / "f.csv"), "--n-instances", "1", "--seed", "3",
               "--out", str(tmp_path), "--budget", "30", "--kinds", "line", "--config", str(workdir / "cfg.json")])
    assert rc == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    jsonschema.validate(manifest, MANIFEST_SCHEMA)
    assert set(manifest["instances"][0]["methods"]) == {"PWTO", "LINE"}
    assert (tmp_path / "cr_table.csv").read_text().startswith("field_id")
