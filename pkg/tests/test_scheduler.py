import json
import math

import jsonschema
import numpy as np
import pytest

from pwto.costfield import sample_field
from pwto.scheduler import (
    REPORT_SCHEMA,
    WORKERS_ENV,
    ReportEvent,
    RunConfig,
    RunReport,
    anytime_stream,
    plan_seeds,
    run_pwto,
)
from pwto.scheduler import _workers

START = np.array([0.15, 0.2, 0.0, 0.0, 0.0])
GOAL = np.array([0.85, 0.75, 0.0, 0.0, 0.0])


def small_config(**kw):
    base = dict(n_episode=6, k=40, nx=60, ny=60, n_nodes=30, d_h_thres=3.0)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def field():
    return sample_field(15, 0.002, 3)


@pytest.fixture(scope="module")
def report(field):
    return run_pwto(field, START, GOAL, small_config())


def test_several_seeds_are_optimized(report):
    assert len(report.seeds) > 1
    assert len(report.iterations) == len(report.seeds)


def test_reported_costs_strictly_decrease(report):
    assert report.has_solution
    js = [e.J for e in report.events]
    assert all(b < a for a, b in zip(js, js[1:]))
    assert report.c_min == js[-1] == min(report.costs.values())


def test_iteration_budget_respected(report):
    cfg = small_config()
    for pid, n in report.iterations.items():
        assert n <= cfg.n_episode * cfg.k
    assert sum(report.iterations.values()) <= cfg.n_episode * cfg.k * len(report.seeds)


def test_round_robin_fairness(report):
    """Every process gets exactly k iterations per episode until it stops."""
    k = small_config().k
    for pid, n in report.iterations.items():
        status = report.status[pid]
        if status == "running":
            assert n == report.episodes_run * k
        elif status == "converged":
            e = report.converged_episode[pid]
            assert (e - 1) * k < n <= e * k


def test_events_only_at_improvements(report):
    for e in report.events:
        assert report.status[e.process] == "converged"
        assert report.costs[e.process] == e.J
    # every converged process that was not reported was no better than the best so far
    reported = {e.process for e in report.events}
    for pid, j in report.costs.items():
        if pid not in reported:
            earlier = [e.J for e in report.events if e.episode <= report.converged_episode[pid]]
            assert earlier and j >= min(earlier)


def test_repeated_runs_are_identical(field, report):
    again = run_pwto(field, START, GOAL, small_config())
    assert json.dumps(again.to_dict()) == json.dumps(report.to_dict())


def test_report_matches_schema(report, tmp_path):
    path = report.write(tmp_path)
    data = json.loads(path.read_text())
    jsonschema.validate(data, REPORT_SCHEMA)
    assert len(data["events"]) == len(report.events)


def test_start_equals_goal_rejected(field):
    with pytest.raises(ValueError):
        run_pwto(field, START, START, small_config())
    # distinct poses that snap to the same vertex
    cfg = small_config()
    lat = cfg.lattice_for(field)
    centre = np.array([*lat.pose(lat.snap(START[:3])), 0.0, 0.0])
    with pytest.raises(ValueError):
        plan_seeds(field, centre, centre + [1e-3, -1e-3, 0.1, 0, 0], cfg, lattice=lat)


# -- anytime stream ---------------------------------------------------------------


def test_anytime_ratios():
    rep = RunReport(events=[ReportEvent(1, 0, 10.0, 0.1, 100), ReportEvent(2, 3, 8.0, 0.2, 200),
                            ReportEvent(4, 1, 7.0, 0.4, 400)])
    pts = anytime_stream(rep)
    assert [p.episode for p in pts] == [1, 2, 4]
    assert [p.ratio_to_best for p in pts] == pytest.approx([10 / 7, 8 / 7, 1.0])


def test_empty_stream():
    assert anytime_stream(RunReport()) == []
    assert not RunReport().has_solution


def test_anytime_stream_of_real_run(report):
    pts = anytime_stream(report)
    assert pts[-1].ratio_to_best == 1.0
    assert all(p.ratio_to_best >= 1.0 for p in pts)
    assert all(math.isfinite(p.time) for p in pts)


# -- config ------------------------------------------------------------------------


def test_config_round_trip():
    cfg = small_config(workers=3, max_processes=4)
    back = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back.to_dict() == cfg.to_dict()


def test_config_rejects_unknown_keys_and_bad_values():
    with pytest.raises(ValueError):
        RunConfig.from_dict({"n_episodes": 3})
    with pytest.raises(ValueError):
        RunConfig(k=0)
    with pytest.raises(ValueError):
        RunConfig(d_h_thres=0.0)


def test_worker_count_precedence(monkeypatch):
    cfg = RunConfig(workers=2)
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert _workers(cfg) == 2
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert _workers(cfg) == 3
    assert _workers(cfg, 1) == 1
