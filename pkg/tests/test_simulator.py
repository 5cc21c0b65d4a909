from __future__ import annotations

import json
import math
import random

import pytest

from fovopt.errors import DomainError, InputError
from fovopt.io import read_events_csv, read_trace_csv, write_events_csv, write_report, write_trace_csv
from fovopt.optimizer import optimize_fully_discrete, solve
from fovopt.rate import SegmentConfig, bundled_profiles, get_profile
from fovopt.simulator import BandwidthTrace, FovEvent, simulate

BALBOA = get_profile("Balboa")


def test_constant_trace_single_event_defers_to_optimizer():
    trace = BandwidthTrace.constant(12.0, 10.0)
    rep = simulate(trace, [FovEvent(3.0, (BALBOA.r_fov,))], BALBOA, "model-fully-discrete", 5.0)
    assert len(rep.events) == 1
    assert rep.events[0].result == optimize_fully_discrete(BALBOA, SegmentConfig(12.0, 5.0))
    assert rep.events[0].bandwidth == 12.0


def test_zero_events():
    rep = simulate(BandwidthTrace.constant(5.0), [], BALBOA, "heuristic", 5.0)
    s = rep.summary()
    assert rep.events == [] and rep.rows == []
    assert s["n_events"] == 0 and s["n_infeasible"] == 0
    assert s["mean_q_norm"] is None


def test_two_level_trace_heuristic():
    trace = BandwidthTrace((0.0, 10.0, 20.0), (2.0, 8.0, 8.0))
    events = [FovEvent(5.0, (0.3, 0.2)), FovEvent(15.0, (0.3, 0.2))]
    rep = simulate(trace, events, BALBOA, "heuristic", 5.0)
    assert [e.bandwidth for e in rep.events] == [2.0, 8.0]
    assert [e.result.s_hat_opt for e in rep.events] == [0.25, 1.0]
    assert all(e.r_fov == 0.5 for e in rep.events)


def test_left_step_lookup():
    trace = BandwidthTrace((0.0, 1.0, 2.0), (3.0, 5.0, 7.0))
    assert [trace.at(t) for t in (0.0, 0.999, 1.0, 1.5, 2.0)] == [3.0, 3.0, 5.0, 5.0, 7.0]
    with pytest.raises(DomainError):
        trace.at(2.5)


def test_event_outside_span_is_listed():
    trace = BandwidthTrace.constant(10.0, 4.0)
    events = [FovEvent(1.0, (1.0,)), FovEvent(7.5, (1.0,)), FovEvent(9.0, (1.0,))]
    with pytest.raises(DomainError, match=r"t=7\.5, t=9"):
        simulate(trace, events, BALBOA, "heuristic", 5.0)


@pytest.mark.parametrize("times, bws", [((0.0, 0.0), (1.0, 1.0)), ((0.0, 1.0), (1.0, 0.0)),
                                        ((), ()), ((0.0,), (1.0, 2.0))])
def test_trace_validation(times, bws):
    with pytest.raises(DomainError):
        BandwidthTrace(times, bws)


@pytest.mark.parametrize("t, rates", [(-1.0, (1.0,)), (0.0, (-0.5,)), (math.nan, (1.0,))])
def test_event_validation(t, rates):
    with pytest.raises(DomainError):
        FovEvent(t, rates)


def test_infeasible_events_are_flagged_not_dropped():
    trace = BandwidthTrace((0.0, 5.0, 10.0), (1.0, 20.0, 20.0))
    events = [FovEvent(1.0, (BALBOA.r_fov,)), FovEvent(6.0, (BALBOA.r_fov,))]
    rep = simulate(trace, events, BALBOA, "model-fully-discrete", 5.0)
    assert [e.result.feasible for e in rep.events] == [False, True]
    s = rep.summary()
    assert s["n_infeasible"] == 1
    assert s["mean_q_norm"] == rep.events[1].result.q_norm


def test_mean_is_exact_arithmetic_mean():
    rng = random.Random(4)
    times = tuple(float(i) for i in range(11))
    trace = BandwidthTrace(times, tuple(rng.uniform(6.0, 40.0) for _ in times))
    events = [FovEvent(rng.uniform(0, 10), (rng.uniform(0.5, 3.0),)) for _ in range(30)]
    rep = simulate(trace, events, BALBOA, "model-discrete-s", 2.0)
    q = [e.result.q_norm for e in rep.events]
    assert rep.summary()["mean_q_norm"] == math.fsum(q) / len(q)
    assert rep.summary()["min_q_norm"] == min(q)


def test_rate_constraint_on_every_row():
    rng = random.Random(8)
    for p in bundled_profiles():
        trace = BandwidthTrace((0.0, 5.0, 10.0), tuple(rng.uniform(1.0, 60.0) for _ in range(3)))
        events = [FovEvent(rng.uniform(0, 10), (rng.uniform(0, 8),)) for _ in range(5)]
        for e in simulate(trace, events, p, "model-fully-discrete", 5.0).events:
            assert not e.result.feasible or e.result.total_rate <= e.bandwidth + 1e-9


def test_simulation_is_deterministic():
    trace = BandwidthTrace((0.0, 3.0), (9.0, 15.0))
    events = [FovEvent(1.0, (2.0, 1.0)), FovEvent(3.0, (4.0,))]
    a = simulate(trace, events, BALBOA, "model-continuous", 5.0)
    b = simulate(trace, events, BALBOA, "model-continuous", 5.0)
    assert a.events == b.events


def test_policy_options_are_forwarded():
    trace = BandwidthTrace.constant(15.0, 2.0)
    rep = simulate(trace, [FovEvent(1.0, (5.0,))], BALBOA, "model-fully-discrete", 5.0,
                   s_levels=(0.25,))
    assert rep.events[0].result == solve("model-fully-discrete", BALBOA.with_fov(5.0),
                                         SegmentConfig(15.0, 5.0), s_levels=(0.25,))


# ---------------------------------------------------------------------------
# file formats


def test_trace_and_events_roundtrip(tmp_path):
    trace = BandwidthTrace((0.0, 1.5, 4.0), (3.25, 10.0, 7.1))
    events = [FovEvent(0.5, (1.0, 0.25)), FovEvent(2.0, (), dt=0.3), FovEvent(3.0, (2.5,))]
    write_trace_csv(trace, tmp_path / "t.csv")
    write_events_csv(events, tmp_path / "e.csv")
    assert read_trace_csv(tmp_path / "t.csv") == trace
    assert read_events_csv(tmp_path / "e.csv") == events


def test_trace_csv_error_line(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("time,bandwidth\n0,5\n# gap\n1,abc\n")
    with pytest.raises(InputError) as exc:
        read_trace_csv(path)
    assert (exc.value.path, exc.value.line) == (str(path), 4)
    path.write_text("time,bandwidth\n0,5\n0,6\n")
    with pytest.raises(InputError) as exc:
        read_trace_csv(path)
    assert exc.value.line == 3


def test_events_csv_error_line(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("time,tile_rates\n1,0.5;0.5\n2,0.5;-1\n")
    with pytest.raises(InputError) as exc:
        read_events_csv(path)
    assert exc.value.line == 3


def test_report_files(tmp_path):
    trace = BandwidthTrace((0.0, 10.0), (2.0, 8.0))
    rep = simulate(trace, [FovEvent(5.0, (0.5,)), FovEvent(10.0, (0.5,))], BALBOA, "heuristic", 5.0)
    write_report(rep, tmp_path / "r.csv", tmp_path / "r.json")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].startswith("# fovopt ") and "config_sha256=" in lines[0]
    assert lines[2] == "time,B,r_fov,qp,q,s_hat,tau,q_norm,feasible"
    assert len(lines) == 5
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["n_events"] == 2 and len(doc["config_sha256"]) == 64
