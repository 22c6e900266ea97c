import dataclasses
import math

from hypothesis import given, settings, strategies as st

from conftest import sc_task, single_core
from ipf.cpa import (UNBOUNDED, AnalysisTask, Migration, analyze_or, analyze_transition,
                     busy_window, response_times)
from ipf.model import SlotTable


def fixture_tasks():
    return [AnalysisTask("a", 1, 4, 4, priority=0), AnalysisTask("b", 2, 6, 6, priority=1),
            AnalysisTask("c", 3, 12, 12, priority=2)]


def test_classic_fixture():
    assert response_times(fixture_tasks()) == {"a": 1, "b": 3, "c": 10}


def test_full_utilization_is_unbounded():
    hp = [AnalysisTask("a", 2, 4, 4)]
    assert busy_window(AnalysisTask("b", 2, 4, 4, priority=1), hp) == UNBOUNDED
    assert UNBOUNDED == math.inf


def test_response_beyond_period_uses_later_activations():
    # lower task has several jobs in its level-i busy period (Lehoczky's example)
    hp = [AnalysisTask("a", 26, 70, 70)]
    low = AnalysisTask("b", 62, 100, 200, priority=1)
    assert busy_window(low, hp) == 118


def test_blocking_adds_once():
    a, b = fixture_tasks()[:2]
    assert busy_window(b, [a], blocking=1) == 4


def test_jitter_shifts_interference():
    hp = [AnalysisTask("a", 1, 4, 4, jitter=3)]
    # a's second job may arrive at 1, pushing b out one unit further
    assert busy_window(AnalysisTask("b", 2, 6, 6, priority=1), hp) == 4


@settings(max_examples=80, deadline=None)
@given(c=st.lists(st.integers(1, 20), min_size=2, max_size=4),
       t=st.lists(st.integers(20, 120), min_size=4, max_size=4),
       bump=st.integers(0, 3), which=st.integers(0, 3))
def test_response_is_monotone_in_wcet(c, t, bump, which):
    tasks = [AnalysisTask(f"t{i}", ci, t[i], t[i], priority=i) for i, ci in enumerate(c)]
    which %= len(tasks)
    heavier = [AnalysisTask(x.name, x.wcet + (bump if i == which else 0), x.period, x.deadline,
                            priority=x.priority) for i, x in enumerate(tasks)]
    before, after = response_times(tasks), response_times(heavier)
    assert all(after[k] >= before[k] for k in before)


@settings(max_examples=60, deadline=None)
@given(c=st.integers(1, 10), t=st.integers(11, 60), b=st.integers(0, 30))
def test_single_task_closed_form(c, t, b):
    r = busy_window(AnalysisTask("x", c, t, t), [], blocking=b)
    if b + c <= t:
        assert r == b + c
    else:
        assert r >= b + c


def test_analyze_or_reports_per_task():
    system = single_core([sc_task("a", 100, 400), sc_task("b", 200, 600), sc_task("c", 300, 1200)])
    report = analyze_or(system.initial_or, system)
    assert report.passed
    assert [v.response for v in report.tasks] == [100, 300, 1000]
    assert report.to_dict()["pass"] is True


def test_missing_slot_is_unbounded():
    system = single_core([sc_task("a", 100, 1000, accesses=1)])
    # a table the container has no slot in (owner checks happen at validation, not here)
    region = dataclasses.replace(system.initial_or, shared_config=SlotTable(10, ("other",)))
    report = analyze_or(region, system)
    assert not report.passed
    assert report.response("a") == UNBOUNDED
    assert "slot" in report.reasons[0]


def test_interconnect_inflation_can_break_schedulability():
    system = single_core([sc_task("a", 300, 1000, accesses=20)])
    fast = dataclasses.replace(system.initial_or, shared_config=SlotTable(1, ("c1", "x")))
    slow = dataclasses.replace(system.initial_or,
                               shared_config=SlotTable(10, ("c1", "x", "y", "z")))
    assert analyze_or(fast, system).passed
    verdict = analyze_or(slow, system).tasks[0]
    assert verdict.wcet == 300 + 20 * 50
    assert verdict.response == UNBOUNDED and not verdict.passed


def test_transition_blocking_and_downtime():
    system = single_core([sc_task("a", 100, 1000, max_downtime=500)])
    cor = system.initial_or
    small = analyze_transition(cor, cor, [Migration("c1", "r1", "r1", 300, 400)], system)
    assert small.passed and small.worst_added_latency() == {"a": 400}
    big = analyze_transition(cor, cor, [Migration("c1", "r1", "r1", 600, 600)], system)
    assert not big.passed and big.downtime_violations
