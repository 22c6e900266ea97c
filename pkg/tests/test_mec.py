import dataclasses

import pytest

from conftest import SCENARIOS, be_task, mixed_pair, sc_task
from ipf.engine import Engine
from ipf.mec import (BestEffortController, DeferredFailureReport, FailureReport, HazardConfig,
                     HazardDetector, IllegalTransition, LimitedQoS, Step, SystemController,
                     TransitionPlan, WrongActor, build_plan, forward_event, resource_transition)
from ipf.model import (Event, EventKind, EventMode, OpRange, ResourceState as S,
                       WorkloadClass as W)
from ipf.planner import Planner, PlannerConfig
from ipf.scenario import load_scenario
from ipf.sim import Simulation
from ipf.trace import audit, sc_projection


@pytest.mark.parametrize("target", list(S))
def test_failed_is_absorbing(target):
    with pytest.raises(IllegalTransition):
        resource_transition(S.FAILED, target, "SCtrl")


def test_handover_with_both_actors():
    assert resource_transition(S.IN_BE_ZONE, S.IN_SC_ZONE, "SCtrl+BEC") is S.IN_SC_ZONE


def test_be_allocation_needs_both():
    with pytest.raises(WrongActor):
        resource_transition(S.IDLE, S.IN_BE_ZONE, "SCtrl")


def test_forced_reclaim_is_sctrl_alone():
    assert resource_transition(S.IN_BE_ZONE, S.IN_SC_ZONE, "SCtrl", forced=True) is S.IN_SC_ZONE
    with pytest.raises(WrongActor):
        resource_transition(S.IN_BE_ZONE, S.IN_SC_ZONE, "SCtrl")


def test_any_live_state_can_fail():
    for s in (S.IDLE, S.IN_SC_ZONE, S.IN_BE_ZONE, S.MAINTENANCE):
        assert resource_transition(s, S.FAILED, "SCtrl") is S.FAILED
        with pytest.raises(WrongActor):
            resource_transition(s, S.FAILED, "BEC")


def test_skipping_maintenance_is_illegal():
    with pytest.raises(IllegalTransition):
        resource_transition(S.MAINTENANCE, S.IN_SC_ZONE, "SCtrl")
    with pytest.raises(IllegalTransition):
        resource_transition(S.IDLE, S.IDLE, "SCtrl")


def controller(planner=None):
    system = mixed_pair([sc_task("s", 200, 2000)], [be_task("b", 500, 1000)])
    eng = Engine(system, system.initial_or)
    return SystemController(eng, planner)


# Every event kind and mode combination, with N empty, lands in the failure matrix.
KINDS = [(k, m) for k in EventKind for m in EventMode]


@pytest.mark.parametrize("kind,mode", KINDS)
@pytest.mark.parametrize("concerns", list(W))
def test_matrix_is_total(kind, mode, concerns):
    try:
        ev = Event(kind, concerns, 0, mode, payload={"resource": "r1" if concerns is W.SC else "r2"})
    except ValueError:
        return  # kind with a fixed mode
    d = controller().decide(ev)
    if concerns is W.BE:
        assert isinstance(d, LimitedQoS)
    elif mode is EventMode.REACTIVE:
        assert isinstance(d, FailureReport)
    else:
        assert isinstance(d, DeferredFailureReport)


def test_named_matrix_examples():
    ctrl = controller()
    assert ctrl.decide(Event(EventKind.RESOURCE_FAILED, W.SC, 0,
                             payload={"resource": "r1"})).name == "FailureReport"
    assert ctrl.decide(Event(EventKind.RESOURCE_FAILURE_IMMINENT, W.SC, 0,
                             payload={"resource": "r1"})).name == "DeferredFailureReport"
    assert ctrl.decide(Event(EventKind.WORKLOAD_CHANGE, W.BE, 0)).name == "LimitedQoS"


def test_deferred_report_fires_on_failure():
    ctrl = controller()
    ctrl.submit(Event(EventKind.RESOURCE_FAILURE_IMMINENT, W.SC, 0, payload={"resource": "r1"}))
    assert "r1" in ctrl.deferred and ctrl.sc_failure_count() == 0
    ctrl.submit(Event(EventKind.RESOURCE_FAILED, W.SC, 500, payload={"resource": "r1"}))
    assert [d.name for d in ctrl.directives] == ["DeferredFailureReport", "DeferredFired"]
    assert ctrl.sc_failure_count() == 1


def test_forward_event():
    bec = BestEffortController()
    ev = Event(EventKind.CONTRACT_VIOLATION, W.BE, 1234, payload={"container": "cb"})
    out = forward_event(bec, ev)
    assert out.kind is ev.kind and out.timestamp == 1234
    assert out.payload["container"] == "cb" and out.payload["forwarded_by"] == "BEC"
    with pytest.raises(ValueError):
        forward_event(bec, Event(EventKind.CONTRACT_VIOLATION, W.SC, 0))


def test_plan_rejects_resume_before_reconfigure():
    with pytest.raises(ValueError):
        TransitionPlan("a", None, (Step("ResumeContainer", container="x"),
                                   Step("ReconfigureShared")), 100, 200)
    with pytest.raises(ValueError):
        TransitionPlan("a", None, (), 100, 0)


def test_hazard_ramp_fires_once():
    det = HazardDetector(HazardConfig(theta=10, k=3))
    fired = [det.observe("r1", rate, 5.0) for rate in (5, 12, 15, 20, 30, 40, 50)]
    assert fired == [False, False, False, True, False, False, False]


def test_hazard_rearms_after_drop():
    det = HazardDetector(HazardConfig(theta=10, k=3))
    seq = [20, 20, 20, 20, 1, 20, 20, 20]
    assert [det.observe("r1", r, 0) for r in seq].count(True) == 2


def test_isolated_burst_no_hazard():
    det = HazardDetector(HazardConfig(theta=10, k=3))
    assert not any(det.observe("r1", r, 0) for r in (0, 50, 80, 0, 0))


def test_rate_below_tolerated_no_hazard():
    det = HazardDetector(HazardConfig(theta=10, k=3))
    assert not any(det.observe("r1", 20, 25.0) for _ in range(6))


def test_identical_or_plan_has_no_moves():
    system = mixed_pair([sc_task("s", 200, 2000)], [be_task("b", 500, 1000)])
    eng = Engine(system, system.initial_or)
    planner = Planner(system, PlannerConfig(enabled=False))
    ctrl = SystemController(eng, planner)
    same = dataclasses.replace(system.initial_or, id="N0042")
    plan = build_plan(eng, ctrl.cor, same, 10_000, 200)
    assert plan.migration_steps == []
    ctrl.execute_transition(plan)
    assert ctrl.cor.id == "N0042"
    assert eng.host_of("cs") == "r1" and eng.host_of("cb") == "r2"
    commit = ctrl.transitions[-1]
    assert commit["migrations"] == 0 and commit["sc_disruption"] == 0


def test_moving_be_container_leaves_sc_untouched():
    def run(move):
        scenario = load_scenario(SCENARIOS / "desk.yaml")
        scenario.params.planner_enabled = False
        sim = Simulation(scenario, until=100_000)
        sim.advance_to(40_000)
        if move:
            cor = sim.ctrl.cor
            nor = dataclasses.replace(
                cor, id="N0900",
                container_to_resource={**cor.container_to_resource, "cb2": "r4"},
                op_ranges={"r2": cor.op_ranges["r2"], "r4": OpRange(0, 2)})
            sim.ctrl.execute_transition(build_plan(sim.engine, cor, nor, 20_000, 200))
        sim.run()
        return sim
    base, moved = run(False), run(True)
    assert moved.engine.host_of("cb2") == "r4"
    assert moved.engine.resources["r3"].state is S.IDLE
    assert moved.ctrl.cor.id == "N0900"
    assert sc_projection(base.log.records) == sc_projection(moved.log.records)
    assert audit(moved.log.records).passed


def test_transition_deadline_exceeded_is_reported():
    scenario = load_scenario(SCENARIOS / "forced_reclaim.yaml")
    scenario.params.planner_enabled = False
    sim = Simulation(scenario, until=60_000)
    sim.advance_to(10_000)
    cor = sim.ctrl.cor
    nor = dataclasses.replace(cor, id="N0901",
                              container_to_resource={"cs1": "r3", "cb2": "r2"},
                              fixed_sc_op={"r3": 2},
                              op_ranges={"r2": OpRange(0, 2)})
    sim.ctrl.execute_transition(build_plan(sim.engine, cor, nor, 1000, 200))  # < 3906 us migration
    sim.run()
    reasons = [f["reason"] for f in sim.ctrl.failures]
    assert "TransitionDeadlineExceeded" in reasons
    assert sim.exit_code == 2
