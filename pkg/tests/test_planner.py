import dataclasses

from conftest import SCENARIOS, sc_task
from ipf.cpa import analyze_or
from ipf.engine import Engine, EngineConfig
from ipf.mec import FailureReport, SystemController
from ipf.model import (Container, Event, EventKind, OperatingRegion, OpRange, Resource,
                       ResourceState as S, WorkloadClass as W, validate_scenario)
from ipf.planner import Planner, PlannerConfig, Snapshot, define_op_ranges, steady_state
from ipf.scenario import load_scenario


def desk():
    scenario = load_scenario(SCENARIOS / "desk.yaml")
    system = scenario.system
    eng = Engine(system, system.initial_or, EngineConfig())
    return system, eng, Planner(system, PlannerConfig(t_max=scenario.params.t_max))


def failure_event(rid, kind=EventKind.RESOURCE_FAILURE_IMMINENT):
    return Event(kind, W.SC, 0, payload={"resource": rid})


def test_sc_container_moves_to_spare_core():
    system, eng, planner = desk()
    planner.generate_nors(Snapshot.of(eng), system.initial_or, eng)
    nor = planner.find(failure_event("r1"), eng)
    assert nor is not None and nor.id == "N0001"
    assert nor.container_to_resource["cs1"] == "r4"
    assert nor.container_to_resource["cb1"] == "r2" and nor.container_to_resource["cb2"] == "r3"
    assert analyze_or(nor, system).passed
    # the same NOR answers the reactive event for r1 and nothing about r2
    assert planner.find(failure_event("r1", EventKind.RESOURCE_FAILED), eng) is nor
    assert planner.find(failure_event("r2"), eng) is not nor


def test_ids_follow_admission_order():
    system, eng, planner = desk()
    admitted = planner.generate_nors(Snapshot.of(eng), system.initial_or, eng)
    assert [e.region.id for e in admitted] == [f"N{i:04d}" for i in range(1, len(admitted) + 1)]


def test_no_alternative_means_failure_report():
    system, eng, planner = desk()
    for r in ("r2", "r3", "r4"):
        eng.set_resource_state(r, S.FAILED, "SCtrl")
    planner.generate_nors(Snapshot.of(eng), system.initial_or, eng)
    ev = failure_event("r1", EventKind.RESOURCE_FAILED)
    assert planner.find(ev, eng) is None
    assert isinstance(SystemController(eng, planner).decide(ev), FailureReport)


def test_overutilized_candidate_excluded():
    res = [Resource("fast", (1200,)), Resource("slow", (400,))]
    # fits at 1200 MHz, needs 140% of the 400 MHz core
    tasks = [dataclasses.replace(sc_task(t, 250, 1000), wcet={400: 700, 1200: 250})
             for t in ("t1", "t2")]
    cont = Container("c", W.SC, ("t1", "t2"))
    system = validate_scenario(res, tasks, [cont],
                               OperatingRegion("COR0", {"t1": "c", "t2": "c"}, {"c": "fast"},
                                               fixed_sc_op={"fast": 0}))
    eng = Engine(system, system.initial_or)
    planner = Planner(system)
    admitted = planner.generate_nors(Snapshot.of(eng), system.initial_or, eng)
    assert all(e.region.container_to_resource["c"] == "fast" for e in admitted)
    assert planner.find(failure_event("fast"), eng) is None
    rejected = [r for r in eng.log.records if r["kind"] == "nor_rejected"
                and r["payload"]["mapping"] == {"c": "slow"}]
    assert rejected and "analyze_or" in rejected[0]["payload"]["reason"]


def pair(coupling, sc_dynamic=3.0):
    res = [Resource("sc", (400, 800, 1200), dynamic_w=sc_dynamic,
                    coupling={"be": coupling} if coupling else {}),
           Resource("be", (400, 800, 1200), coupling={"sc": coupling} if coupling else {})]
    conts = [Container("cs", W.SC, ()), Container("cb", W.BE, ())]
    region = OperatingRegion("o", {}, {"cs": "sc", "cb": "be"}, fixed_sc_op={"sc": 2})
    return region, validate_scenario(res, [], conts, dataclasses.replace(
        region, op_ranges={"be": OpRange(0, 2)}))


def test_isolated_be_gets_full_range():
    region, system = pair(0.0)
    assert define_op_ranges(region, system, None, t_max=50.0)["be"].hi == 2


def test_hot_sc_neighbour_shrinks_range():
    region, system = pair(0.05)
    hot = define_op_ranges(region, system, None, t_max=50.0)["be"]
    assert hot.hi < 2
    power = {"sc": 3.2, "be": 1.2}
    assert steady_state(system, power, 25.0)["be"] > 25.0 + 20 * 1.2


def test_no_admissible_level_rejects():
    region, system = pair(0.0)
    assert define_op_ranges(region, system, None, t_max=26.0) is None


def test_steady_state_isolated_closed_form():
    region, system = pair(0.0)
    temps = steady_state(system, {"sc": 1.0, "be": 0.5}, 25.0)
    assert abs(temps["sc"] - 45.0) < 1e-9 and abs(temps["be"] - 35.0) < 1e-9


def test_commit_empties_nor_set():
    system, eng, planner = desk()
    planner.generate_nors(Snapshot.of(eng), system.initial_or, eng)
    assert len(planner.nors) >= 3
    planner.on_transition_committed(system.initial_or, eng)
    assert len(planner.nors) == 0
    planner.on_transition_committed(system.initial_or, eng)
    assert len(planner.nors) == 0
    cleared = [r["payload"]["dropped"] for r in eng.log.records if r["kind"] == "nor_set_cleared"]
    assert cleared[1] == 0


def test_planning_waits_for_period_and_empty_set():
    system, eng, planner = desk()
    assert planner.tick_at(eng, system.initial_or)
    eng.step(100)
    assert planner.tick_at(eng, system.initial_or) == []
    planner.nors.clear()
    eng.step(9900)
    assert planner.tick_at(eng, system.initial_or)


def test_maintenance_reentry_lowers_then_fails():
    system, eng, planner = desk()
    eng.set_resource_state("r4", S.MAINTENANCE, "SCtrl")
    snap = Snapshot.of(eng)
    assert planner.maintenance_reentry(snap, system.initial_or) == [("r4", "Idle")]
    eng.resources["r4"].top_level = 0
    assert planner.maintenance_reentry(Snapshot.of(eng), system.initial_or) == [("r4", "Failed")]
