import dataclasses
import sys
from pathlib import Path

import pytest

from ipf.model import (Container, Criticality, OperatingRegion, OpRange, Resource, SlotTable,
                       Task, WorkloadClass, validate_scenario)

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
sys.path.insert(0, str(Path(__file__).resolve().parent))

ACCEPTANCE_LINES = []


def sc_task(tid, c, t, d=None, freq=1000, crit=Criticality.D, **kw):
    kw.setdefault("max_downtime", 10 * t)
    kw.setdefault("max_fit", 10.0)
    return Task(tid, crit, t, {freq: c}, d if d is not None else t, **kw)


def be_task(tid, c, t, goal=100.0, freq=1000, **kw):
    return Task(tid, Criticality.QM, t, {freq: c}, t, qos_goal=goal, **kw)


def single_core(tasks, freq=1000, slots=SlotTable(), rte=0):
    """One resource, one SC container holding `tasks`."""
    r = Resource("r1", (freq,))
    c = Container("c1", WorkloadClass.SC, tuple(t.id for t in tasks), rte)
    cor = OperatingRegion("COR0", {t.id: "c1" for t in tasks}, {"c1": "r1"}, slots,
                          {}, {"r1": 0})
    return validate_scenario([r], tasks, [c], cor)


def mixed_pair(sc_tasks, be_tasks, freqs=(500, 1000), cache=False):
    """r1 hosts an SC container, r2 a BE container with a full OP range.

    Each task's WCET at its highest listed frequency is rescaled to `freqs`.
    """
    def rescale(t):
        base = max(t.wcet)
        return dataclasses.replace(t, wcet={f: -(-t.wcet[base] * base // f) for f in freqs})
    sc_tasks, be_tasks = [rescale(t) for t in sc_tasks], [rescale(t) for t in be_tasks]
    res = [Resource("r1", freqs, coupling={"r2": 0.01}),
           Resource("r2", freqs, coupling={"r1": 0.01}, cache_capable=cache)]
    cs = Container("cs", WorkloadClass.SC, tuple(t.id for t in sc_tasks))
    cb = Container("cb", WorkloadClass.BE, tuple(t.id for t in be_tasks))
    t2c = {**{t.id: "cs" for t in sc_tasks}, **{t.id: "cb" for t in be_tasks}}
    cor = OperatingRegion("COR0", t2c, {"cs": "r1", "cb": "r2"}, SlotTable(),
                          {"r2": OpRange(0, len(freqs) - 1, (False, True) if cache else (False,))},
                          {"r1": len(freqs) - 1})
    return validate_scenario(res, sc_tasks + be_tasks, [cs, cb], cor)


@pytest.fixture
def scenarios_dir():
    return SCENARIOS


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
