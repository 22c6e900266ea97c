"""Busy-window response-time analysis for fixed-priority preemptive resources.

Event model: periodic with jitter. Resources are analysed independently;
the shared interconnect enters as a fixed WCET inflation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .model import (OperatingRegion, SystemModel, WorkloadClass, effective_wcet,
                    rm_priority_key)

UNBOUNDED = math.inf
ITERATION_CAP = 10 ** 9


@dataclass(frozen=True)
class AnalysisTask:
    name: str
    wcet: int
    period: int
    deadline: int
    jitter: int = 0
    priority: int = 0

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError(f"{self.name}: period must be positive")


def busy_window(task: AnalysisTask, hp: Sequence[AnalysisTask], blocking: int = 0):
    """Worst-case response time of `task` under interference from `hp`.

    Multiple activations per busy window are examined, so the result may
    exceed the period. Returns UNBOUNDED when the tasks over-utilize the
    resource or the window grows past the iteration bound.
    """
    tasks = [task, *hp]
    if sum(t.wcet / t.period for t in tasks) >= 1:
        return UNBOUNDED
    bound = min(math.lcm(*(t.period for t in tasks)), ITERATION_CAP)
    bound += blocking + max(t.jitter for t in tasks)

    worst = 0
    q = 1
    while True:
        w = blocking + q * task.wcet
        while True:
            nxt = blocking + q * task.wcet + sum(
                -(-(w + j.jitter) // j.period) * j.wcet for j in hp)
            if nxt > bound:
                return UNBOUNDED
            if nxt == w:
                break
            w = nxt
        worst = max(worst, w + task.jitter - (q - 1) * task.period)
        # window closes before the next activation can arrive
        if w <= q * task.period - task.jitter:
            return worst
        q += 1


def response_times(tasks: Sequence[AnalysisTask], blocking: Optional[Dict[str, int]] = None):
    """Analyse a whole resource; lower `priority` value wins."""
    blocking = blocking or {}
    ordered = sorted(tasks, key=lambda t: (t.priority, t.name))
    return {t.name: busy_window(t, ordered[:i], blocking.get(t.name, 0))
            for i, t in enumerate(ordered)}


@dataclass
class TaskVerdict:
    task: str
    resource: str
    wcet: Optional[int]
    response: float
    deadline: int
    added_latency: int = 0

    @property
    def passed(self) -> bool:
        return self.response <= self.deadline

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "resource": self.resource,
            "wcet": self.wcet,
            "response": None if self.response == UNBOUNDED else int(self.response),
            "deadline": self.deadline,
            "added_latency": self.added_latency,
            "pass": self.passed,
        }


@dataclass
class OrReport:
    region: str
    tasks: List[TaskVerdict] = field(default_factory=list)
    reasons: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.reasons and all(v.passed for v in self.tasks)

    def response(self, task: str):
        for v in self.tasks:
            if v.task == task:
                return v.response
        raise KeyError(task)

    def to_dict(self) -> dict:
        return {"region": self.region, "pass": self.passed, "reasons": list(self.reasons),
                "tasks": [v.to_dict() for v in self.tasks]}


def _resource_tasks(region: OperatingRegion, system: SystemModel):
    """SC analysis tasks grouped per mapped SC resource, RM-ordered."""
    groups = {}
    for cid, rid in sorted(region.container_to_resource.items()):
        container = system.containers[cid]
        if container.kind is not WorkloadClass.SC:
            continue
        freq = system.resources[rid].freq_levels[region.fixed_sc_op[rid]]
        members = sorted(system.container_tasks(cid, region), key=rm_priority_key)
        entries = []
        for prio, task in enumerate(members):
            c = effective_wcet(task, container, freq, region.shared_config)
            entries.append((task, c, prio))
        groups[rid] = (cid, entries)
    return groups


def analyze_or(region: OperatingRegion, system: SystemModel, blocking=None) -> OrReport:
    """Check every SC task of `region` against its deadline.

    `blocking` maps task id to a one-shot blocking term (used for transitions).
    """
    blocking = blocking or {}
    report = OrReport(region.id)
    for rid, (cid, entries) in _resource_tasks(region, system).items():
        if any(c is None for _, c, _ in entries):
            for task, c, _ in entries:
                report.tasks.append(TaskVerdict(task.id, rid, c, UNBOUNDED, task.deadline))
            report.reasons.append(f"{cid} needs the interconnect but owns no TDM slot")
            continue
        analysed = [AnalysisTask(t.id, c, t.period, t.deadline, t.jitter, prio)
                    for t, c, prio in entries]
        rts = response_times(analysed, blocking)
        for task, c, _ in entries:
            report.tasks.append(TaskVerdict(task.id, rid, c, rts[task.id], task.deadline,
                                            blocking.get(task.id, 0)))
    return report


@dataclass(frozen=True)
class Migration:
    """One container move of a transition; `blocking` is its SC downtime bound."""

    container: str
    src: Optional[str]
    dst: str
    delay: int
    blocking: int


@dataclass
class TransitionReport:
    tasks: List[TaskVerdict] = field(default_factory=list)
    downtime_violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.downtime_violations and all(v.passed for v in self.tasks)

    def worst_added_latency(self) -> Dict[str, int]:
        return {v.task: v.added_latency for v in self.tasks}

    def to_dict(self) -> dict:
        return {"pass": self.passed, "downtime_violations": list(self.downtime_violations),
                "tasks": [v.to_dict() for v in self.tasks]}


def analyze_transition(cor: OperatingRegion, nor: OperatingRegion,
                       migrations: Sequence[Migration], system: SystemModel) -> TransitionReport:
    """Charge each moved SC container's downtime as a blocking term on its new resource."""
    report = TransitionReport()
    blocking = {}
    for m in migrations:
        if system.containers[m.container].kind is not WorkloadClass.SC:
            continue
        for task in system.container_tasks(m.container, nor):
            blocking[task.id] = m.blocking
            if m.blocking > task.max_downtime:
                report.downtime_violations.append(
                    f"{task.id}: downtime {m.blocking} > max_downtime {task.max_downtime}")
    report.tasks.extend(analyze_or(nor, system, blocking).tasks)
    return report
