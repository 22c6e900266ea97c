"""Shared domain types for the factory simulator.

Everything here is plain data plus validation. Time is integer
microseconds throughout; frequencies are integer MHz.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterator, Mapping, Optional, Tuple


class ValidationError(ValueError):
    """A scenario entity violates a type invariant."""

    def __init__(self, entity, message):
        self.entity = entity
        super().__init__(f"{entity}: {message}")


class InvalidTaskSpec(ValidationError):
    pass


class MappingNotInjective(ValidationError):
    pass


class UnknownReference(ValidationError):
    pass


class Criticality(enum.IntEnum):
    QM = 0
    A = 1
    B = 2
    C = 3
    D = 4

    @property
    def workload_class(self) -> "WorkloadClass":
        return WorkloadClass.BE if self is Criticality.QM else WorkloadClass.SC


def criticality_ge(a: Criticality, b: Criticality) -> bool:
    return int(a) >= int(b)


class WorkloadClass(str, enum.Enum):
    SC = "SC"
    BE = "BE"


class ResourceState(str, enum.Enum):
    IDLE = "Idle"
    IN_SC_ZONE = "InSCZone"
    IN_BE_ZONE = "InBEZone"
    MAINTENANCE = "Maintenance"
    FAILED = "Failed"

    @property
    def operational(self) -> bool:
        return self in (ResourceState.IDLE, ResourceState.IN_SC_ZONE, ResourceState.IN_BE_ZONE)

    @property
    def superstate(self) -> str:
        return "Operational" if self.operational else "NonOperational"


ZONE_OF = {WorkloadClass.SC: ResourceState.IN_SC_ZONE, WorkloadClass.BE: ResourceState.IN_BE_ZONE}


class EventKind(str, enum.Enum):
    HAZARD_ANTICIPATED = "HazardAnticipated"
    LONG_TERM_OPTIMIZATION = "LongTermOptimization"
    WORKLOAD_CHANGE = "WorkloadChange"
    ENVIRONMENT_CHANGE = "EnvironmentChange"
    OPERATING_CONDITION_CHANGE = "OperatingConditionChange"
    RESOURCE_FAILED = "ResourceFailed"
    RESOURCE_FAILURE_IMMINENT = "ResourceFailureImminent"
    CONTRACT_VIOLATION = "ContractViolation"


class EventMode(str, enum.Enum):
    REACTIVE = "Reactive"
    PROACTIVE = "Proactive"


FIXED_MODE = {
    EventKind.RESOURCE_FAILURE_IMMINENT: EventMode.PROACTIVE,
    EventKind.HAZARD_ANTICIPATED: EventMode.PROACTIVE,
    EventKind.RESOURCE_FAILED: EventMode.REACTIVE,
    EventKind.CONTRACT_VIOLATION: EventMode.REACTIVE,
}

DEFAULT_MODE = {
    EventKind.LONG_TERM_OPTIMIZATION: EventMode.PROACTIVE,
    EventKind.WORKLOAD_CHANGE: EventMode.REACTIVE,
    EventKind.ENVIRONMENT_CHANGE: EventMode.REACTIVE,
    EventKind.OPERATING_CONDITION_CHANGE: EventMode.REACTIVE,
    **FIXED_MODE,
}


@dataclass(frozen=True)
class Event:
    kind: EventKind
    concerns: WorkloadClass
    timestamp: int
    mode: Optional[EventMode] = None
    origin_layer: int = 4
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        mode = self.mode if self.mode is not None else DEFAULT_MODE[self.kind]
        fixed = FIXED_MODE.get(self.kind)
        if fixed is not None and mode is not fixed:
            raise ValueError(f"{self.kind.value} events are always {fixed.value}")
        if self.origin_layer not in (3, 4):
            raise ValueError("events originate in layer 3 or 4")
        object.__setattr__(self, "mode", mode)

    @property
    def subject(self) -> Optional[str]:
        """Resource the event is about, if any."""
        return self.payload.get("resource")

    def key(self) -> Tuple[EventKind, Optional[str]]:
        return (self.kind, self.subject)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "mode": self.mode.value,
            "concerns": self.concerns.value,
            "origin_layer": self.origin_layer,
            "timestamp": self.timestamp,
            "payload": dict(self.payload),
        }


@dataclass(frozen=True)
class Task:
    id: str
    criticality: Criticality
    period: int
    wcet: Mapping[int, int]
    deadline: int
    jitter: int = 0
    max_downtime: Optional[int] = None
    max_fit: Optional[float] = None
    qos_goal: Optional[float] = None
    memory_footprint: int = 0
    # interconnect transactions per job, served through the TDM slot table
    accesses: int = 0
    # demand multiplier when caches are enabled (BE only)
    cache_speedup: float = 1.0

    @property
    def workload_class(self) -> WorkloadClass:
        return self.criticality.workload_class

    @property
    def is_sc(self) -> bool:
        return self.workload_class is WorkloadClass.SC

    def wcet_at(self, freq: int) -> int:
        try:
            return self.wcet[freq]
        except KeyError:
            raise InvalidTaskSpec(self.id, f"no WCET for {freq} MHz") from None

    def utilization_at(self, freq: int) -> float:
        return self.wcet_at(freq) / self.period


def rm_priority_key(task: Task):
    """Rate-monotonic order; smaller key means higher priority."""
    return (task.period, task.id)


@dataclass(frozen=True)
class Resource:
    id: str
    freq_levels: Tuple[int, ...]
    static_w: float = 0.2
    dynamic_w: float = 1.0
    capacitance: float = 0.05
    resistance: float = 20.0
    coupling: Mapping[str, float] = field(default_factory=dict)
    base_error_rate: float = 0.0
    cache_capable: bool = False

    @property
    def neighbors(self) -> Tuple[str, ...]:
        return tuple(sorted(self.coupling))

    def dynamic_w_at(self, level: int) -> float:
        """Dynamic power at full load, cubic in frequency relative to the top level."""
        ratio = self.freq_levels[level] / self.freq_levels[-1]
        return self.dynamic_w * ratio ** 3


class Scheduler(str, enum.Enum):
    FIXED_PRIORITY_PREEMPTIVE = "FixedPriorityPreemptive"
    WEIGHTED_ROUND_ROBIN = "WeightedRoundRobin"


@dataclass(frozen=True)
class Container:
    id: str
    kind: WorkloadClass
    tasks: Tuple[str, ...]
    rte_overhead: int = 0
    power_budget: Optional[float] = None

    @property
    def scheduler(self) -> Scheduler:
        if self.kind is WorkloadClass.SC:
            return Scheduler.FIXED_PRIORITY_PREEMPTIVE
        return Scheduler.WEIGHTED_ROUND_ROBIN


@dataclass(frozen=True)
class SlotTable:
    """Cyclic TDM arbitration of the shared interconnect."""

    slot_us: int = 0
    slots: Tuple[str, ...] = ()

    def worst_case_access_delay(self, container_id: str) -> Optional[int]:
        """Longest wait plus service for one access, or None if the container owns no slot."""
        if not self.slots or self.slot_us == 0:
            return 0
        own = [i for i, c in enumerate(self.slots) if c == container_id]
        if not own:
            return None
        n = len(self.slots)
        gap = max(((own[(j + 1) % len(own)] - own[j] - 1) % n) for j in range(len(own)))
        # request arrives just after its own slot opened: rest of that slot, the gap, one service slot
        return (gap + 2) * self.slot_us


@dataclass(frozen=True)
class OpRange:
    lo: int
    hi: int
    cache: Tuple[bool, ...] = (False,)

    def levels(self) -> range:
        return range(self.lo, self.hi + 1)


@dataclass(frozen=True)
class OperatingPoint:
    sc_part: Mapping[str, int]
    be_part: Mapping[str, Tuple[int, bool]]

    def with_be(self, resource: str, level: int, cache: bool) -> "OperatingPoint":
        be = dict(self.be_part)
        be[resource] = (level, cache)
        return OperatingPoint(dict(self.sc_part), be)


@dataclass(frozen=True)
class OperatingRegion:
    id: str
    task_to_container: Mapping[str, str]
    container_to_resource: Mapping[str, str]
    shared_config: SlotTable = SlotTable()
    op_ranges: Mapping[str, OpRange] = field(default_factory=dict)
    fixed_sc_op: Mapping[str, int] = field(default_factory=dict)
    associated_events: FrozenSet[Tuple[EventKind, Optional[str]]] = frozenset()
    tolerated_error_rate: float = 5.0

    def resource_of_container(self, cid: str) -> Optional[str]:
        return self.container_to_resource.get(cid)

    def container_on(self, rid: str) -> Optional[str]:
        for c, r in self.container_to_resource.items():
            if r == rid:
                return c
        return None

    def answers(self, event: Event) -> bool:
        return (event.kind, event.subject) in self.associated_events or (
            event.kind, None) in self.associated_events

    def default_op(self) -> OperatingPoint:
        """Fixed SC part plus every BE resource at the top of its range, caches off."""
        be = {r: (rng.hi, False if False in rng.cache else rng.cache[0])
              for r, rng in sorted(self.op_ranges.items())}
        return OperatingPoint(dict(self.fixed_sc_op), be)

    def reachable_ops(self) -> Iterator[OperatingPoint]:
        """Enumerate every OP allowed by op_ranges. Exponential; small ORs only."""
        rids = sorted(self.op_ranges)
        choices = [[(lvl, c) for lvl in self.op_ranges[r].levels() for c in self.op_ranges[r].cache]
                   for r in rids]
        for combo in itertools.product(*choices):
            yield OperatingPoint(dict(self.fixed_sc_op), dict(zip(rids, combo)))

    def resource_map(self) -> Dict[str, str]:
        """task -> resource, for mapped containers only."""
        return {t: self.container_to_resource[c] for t, c in self.task_to_container.items()
                if c in self.container_to_resource}


@dataclass(frozen=True)
class SystemModel:
    """A validated platform plus workload."""

    resources: Mapping[str, Resource]
    tasks: Mapping[str, Task]
    containers: Mapping[str, Container]
    initial_or: OperatingRegion

    def container_tasks(self, cid: str, region: Optional[OperatingRegion] = None):
        region = region or self.initial_or
        return [self.tasks[t] for t, c in sorted(region.task_to_container.items()) if c == cid]

    def footprint(self, cid: str) -> int:
        return sum(self.tasks[t].memory_footprint for t in self.containers[cid].tasks)

    def with_tasks(self, tasks: Mapping[str, Task]) -> "SystemModel":
        return SystemModel(self.resources, dict(tasks), self.containers, self.initial_or)


def effective_wcet(task: Task, container: Container, freq: int, slot_table: SlotTable,
                   cache: bool = False) -> Optional[int]:
    """Per-job demand in µs at a setting, including RTE and interconnect inflation.

    Returns None when the task needs the interconnect but its container owns no slot.
    """
    base = task.wcet_at(freq)
    if cache and not task.is_sc:
        base = max(1, math.ceil(base * Fraction(str(task.cache_speedup))))
    inflation = 0
    if task.accesses:
        per_access = slot_table.worst_case_access_delay(container.id)
        if per_access is None:
            return None
        inflation = task.accesses * per_access
    return base + container.rte_overhead + inflation


def migration_delay(footprint_bytes: int, bandwidth_bytes_per_s: int) -> int:
    """Transfer time in µs, floored: 4 MiB over 1 GiB/s gives 3906."""
    return (footprint_bytes * 1_000_000) // bandwidth_bytes_per_s


def _validate_task(task: Task):
    if task.period <= 0:
        raise InvalidTaskSpec(task.id, "period must be positive")
    if task.jitter < 0:
        raise InvalidTaskSpec(task.id, "jitter must be non-negative")
    if not task.wcet:
        raise InvalidTaskSpec(task.id, "empty WCET table")
    freqs = sorted(task.wcet)
    for lo, hi in zip(freqs, freqs[1:]):
        if task.wcet[hi] > task.wcet[lo]:
            raise InvalidTaskSpec(task.id, f"WCET increases from {lo} to {hi} MHz")
    if task.is_sc:
        if task.deadline > task.period:
            raise InvalidTaskSpec(task.id, f"deadline {task.deadline} > period {task.period}")
        for f, c in task.wcet.items():
            if not 0 < c <= task.deadline:
                raise InvalidTaskSpec(task.id, f"WCET {c} at {f} MHz outside (0, deadline]")
        if task.qos_goal is not None:
            raise InvalidTaskSpec(task.id, "SC tasks carry no QoS goal")
        if task.max_fit is None or task.max_downtime is None:
            raise InvalidTaskSpec(task.id, "SC tasks need max_fit and max_downtime")
    else:
        if task.qos_goal is None:
            raise InvalidTaskSpec(task.id, "BE tasks need a QoS goal")
        if task.max_fit is not None or task.max_downtime is not None:
            raise InvalidTaskSpec(task.id, "BE tasks carry no max_fit/max_downtime")
        if any(c <= 0 for c in task.wcet.values()):
            raise InvalidTaskSpec(task.id, "WCET must be positive")
        if not 0 < task.cache_speedup <= 1:
            raise InvalidTaskSpec(task.id, "cache speedup must lie in (0, 1]")


def _validate_resource(res: Resource, resources: Mapping[str, Resource]):
    if not res.freq_levels:
        raise ValidationError(res.id, "no frequency levels")
    if any(b <= a for a, b in zip(res.freq_levels, res.freq_levels[1:])):
        raise ValidationError(res.id, "frequency levels must be strictly increasing")
    for other, k in res.coupling.items():
        if other not in resources:
            raise UnknownReference(res.id, f"neighbor {other} not declared")
        if resources[other].coupling.get(res.id) != k:
            raise ValidationError(res.id, f"coupling to {other} is not symmetric")


def validate_region(region: OperatingRegion, resources, tasks, containers):
    for t, c in region.task_to_container.items():
        if t not in tasks:
            raise UnknownReference(region.id, f"task {t}")
        if c not in containers:
            raise UnknownReference(region.id, f"container {c}")
        if tasks[t].workload_class is not containers[c].kind:
            raise ValidationError(t, f"{tasks[t].workload_class.value} task in "
                                     f"{containers[c].kind.value} container {c}")
    seen = {}
    for c, r in sorted(region.container_to_resource.items()):
        if c not in containers:
            raise UnknownReference(region.id, f"container {c}")
        if r not in resources:
            raise UnknownReference(region.id, f"resource {r}")
        if r in seen:
            raise MappingNotInjective(r, f"hosts both {seen[r]} and {c}")
        seen[r] = c
    for c in region.shared_config.slots:
        if c not in containers:
            raise UnknownReference(region.id, f"slot owner {c}")
    for c, r in region.container_to_resource.items():
        res = resources[r]
        if containers[c].kind is WorkloadClass.SC:
            if r not in region.fixed_sc_op:
                raise ValidationError(region.id, f"no fixed SC level for {r}")
            if r in region.op_ranges:
                raise ValidationError(region.id, f"SC resource {r} has a variation range")
        for t, tc in region.task_to_container.items():
            if tc == c:
                for f in res.freq_levels:
                    if f not in tasks[t].wcet:
                        raise InvalidTaskSpec(t, f"no WCET for {f} MHz on {r}")
    for r, lvl in region.fixed_sc_op.items():
        if r not in resources:
            raise UnknownReference(region.id, f"resource {r}")
        if not 0 <= lvl < len(resources[r].freq_levels):
            raise ValidationError(region.id, f"SC level {lvl} out of range on {r}")
    for r, rng in region.op_ranges.items():
        if r not in resources:
            raise UnknownReference(region.id, f"resource {r}")
        if not 0 <= rng.lo <= rng.hi < len(resources[r].freq_levels):
            raise ValidationError(region.id, f"op range [{rng.lo},{rng.hi}] invalid on {r}")
        if True in rng.cache and not resources[r].cache_capable:
            raise ValidationError(region.id, f"{r} is not cache capable")
        if not rng.cache:
            raise ValidationError(region.id, f"empty cache choice on {r}")


def validate_scenario(resources, tasks, containers, initial_or: OperatingRegion) -> SystemModel:
    """Check every invariant and return the system unchanged, or raise."""
    resources = {r.id: r for r in resources} if not isinstance(resources, Mapping) else dict(resources)
    tasks = {t.id: t for t in tasks} if not isinstance(tasks, Mapping) else dict(tasks)
    containers = {c.id: c for c in containers} if not isinstance(containers, Mapping) else dict(containers)
    for res in resources.values():
        _validate_resource(res, resources)
    for task in tasks.values():
        _validate_task(task)
    owner = {}
    for c in containers.values():
        for t in c.tasks:
            if t not in tasks:
                raise UnknownReference(c.id, f"task {t}")
            if t in owner:
                raise ValidationError(t, f"in both {owner[t]} and {c.id}")
            if tasks[t].workload_class is not c.kind:
                raise ValidationError(t, f"{tasks[t].workload_class.value} task in "
                                         f"{c.kind.value} container {c.id}")
            owner[t] = c.id
    validate_region(initial_or, resources, tasks, containers)
    return SystemModel(resources, tasks, containers, initial_or)
