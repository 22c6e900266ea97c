"""Scenario files: one YAML document describing platform, workload, faults and knobs."""

from __future__ import annotations

import dataclasses
from pathlib import Path
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import yaml

from .engine import FaultKind, FaultSpec
from .lct import LctConfig
from .model import (Container, Criticality, EventKind, EventMode, OperatingRegion, OpRange,
                    Resource, SlotTable, SystemModel, Task, ValidationError, WorkloadClass,
                    validate_scenario)
from .tal import load_contract

SCHEMA_VERSION = 1


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


@dataclass
class Params:
    """Every tunable of a run. Times in microseconds unless named otherwise."""

    tick_us: int = 100
    until_us: int = 100_000
    seed: int = 0
    t_force_ticks: int = 2
    bec_release_delay_us: int = 0
    theta_hazard: float = 10.0
    hazard_k: int = 3
    hazard_window_us: int = 10_000
    sample_period_us: int = 1_000
    link_bandwidth: int = 1 << 30
    ambient_c: float = 25.0
    t_max: float = 85.0
    planning_period_ticks: int = 100
    planner_fanout: int = 8
    planner_capacity: int = 32
    planner_enabled: bool = True
    report_limited_qos: bool = False
    deadline_contracts: bool = True
    lct_enabled: bool = True
    lct: LctConfig = field(default_factory=LctConfig)

    def __post_init__(self):
        if self.tick_us <= 0:
            raise ValidationError("params", "tick_us must be positive")
        for name in ("until_us", "sample_period_us", "hazard_window_us"):
            if getattr(self, name) % self.tick_us:
                raise ValidationError("params", f"{name} must be a multiple of tick_us")
        if self.t_force_ticks < 1:
            raise ValidationError("params", "t_force_ticks must be at least 1")


@dataclass(frozen=True)
class ScheduledEvent:
    at: int
    kind: EventKind
    concerns: WorkloadClass
    mode: Optional[EventMode] = None
    resource: Optional[str] = None


@dataclass
class Scenario:
    name: str
    system: SystemModel
    contracts: List[dict] = field(default_factory=list)
    faults: List[FaultSpec] = field(default_factory=list)
    events: List[ScheduledEvent] = field(default_factory=list)
    params: Params = field(default_factory=Params)


# ---------------------------------------------------------------------------
# key schema, checked against the YAML node tree so errors carry lines
# ---------------------------------------------------------------------------

_RESOURCE = ("id", "freq_levels", "static_w", "dynamic_w", "capacitance", "resistance",
             "coupling", "base_error_rate", "cache_capable")
_TASK = ("id", "criticality", "period", "wcet", "deadline", "jitter", "max_downtime", "max_fit",
         "qos_goal", "memory_footprint", "accesses", "cache_speedup")
_CONTAINER = ("id", "kind", "tasks", "rte_overhead", "power_budget")
_FAULT = ("kind", "target", "at", "base_rate", "aging_slope", "start", "burst_mean")
_EVENT = ("at", "kind", "concerns", "mode", "resource")
_CONTRACT = ("id", "locations", "initial", "error", "clocks", "edges", "invariants", "binding",
             "scope", "container")
_PARAMS = tuple(f.name for f in dataclasses.fields(Params))
_LCT = tuple(f.name for f in dataclasses.fields(LctConfig))

SCHEMA = {
    "schema_version": None,
    "name": None,
    "resources": [dict.fromkeys(_RESOURCE)],
    "interconnect": {"slot_us": None, "slots": None},
    "tasks": [dict.fromkeys(_TASK)],
    "containers": [dict.fromkeys(_CONTAINER)],
    "initial_or": {"id": None, "mapping": None, "fixed_sc_op": None,
                   "op_ranges": {"*": {"lo": None, "hi": None, "cache": None}},
                   "tolerated_error_rate": None},
    "contracts": [dict.fromkeys(_CONTRACT)],
    "faults": [dict.fromkeys(_FAULT)],
    "events": [dict.fromkeys(_EVENT)],
    "params": {**dict.fromkeys(_PARAMS), "lct": dict.fromkeys(_LCT)},
}


def _line(node):
    return node.start_mark.line + 1


def _check(node, schema, where):
    if schema is None:
        return
    if isinstance(schema, list):
        if not isinstance(node, yaml.SequenceNode):
            raise ParseError(f"{where} must be a list", _line(node))
        for i, item in enumerate(node.value):
            _check(item, schema[0], f"{where}[{i}]")
        return
    if not isinstance(node, yaml.MappingNode):
        raise ParseError(f"{where} must be a mapping", _line(node))
    for key, value in node.value:
        k = key.value
        if "*" in schema:
            _check(value, schema["*"], f"{where}.{k}")
        elif k not in schema:
            raise ParseError(f"unknown key {k!r} in {where}", _line(key))
        else:
            _check(value, schema[k], f"{where}.{k}")


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def _need(d: Mapping, key: str, entity: str):
    if key not in d or d[key] is None:
        raise ValidationError(entity, f"missing required field {key!r}")
    return d[key]


def _enum(cls, value, entity, what):
    try:
        return Criticality[str(value)] if cls is Criticality else cls(value)
    except (KeyError, ValueError):
        raise ValidationError(entity, f"unknown {what} {value!r}") from None


def _resource(d) -> Resource:
    rid = str(_need(d, "id", "resource"))
    kw = {k: d[k] for k in _RESOURCE if k in d and k not in ("id", "freq_levels", "coupling")}
    return Resource(rid, tuple(int(f) for f in _need(d, "freq_levels", rid)),
                    coupling={str(k): float(v) for k, v in (d.get("coupling") or {}).items()},
                    **kw)


def _task(d, all_freqs) -> Task:
    tid = str(_need(d, "id", "task"))
    for key in ("criticality", "period", "wcet", "deadline"):
        _need(d, key, tid)
    wcet = d["wcet"]
    if isinstance(wcet, Mapping):
        wcet = {int(f): int(c) for f, c in wcet.items()}
    else:
        wcet = {f: int(wcet) for f in all_freqs}
    kw = {k: d[k] for k in _TASK if k in d and k not in ("id", "criticality", "wcet")}
    return Task(tid, _enum(Criticality, d["criticality"], tid, "criticality"), wcet=wcet, **kw)


def _container(d) -> Container:
    cid = str(_need(d, "id", "container"))
    kind = _enum(WorkloadClass, _need(d, "kind", cid), cid, "container kind")
    return Container(cid, kind, tuple(_need(d, "tasks", cid)), d.get("rte_overhead", 0),
                     d.get("power_budget"))


def _region(d, containers, slots) -> OperatingRegion:
    rid = d.get("id", "COR0")
    mapping = {str(c): str(r) for c, r in _need(d, "mapping", rid).items()}
    t2c = {t: c.id for c in containers.values() for t in c.tasks}
    ranges = {str(r): OpRange(int(g["lo"]), int(g["hi"]), tuple(g.get("cache", [False])))
              for r, g in (d.get("op_ranges") or {}).items()}
    return OperatingRegion(rid, t2c, mapping, slots, ranges,
                           {str(r): int(v) for r, v in (d.get("fixed_sc_op") or {}).items()},
                           frozenset(), float(d.get("tolerated_error_rate", 5.0)))


def _fault(d) -> FaultSpec:
    kind = _enum(FaultKind, _need(d, "kind", "fault"), "fault", "fault kind")
    kw = {k: d[k] for k in _FAULT if k in d and k != "kind"}
    try:
        return FaultSpec(kind, **kw)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"fault on {d.get('target')}", str(exc)) from None


def _event(d) -> ScheduledEvent:
    at = _need(d, "at", "event")
    entity = f"event at {at}"
    kind = _enum(EventKind, _need(d, "kind", entity), entity, "event kind")
    concerns = _enum(WorkloadClass, _need(d, "concerns", entity), entity, "concern")
    mode = _enum(EventMode, d["mode"], entity, "mode") if d.get("mode") else None
    return ScheduledEvent(int(at), kind, concerns, mode, d.get("resource"))


def _params(d) -> Params:
    d = dict(d or {})
    lct = LctConfig(**(d.pop("lct", None) or {}))
    try:
        return Params(lct=lct, **d)
    except TypeError as exc:
        raise ValidationError("params", str(exc)) from None


def parse_scenario(text: str, default_name: str = "scenario") -> Scenario:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ParseError(exc.problem or str(exc), line) from None
    if node is None:
        raise ParseError("empty scenario document", 1)
    _check(node, SCHEMA, "scenario")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version}", _line(node))
    resources = [_resource(r) for r in data.get("resources") or []]
    freqs = sorted({f for r in resources for f in r.freq_levels})
    tasks = [_task(t, freqs) for t in data.get("tasks") or []]
    containers = {c.id: c for c in (_container(c) for c in data.get("containers") or [])}
    ic = data.get("interconnect") or {}
    slots = SlotTable(int(ic.get("slot_us", 0)), tuple(ic.get("slots", ())))
    region = _region(_need(data, "initial_or", "scenario"), containers, slots)
    system = validate_scenario(resources, tasks, containers, region)
    contracts = list(data.get("contracts") or [])
    for c in contracts:
        load_contract(c)
        if c.get("container") is not None and c["container"] not in containers:
            raise ValidationError(c.get("id", "contract"), f"unknown container {c['container']}")
    faults = [_fault(f) for f in data.get("faults") or []]
    for f in faults:
        if f.target not in system.resources:
            raise ValidationError(f"fault on {f.target}", "unknown resource")
    events = sorted((_event(e) for e in data.get("events") or []), key=lambda e: e.at)
    return Scenario(str(data.get("name", default_name)), system, contracts, faults, events,
                    _params(data.get("params")))


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text(), Path(path).stem)


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def _plain(v):
    if isinstance(v, (WorkloadClass, EventKind, EventMode, FaultKind)):
        return v.value
    if isinstance(v, Criticality):
        return v.name
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, Mapping):
        return {k: _plain(x) for k, x in v.items()}
    return v


def scenario_to_dict(s: Scenario) -> Dict[str, Any]:
    sysm = s.system
    cor = sysm.initial_or
    return {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "resources": [_plain(dataclasses.asdict(r)) for r in sysm.resources.values()],
        "interconnect": {"slot_us": cor.shared_config.slot_us,
                         "slots": list(cor.shared_config.slots)},
        "tasks": [{k: _plain(getattr(t, k)) for k in _TASK} for t in sysm.tasks.values()],
        "containers": [{"id": c.id, "kind": c.kind.value, "tasks": list(c.tasks),
                        "rte_overhead": c.rte_overhead, "power_budget": c.power_budget}
                       for c in sysm.containers.values()],
        "initial_or": {"id": cor.id, "mapping": dict(cor.container_to_resource),
                       "fixed_sc_op": dict(cor.fixed_sc_op),
                       "op_ranges": {r: {"lo": g.lo, "hi": g.hi, "cache": list(g.cache)}
                                     for r, g in cor.op_ranges.items()},
                       "tolerated_error_rate": cor.tolerated_error_rate},
        "contracts": [dict(c) for c in s.contracts],
        "faults": [_plain(dataclasses.asdict(f)) for f in s.faults],
        "events": [_plain(dataclasses.asdict(e)) for e in s.events],
        "params": _plain(dataclasses.asdict(s.params)),
    }


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False)


def write_scenario(s: Scenario, path):
    with open(path, "w") as fh:
        fh.write(dump_scenario(s))


def dump_defaults() -> str:
    return yaml.safe_dump({"params": _plain(dataclasses.asdict(Params()))}, sort_keys=False)
