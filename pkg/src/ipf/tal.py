"""Runtime verification of the trace stream against deterministic timed automata.

Clocks are integer microseconds, guards and invariants are conjunctions of
comparisons against integer constants. A contract with ``scope="job"`` gets
one automaton instance per job of the bound task; ``scope="global"`` keeps a
single instance for the contract's lifetime.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple


class ContractError(ValueError):
    pass


class NondeterministicContract(ContractError):
    pass


class UnknownActionBinding(ContractError):
    pass


class OutOfOrderTrace(ValueError):
    pass


_OPS = {"<": operator.lt, "<=": operator.le, "==": operator.eq, ">=": operator.ge, ">": operator.gt}


@dataclass(frozen=True)
class Constraint:
    clock: str
    op: str
    bound: int

    def holds(self, clocks: Mapping[str, int]) -> bool:
        return _OPS[self.op](clocks[self.clock], self.bound)

    def interval(self) -> Tuple[int, float]:
        """Integer interval of clock values satisfying this constraint."""
        b = self.bound
        return {"<": (0, b - 1), "<=": (0, b), "==": (b, b),
                ">=": (b, float("inf")), ">": (b + 1, float("inf"))}[self.op]


@dataclass(frozen=True)
class Edge:
    source: str
    action: str
    target: str
    guard: Tuple[Constraint, ...] = ()
    resets: Tuple[str, ...] = ()

    def enabled(self, clocks) -> bool:
        return all(c.holds(clocks) for c in self.guard)


@dataclass(frozen=True)
class Contract:
    id: str
    locations: Tuple[str, ...]
    initial: str
    error: str
    clocks: Tuple[str, ...]
    edges: Tuple[Edge, ...]
    invariants: Mapping[str, Tuple[Constraint, ...]]
    binding: Mapping[str, Mapping[str, object]]
    scope: str = "global"
    container: Optional[str] = None

    def match(self, record: dict) -> Optional[str]:
        for symbol in sorted(self.binding):
            pattern = self.binding[symbol]
            if pattern.get("kind") != record["kind"]:
                continue
            payload = record["payload"]
            if all(payload.get(k) == v for k, v in pattern.items() if k != "kind"):
                return symbol
        return None

    def starts_instance(self, symbol: str) -> bool:
        return any(e.source == self.initial and e.action == symbol for e in self.edges)


def _guard_box(guard: Sequence[Constraint], clocks):
    box = {c: (0, float("inf")) for c in clocks}
    for g in guard:
        lo, hi = box[g.clock]
        glo, ghi = g.interval()
        box[g.clock] = (max(lo, glo), min(hi, ghi))
    return box


def _overlap(a: Edge, b: Edge, clocks) -> bool:
    ba, bb = _guard_box(a.guard, clocks), _guard_box(b.guard, clocks)
    for c in clocks:
        lo = max(ba[c][0], bb[c][0])
        hi = min(ba[c][1], bb[c][1])
        if lo > hi:
            return False
    return True


def _constraints(raw, clocks, where) -> Tuple[Constraint, ...]:
    out = []
    for item in raw or ():
        clock, op, bound = item
        if clock not in clocks:
            raise ContractError(f"{where}: unknown clock {clock}")
        if op not in _OPS:
            raise ContractError(f"{where}: unknown comparison {op}")
        if int(bound) != bound:
            raise ContractError(f"{where}: clock constants must be integers")
        out.append(Constraint(clock, op, int(bound)))
    return tuple(out)


def load_contract(spec: Mapping) -> Contract:
    """Compile a contract description; reject nondeterminism and unbound actions."""
    try:
        cid = spec["id"]
        locations = tuple(spec["locations"])
        initial, error = spec["initial"], spec["error"]
        clocks = tuple(spec.get("clocks", ()))
        raw_edges = spec.get("edges", ())
        binding = {k: dict(v) for k, v in spec.get("binding", {}).items()}
    except KeyError as exc:
        raise ContractError(f"contract missing field {exc.args[0]}") from None
    for loc in (initial, error):
        if loc not in locations:
            raise ContractError(f"{cid}: {loc} is not a declared location")
    edges = []
    for n, e in enumerate(raw_edges):
        where = f"{cid} edge {n}"
        if e["source"] not in locations or e["target"] not in locations:
            raise ContractError(f"{where}: unknown location")
        if e["action"] not in binding:
            raise UnknownActionBinding(f"{where}: action {e['action']!r} is not bound to the trace")
        for r in e.get("resets", ()):
            if r not in clocks:
                raise ContractError(f"{where}: unknown clock {r}")
        edges.append(Edge(e["source"], e["action"], e["target"],
                          _constraints(e.get("guard"), clocks, where), tuple(e.get("resets", ()))))
    if any(e.source == error for e in edges):
        raise ContractError(f"{cid}: the error location must have no outgoing edges")
    for i, a in enumerate(edges):
        for b in edges[i + 1:]:
            if a.source == b.source and a.action == b.action and _overlap(a, b, clocks):
                raise NondeterministicContract(
                    f"{cid}: two {a.action!r} edges from {a.source} can be enabled together")
    invariants = {loc: _constraints(inv, clocks, f"{cid} invariant at {loc}")
                  for loc, inv in spec.get("invariants", {}).items()}
    scope = spec.get("scope", "global")
    if scope not in ("global", "job"):
        raise ContractError(f"{cid}: scope must be 'global' or 'job'")
    return Contract(cid, locations, initial, error, clocks, tuple(edges), invariants, binding,
                    scope, spec.get("container"))


def deadline_contract(task: str, deadline: int, container: Optional[str] = None) -> Contract:
    """Per-job bound: each completion must follow its release within `deadline` us."""
    return load_contract({
        "id": f"deadline:{task}",
        "scope": "job",
        "container": container,
        "locations": ["idle", "busy", "violated"],
        "initial": "idle",
        "error": "violated",
        "clocks": ["x"],
        "invariants": {"busy": [["x", "<=", deadline]]},
        "edges": [
            {"source": "idle", "action": "release", "target": "busy", "resets": ["x"]},
            {"source": "busy", "action": "complete", "target": "idle",
             "guard": [["x", "<=", deadline]]},
        ],
        "binding": {"release": {"kind": "release", "task": task},
                    "complete": {"kind": "complete", "task": task}},
    })


@dataclass(frozen=True)
class Violation:
    contract: str
    location: str
    clocks: Mapping[str, int]
    timestamp: int
    reason: str
    instance: Optional[Tuple] = None

    ok = False


class _Ok:
    ok = True

    def __repr__(self):
        return "Ok"


OK = _Ok()


@dataclass
class Monitor:
    contract: Contract
    location: str = ""
    clocks: Dict[str, int] = field(default_factory=dict)
    last_t: Optional[int] = None
    history: List[Violation] = field(default_factory=list)
    instance: Optional[Tuple] = None

    def __post_init__(self):
        if not self.location:
            self.location = self.contract.initial
            self.clocks = {c: 0 for c in self.contract.clocks}
        if self.last_t is None:
            self.last_t = 0

    @property
    def violated(self) -> bool:
        return self.location == self.contract.error

    def _violate(self, t, reason):
        v = Violation(self.contract.id, self.location, dict(self.clocks), t, reason, self.instance)
        self.location = self.contract.error
        self.history.append(v)
        return v

    def advance(self, t: int):
        """Let time pass to `t`; returns a Violation if an invariant breaks."""
        if t < self.last_t:
            raise OutOfOrderTrace(f"{self.contract.id}: record at {t} after {self.last_t}")
        elapsed = t - self.last_t
        for c in self.clocks:
            self.clocks[c] += elapsed
        self.last_t = t
        if self.violated:
            return OK
        for inv in self.contract.invariants.get(self.location, ()):
            if not inv.holds(self.clocks):
                return self._violate(t, f"invariant {inv.clock} {inv.op} {inv.bound} breached")
        return OK

    def observe(self, record: dict):
        verdict = self.advance(record["t"])
        if not verdict.ok or self.violated:
            return verdict
        symbol = self.contract.match(record)
        if symbol is None:
            return OK
        enabled = [e for e in self.contract.edges
                   if e.source == self.location and e.action == symbol and e.enabled(self.clocks)]
        if not enabled:
            return self._violate(record["t"], f"no enabled {symbol!r} edge")
        edge = enabled[0]
        for c in edge.resets:
            self.clocks[c] = 0
        self.location = edge.target
        if self.violated:
            v = Violation(self.contract.id, edge.source, dict(self.clocks), record["t"],
                          f"{symbol!r} leads to the error location", self.instance)
            self.history.append(v)
            return v
        return OK


def observe(monitor: Monitor, record: dict):
    return monitor.observe(record)


def reset(monitor: Monitor, t: int = 0) -> Monitor:
    """Back to the initial location with clocks zeroed at `t`; verdict history kept."""
    monitor.location = monitor.contract.initial
    monitor.clocks = {c: 0 for c in monitor.contract.clocks}
    monitor.last_t = t
    return monitor


class TAL:
    """The monitors of one container."""

    def __init__(self, container: str, cls: str, contracts: Sequence[Contract]):
        self.container = container
        self.cls = cls
        self.contracts = list(contracts)
        self.globals = {c.id: Monitor(c) for c in self.contracts if c.scope == "global"}
        self.instances: Dict[Tuple, Monitor] = {}
        self.violations: List[Violation] = []

    def observe(self, record: dict) -> List[Violation]:
        found = []
        for m in self.globals.values():
            v = m.observe(record)
            if not v.ok:
                found.append(v)
        for key in list(self.instances):
            m = self.instances[key]
            v = m.advance(record["t"])
            if not v.ok:
                found.append(v)
                del self.instances[key]
        for c in self.contracts:
            if c.scope != "job":
                continue
            symbol = c.match(record)
            if symbol is None:
                continue
            key = (c.id, record["payload"].get("task"), record["payload"].get("job"))
            m = self.instances.get(key)
            if m is None:
                if not c.starts_instance(symbol):
                    continue
                m = self.instances[key] = Monitor(c, last_t=record["t"], instance=key[1:])
            v = m.observe(record)
            if not v.ok:
                found.append(v)
            if m.violated or m.location == c.initial:
                del self.instances[key]
        self.violations.extend(found)
        return found

    def finalize(self, t: int) -> List[Violation]:
        found = []
        for m in self.globals.values():
            v = m.advance(t)
            if not v.ok:
                found.append(v)
        for key in list(self.instances):
            v = self.instances[key].advance(t)
            if not v.ok:
                found.append(v)
                del self.instances[key]
        self.violations.extend(found)
        return found

    def reset(self, t: int = 0):
        """Restart the global monitors; per-job instances track their own jobs and survive."""
        for m in self.globals.values():
            reset(m, t)
