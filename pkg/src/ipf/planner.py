"""Layer 5: maintains the set N of validated next operating regions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from .cpa import Migration, OrReport, TransitionReport, analyze_or, analyze_transition
from .model import (Event, EventKind, OperatingRegion, OpRange, ResourceState, SystemModel,
                    WorkloadClass, migration_delay)

S = ResourceState
FAILURE_KINDS = (EventKind.RESOURCE_FAILURE_IMMINENT, EventKind.RESOURCE_FAILED)


@dataclass
class PlannerConfig:
    period_ticks: int = 100
    fanout: int = 8
    capacity: int = 32
    t_max: float = 85.0
    enabled: bool = True


@dataclass(frozen=True)
class Snapshot:
    """Health and placement of the platform as seen by layer 5."""

    t: int
    states: Dict[str, ResourceState]
    temperatures: Dict[str, float]
    error_rates: Dict[str, float]
    top_levels: Dict[str, int]
    hosts: Dict[str, Optional[str]]
    broken: FrozenSet[str] = frozenset()

    @classmethod
    def of(cls, engine) -> "Snapshot":
        return cls(
            engine.clock,
            {r: rr.state for r, rr in engine.resources.items()},
            {r: rr.temperature for r, rr in engine.resources.items()},
            {r: engine.sensor_snapshot(r).error_rate for r in engine.resources},
            {r: rr.top_level for r, rr in engine.resources.items()},
            {c: cr.host for c, cr in engine.containers.items()},
            frozenset(r for r, rr in engine.resources.items() if rr.broken_at is not None),
        )


@dataclass
class NorEntry:
    region: OperatingRegion
    analysis: OrReport
    transition: TransitionReport
    migrations: Tuple[Migration, ...]
    created: int
    plan_deadline: int


@dataclass
class NorSet:
    capacity: int = 32
    entries: List[NorEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def add(self, entry: NorEntry) -> bool:
        if len(self.entries) >= self.capacity:
            return False
        self.entries.append(entry)
        return True

    def clear(self):
        self.entries = []

    def candidates(self, event: Event) -> List[NorEntry]:
        return sorted((e for e in self.entries if e.region.answers(event)),
                      key=lambda e: e.region.id)


def steady_state(system: SystemModel, power: Dict[str, float], ambient: float) -> Dict[str, float]:
    """Solve the RC network at equilibrium for constant per-resource power."""
    rids = sorted(system.resources)
    idx = {r: i for i, r in enumerate(rids)}
    n = len(rids)
    a = np.zeros((n, n))
    b = np.zeros(n)
    for r in rids:
        res = system.resources[r]
        i = idx[r]
        a[i, i] = 1.0 / res.resistance
        b[i] = power[r] + ambient / res.resistance
        for other, k in res.coupling.items():
            a[i, i] += k
            a[i, idx[other]] -= k
    temps = np.linalg.solve(a, b)
    return {r: float(temps[idx[r]]) for r in rids}


def define_op_ranges(region: OperatingRegion, system: SystemModel, snapshot: Optional[Snapshot],
                     t_max: float = 85.0, ambient: float = 25.0) -> Optional[Dict[str, OpRange]]:
    """Per BE resource, the largest level prefix whose full-load steady state stays below t_max.

    SC resources are charged at their fixed level and full load, so hot SC
    neighbours shrink a BE range. Returns None when some BE resource has no
    admissible level.
    """
    base = {}
    for r, res in system.resources.items():
        base[r] = res.static_w
        if r in region.fixed_sc_op:
            base[r] += res.dynamic_w_at(region.fixed_sc_op[r])
    ranges = {}
    for cid, r in sorted(region.container_to_resource.items()):
        if system.containers[cid].kind is not WorkloadClass.BE:
            continue
        res = system.resources[r]
        top = len(res.freq_levels) - 1
        if snapshot is not None:
            top = min(top, snapshot.top_levels.get(r, top))
        hi = -1
        for level in range(top + 1):
            power = dict(base)
            power[r] = res.static_w + res.dynamic_w_at(level)
            if steady_state(system, power, ambient)[r] >= t_max:
                break
            hi = level
        if hi < 0:
            return None
        ranges[r] = OpRange(0, hi, (False, True) if res.cache_capable else (False,))
    return ranges


def _container_util(system: SystemModel, cid: str, region: OperatingRegion) -> float:
    total = 0.0
    for t in system.container_tasks(cid, region):
        total += min(t.wcet.values()) / t.period
    return total


class Planner:
    """Generates NOR candidates by deterministic heuristics and keeps those CPA admits."""

    def __init__(self, system: SystemModel, config: PlannerConfig = None, tick_us: int = 100,
                 t_force: int = 200, link_bandwidth: int = 1 << 30, ambient: float = 25.0):
        self.system = system
        self.config = config or PlannerConfig()
        self.tick = tick_us
        self.t_force = t_force
        self.bandwidth = link_bandwidth
        self.ambient = ambient
        self.nors = NorSet(self.config.capacity)
        self.admitted_ever: List[NorEntry] = []
        self.counter = 0
        self.due = 0

    # -- layer-4 interface -------------------------------------------------

    def find(self, event: Event, engine=None) -> Optional[OperatingRegion]:
        """Lowest-id NOR answering `event` whose targets are still usable."""
        for e in self.nors.candidates(event):
            if engine is None or self._still_usable(e.region, engine):
                return e.region
        return None

    def _still_usable(self, region, engine) -> bool:
        for cid, r in region.container_to_resource.items():
            rr = engine.resources[r]
            if engine.host_of(cid) == r:
                continue
            if rr.broken_at is not None or rr.state in (S.MAINTENANCE, S.FAILED):
                return False
        return True

    def on_transition_committed(self, cor: OperatingRegion, engine=None):
        n = len(self.nors)
        self.nors.clear()
        if engine is not None:
            engine.emit(5, "planner", "nor_set_cleared", cor=cor.id, dropped=n)
            period = self.config.period_ticks * self.tick
            self.due = (engine.clock // period + 1) * period

    # -- periodic ---------------------------------------------------------

    def tick_at(self, engine, cor: OperatingRegion, healer=None):
        """Called at every tick boundary; plans once per period while N is empty."""
        if not self.config.enabled or engine.clock < self.due:
            return []
        if engine.clock % (self.config.period_ticks * self.tick):
            return []
        snap = Snapshot.of(engine)
        if healer is not None:
            healer(snap)
            snap = Snapshot.of(engine)
        if len(self.nors):
            return []
        return self.generate_nors(snap, cor, engine)

    def maintenance_reentry(self, snapshot: Snapshot, cor: OperatingRegion) -> List[Tuple[str, str]]:
        """Decide (resource, 'Idle' | 'Failed') for every Maintenance resource healthy again."""
        out = []
        for r in sorted(snapshot.states):
            if snapshot.states[r] is not S.MAINTENANCE or r in snapshot.broken:
                continue
            if snapshot.error_rates[r] > cor.tolerated_error_rate:
                continue
            out.append((r, "Idle" if snapshot.top_levels[r] > 0 else "Failed"))
        return out

    # -- generation -------------------------------------------------------

    def _usable(self, snap: Snapshot, cor: OperatingRegion, r: str, exclude=()) -> bool:
        return (r not in exclude and r not in snap.broken
                and snap.states[r] in (S.IDLE, S.IN_BE_ZONE)
                and snap.error_rates[r] <= cor.tolerated_error_rate)

    def _by_temp(self, snap, rids):
        return sorted(rids, key=lambda r: (snap.temperatures[r], r))

    def _sc_level(self, snap, r):
        return min(len(self.system.resources[r].freq_levels) - 1, snap.top_levels[r])

    def _failure_candidates(self, snap: Snapshot, cor: OperatingRegion, rid: str):
        cid = cor.container_on(rid)
        if cid is None:
            return []
        kind = self.system.containers[cid].kind
        idle = self._by_temp(snap, [r for r in snap.states if snap.states[r] is S.IDLE
                                    and self._usable(snap, cor, r, (rid,))])
        be_zone = self._by_temp(snap, [r for r in snap.states if snap.states[r] is S.IN_BE_ZONE
                                       and self._usable(snap, cor, r, (rid,))])
        targets = idle + be_zone if kind is WorkloadClass.SC else idle
        out = []
        for dst in targets[: self.config.fanout]:
            c2r = {c: r for c, r in cor.container_to_resource.items() if c != cid}
            sc_op = {r: lvl for r, lvl in cor.fixed_sc_op.items() if r != rid}
            displaced = cor.container_on(dst)
            if displaced is not None:
                # the displaced BE container takes the coolest spare, or stays unmapped
                del c2r[displaced]
                spare = [r for r in idle if r != dst]
                if spare:
                    c2r[displaced] = spare[0]
            c2r[cid] = dst
            if kind is WorkloadClass.SC:
                sc_op[dst] = self._sc_level(snap, dst)
            out.append((c2r, sc_op))
        return out

    def _ffd_candidate(self, snap: Snapshot, cor: OperatingRegion):
        pool = self._by_temp(snap, [r for r in snap.states
                                    if r not in snap.broken
                                    and snap.states[r] in (S.IDLE, S.IN_SC_ZONE, S.IN_BE_ZONE)
                                    and snap.error_rates[r] <= cor.tolerated_error_rate])
        mapped = sorted(cor.container_to_resource)
        order = sorted(mapped, key=lambda c: (
            self.system.containers[c].kind is not WorkloadClass.SC,
            -_container_util(self.system, c, cor), c))
        c2r, sc_op = {}, {}
        for cid in order:
            placed = False
            for r in pool:
                if r in c2r.values():
                    continue
                if self.system.containers[cid].kind is WorkloadClass.SC:
                    trial = self._region(cor, "probe", {cid: r}, {r: self._sc_level(snap, r)},
                                         {}, frozenset())
                    if not analyze_or(trial, self.system).passed:
                        continue
                    sc_op[r] = self._sc_level(snap, r)
                c2r[cid] = r
                placed = True
                break
            if not placed:
                return None
        return c2r, sc_op

    def _lto_candidate(self, cor: OperatingRegion):
        if not cor.fixed_sc_op:
            return None
        lowered = {r: max(0, lvl - 1) for r, lvl in cor.fixed_sc_op.items()}
        if lowered == dict(cor.fixed_sc_op):
            return None
        return dict(cor.container_to_resource), lowered

    def _region(self, cor, rid, c2r, sc_op, ranges, events):
        return OperatingRegion(rid, dict(cor.task_to_container), dict(c2r), cor.shared_config,
                               dict(ranges), dict(sc_op), frozenset(events),
                               cor.tolerated_error_rate)

    def _migrations(self, snap: Snapshot, c2r: Dict[str, str]) -> List[Migration]:
        out = []
        for cid, dst in sorted(c2r.items()):
            src = snap.hosts.get(cid)
            if src == dst:
                continue
            delay = migration_delay(self.system.footprint(cid), self.bandwidth)
            blocking = delay + self.tick
            if snap.states.get(dst) is S.IN_BE_ZONE:
                blocking += self.t_force
            out.append(Migration(cid, src, dst, delay, blocking))
        return out

    def plan_deadline(self) -> int:
        downs = [t.max_downtime for t in self.system.tasks.values() if t.is_sc]
        return min(downs) if downs else 0

    def generate_nors(self, snap: Snapshot, cor: OperatingRegion, engine=None) -> List[NorEntry]:
        proposals = []
        for rid in sorted(cor.container_to_resource.values()):
            keys = frozenset((k, rid) for k in FAILURE_KINDS)
            for c2r, sc_op in self._failure_candidates(snap, cor, rid):
                proposals.append((keys, c2r, sc_op))
        ffd = self._ffd_candidate(snap, cor)
        if ffd is not None:
            proposals.append((frozenset({(EventKind.WORKLOAD_CHANGE, None)}),) + ffd)
        lto = self._lto_candidate(cor)
        if lto is not None:
            proposals.append((frozenset({(EventKind.LONG_TERM_OPTIMIZATION, None)}),) + lto)

        admitted = []
        for keys, c2r, sc_op in proposals:
            entry, reason = self._validate(snap, cor, keys, c2r, sc_op)
            label = sorted(f"{k.value}:{s}" if s else k.value for k, s in keys)
            if entry is None:
                if engine is not None:
                    engine.emit(5, "planner", "nor_rejected", events=label, mapping=c2r,
                                reason=reason)
                continue
            if not self.nors.add(entry):
                break
            self.admitted_ever.append(entry)
            admitted.append(entry)
            if engine is not None:
                engine.emit(5, "planner", "nor_admitted", nor=entry.region.id, events=label,
                            mapping=dict(sorted(c2r.items())),
                            fixed_sc_op=dict(sorted(sc_op.items())),
                            op_ranges={r: [g.lo, g.hi] for r, g in
                                       sorted(entry.region.op_ranges.items())})
        return admitted

    def _validate(self, snap, cor, keys, c2r, sc_op):
        probe = self._region(cor, "candidate", c2r, sc_op, {}, keys)
        ranges = define_op_ranges(probe, self.system, snap, self.config.t_max, self.ambient)
        if ranges is None:
            return None, "no admissible OP range"
        region = replace(probe, op_ranges=ranges)
        report = analyze_or(region, self.system)
        if not report.passed:
            return None, "analyze_or failed: " + _failing(report.tasks, report.reasons)
        migrations = tuple(self._migrations(snap, c2r))
        trans = analyze_transition(cor, region, migrations, self.system)
        if not trans.passed:
            return None, "analyze_transition failed: " + _failing(trans.tasks,
                                                                trans.downtime_violations)
        self.counter += 1
        region = replace(region, id=f"N{self.counter:04d}")
        report.region = region.id
        return NorEntry(region, report, trans, migrations, snap.t, self.plan_deadline()), ""


def _failing(verdicts, reasons) -> str:
    names = [v.task for v in verdicts if not v.passed]
    return "; ".join(list(reasons) + [f"{n} misses its deadline" for n in names])
