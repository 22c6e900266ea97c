"""Production line and process support: containers executing on resources.

Scheduling inside a step is exact to the microsecond (releases, completions,
deadlines and migration arrivals are all event points). Physics is integrated
per tick: energy in integer nJ (mW x us), lumped-RC temperature with linear
neighbour coupling, and Bernoulli fault draws.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Tuple

from .model import (ZONE_OF, OperatingPoint, OperatingRegion, ResourceState, SystemModel,
                    WorkloadClass, effective_wcet, migration_delay, rm_priority_key)
from .trace import TraceLog


class OpOutOfRange(ValueError):
    def __init__(self, resource, field_name, detail=""):
        self.resource = resource
        self.field = field_name
        super().__init__(f"{resource}.{field_name} out of range {detail}".rstrip())


class IllegalTargetState(ValueError):
    pass


class FaultKind(str, enum.Enum):
    TRANSIENT = "Transient"
    INTERMITTENT = "Intermittent"
    PERMANENT = "Permanent"


@dataclass(frozen=True)
class FaultSpec:
    kind: FaultKind
    target: str
    at: Optional[int] = None
    base_rate: float = 0.0
    # errors/s gained per second since `start`
    aging_slope: float = 0.0
    start: int = 0
    # mean burst length in ticks (intermittent only), geometric
    burst_mean: float = 1.0

    def __post_init__(self):
        if self.kind is FaultKind.PERMANENT:
            if self.at is None or self.at < 0:
                raise ValueError(f"permanent fault on {self.target} needs a time")
        elif self.base_rate < 0 or self.aging_slope < 0:
            raise ValueError(f"fault rates on {self.target} must be non-negative")
        if self.burst_mean < 1:
            raise ValueError("burst_mean must be >= 1")

    def rate(self, t: int) -> float:
        if t < self.start:
            return 0.0
        return self.base_rate + self.aging_slope * (t - self.start) / 1e6


@dataclass
class EngineConfig:
    tick_us: int = 100
    link_bandwidth: int = 1 << 30
    error_window_us: int = 10_000
    sample_period_us: int = 1_000
    ambient_c: float = 25.0


@dataclass(frozen=True)
class SensorSample:
    resource: str
    timestamp: int
    temperature: float
    power: float
    error_rate: float
    utilization: float
    throughput: Dict[str, float]


@dataclass
class Job:
    task: str
    index: int
    release: int
    deadline: int
    remaining: Optional[int] = None
    basis: Optional[int] = None
    missed: bool = False


@dataclass
class TaskRun:
    task: str
    cls: str
    next_release: int
    next_index: int = 0
    jobs: Deque[Job] = field(default_factory=deque)
    released: int = 0
    completed: int = 0
    dropped: int = 0
    misses: int = 0
    worst_response: int = 0
    done_since_sample: int = 0
    throughput: float = 0.0


@dataclass
class ContainerRun:
    id: str
    cls: str
    order: List[str]
    host: Optional[str] = None
    paused: bool = False
    arriving: Optional[Tuple[str, int, bool]] = None
    running: Optional[Tuple[str, int]] = None
    wrr: Dict[str, float] = field(default_factory=dict)
    be_choice: Optional[str] = None
    be_until: int = 0


@dataclass
class ResourceRun:
    id: str
    state: ResourceState
    temperature: float
    level: int
    cache: bool = False
    top_level: int = 0
    energy_nj: int = 0
    broken_at: Optional[int] = None
    errors: Deque[Tuple[int, str]] = field(default_factory=deque)
    busy_since_sample: int = 0
    energy_since_sample: int = 0
    utilization: float = 0.0
    power_w: float = 0.0
    burst_left: int = 0

    def can_execute(self, t: int) -> bool:
        if self.state not in (ResourceState.IN_SC_ZONE, ResourceState.IN_BE_ZONE):
            return False
        return self.broken_at is None or t < self.broken_at


class Engine:
    """Layers 1 and 2. Controllers act between steps, at tick boundaries."""

    def __init__(self, system: SystemModel, cor: OperatingRegion, config: EngineConfig = None,
                 faults=(), seed: int = 0, log: TraceLog = None):
        self.system = system
        self.config = config or EngineConfig()
        self.region = cor
        self.slot_table = cor.shared_config
        self.log = log if log is not None else TraceLog()
        self.clock = 0
        self.seed = seed
        self.pending_op: Optional[Tuple[OperatingPoint, str]] = None
        self.failed_queue: List[Tuple[int, str]] = []
        self._last_sample = 0
        self.faults = list(faults)
        for rid, res in sorted(system.resources.items()):
            if res.base_error_rate > 0:
                self.faults.append(FaultSpec(FaultKind.TRANSIENT, rid, base_rate=res.base_error_rate))
        self._fault_rng = [random.Random(f"{seed}:fault:{n}:{f.target}")
                           for n, f in enumerate(self.faults)]
        self._static_mw = {r: round(res.static_w * 1000) for r, res in system.resources.items()}
        self._dyn_mw = {r: [round(res.dynamic_w_at(i) * 1000) for i in range(len(res.freq_levels))]
                        for r, res in system.resources.items()}

        self.resources: Dict[str, ResourceRun] = {}
        op = cor.default_op()
        for rid, res in sorted(system.resources.items()):
            level, cache = len(res.freq_levels) - 1, False
            if rid in op.sc_part:
                level = op.sc_part[rid]
            elif rid in op.be_part:
                level, cache = op.be_part[rid]
            self.resources[rid] = ResourceRun(rid, ResourceState.IDLE, self.config.ambient_c,
                                              level, cache, top_level=len(res.freq_levels) - 1,
                                              power_w=self._static_mw[rid] / 1000)
        self.containers: Dict[str, ContainerRun] = {}
        self.tasks: Dict[str, TaskRun] = {}
        for cid, c in sorted(system.containers.items()):
            members = system.container_tasks(cid, cor) if cid in cor.task_to_container.values() \
                else [system.tasks[t] for t in c.tasks]
            order = [t.id for t in sorted(members, key=rm_priority_key)]
            self.containers[cid] = ContainerRun(cid, c.kind.value, order,
                                                wrr={t: 0.0 for t in order})
            for t in members:
                self.tasks[t.id] = TaskRun(t.id, c.kind.value, next_release=t.jitter)
        for cid, rid in sorted(cor.container_to_resource.items()):
            self.resources[rid].state = ZONE_OF[system.containers[cid].kind]
            self.containers[cid].host = rid
        for rid, rr in self.resources.items():
            self.log.emit(0, 1, "engine", "resource_init", resource=rid, state=rr.state.value,
                          level=rr.level, cache=rr.cache)
        for cid, rid in sorted(cor.container_to_resource.items()):
            self.log.emit(0, 2, "engine", "container_placed", container=cid,
                          cls=self.containers[cid].cls, resource=rid)

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def host_of(self, cid: str) -> Optional[str]:
        return self.containers[cid].host

    def container_on(self, rid: str) -> Optional[str]:
        for cid, cr in self.containers.items():
            if cr.host == rid or (cr.arriving and cr.arriving[0] == rid):
                return cid
        return None

    def footprint(self, cid: str) -> int:
        return sum(self.system.tasks[t].memory_footprint for t in self.containers[cid].order)

    def current_op(self) -> OperatingPoint:
        sc, be = {}, {}
        for rid, rr in self.resources.items():
            if rid in self.region.fixed_sc_op:
                sc[rid] = rr.level
            elif rid in self.region.op_ranges:
                be[rid] = (rr.level, rr.cache)
        return OperatingPoint(sc, be)

    def in_flight(self, task: str) -> int:
        return len(self.tasks[task].jobs)

    def sensor_snapshot(self, rid: str) -> SensorSample:
        rr = self.resources[rid]
        horizon = self.clock - self.config.error_window_us
        count = sum(1 for t, _ in rr.errors if t > horizon)
        cid = self.container_on(rid)
        throughput = {}
        if cid is not None:
            throughput = {t: self.tasks[t].throughput for t in self.containers[cid].order}
        return SensorSample(rid, self.clock, rr.temperature, rr.power_w,
                            count / (self.config.error_window_us / 1e6), rr.utilization, throughput)

    def digest(self) -> str:
        dump = {
            "clock": self.clock,
            "resources": {r: [rr.state.value, repr(rr.temperature), rr.level, rr.cache,
                              rr.energy_nj, rr.broken_at, list(rr.errors)]
                          for r, rr in self.resources.items()},
            "containers": {c: [cr.host, cr.paused, cr.arriving, cr.running]
                           for c, cr in self.containers.items()},
            "tasks": {t: [tr.next_release, tr.released, tr.completed, tr.dropped,
                          [(j.index, j.remaining) for j in tr.jobs]]
                      for t, tr in self.tasks.items()},
            "rng": [hashlib.sha256(repr(g.getstate()).encode()).hexdigest() for g in self._fault_rng],
        }
        return hashlib.sha256(json.dumps(dump, sort_keys=True).encode()).hexdigest()

    # ------------------------------------------------------------------
    # commands from the layers above
    # ------------------------------------------------------------------

    def emit(self, layer, actor, kind, **payload):
        return self.log.emit(self.clock, layer, actor, kind, **payload)

    def set_region(self, region: OperatingRegion):
        """Adopt a new OR: SC levels jump to its fixed part; BE settings clamp into range."""
        self.region = region
        self.slot_table = region.shared_config
        for rid, rr in self.resources.items():
            if rid in region.fixed_sc_op:
                rr.level, rr.cache = region.fixed_sc_op[rid], False
            elif rid in region.op_ranges:
                rng = region.op_ranges[rid]
                rr.level = min(max(rr.level, rng.lo), rng.hi)
                if rr.cache not in rng.cache:
                    rr.cache = rng.cache[0]
        for cid, cr in self.containers.items():
            members = [t for t, c in region.task_to_container.items() if c == cid]
            if members:
                cr.order = sorted(members, key=lambda t: rm_priority_key(self.system.tasks[t]))

    def set_shared_config(self, slot_table, actor="SCtrl"):
        self.slot_table = slot_table
        self.emit(4, actor, "reconfigure_shared", slot_us=slot_table.slot_us,
                  slots=list(slot_table.slots))

    def set_resource_state(self, rid: str, state: ResourceState, actor: str, forced=False):
        rr = self.resources[rid]
        old = rr.state
        rr.state = state
        self.emit(4, actor, "resource_transition", resource=rid, to=state.value,
                  forced=forced, **{"from": old.value})

    def check_op(self, op: OperatingPoint):
        region = self.region
        for rid, lvl in op.sc_part.items():
            if region.fixed_sc_op.get(rid) != lvl:
                raise OpOutOfRange(rid, "freq_level", "(SC part is fixed by the OR)")
        for rid in region.fixed_sc_op:
            if rid not in op.sc_part:
                raise OpOutOfRange(rid, "freq_level", "(SC part missing)")
        for rid, (lvl, cache) in op.be_part.items():
            if rid in region.fixed_sc_op:
                raise OpOutOfRange(rid, "cache" if cache else "freq_level",
                                   "(SC resources run in safety-critical mode)")
            rng = region.op_ranges.get(rid)
            if rng is None:
                raise OpOutOfRange(rid, "freq_level", "(not a BE resource of the OR)")
            if not rng.lo <= lvl <= rng.hi:
                raise OpOutOfRange(rid, "freq_level", f"[{rng.lo},{rng.hi}]")
            if cache not in rng.cache:
                raise OpOutOfRange(rid, "cache")

    def apply_op(self, op: OperatingPoint, actor="engine"):
        """Validate now, take effect at the next tick boundary."""
        self.check_op(op)
        self.pending_op = (op, actor)

    def _commit_op(self):
        op, actor = self.pending_op
        self.pending_op = None
        changed = []
        for rid, (lvl, cache) in sorted(op.be_part.items()):
            rr = self.resources[rid]
            if (rr.level, rr.cache) != (lvl, cache):
                changed.append(rid)
                rr.level, rr.cache = lvl, cache
        self.emit(2, actor, "op_applied", changed=changed,
                  be_part={r: list(v) for r, v in sorted(op.be_part.items())})

    def pause_container(self, cid: str, actor="SCtrl"):
        cr = self.containers[cid]
        if not cr.paused:
            cr.paused = True
            cr.running = None
            self.emit(2, actor, "container_pause", container=cid, cls=cr.cls)

    def resume_container(self, cid: str, actor="SCtrl"):
        cr = self.containers[cid]
        if cr.paused:
            cr.paused = False
            self.emit(2, actor, "container_resume", container=cid, cls=cr.cls)

    def unload_container(self, cid: str, drop: bool, actor="SCtrl"):
        cr = self.containers[cid]
        rid = cr.host
        cr.host = None
        cr.running = None
        dropped = 0
        if drop:
            for t in cr.order:
                tr = self.tasks[t]
                dropped += len(tr.jobs)
                tr.dropped += len(tr.jobs)
                tr.jobs.clear()
        self.emit(2, actor, "container_unload", container=cid, cls=cr.cls, resource=rid,
                  dropped=dropped)

    def _check_target(self, cid: str, dst: str):
        cr = self.containers[cid]
        rr = self.resources.get(dst)
        if rr is None:
            raise IllegalTargetState(f"unknown resource {dst}")
        want = ZONE_OF[WorkloadClass(cr.cls)]
        if rr.state is not want or rr.broken_at is not None:
            raise IllegalTargetState(f"{dst} is {rr.state.value}, {cid} needs {want.value}")
        occupant = self.container_on(dst)
        if occupant is not None and occupant != cid:
            raise IllegalTargetState(f"{dst} already hosts {occupant}")

    def migrate_container(self, cid: str, src: Optional[str], dst: str, resume=True,
                          actor="SCtrl") -> int:
        """Pause, transfer code and data, then run on `dst` with job state preserved.

        `src=None` loads an unhosted container. Returns the completion time.
        """
        cr = self.containers[cid]
        if src == dst:
            raise IllegalTargetState(f"{cid}: source and target are both {dst}")
        if cr.host != src:
            raise IllegalTargetState(f"{cid} is on {cr.host}, not {src}")
        if cr.arriving is not None:
            raise IllegalTargetState(f"{cid} is already migrating")
        self._check_target(cid, dst)
        delay = migration_delay(self.footprint(cid), self.config.link_bandwidth)
        if not cr.paused:
            self.pause_container(cid, actor)
        cr.host = None
        cr.arriving = (dst, self.clock + delay, resume)
        self.emit(2, actor, "migrate_start", container=cid, cls=cr.cls, to=dst, delay=delay,
                  **{"from": src})
        if delay == 0:
            done = []
            self._arrive(cr, self.clock, done)
            self.log.extend_sorted(done)
        return self.clock + delay

    def load_container(self, cid: str, dst: str, resume=True, actor="SCtrl") -> int:
        return self.migrate_container(cid, None, dst, resume, actor)

    def _arrive(self, cr: ContainerRun, t: int, sink: list):
        dst, _, resume = cr.arriving
        cr.arriving = None
        cr.host = dst
        sink.append({"t": t, "layer": 2, "actor": "engine", "kind": "migrate_done",
                     "payload": {"container": cr.id, "cls": cr.cls, "resource": dst}})
        if resume and cr.paused:
            cr.paused = False
            sink.append({"t": t, "layer": 2, "actor": "engine", "kind": "container_resume",
                         "payload": {"container": cr.id, "cls": cr.cls}})

    # ------------------------------------------------------------------
    # time advance
    # ------------------------------------------------------------------

    def step(self, dt: int):
        """Advance by `dt` (a positive multiple of the tick).

        Returns (new trace records, sensor samples due at the new clock).
        """
        tick = self.config.tick_us
        if dt <= 0 or dt % tick:
            raise ValueError(f"step must be a positive multiple of {tick} us")
        first = len(self.log)
        t0, t1 = self.clock, self.clock + dt
        if self.pending_op is not None:
            self._commit_op()
        n_ticks = dt // tick
        busy = {rid: [0] * n_ticks for rid in self.resources}
        out: List[dict] = []

        for n, f in enumerate(self.faults):
            if f.kind is FaultKind.PERMANENT:
                rr = self.resources[f.target]
                boundary = -(-f.at // tick) * tick
                if rr.broken_at is None and boundary < t1:
                    rr.broken_at = max(boundary, t0)
                    out.append({"t": rr.broken_at, "layer": 1, "actor": "engine", "kind": "fault",
                                "payload": {"resource": f.target, "fault": f.kind.value}})
                    self.failed_queue.append((rr.broken_at, f.target))

        for cid in sorted(self.containers):
            self._run_container(self.containers[cid], t0, t1, busy, out)

        self._physics(t0, n_ticks, busy, out)
        self.clock = t1
        self.log.extend_sorted(out)
        samples = []
        if t1 % self.config.sample_period_us == 0:
            samples = self._sample(t1)
        return self.log.since(first), samples

    def _demand(self, task_id: str, cr: ContainerRun) -> int:
        task = self.system.tasks[task_id]
        rr = self.resources[cr.host]
        res = self.system.resources[cr.host]
        c = effective_wcet(task, self.system.containers[cr.id], res.freq_levels[rr.level],
                           self.slot_table, rr.cache)
        if c is None:
            # no interconnect slot: the job cannot make progress
            return 1 << 62
        return c

    def _release(self, cr: ContainerRun, t: int, out: list):
        for tid in cr.order:
            tr = self.tasks[tid]
            task = self.system.tasks[tid]
            while tr.next_release <= t:
                job = Job(tid, tr.next_index, tr.next_release, tr.next_release + task.deadline)
                tr.jobs.append(job)
                tr.next_index += 1
                tr.released += 1
                tr.next_release += task.period
                out.append({"t": job.release, "layer": 1, "actor": "engine", "kind": "release",
                            "payload": {"task": tid, "job": job.index, "cls": cr.cls,
                                        "container": cr.id}})

    def _check_deadlines(self, cr: ContainerRun, t: int, out: list):
        if cr.cls != "SC":
            return
        for tid in cr.order:
            tr = self.tasks[tid]
            for job in tr.jobs:
                if not job.missed and job.deadline <= t:
                    job.missed = True
                    tr.misses += 1
                    out.append({"t": job.deadline, "layer": 1, "actor": "engine",
                                "kind": "deadline_miss",
                                "payload": {"task": tid, "job": job.index, "cls": "SC"}})

    def _pick(self, cr: ContainerRun, t: int) -> Optional[Job]:
        if cr.cls == "SC":
            for tid in cr.order:
                jobs = self.tasks[tid].jobs
                if jobs:
                    return jobs[0]
            return None
        tick = self.config.tick_us
        ready = [tid for tid in cr.order if self.tasks[tid].jobs]
        if not ready:
            cr.be_choice = None
            return None
        if cr.be_choice not in ready or t >= cr.be_until:
            # smooth weighted round-robin, one quantum per tick
            total = 0.0
            for tid in ready:
                w = self.system.tasks[tid].qos_goal
                cr.wrr[tid] = cr.wrr.get(tid, 0.0) + w
                total += w
            best = sorted(ready, key=lambda x: (-cr.wrr[x], x))[0]
            cr.wrr[best] -= total
            cr.be_choice = best
            cr.be_until = t - t % tick + tick
        return self.tasks[cr.be_choice].jobs[0]

    def _next_event(self, cr: ContainerRun, t: int, t1: int) -> int:
        nxt = t1
        for tid in cr.order:
            tr = self.tasks[tid]
            if tr.next_release < nxt:
                nxt = tr.next_release
            if cr.cls == "SC":
                for job in tr.jobs:
                    if not job.missed and t < job.deadline < nxt:
                        nxt = job.deadline
        if cr.arriving is not None and t < cr.arriving[1] < nxt:
            nxt = cr.arriving[1]
        if cr.host is not None:
            broken = self.resources[cr.host].broken_at
            if broken is not None and t < broken < nxt:
                nxt = broken
        if cr.cls == "BE":
            tick = self.config.tick_us
            boundary = t - t % tick + tick
            if boundary < nxt:
                nxt = boundary
        return nxt

    def _run_container(self, cr: ContainerRun, t0: int, t1: int, busy, out: list):
        tick = self.config.tick_us
        t = t0
        while t < t1:
            if cr.arriving is not None and cr.arriving[1] <= t:
                self._arrive(cr, t, out)
            self._release(cr, t, out)
            self._check_deadlines(cr, t, out)
            nxt = self._next_event(cr, t, t1)
            job = None
            if cr.host is not None and not cr.paused and self.resources[cr.host].can_execute(t):
                job = self._pick(cr, t)
            if job is None:
                cr.running = None
                t = nxt
                continue
            demand = self._demand(job.task, cr)
            if job.remaining is None:
                job.remaining, job.basis = demand, demand
            elif job.basis != demand:
                job.remaining = -(-job.remaining * demand // job.basis)
                job.basis = demand
            key = (job.task, job.index)
            if cr.running != key:
                cr.running = key
                out.append({"t": t, "layer": 1, "actor": "engine", "kind": "dispatch",
                            "payload": {"task": job.task, "job": job.index, "cls": cr.cls,
                                        "resource": cr.host}})
            run = min(nxt - t, job.remaining)
            end = t + run
            buckets = busy[cr.host]
            a = t
            while a < end:
                k = (a - t0) // tick
                b = min(end, t0 + (k + 1) * tick)
                buckets[k] += b - a
                a = b
            job.remaining -= run
            t = end
            if job.remaining == 0:
                self._complete(cr, job, t, out)

    def _complete(self, cr: ContainerRun, job: Job, t: int, out: list):
        tr = self.tasks[job.task]
        tr.jobs.popleft()
        tr.completed += 1
        tr.done_since_sample += 1
        response = t - job.release
        if response > tr.worst_response:
            tr.worst_response = response
        cr.running = None
        if cr.cls == "BE":
            cr.be_choice = None
        out.append({"t": t, "layer": 1, "actor": "engine", "kind": "complete",
                    "payload": {"task": job.task, "job": job.index, "cls": cr.cls,
                                "resource": cr.host, "response": response}})

    def _physics(self, t0: int, n_ticks: int, busy, out: list):
        tick = self.config.tick_us
        dt_s = tick / 1e6
        amb = self.config.ambient_c
        rids = sorted(self.resources)
        params = self.system.resources
        fault_by_target = {}
        for n, f in enumerate(self.faults):
            if f.kind is not FaultKind.PERMANENT:
                fault_by_target.setdefault(f.target, []).append(n)
        for k in range(n_ticks):
            t = t0 + k * tick
            power = {}
            for rid in rids:
                rr = self.resources[rid]
                e = self._static_mw[rid] * tick + self._dyn_mw[rid][rr.level] * busy[rid][k]
                rr.energy_nj += e
                rr.energy_since_sample += e
                rr.busy_since_sample += busy[rid][k]
                power[rid] = e / tick / 1000.0
            temps = {rid: self.resources[rid].temperature for rid in rids}
            for rid in rids:
                res = params[rid]
                flow = power[rid] - (temps[rid] - amb) / res.resistance
                for other, kc in res.coupling.items():
                    flow += kc * (temps[other] - temps[rid])
                self.resources[rid].temperature = temps[rid] + dt_s * flow / res.capacitance
            for rid, idxs in fault_by_target.items():
                rr = self.resources[rid]
                if rr.broken_at is not None and t >= rr.broken_at:
                    continue
                for n in idxs:
                    self._draw_fault(n, rr, t, dt_s, out)
        horizon = t0 + n_ticks * tick - self.config.error_window_us
        for rr in self.resources.values():
            while rr.errors and rr.errors[0][0] <= horizon:
                rr.errors.popleft()

    def _draw_fault(self, n: int, rr: ResourceRun, t: int, dt_s: float, out: list):
        f = self.faults[n]
        rng = self._fault_rng[n]
        hit = False
        if f.kind is FaultKind.INTERMITTENT and rr.burst_left > 0:
            rr.burst_left -= 1
            hit = True
            rng.random()
        elif rng.random() < f.rate(t) * dt_s:
            hit = True
            if f.kind is FaultKind.INTERMITTENT and f.burst_mean > 1:
                # geometric burst length with the configured mean
                u = rng.random()
                length = 1 + int(math.log(1 - u) / math.log(1 - 1 / f.burst_mean))
                rr.burst_left = length - 1
        if hit:
            rr.errors.append((t, f.kind.value))
            out.append({"t": t, "layer": 1, "actor": "engine", "kind": "error",
                        "payload": {"resource": rr.id, "fault": f.kind.value}})

    def _sample(self, t: int) -> List[SensorSample]:
        period = t - self._last_sample
        self._last_sample = t
        for rr in self.resources.values():
            rr.utilization = min(1.0, rr.busy_since_sample / period)
            rr.power_w = rr.energy_since_sample / period / 1000.0
            rr.busy_since_sample = 0
            rr.energy_since_sample = 0
        for tr in self.tasks.values():
            tr.throughput = tr.done_since_sample / (period / 1e6)
            tr.done_since_sample = 0
        return [self.sensor_snapshot(rid) for rid in sorted(self.resources)]
