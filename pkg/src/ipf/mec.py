"""Layer 4: the System Controller (SCtrl) and the Best-Effort Controller (BEC).

SCtrl owns the resource state machine, the shared interconnect and every OR
transition. BEC only manages the BE zone and forwards BE events upward.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, Iterator, List, Optional, Set

from .engine import Engine, IllegalTargetState
from .model import (Event, EventKind, EventMode, OperatingRegion, ResourceState,
                    WorkloadClass)

S = ResourceState
SCTRL, BOTH, BEC_ACTOR = "SCtrl", "SCtrl+BEC", "BEC"


class IllegalTransition(ValueError):
    def __init__(self, src: ResourceState, dst: ResourceState):
        self.src, self.dst = src, dst
        super().__init__(f"{src.value} -> {dst.value} is not a legal resource transition")


class WrongActor(ValueError):
    pass


class TransitionDeadlineExceeded(RuntimeError):
    pass


# (from, to) -> actors allowed without force
_LEGAL = {
    (S.IDLE, S.IN_SC_ZONE): {SCTRL},
    (S.IN_SC_ZONE, S.IDLE): {SCTRL},
    (S.IDLE, S.IN_BE_ZONE): {BOTH},
    (S.IN_BE_ZONE, S.IDLE): {BOTH},
    (S.IN_BE_ZONE, S.IN_SC_ZONE): {BOTH},
    (S.IDLE, S.MAINTENANCE): {SCTRL},
    (S.IN_SC_ZONE, S.MAINTENANCE): {SCTRL},
    (S.IN_BE_ZONE, S.MAINTENANCE): {SCTRL, BOTH},
    (S.MAINTENANCE, S.IDLE): {SCTRL},
}


def resource_transition(state: ResourceState, target: ResourceState, actor: str,
                        forced: bool = False) -> ResourceState:
    """Check one lifecycle step against the legal set and its actor assignment."""
    if state is S.FAILED:
        raise IllegalTransition(state, target)
    if target is S.FAILED:
        allowed = {SCTRL}
    else:
        allowed = _LEGAL.get((state, target))
        if allowed is None:
            raise IllegalTransition(state, target)
        if forced and (state, target) == (S.IN_BE_ZONE, S.IN_SC_ZONE):
            allowed = {SCTRL}
    if actor not in allowed:
        raise WrongActor(f"{state.value} -> {target.value} needs {' or '.join(sorted(allowed))}, "
                         f"not {actor}")
    return target


# ---------------------------------------------------------------------------
# directives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    nor: OperatingRegion
    event: Event
    name = "Transition"


@dataclass(frozen=True)
class FailureReport:
    event: Event
    reason: str = ""
    name = "FailureReport"


@dataclass(frozen=True)
class DeferredFailureReport:
    event: Event
    name = "DeferredFailureReport"


@dataclass(frozen=True)
class DeferredFired:
    """The failure a deferred report predicted has materialized."""

    event: Event
    armed_by: Event
    name = "DeferredFired"


@dataclass(frozen=True)
class LimitedQoS:
    event: Event
    name = "LimitedQoS"


@dataclass(frozen=True)
class Ignore:
    event: Event
    reason: str = ""
    name = "Ignore"


# ---------------------------------------------------------------------------
# transition plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    action: str
    container: Optional[str] = None
    resource: Optional[str] = None
    src: Optional[str] = None
    dst: Optional[str] = None
    target: Optional[ResourceState] = None

    def to_dict(self) -> dict:
        d = {"action": self.action}
        for k in ("container", "resource", "src", "dst"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        if self.target is not None:
            d["target"] = self.target.value
        return d


MOVES = ("MigrateContainer", "LoadContainer")


@dataclass(frozen=True)
class TransitionPlan:
    source: str
    to: OperatingRegion
    steps: tuple
    deadline: int
    t_force: int
    subject: Optional[str] = None

    def __post_init__(self):
        seen_reconf = False
        for s in self.steps:
            if s.action == "ReconfigureShared":
                seen_reconf = True
            elif s.action == "ResumeContainer" and not seen_reconf:
                raise ValueError(f"{s.container} resumes before the shared reconfiguration")
        if self.t_force <= 0:
            raise ValueError("every handover needs a positive forced-reclaim timeout")

    @property
    def migration_steps(self) -> List[Step]:
        return [s for s in self.steps if s.action in MOVES]


def build_plan(engine: Engine, cor: OperatingRegion, nor: OperatingRegion, deadline: int,
               t_force: int, subject: Optional[str] = None,
               maintained: Set[str] = frozenset()) -> TransitionPlan:
    """Order the primitive actions that take the platform from `cor` to `nor`."""
    system = engine.system
    kind = {c: system.containers[c].kind for c in system.containers}
    placed = {c: engine.host_of(c) for c in system.containers}
    new = dict(nor.container_to_resource)
    be = sorted(c for c in kind if kind[c] is WorkloadClass.BE)
    sc = sorted(c for c in kind if kind[c] is WorkloadClass.SC)
    state = {r: rr.state for r, rr in engine.resources.items()}
    steps: List[Step] = []

    live_be = [c for c in be if placed[c] is not None]
    steps += [Step("PauseContainer", container=c) for c in live_be]
    steps.append(Step("ReconfigureShared"))
    moving_be = [c for c in live_be if new.get(c) != placed[c]]
    steps += [Step("UnloadContainer", container=c, src=placed[c]) for c in moving_be]
    vacated_be = {placed[c] for c in moving_be}

    sc_moves = [c for c in sc if c in new and new[c] != placed[c]]
    for c in sc_moves:
        dst = new[c]
        if state[dst] is S.IN_BE_ZONE:
            steps.append(Step("HandOver", resource=dst))
            vacated_be.discard(dst)
        elif state[dst] is S.IDLE:
            steps.append(Step("AllocateResource", resource=dst, target=S.IN_SC_ZONE))
    for c in sc_moves:
        src = placed[c]
        steps.append(Step("MigrateContainer" if src else "LoadContainer", container=c,
                          src=src, dst=new[c]))
    if sc_moves:
        steps.append(Step("AwaitArrivals"))

    still_sc = {new[c] for c in sc if c in new}
    for c in sc_moves:
        src = placed[c]
        if src is not None and src not in still_sc:
            steps.append(Step("ReleaseResource", resource=src,
                              target=_release_target(src, subject, maintained)))

    still_be = {new[c] for c in be if c in new}
    for c in be:
        if c in new and new[c] != placed[c]:
            dst = new[c]
            if state[dst] is not S.IN_BE_ZONE:
                steps.append(Step("AllocateResource", resource=dst, target=S.IN_BE_ZONE))
            steps.append(Step("LoadContainer", container=c, dst=dst))
    if any(s.action == "LoadContainer" and kind[s.container] is WorkloadClass.BE for s in steps):
        steps.append(Step("AwaitArrivals"))
    for rid in sorted(vacated_be):
        if rid not in still_be:
            steps.append(Step("ReleaseResource", resource=rid,
                              target=_release_target(rid, subject, maintained)))
    steps += [Step("ResumeContainer", container=c) for c in be if c in new]
    return TransitionPlan(cor.id, nor, tuple(steps), deadline, t_force, subject)


def _release_target(rid, subject, maintained):
    if rid != subject:
        return S.IDLE
    return S.FAILED if rid in maintained else S.MAINTENANCE


# ---------------------------------------------------------------------------
# hazard detection
# ---------------------------------------------------------------------------

@dataclass
class HazardConfig:
    theta: float = 10.0
    k: int = 3
    window_us: int = 10_000


@dataclass
class HazardDetector:
    """Sustained error-rate excursion over k windows, edge-triggered."""

    config: HazardConfig = field(default_factory=HazardConfig)
    streak: Dict[str, int] = field(default_factory=dict)
    armed: Dict[str, bool] = field(default_factory=dict)

    def observe(self, rid: str, rate: float, tolerated: float) -> bool:
        cfg = self.config
        if rate > cfg.theta:
            self.streak[rid] = self.streak.get(rid, 0) + 1
        else:
            self.streak[rid] = 0
            self.armed[rid] = True
            return False
        if self.streak[rid] >= cfg.k and rate > tolerated and self.armed.get(rid, True):
            self.armed[rid] = False
            return True
        return False


# ---------------------------------------------------------------------------
# controllers
# ---------------------------------------------------------------------------

@dataclass
class BestEffortController:
    """Scripted BEC: releases a reclaimed resource after `release_delay` us."""

    release_delay: int = 0

    def forward_event(self, event: Event) -> Event:
        if event.concerns is not WorkloadClass.BE:
            raise ValueError("BEC only forwards BE-concern events")
        payload = dict(event.payload)
        payload["forwarded_by"] = BEC_ACTOR
        return Event(event.kind, event.concerns, event.timestamp, event.mode,
                     event.origin_layer, payload)


def forward_event(bec: BestEffortController, event: Event) -> Event:
    return bec.forward_event(event)


@dataclass
class ControllerConfig:
    t_force: int = 200
    report_limited_qos: bool = False
    hazard: HazardConfig = field(default_factory=HazardConfig)


class SystemController:
    """SCtrl: handles every event, runs transitions, keeps the failure log."""

    def __init__(self, engine: Engine, planner, bec: BestEffortController = None,
                 config: ControllerConfig = None):
        self.engine = engine
        self.planner = planner
        self.bec = bec or BestEffortController()
        self.config = config or ControllerConfig()
        self.cor: OperatingRegion = engine.region
        self.hazards = HazardDetector(self.config.hazard)
        self.pending: Deque[Event] = deque()
        self.directives: List = []
        self.failures: List[dict] = []
        self.deferred: Dict[Optional[str], Event] = {}
        self.maintained: Set[str] = set()
        self.transitions: List[dict] = []
        self.hazard_events: List[dict] = []
        self.on_commit: List[Callable[[OperatingRegion], None]] = []
        self._exec: Optional[Iterator[int]] = None
        self._wait = 0

    # -- queries ----------------------------------------------------------

    @property
    def transitioning(self) -> bool:
        return self._exec is not None

    def hosted_class(self, rid: Optional[str]) -> Optional[WorkloadClass]:
        if rid is None:
            return None
        cid = self.engine.container_on(rid)
        return None if cid is None else self.engine.system.containers[cid].kind

    def sc_failure_count(self) -> int:
        return sum(1 for f in self.failures if f["concerns"] == "SC")

    # -- state machine ----------------------------------------------------

    def set_state(self, rid: str, target: ResourceState, actor: str, forced=False):
        rr = self.engine.resources[rid]
        resource_transition(rr.state, target, actor, forced)
        self.engine.set_resource_state(rid, target, actor, forced)

    # -- events -----------------------------------------------------------

    def submit(self, event: Event):
        """Entry point for layer 3/4 events; BE events pass through BEC first."""
        if event.concerns is WorkloadClass.BE and "forwarded_by" not in event.payload:
            event = self.bec.forward_event(event)
        if self.transitioning:
            self.pending.append(event)
            return None
        return self._act(event)

    def decide(self, event: Event):
        nor = self.planner.find(event, self.engine) if self.planner is not None else None
        if nor is not None:
            return Transition(nor, event)
        lost = event.payload.get("container")
        if (event.kind is EventKind.CONTRACT_VIOLATION and lost is not None
                and self.engine.host_of(lost) is None
                and self.engine.containers[lost].arriving is None):
            # consequence of a failure already handled, not a new one
            return Ignore(event, "container is not deployed")
        if event.kind is EventKind.RESOURCE_FAILED and event.subject in self.deferred:
            return DeferredFired(event, self.deferred[event.subject])
        if event.subject is not None and self.hosted_class(event.subject) is None:
            return Ignore(event, "resource hosts no container")
        if event.concerns is WorkloadClass.BE:
            return LimitedQoS(event)
        if event.mode is EventMode.REACTIVE:
            return FailureReport(event, "no valid NOR")
        return DeferredFailureReport(event)

    def _act(self, event: Event):
        eng = self.engine
        eng.emit(4, SCTRL, "event", **_event_payload(event))
        d = self.decide(event)
        self.directives.append(d)
        ev = _event_payload(event)
        if isinstance(d, Transition):
            if event.subject in self.deferred:
                del self.deferred[event.subject]
                eng.emit(4, SCTRL, "deferred_failure_report_disarmed", resource=event.subject)
            self._start(d)
        elif isinstance(d, FailureReport):
            self._fail(event, d.reason, "failure_report")
        elif isinstance(d, DeferredFailureReport):
            self.deferred[event.subject] = event
            eng.emit(4, SCTRL, "deferred_failure_report", state="armed", **ev)
        elif isinstance(d, DeferredFired):
            del self.deferred[event.subject]
            self._fail(event, "predicted failure materialized", "deferred_failure_report",
                       state="fired")
        elif isinstance(d, LimitedQoS):
            eng.emit(4, SCTRL, "limited_qos", reported=self.config.report_limited_qos, **ev)
        else:
            eng.emit(4, SCTRL, "event_ignored", reason=d.reason, **ev)
        if event.kind is EventKind.RESOURCE_FAILED and not isinstance(d, Transition):
            self._evacuate_failed(event.subject)
        return d

    def _fail(self, event, reason, kind, **extra):
        rec = dict(_event_payload(event), reason=reason, report=kind, t=self.engine.clock)
        self.failures.append(rec)
        self.engine.emit(4, SCTRL, kind, reason=reason, **extra, **_event_payload(event))

    def _evacuate_failed(self, rid):
        eng = self.engine
        if rid is None or eng.resources[rid].state is S.FAILED:
            return
        cid = eng.container_on(rid)
        if cid is not None and eng.host_of(cid) == rid:
            eng.unload_container(cid, drop=True, actor=SCTRL)
        self.set_state(rid, S.FAILED, SCTRL)

    # -- periodic work, called at each tick boundary ----------------------

    def tick(self):
        eng = self.engine
        for t, rid in eng.failed_queue:
            cls = self.hosted_class(rid)
            if cls is None:
                if eng.resources[rid].state is not S.FAILED:
                    self.set_state(rid, S.FAILED, SCTRL)
                if rid in self.deferred:
                    # predicted failure on an evacuated resource still fires the report
                    self.submit(Event(EventKind.RESOURCE_FAILED, WorkloadClass.SC, eng.clock,
                                      payload={"resource": rid, "fault_at": t}))
                continue
            self.submit(Event(EventKind.RESOURCE_FAILED, cls, eng.clock,
                              payload={"resource": rid, "fault_at": t}))
        eng.failed_queue.clear()
        if eng.clock and eng.clock % self.config.hazard.window_us == 0:
            self._detect_hazards()
        self._advance()

    def _detect_hazards(self):
        eng = self.engine
        for rid in sorted(eng.resources):
            rr = eng.resources[rid]
            cls = self.hosted_class(rid)
            if cls is None or rr.state is S.FAILED:
                continue
            rate = eng.sensor_snapshot(rid).error_rate
            if self.hazards.observe(rid, rate, self.cor.tolerated_error_rate):
                self.hazard_events.append({"t": eng.clock, "resource": rid, "rate": rate})
                self.submit(Event(EventKind.RESOURCE_FAILURE_IMMINENT, cls, eng.clock,
                                  payload={"resource": rid, "error_rate": rate}))

    def detect_hazard(self, samples) -> List[Event]:
        """Stateless-call form over a list of samples; returns the events raised."""
        out = []
        for s in samples:
            cls = self.hosted_class(s.resource)
            if cls is not None and self.hazards.observe(s.resource, s.error_rate,
                                                          self.cor.tolerated_error_rate):
                out.append(Event(EventKind.RESOURCE_FAILURE_IMMINENT, cls, s.timestamp,
                                 payload={"resource": s.resource, "error_rate": s.error_rate}))
        return out

    # -- transitions ------------------------------------------------------

    def plan_deadline(self) -> int:
        downs = [t.max_downtime for t in self.engine.system.tasks.values() if t.is_sc]
        return min(downs) if downs else 0

    def _start(self, d: Transition):
        plan = build_plan(self.engine, self.cor, d.nor, self.plan_deadline(),
                          self.config.t_force, d.event.subject, self.maintained)
        self.execute_transition(plan)

    def execute_transition(self, plan: TransitionPlan):
        if self.transitioning:
            raise RuntimeError("a transition is already in progress")
        self._exec = self._run(plan)
        self._wait = self.engine.clock
        self._advance()

    def _advance(self):
        while self._exec is not None and self.engine.clock >= self._wait:
            try:
                self._wait = next(self._exec)
            except StopIteration:
                self._exec = None
                while self.pending and not self.transitioning:
                    self._act(self.pending.popleft())

    def _run(self, plan: TransitionPlan):
        eng = self.engine
        tick = eng.config.tick_us
        began = eng.clock
        eng.emit(4, SCTRL, "transition_begin", source=plan.source, to=plan.to.id,
                 deadline=plan.deadline, steps=[s.to_dict() for s in plan.steps])
        downtime: Dict[str, tuple] = {}
        arrivals: List[int] = []
        try:
            for s in plan.steps:
                a = s.action
                if a == "PauseContainer":
                    eng.pause_container(s.container, SCTRL)
                elif a == "ReconfigureShared":
                    eng.set_shared_config(plan.to.shared_config, SCTRL)
                elif a == "UnloadContainer":
                    eng.unload_container(s.container, drop=False, actor=SCTRL)
                elif a == "HandOver":
                    t_req = eng.clock
                    eng.emit(4, SCTRL, "handover_request", resource=s.resource,
                             t_force=plan.t_force)
                    delay = self.bec.release_delay
                    if delay <= plan.t_force:
                        if delay:
                            yield t_req + -(-delay // tick) * tick
                        eng.emit(4, BEC_ACTOR, "resource_release", resource=s.resource,
                                 forced=False)
                        self.set_state(s.resource, S.IN_SC_ZONE, BOTH)
                    else:
                        yield t_req + plan.t_force
                        eng.emit(4, SCTRL, "resource_release", resource=s.resource, forced=True)
                        self.set_state(s.resource, S.IN_SC_ZONE, SCTRL, forced=True)
                elif a == "AllocateResource":
                    if eng.resources[s.resource].state is not s.target:
                        actor = SCTRL if s.target is S.IN_SC_ZONE else BOTH
                        self.set_state(s.resource, s.target, actor)
                elif a in MOVES:
                    sc = eng.containers[s.container].cls == "SC"
                    src = eng.host_of(s.container)
                    broken = eng.resources[src].broken_at if src is not None else None
                    if src is not None and (broken is not None or not sc):
                        # state of a failed host is lost; BE state travels with the unload
                        eng.unload_container(s.container, drop=broken is not None, actor=SCTRL)
                        src = None
                    t0 = eng.clock
                    if src is not None:
                        done = eng.migrate_container(s.container, src, s.dst, True, SCTRL)
                    else:
                        done = eng.load_container(s.container, s.dst, resume=sc, actor=SCTRL)
                    if sc:
                        downtime[s.container] = (t0 if broken is None else broken, done)
                    arrivals.append(done)
                elif a == "AwaitArrivals":
                    if arrivals and max(arrivals) > eng.clock:
                        yield -(-max(arrivals) // tick) * tick
                    arrivals.clear()
                elif a == "ReleaseResource":
                    rr = eng.resources[s.resource]
                    if rr.state is S.FAILED:
                        continue
                    target = S.FAILED if rr.broken_at is not None else s.target
                    actor = SCTRL if rr.state is S.IN_SC_ZONE or target is not S.IDLE else BOTH
                    self.set_state(s.resource, target, actor)
                    if target is S.MAINTENANCE:
                        self.maintained.add(s.resource)
                elif a == "ResumeContainer":
                    if eng.host_of(s.container) is not None:
                        eng.resume_container(s.container, SCTRL)
        except IllegalTargetState as exc:
            self._abort(plan, str(exc))
            return
        disruption = max((b - a for a, b in downtime.values()), default=0)
        record = {"source": plan.source, "to": plan.to.id, "began": began,
                  "duration": eng.clock - began, "sc_disruption": disruption,
                  "migrations": len(plan.migration_steps)}
        eng.emit(4, SCTRL, "transition_commit", **record)
        self.transitions.append(record)
        self.cor = plan.to
        eng.set_region(plan.to)
        if self.planner is not None:
            self.planner.on_transition_committed(plan.to, eng)
        for hook in self.on_commit:
            hook(plan.to)
        if disruption > plan.deadline:
            ev = Event(EventKind.CONTRACT_VIOLATION, WorkloadClass.SC, eng.clock,
                       payload={"transition": plan.to.id})
            self.directives.append(FailureReport(ev, "TransitionDeadlineExceeded"))
            self._fail(ev, "TransitionDeadlineExceeded", "failure_report",
                       disruption=disruption, deadline=plan.deadline)

    def _abort(self, plan, why):
        ev = Event(EventKind.CONTRACT_VIOLATION, WorkloadClass.SC, self.engine.clock,
                   payload={"transition": plan.to.id})
        self.directives.append(FailureReport(ev, f"TransitionAborted: {why}"))
        self._fail(ev, f"TransitionAborted: {why}", "failure_report")


def _event_payload(event: Event) -> dict:
    d = {"event": event.kind.value, "mode": event.mode.value, "concerns": event.concerns.value,
         "origin_layer": event.origin_layer}
    if event.subject is not None:
        d["resource"] = event.subject
    rest = {k: v for k, v in sorted(event.payload.items()) if k != "resource"}
    if rest:
        d["detail"] = rest
    return d


def handle_event(ctrl: SystemController, event: Event):
    """Decide and act on one event; returns the directive."""
    return ctrl.submit(event)
