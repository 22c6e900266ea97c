"""Wires the five layers together and drives them on the tick loop."""

from __future__ import annotations

import csv
import dataclasses
import json
from collections import Counter
from pathlib import Path
from typing import Dict, List, Optional

from .engine import Engine, EngineConfig
from .lct import LCT, signals_of
from .mec import (BestEffortController, ControllerConfig, HazardConfig, SystemController)
from .model import Event, EventKind, ResourceState, WorkloadClass
from .planner import Planner, PlannerConfig
from .scenario import SCHEMA_VERSION, Scenario, _plain
from .tal import TAL, deadline_contract, load_contract
from .trace import TraceLog

TIMESERIES_FIELDS = ("t", "resource", "state", "temperature", "power", "utilization",
                     "error_rate", "level", "cache")


class Simulation:
    def __init__(self, scenario: Scenario, seed: Optional[int] = None, until: Optional[int] = None,
                 report_limited_qos: Optional[bool] = None):
        p = scenario.params
        self.scenario = scenario
        self.seed = p.seed if seed is None else seed
        self.until = p.until_us if until is None else until
        if self.until % p.tick_us:
            raise ValueError("run length must be a multiple of the tick")
        report = p.report_limited_qos if report_limited_qos is None else report_limited_qos
        system = scenario.system
        self.log = TraceLog()
        self.log.emit(0, 0, "cli", "run_header", schema_version=SCHEMA_VERSION,
                      scenario=scenario.name, seed=self.seed, until=self.until,
                      params=_plain(dataclasses.asdict(p)), report_limited_qos=report)
        cfg = EngineConfig(p.tick_us, p.link_bandwidth, p.hazard_window_us, p.sample_period_us,
                           p.ambient_c)
        self.engine = Engine(system, system.initial_or, cfg, scenario.faults, self.seed, self.log)
        t_force = p.t_force_ticks * p.tick_us
        self.planner = Planner(system, PlannerConfig(p.planning_period_ticks, p.planner_fanout,
                                                     p.planner_capacity, p.t_max,
                                                     p.planner_enabled),
                               p.tick_us, t_force, p.link_bandwidth, p.ambient_c)
        self.ctrl = SystemController(
            self.engine, self.planner, BestEffortController(p.bec_release_delay_us),
            ControllerConfig(t_force, report, HazardConfig(p.theta_hazard, p.hazard_k,
                                                           p.hazard_window_us)))
        self.ctrl.on_commit.append(self._committed)

        self.tals: Dict[str, TAL] = {}
        for cid, c in sorted(system.containers.items()):
            contracts = [load_contract(spec) for spec in scenario.contracts
                         if spec.get("container") == cid]
            if p.deadline_contracts and c.kind is WorkloadClass.SC:
                contracts += [deadline_contract(t, system.tasks[t].deadline, cid)
                              for t in sorted(c.tasks)]
            self.tals[cid] = TAL(cid, c.kind.value, contracts)
        self.task_container = {t: cid for cid, c in system.containers.items() for t in c.tasks}
        self.lcts: Dict[str, LCT] = {}
        if p.lct_enabled:
            self.lcts = {cid: LCT(cid, p.lct, self.seed) for cid, c in
                         sorted(system.containers.items()) if c.kind is WorkloadClass.BE}
        self.events = list(scenario.events)
        self.violations: List = []
        self.samples: Dict[str, object] = {}
        self.timeseries: List[dict] = []
        self.rewards: Dict[str, List[float]] = {c: [] for c in self.lcts}

    # ------------------------------------------------------------------

    def _committed(self, cor):
        for tal in self.tals.values():
            tal.reset(self.engine.clock)

    def _heal(self, snap):
        for rid, verdict in self.planner.maintenance_reentry(snap, self.ctrl.cor):
            rr = self.engine.resources[rid]
            if verdict == "Idle":
                rr.top_level -= 1
                self.ctrl.set_state(rid, ResourceState.IDLE, "SCtrl")
                self.engine.emit(5, "planner", "maintenance_reentry", resource=rid,
                                 top_level=rr.top_level)
            else:
                self.ctrl.set_state(rid, ResourceState.FAILED, "SCtrl")

    def _violation_event(self, v, tal: TAL) -> Event:
        host = self.engine.host_of(tal.container)
        payload = {"container": tal.container, "contract": v.contract, "reason": v.reason}
        if host is not None:
            payload["resource"] = host
        if v.instance:
            payload["task"], payload["job"] = v.instance
        return Event(EventKind.CONTRACT_VIOLATION, WorkloadClass(tal.cls), self.engine.clock,
                     origin_layer=3, payload=payload)

    def _monitor(self, records):
        for rec in records:
            if rec["kind"] not in ("release", "complete", "dispatch", "deadline_miss"):
                for tal in self.tals.values():
                    if any(c.scope == "global" for c in tal.contracts):
                        self._raise(tal, tal.observe(rec))
                continue
            cid = self.task_container.get(rec["payload"].get("task"))
            if cid is not None:
                self._raise(self.tals[cid], self.tals[cid].observe(rec))

    def _raise(self, tal, violations):
        for v in violations:
            self.violations.append(v)
            self.engine.emit(3, f"TAL:{tal.container}", "contract_violation",
                             container=tal.container, contract=v.contract, reason=v.reason,
                             at=v.timestamp, instance=list(v.instance) if v.instance else None)
            self.ctrl.submit(self._violation_event(v, tal))

    def _lct_step(self):
        eng = self.engine
        if self.ctrl.transitioning:
            return
        op = eng.current_op()
        changed = False
        for cid, lct in self.lcts.items():
            rid = eng.host_of(cid)
            cr = eng.containers[cid]
            if rid is None or cr.paused or rid not in self.ctrl.cor.op_ranges:
                continue
            sample = self.samples.get(rid)
            if sample is None:
                continue
            c = eng.system.containers[cid]
            goals = [eng.system.tasks[t].qos_goal for t in cr.order]
            sig = signals_of(sample, goals, c.power_budget)
            rule, delta, new = lct.control(sig, self.ctrl.cor, op, rid)
            self.rewards[cid].append(lct.last_reward)
            if new != op:
                op, changed = new, True
        if changed:
            eng.apply_op(op, actor="LCT")

    def _sampled(self, samples):
        for s in samples:
            self.samples[s.resource] = s
            rr = self.engine.resources[s.resource]
            self.timeseries.append({"t": s.timestamp, "resource": s.resource,
                                    "state": rr.state.value,
                                    "temperature": round(s.temperature, 6),
                                    "power": round(s.power, 6),
                                    "utilization": round(s.utilization, 6),
                                    "error_rate": s.error_rate, "level": rr.level,
                                    "cache": int(rr.cache)})

    def _controllers(self):
        eng = self.engine
        self.planner.tick_at(eng, self.ctrl.cor, self._heal)
        while self.events and self.events[0].at <= eng.clock:
            e = self.events.pop(0)
            payload = {"resource": e.resource} if e.resource else {}
            self.ctrl.submit(Event(e.kind, e.concerns, eng.clock, e.mode, 4, payload))
        self.ctrl.tick()
        lct_period = self.scenario.params.lct.period_ticks * eng.config.tick_us
        if self.lcts and eng.clock and eng.clock % lct_period == 0:
            self._lct_step()

    def advance_to(self, t: int) -> "Simulation":
        """Run the tick loop up to `t` without closing the run."""
        tick = self.engine.config.tick_us
        while self.engine.clock < min(t, self.until):
            self._controllers()
            records, samples = self.engine.step(tick)
            self._monitor(records)
            if samples:
                self._sampled(samples)
        return self

    def run(self) -> "Simulation":
        self.advance_to(self.until)
        for tal in self.tals.values():
            self._raise(tal, tal.finalize(self.until))
        self.ctrl.tick()
        return self

    # ------------------------------------------------------------------

    @property
    def exit_code(self) -> int:
        return 2 if self.ctrl.sc_failure_count() else 0

    def metrics(self) -> dict:
        eng, ctrl = self.engine, self.ctrl
        seconds = self.until / 1e6
        kinds = Counter(r["kind"] for r in self.log.records)
        sc, be = {}, {}
        for tid, tr in sorted(eng.tasks.items()):
            task = eng.system.tasks[tid]
            row = {"released": tr.released, "completed": tr.completed, "dropped": tr.dropped}
            if task.is_sc:
                row.update(deadline_misses=tr.misses, worst_response=tr.worst_response,
                           deadline=task.deadline)
                sc[tid] = row
            else:
                rate = tr.completed / seconds if seconds else 0.0
                row.update(throughput=rate, qos_goal=task.qos_goal,
                           attainment=min(1.0, rate / task.qos_goal))
                be[tid] = row
        directives = Counter(d.name for d in ctrl.directives)
        limited = [dict(event=d.event.kind.value, t=d.event.timestamp,
                        resource=d.event.subject) for d in ctrl.directives
                   if d.name == "LimitedQoS"]
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario.name,
            "seed": self.seed,
            "until_us": self.until,
            "exit_code": self.exit_code,
            "sc_deadline_misses": kinds["deadline_miss"],
            "sc_tasks": sc,
            "be_tasks": be,
            "energy_uj": {r: rr.energy_nj / 1000 for r, rr in sorted(eng.resources.items())},
            "energy_total_uj": sum(rr.energy_nj for rr in eng.resources.values()) / 1000,
            "transitions": ctrl.transitions,
            "failure_reports": ctrl.failures,
            "limited_qos": limited if ctrl.config.report_limited_qos else [],
            "limited_qos_count": len(limited),
            "directives": dict(sorted(directives.items())),
            "hazard_events": ctrl.hazard_events,
            "contract_violations": len(self.violations),
            "nors_admitted": len(self.planner.admitted_ever),
            "final_or": ctrl.cor.id,
            "final_states": {r: rr.state.value for r, rr in sorted(eng.resources.items())},
            "trace_digest": self.log.digest(),
        }

    def write_outputs(self, out_dir) -> Dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"trace": out / "trace.jsonl", "metrics": out / "metrics.json",
                 "timeseries": out / "timeseries.csv"}
        self.log.write(paths["trace"])
        paths["metrics"].write_text(json.dumps(self.metrics(), indent=2, sort_keys=True) + "\n")
        with open(paths["timeseries"], "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=TIMESERIES_FIELDS)
            w.writeheader()
            w.writerows(self.timeseries)
        return paths


def run_scenario(scenario: Scenario, **kw) -> Simulation:
    return Simulation(scenario, **kw).run()
