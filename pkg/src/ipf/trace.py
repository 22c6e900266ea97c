"""Line-delimited trace records and the post-hoc invariant audit."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional

SCHEMA_VERSION = 1
RECORD_FIELDS = ("t", "layer", "actor", "kind", "payload")


class MalformedTrace(ValueError):
    pass


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


class TraceLog:
    """Append-only, time-ordered record stream shared by all layers."""

    def __init__(self):
        self.records: List[dict] = []

    def emit(self, t: int, layer: int, actor: str, kind: str, **payload) -> dict:
        if self.records and t < self.records[-1]["t"]:
            raise ValueError(f"record at {t} after {self.records[-1]['t']}")
        rec = {"t": t, "layer": layer, "actor": actor, "kind": kind, "payload": payload}
        self.records.append(rec)
        return rec

    def extend_sorted(self, recs: Iterable[dict]):
        for rec in sorted(recs, key=lambda r: r["t"]):
            if self.records and rec["t"] < self.records[-1]["t"]:
                raise ValueError(f"record at {rec['t']} after {self.records[-1]['t']}")
            self.records.append(rec)

    def since(self, index: int) -> List[dict]:
        return self.records[index:]

    def __len__(self):
        return len(self.records)

    def lines(self) -> List[str]:
        return [dumps(r) for r in self.records]

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()

    def write(self, path):
        with open(path, "w") as fh:
            for line in self.lines():
                fh.write(line + "\n")


def read_trace(path) -> List[dict]:
    records = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedTrace(f"line {n}: {exc.msg}") from None
            if not isinstance(rec, dict) or any(k not in rec for k in RECORD_FIELDS):
                raise MalformedTrace(f"line {n}: record lacks one of {RECORD_FIELDS}")
            records.append(rec)
    return records


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


SC_PROJECTION_KINDS = ("dispatch", "complete")


def sc_projection(records: Iterable[dict]) -> List[str]:
    """SC dispatch decisions and completion times, one canonical line each."""
    return [dumps(r) for r in records
            if r["kind"] in SC_PROJECTION_KINDS and r["payload"].get("cls") == "SC"]


def be_projection(records: Iterable[dict]) -> List[str]:
    return [dumps(r) for r in records
            if r["kind"] in SC_PROJECTION_KINDS and r["payload"].get("cls") == "BE"]


# ---------------------------------------------------------------------------
# invariant audit
# ---------------------------------------------------------------------------

@dataclass
class InvariantResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class AuditReport:
    results: List[InvariantResult] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def result(self, name) -> InvariantResult:
        return next(r for r in self.results if r.name == name)

    def lines(self) -> List[str]:
        out = [f"WARNING: {w}" for w in self.warnings]
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            out.append(f"{status} {r.name}" + (f": {r.detail}" if r.detail else ""))
        return out


ZONE_FOR_KIND = {"SC": "InSCZone", "BE": "InBEZone"}


def _zone_consistency(records) -> Optional[str]:
    state, kinds, host = {}, {}, {}
    for n, r in enumerate(records):
        p, k = r["payload"], r["kind"]
        if k == "resource_init":
            state[p["resource"]] = p["state"]
        elif k == "resource_transition":
            state[p["resource"]] = p["to"]
        elif k in ("container_placed", "migrate_done"):
            kinds[p["container"]] = p["cls"]
            host[p["container"]] = p["resource"]
        elif k in ("migrate_start", "container_unload"):
            host.pop(p["container"], None)
        else:
            continue
        for c, rid in host.items():
            if state.get(rid) != ZONE_FOR_KIND[kinds[c]]:
                return f"record {n} (t={r['t']}): {c} ({kinds[c]}) on {rid} in {state.get(rid)}"
    return None


def _reconfigure_before_resume(records) -> Optional[str]:
    inside = False
    seen_resume = seen_reconf = False
    for n, r in enumerate(records):
        k = r["kind"]
        if k == "transition_begin":
            inside, seen_resume, seen_reconf = True, False, False
        elif k == "transition_commit":
            inside = False
        elif inside and k == "reconfigure_shared":
            if seen_resume:
                return f"record {n} (t={r['t']}): shared reconfiguration after a BE resume"
            seen_reconf = True
        elif inside and k == "container_resume" and r["payload"].get("cls") == "BE":
            if not seen_reconf:
                return f"record {n} (t={r['t']}): BE resume before shared reconfiguration"
            seen_resume = True
    return None


def _handover_exclusive(records) -> Optional[str]:
    released = set()
    occupant = {}
    for n, r in enumerate(records):
        p, k = r["payload"], r["kind"]
        if k == "resource_release":
            released.add(p["resource"])
        elif k == "resource_transition" and p["from"] == "InBEZone" and p["to"] == "InSCZone":
            if p["resource"] not in released:
                return f"record {n} (t={r['t']}): {p['resource']} claimed by SC before BE release"
            released.discard(p["resource"])
        elif k in ("container_placed", "migrate_done"):
            other = occupant.get(p["resource"])
            if other is not None and other != p["container"]:
                return f"record {n} (t={r['t']}): {p['resource']} hosts {other} and {p['container']}"
            occupant[p["resource"]] = p["container"]
        elif k in ("migrate_start", "container_unload"):
            for rid, c in list(occupant.items()):
                if c == p["container"]:
                    del occupant[rid]
    return None


def _nor_emptied_on_commit(records) -> Optional[str]:
    awaiting = None
    for n, r in enumerate(records):
        k = r["kind"]
        if k == "transition_commit":
            if awaiting is not None:
                return f"record {awaiting}: commit without N being emptied"
            awaiting = n
        elif awaiting is not None and k == "nor_set_cleared":
            awaiting = None
        elif awaiting is not None and r["layer"] == 5 and k == "nor_admitted":
            return f"record {n}: NOR admitted after commit before N was emptied"
    if awaiting is not None:
        return f"record {awaiting}: commit without N being emptied"
    return None


SC_CONTROL = {"SCtrl", "SCtrl+BEC"}


def _ultimate_control(records) -> Optional[str]:
    for n, r in enumerate(records):
        k, p = r["kind"], r["payload"]
        if k == "resource_transition" and "InSCZone" in (p["from"], p["to"]):
            if r["actor"] not in SC_CONTROL:
                return f"record {n}: SC-zone transition by {r['actor']}"
        elif k == "reconfigure_shared" and r["actor"] != "SCtrl":
            return f"record {n}: shared reconfiguration by {r['actor']}"
    return None


CHECKS = (
    ("zone-consistency", _zone_consistency),
    ("reconfigure-before-resume", _reconfigure_before_resume),
    ("handover-exclusivity", _handover_exclusive),
    ("N-emptied-on-commit", _nor_emptied_on_commit),
    ("ultimate-control", _ultimate_control),
)


def audit(records: List[dict]) -> AuditReport:
    report = AuditReport()
    if not records:
        report.warnings.append("empty trace; all invariants hold vacuously")
    for n in range(1, len(records)):
        if records[n]["t"] < records[n - 1]["t"]:
            raise MalformedTrace(f"record {n}: timestamp goes backwards")
    for name, check in CHECKS:
        problem = check(records)
        report.results.append(InvariantResult(name, problem is None, problem or ""))
    return report


def check_trace(path) -> AuditReport:
    return audit(read_trace(path))
