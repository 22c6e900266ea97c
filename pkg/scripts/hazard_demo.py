"""Run a scenario and print its control-plane timeline (layers 4 and 5)."""

import argparse
from pathlib import Path

from ipf.scenario import load_scenario
from ipf.sim import Simulation

ROOT = Path(__file__).resolve().parent.parent
SHOWN = {"event", "nor_admitted", "transition_begin", "handover_request", "resource_release",
         "resource_transition", "migrate_start", "migrate_done", "transition_commit",
         "nor_set_cleared", "failure_report", "deferred_failure_report", "limited_qos",
         "maintenance_reentry", "fault"}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenario", nargs="?", default=str(ROOT / "scenarios" / "hazard.yaml"))
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    sim = Simulation(load_scenario(args.scenario), seed=args.seed).run()
    for r in sim.log.records:
        if r["kind"] not in SHOWN:
            continue
        p = dict(r["payload"])
        p.pop("steps", None)
        detail = " ".join(f"{k}={v}" for k, v in p.items())
        print(f"{r['t']:>8} us  {r['actor']:<9} {r['kind']:<24} {detail}")
    m = sim.metrics()
    print(f"\nSC deadline misses {m['sc_deadline_misses']}, hazards {len(m['hazard_events'])}, "
          f"transitions {len(m['transitions'])}, exit code {m['exit_code']}")


if __name__ == "__main__":
    main()
