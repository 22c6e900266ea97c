"""Sweep random task sets and compare the busy-window verdict with simulation.

Prints one row per utilization bucket: sets, schedulable by analysis,
sets with a simulated miss, and disagreements (must be zero in the
unsafe direction: analysis pass with a simulated miss).
"""

import argparse
import math
import random
from collections import defaultdict

from ipf.cpa import analyze_or
from ipf.engine import Engine, EngineConfig
from ipf.taskgen import random_task_set, single_core_system, utilization


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sets", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-hyperperiod", type=int, default=6000, help="in ticks")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    rows = defaultdict(lambda: [0, 0, 0, 0, 0])
    for _ in range(args.sets):
        tasks = random_task_set(rng, max_hyperperiod_ticks=args.max_hyperperiod)
        system = single_core_system(tasks)
        eng = Engine(system, system.initial_or, EngineConfig())
        hyper = math.lcm(*(t.period for t in tasks))
        recs, _ = eng.step(hyper)
        recs += eng.step(eng.config.tick_us)[0]
        missed = any(r["kind"] == "deadline_miss" for r in recs)
        passed = analyze_or(system.initial_or, system).passed
        row = rows[min(11, int(utilization(tasks) * 10))]
        row[0] += 1
        row[1] += passed
        row[2] += missed
        row[3] += passed and missed
        row[4] += (not passed) and (not missed)

    print(f"{'U':>9} {'sets':>5} {'cpa ok':>7} {'sim miss':>8} {'unsafe':>6} {'pessim':>6}")
    for b in sorted(rows):
        n, ok, miss, unsafe, pess = rows[b]
        label = f"{b / 10:.1f}-{(b + 1) / 10:.1f}"
        print(f"{label:>9} {n:>5} {ok:>7} {miss:>8} {unsafe:>6} {pess:>6}")
    total_unsafe = sum(r[3] for r in rows.values())
    print(f"unsafe disagreements: {total_unsafe}")
    return 1 if total_unsafe else 0


if __name__ == "__main__":
    raise SystemExit(main())
