"""Greedy-action accuracy of the learning classifier on a stationary bandit.

One action pays 1, the others 0. Writes period,accuracy rows (mean over
seeds) to stdout or --csv.
"""

import argparse
import csv
import math
import random
import sys

from ipf.lct import ACTIONS, SIGNALS, LctConfig, RuleTable, greedy, select_action, update_fitness


def curve(seeds, periods, alpha, gamma, epsilon):
    config = LctConfig(alpha=alpha, gamma=gamma, epsilon=epsilon, capacity=len(ACTIONS))
    universal = {s: (-math.inf, math.inf) for s in SIGNALS}
    hits = [0] * periods
    for seed in range(seeds):
        rng = random.Random(seed)
        target = ACTIONS[rng.randrange(len(ACTIONS))]
        table = RuleTable(config)
        for a in ACTIONS:
            table.add(universal, a)
        fired = None
        for k in range(periods):
            if fired is not None:
                update_fitness(table, float(fired == target), table.rules)
            rule, fired = select_action(table.rules, rng, epsilon)
            table.last_fired = rule.id
            hits[k] += greedy(table.rules).action == target
    return [h / seeds for h in hits]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--periods", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.3)
    ap.add_argument("--gamma", type=float, default=0.0)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--csv", help="output file (default stdout)")
    args = ap.parse_args()
    acc = curve(args.seeds, args.periods, args.alpha, args.gamma, args.epsilon)
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    w = csv.writer(out)
    w.writerow(["period", "accuracy"])
    w.writerows((k, f"{a:.3f}") for k, a in enumerate(acc))
    tail = acc[-100:]
    print(f"final-100 mean accuracy {sum(tail) / len(tail):.3f}", file=sys.stderr)


if __name__ == "__main__":
    main()
