"""Random periodic task sets for schedulability sweeps."""

from __future__ import annotations

import math
import random
from typing import List, Sequence

from .model import (Container, Criticality, OperatingRegion, Resource, SystemModel, Task,
                    WorkloadClass, validate_scenario)


def uunifast_discard(rng: random.Random, n: int, total: float) -> List[float]:
    """n utilizations summing to `total`, each at most 1 (Bini and Buttazzo)."""
    while True:
        utils, rest = [], total
        for i in range(1, n):
            nxt = rest * rng.random() ** (1.0 / (n - i))
            utils.append(rest - nxt)
            rest = nxt
        utils.append(rest)
        if all(u <= 1.0 for u in utils):
            return utils


def random_task_set(rng: random.Random, n_range=(2, 5), period_ticks=(4, 50),
                    util_range=(0.3, 1.2), tick_us=100, max_hyperperiod_ticks=None,
                    freq=1000) -> List[Task]:
    """Implicit-deadline SC tasks with integer tick periods and µs WCETs.

    Sets whose hyperperiod exceeds `max_hyperperiod_ticks` are redrawn.
    """
    while True:
        n = rng.randint(*n_range)
        periods = [rng.randint(*period_ticks) for _ in range(n)]
        if max_hyperperiod_ticks and math.lcm(*periods) > max_hyperperiod_ticks:
            continue
        utils = uunifast_discard(rng, n, rng.uniform(*util_range))
        return [Task(f"t{i}", Criticality.D, p * tick_us, {freq: max(1, round(u * p * tick_us))},
                     p * tick_us, max_downtime=10 * p * tick_us, max_fit=10.0)
                for i, (u, p) in enumerate(zip(utils, periods))]


def single_core_system(tasks: Sequence[Task], freq=1000) -> SystemModel:
    """One resource `r1` running all tasks in SC container `c1`."""
    cont = Container("c1", WorkloadClass.SC, tuple(t.id for t in tasks))
    cor = OperatingRegion("COR0", {t.id: "c1" for t in tasks}, {"c1": "r1"},
                          fixed_sc_op={"r1": 0})
    return validate_scenario([Resource("r1", (freq,))], list(tasks), [cont], cor)


def utilization(tasks: Sequence[Task]) -> float:
    return sum(max(t.wcet.values()) / t.period for t in tasks)
