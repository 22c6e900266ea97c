"""Learning classifier table: rule-based Q-learning over the BE operating point.

No rule discovery beyond covering; fitness is the classic single-step
Q update, applied to the rule that fired in the previous period.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .model import OperatingPoint, OperatingRegion

SIGNALS = ("temperature", "utilization", "throughput", "power")

# half-widths of a covering rule's intervals, per signal
COVER_WIDTH = {"temperature": 5.0, "utilization": 0.1, "throughput": 0.1, "power": 0.1}

# freq delta x cache toggle
ACTIONS: Tuple[Tuple[int, bool], ...] = tuple((d, c) for d in (-1, 0, 1) for c in (False, True))


class NoPreviousAction(RuntimeError):
    pass


@dataclass
class Rule:
    id: int
    condition: Dict[str, Tuple[float, float]]
    action: Tuple[int, bool]
    fitness: float = 0.0
    experience: int = 0

    def __post_init__(self):
        for sig, (lo, hi) in self.condition.items():
            if lo > hi:
                raise ValueError(f"rule {self.id}: interval on {sig} is reversed")

    def matches(self, signals: Dict[str, float]) -> bool:
        return all(lo <= signals[s] <= hi for s, (lo, hi) in self.condition.items())


@dataclass
class LctConfig:
    alpha: float = 0.3
    gamma: float = 0.5
    epsilon: float = 0.1
    capacity: int = 64
    period_ticks: int = 10
    power_penalty: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.capacity < 1:
            raise ValueError("capacity must be positive")


@dataclass
class RuleTable:
    config: LctConfig = field(default_factory=LctConfig)
    rules: List[Rule] = field(default_factory=list)
    last_fired: Optional[int] = None
    next_id: int = 0

    def add(self, condition, action, fitness=0.0) -> Rule:
        if len(self.rules) >= self.config.capacity:
            # evict the weakest rule, oldest first among equals
            weakest = min(self.rules, key=lambda r: (r.fitness, r.id))
            self.rules.remove(weakest)
            if self.last_fired == weakest.id:
                self.last_fired = None
        rule = Rule(self.next_id, dict(condition), tuple(action), fitness)
        self.next_id += 1
        self.rules.append(rule)
        return rule

    def get(self, rid: int) -> Optional[Rule]:
        for r in self.rules:
            if r.id == rid:
                return r
        return None

    def dump(self) -> List[dict]:
        return [{"id": r.id, "condition": {k: list(v) for k, v in r.condition.items()},
                 "action": list(r.action), "fitness": r.fitness, "experience": r.experience}
                for r in self.rules]


def signals_of(sample, goals: Sequence[float], budget: Optional[float]) -> Dict[str, float]:
    total_goal = sum(goals)
    achieved = sum(sample.throughput.values())
    return {
        "temperature": sample.temperature,
        "utilization": sample.utilization,
        "throughput": achieved / total_goal if total_goal else 1.0,
        "power": sample.power / budget if budget else 0.0,
    }


def reward(signals: Dict[str, float], penalty: float = 1.0) -> float:
    """QoS attainment capped at 1, minus the power-budget overshoot."""
    return min(signals["throughput"], 1.0) - penalty * max(0.0, signals["power"] - 1.0)


def match(table: RuleTable, signals: Dict[str, float], rng: random.Random) -> List[Rule]:
    """Rules whose closed intervals all contain the sample; covers if none do."""
    found = [r for r in table.rules if r.matches(signals)]
    if found:
        return found
    condition = {s: (signals[s] - COVER_WIDTH[s], signals[s] + COVER_WIDTH[s]) for s in SIGNALS}
    action = ACTIONS[rng.randrange(len(ACTIONS))]
    return [table.add(condition, action)]


def select_action(matched: Sequence[Rule], rng: random.Random, epsilon: float):
    if not matched:
        raise ValueError("empty match set")
    if rng.random() < epsilon:
        rule = matched[rng.randrange(len(matched))]
    else:
        rule = greedy(matched)
    return rule, rule.action


def greedy(matched: Sequence[Rule]) -> Rule:
    return min(matched, key=lambda r: (-r.fitness, r.id))


def update_fitness(table: RuleTable, reward_value: float, matched: Sequence[Rule]) -> RuleTable:
    """Q(prev) += alpha * (reward + gamma * max Q(matched) - Q(prev))."""
    if table.last_fired is None:
        raise NoPreviousAction("no rule fired in the previous period")
    prev = table.get(table.last_fired)
    if prev is None:
        raise NoPreviousAction(f"rule {table.last_fired} was evicted")
    cfg = table.config
    best_next = max((r.fitness for r in matched), default=0.0)
    prev.fitness += cfg.alpha * (reward_value + cfg.gamma * best_next - prev.fitness)
    prev.experience += 1
    if not math.isfinite(prev.fitness):
        raise FloatingPointError(f"rule {prev.id} fitness diverged")
    return table


def clamp_action(delta: Tuple[int, bool], region: OperatingRegion, op: OperatingPoint,
                 resource: str) -> Tuple[int, bool]:
    """Zero any component that would leave the region's range for `resource`."""
    rng = region.op_ranges.get(resource)
    if rng is None:
        return (0, False)
    dfreq, toggle = delta
    level, cache = op.be_part.get(resource, (rng.hi, False))
    if not rng.lo <= level + dfreq <= rng.hi:
        dfreq = 0
    if toggle and (not cache) not in rng.cache:
        toggle = False
    return (dfreq, toggle)


def apply_delta(op: OperatingPoint, resource: str, delta: Tuple[int, bool]) -> OperatingPoint:
    level, cache = op.be_part[resource]
    dfreq, toggle = delta
    return op.with_be(resource, level + dfreq, (not cache) if toggle else cache)


class LCT:
    """One learner per BE container."""

    def __init__(self, container: str, config: LctConfig = None, seed: int = 0):
        self.container = container
        self.table = RuleTable(config or LctConfig())
        self.rng = random.Random(f"{seed}:lct:{container}")
        self.last_reward: Optional[float] = None

    def control(self, signals: Dict[str, float], region: OperatingRegion, op: OperatingPoint,
                resource: str):
        """One control period: learn from the last action, choose the next one.

        Returns (rule, clamped delta, new OP).
        """
        r = reward(signals, self.table.config.power_penalty)
        self.last_reward = r
        matched = match(self.table, signals, self.rng)
        if self.table.last_fired is not None and self.table.get(self.table.last_fired):
            update_fitness(self.table, r, matched)
        rule, delta = select_action(matched, self.rng, self.table.config.epsilon)
        self.table.last_fired = rule.id
        delta = clamp_action(delta, region, op, resource)
        return rule, delta, apply_delta(op, resource, delta)
