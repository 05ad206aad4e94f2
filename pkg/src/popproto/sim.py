"""Randomized pairwise scheduler with exact parallel-time accounting.

Each interaction picks one of the C(n,2) unordered agent pairs uniformly at
random and applies the protocol's transition (usually null). Parallel time is
interactions (nulls included) divided by n, kept as an exact rational. The
accelerated mode skips runs of null interactions by sampling their length
geometrically from the exact count of eligible non-null ordered pairs, which
leaves the distribution over (final configuration, interaction count)
unchanged.
"""

from __future__ import annotations

import hashlib
import math
import random
import statistics
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence, Union

from popproto.core import Configuration, Protocol, Transition, TransitionSequence


class PopulationTooSmall(Exception):
    """Scheduling needs at least two agents."""


class StopReason(str, Enum):
    STOP_CONDITION_MET = "StopConditionMet"
    SILENT = "Silent"
    BUDGET = "Budget"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SilentOnly:
    """Run until no non-null transition is applicable."""


@dataclass(frozen=True)
class PredicateHolds:
    """Stop as soon as the predicate is true (checked before the first step
    and after every non-null interaction; null interactions cannot change it).
    """

    predicate: Callable[[Configuration], bool]
    name: str = "predicate"


@dataclass(frozen=True)
class InteractionBudget:
    """Stop after exactly ``limit`` interactions (nulls included)."""

    limit: int


@dataclass(frozen=True)
class FirstOf:
    """Composite condition: whichever member condition triggers first."""

    conditions: tuple["StopCondition", ...]


StopCondition = Union[SilentOnly, PredicateHolds, InteractionBudget, FirstOf]


@dataclass(frozen=True)
class RecordedPath:
    """Non-null transition path with configuration snapshots.

    ``snapshots`` pairs a non-null step index (number of path steps already
    applied) with the configuration at that point; the origin is implicitly
    snapshot 0.
    """

    origin: Configuration
    steps: tuple[Transition, ...]
    snapshots: tuple[tuple[int, Configuration], ...]
    stride: int

    def sequence(self) -> TransitionSequence:
        return TransitionSequence(self.origin, self.steps)


@dataclass(frozen=True)
class RunResult:
    """Outcome of one run. ``parallel_time`` is the exact pair
    interactions/n, so ``parallel_time * n == interactions`` always holds."""

    final: Configuration
    interactions: int
    n: int
    stop_reason: StopReason
    recorded_path: RecordedPath | None = None

    @property
    def parallel_time(self) -> Fraction:
        return Fraction(self.interactions, self.n)


@dataclass(frozen=True)
class TimeStats:
    """Parallel-time aggregate over independent trials."""

    trials: int
    mean: float
    stddev: float
    min: float
    max: float
    records: tuple[RunResult, ...]


def _budget_of(stop: StopCondition) -> int | None:
    if isinstance(stop, InteractionBudget):
        return stop.limit
    if isinstance(stop, FirstOf):
        limits = [b for c in stop.conditions if (b := _budget_of(c)) is not None]
        return min(limits) if limits else None
    return None


def _predicates_of(stop: StopCondition) -> list[Callable[[Configuration], bool]]:
    if isinstance(stop, PredicateHolds):
        return [stop.predicate]
    if isinstance(stop, FirstOf):
        preds: list[Callable[[Configuration], bool]] = []
        for c in stop.conditions:
            preds.extend(_predicates_of(c))
        return preds
    return []


class _Scheduler:
    """Mutable engine shared by both stepping modes.

    Tracks, for each non-null rule, the number of eligible ordered agent
    pairs, and their sum E. The probability that a uniform random interaction
    is non-null is exactly E / (n(n-1)).
    """

    def __init__(self, c: Configuration):
        if c.n < 2:
            raise PopulationTooSmall(f"need at least 2 agents, have {c.n}")
        self.protocol = c.protocol
        self.counts = list(c.counts)
        self.n = c.n
        self.rules: list[Transition] = list(self.protocol.transitions)
        self.rule_of_pair = {
            (min(t.r1.index, t.r2.index), max(t.r1.index, t.r2.index)): k
            for k, t in enumerate(self.rules)
        }
        self.touching: list[list[int]] = [[] for _ in self.protocol.states]
        for k, t in enumerate(self.rules):
            for idx in {t.r1.index, t.r2.index}:
                self.touching[idx].append(k)
        self.w = [self._weight(k) for k in range(len(self.rules))]
        self.eligible = sum(self.w)

    def _weight(self, k: int) -> int:
        t = self.rules[k]
        i, j = t.r1.index, t.r2.index
        if i == j:
            return self.counts[i] * (self.counts[i] - 1)
        return 2 * self.counts[i] * self.counts[j]

    def config(self) -> Configuration:
        return Configuration(self.protocol, self.counts)

    def apply(self, k: int) -> Transition:
        t = self.rules[k]
        changed = {t.r1.index, t.r2.index, t.p1.index, t.p2.index}
        self.counts[t.r1.index] -= 1
        self.counts[t.r2.index] -= 1
        self.counts[t.p1.index] += 1
        self.counts[t.p2.index] += 1
        for idx in changed:
            for rid in self.touching[idx]:
                self.eligible -= self.w[rid]
                self.w[rid] = self._weight(rid)
                self.eligible += self.w[rid]
        return t

    def sample_pair(self, rng: random.Random) -> tuple[int, int]:
        """Uniform unordered pair of distinct agents, as a sorted state-index
        pair. Sampling one agent then another from the remainder is uniform
        over ordered pairs, hence over unordered ones."""
        a = rng.randrange(self.n)
        for i, v in enumerate(self.counts):
            if a < v:
                first = i
                break
            a -= v
        b = rng.randrange(self.n - 1)
        for j, v in enumerate(self.counts):
            if j == first:
                v -= 1
            if b < v:
                second = j
                break
            b -= v
        return (first, second) if first <= second else (second, first)

    def pick_rule(self, rng: random.Random) -> int:
        """Weighted choice among non-null rules, proportional to eligible
        ordered pairs."""
        target = rng.randrange(self.eligible)
        for k, wk in enumerate(self.w):
            if target < wk:
                return k
            target -= wk
        raise AssertionError("weights out of sync")


def step(c: Configuration, rng: random.Random) -> tuple[Configuration, Transition]:
    """One uniform interaction. Returns the successor configuration and the
    (possibly null) transition that fired."""
    eng = _Scheduler(c)
    i, j = eng.sample_pair(rng)
    k = eng.rule_of_pair.get((i, j))
    if k is None:
        states = c.protocol.states
        return c, c.protocol.transition(states[i], states[j])
    t = eng.apply(k)
    return eng.config(), t


def default_snapshot_stride(n: int) -> int:
    # memory bound: full snapshots only for small populations
    return 1 if n <= 10**4 else n


def run_until(
    c: Configuration,
    stop: StopCondition,
    rng: random.Random,
    record: bool = False,
    snapshot_stride: int | None = None,
) -> RunResult:
    """Step-by-step simulation until the stop condition, silence, or budget.

    Checks, in order: stop predicates, silence (no non-null applicable),
    interaction budget. The interaction counter includes null interactions.
    """
    eng = _Scheduler(c)
    budget = _budget_of(stop)
    preds = _predicates_of(stop)
    stride = snapshot_stride or default_snapshot_stride(eng.n)
    steps: list[Transition] = []
    snapshots: list[tuple[int, Configuration]] = []
    interactions = 0
    cur = c
    while True:
        if preds and any(p(cur) for p in preds):
            reason = StopReason.STOP_CONDITION_MET
            break
        if eng.eligible == 0:
            reason = StopReason.SILENT
            break
        if budget is not None and interactions >= budget:
            reason = StopReason.BUDGET
            break
        i, j = eng.sample_pair(rng)
        interactions += 1
        k = eng.rule_of_pair.get((i, j))
        if k is not None:
            eng.apply(k)
            cur = eng.config()
            if record:
                steps.append(eng.rules[k])
                if len(steps) % stride == 0:
                    snapshots.append((len(steps), cur))
    path = (
        RecordedPath(c, tuple(steps), tuple(snapshots), stride) if record else None
    )
    return RunResult(cur, interactions, eng.n, reason, path)


def run_accelerated(
    c: Configuration, stop: StopCondition, rng: random.Random
) -> RunResult:
    """Distributionally identical to run_until (without recording), skipping
    null interactions in bulk.

    Null runs have geometric length with success probability E/(n(n-1));
    conditioned on a non-null interaction, the rule fires with probability
    proportional to its eligible ordered pairs.
    """
    eng = _Scheduler(c)
    budget = _budget_of(stop)
    preds = _predicates_of(stop)
    total_pairs = eng.n * (eng.n - 1)
    interactions = 0
    cur = c
    while True:
        if preds and any(p(cur) for p in preds):
            reason = StopReason.STOP_CONDITION_MET
            break
        if eng.eligible == 0:
            reason = StopReason.SILENT
            break
        if budget is not None and interactions >= budget:
            reason = StopReason.BUDGET
            break
        p = eng.eligible / total_pairs
        if p >= 1.0:
            skipped = 0
        else:
            # geometric number of null interactions before the next non-null
            skipped = int(math.log(1.0 - rng.random()) / math.log(1.0 - p))
        if budget is not None and interactions + skipped + 1 > budget:
            interactions = budget
            reason = StopReason.BUDGET
            break
        interactions += skipped + 1
        eng.apply(eng.pick_rule(rng))
        cur = eng.config()
    return RunResult(cur, interactions, eng.n, reason, None)


def trial_seed(base_seed: int, trial: int) -> int:
    """Stable per-trial seed derivation (independent of interpreter hashing)."""
    digest = hashlib.sha256(f"{base_seed}:{trial}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def estimate_stabilization_time(
    protocol: Protocol,
    initial: Configuration,
    stop: StopCondition,
    trials: int,
    base_seed: int,
    accelerated: bool = True,
) -> TimeStats:
    """Independent trials with derived per-trial seeds; aggregates parallel
    time. For builtin protocols the supplied stop predicate coincides with
    stabilization; otherwise silence time is what is measured."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if initial.protocol is not protocol and initial.protocol != protocol:
        raise ValueError("initial configuration does not belong to the protocol")
    records = []
    for trial in range(trials):
        rng = random.Random(trial_seed(base_seed, trial))
        if accelerated:
            records.append(run_accelerated(initial, stop, rng))
        else:
            records.append(run_until(initial, stop, rng))
    times = [float(r.parallel_time) for r in records]
    return TimeStats(
        trials=trials,
        mean=statistics.fmean(times),
        stddev=statistics.stdev(times) if trials > 1 else 0.0,
        min=min(times),
        max=max(times),
        records=tuple(records),
    )
