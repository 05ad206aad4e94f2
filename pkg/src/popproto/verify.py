"""Exhaustive reachability and stability analysis for small populations.

post(c) is the closure of c under applicable non-null transitions, computed
breadth-first with node/edge budgets. Output stability is decided under two
conventions: the count of a designated output state, or a unanimous 0/1 vote.
Stable-computation and stable-decision checks certify a protocol against an
oracle over a finite input grid, reporting failures with witness paths, and
never report a verdict computed under an exceeded budget as pass/fail.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

from popproto.core import (
    Configuration,
    DomainError,
    InvalidAt,
    Protocol,
    State,
    Transition,
    TransitionSequence,
)
from popproto.sim import RecordedPath


class InvalidPath(Exception):
    """A path replay failed; carries the first bad step index."""

    def __init__(self, index: int, transition: Transition):
        self.index = index
        self.transition = transition
        super().__init__(f"path invalid at step {index}: {transition}")


@dataclass(frozen=True)
class SearchLimits:
    """Budgets for one reachability query."""

    max_nodes: int = 10**6
    max_edges: int = 10**7


@dataclass(frozen=True)
class FunctionOutput:
    """Output of a configuration is the count of state y (always defined)."""

    y: State


@dataclass(frozen=True)
class PredicateVote:
    """States in voters1 vote 1, all others vote 0; output is the unanimous
    vote, undefined when both kinds are present (or the population is empty).
    """

    voters1: frozenset[State]


OutputConvention = Union[FunctionOutput, PredicateVote]


def output_of(c: Configuration, conv: OutputConvention) -> int | None:
    """The configuration's output under the convention; None if undefined."""
    if isinstance(conv, FunctionOutput):
        return c.counts[conv.y.index]
    ones = frozenset(s.index for s in conv.voters1)
    saw_one = saw_zero = False
    for i, v in enumerate(c.counts):
        if v == 0:
            continue
        if i in ones:
            saw_one = True
        else:
            saw_zero = True
    if saw_one == saw_zero:  # both present, or empty population
        return None
    return 1 if saw_one else 0


class ReachSet:
    """Reachability closure of one configuration.

    ``order`` is the deterministic BFS discovery order. ``edges`` maps each
    member to its (transition, successor) pairs when requested. ``parents``
    supports witness-path reconstruction back to the origin.
    """

    def __init__(
        self,
        origin: Configuration,
        order: list[Configuration],
        edges: dict[Configuration, tuple[tuple[Transition, Configuration], ...]] | None,
        parents: dict[Configuration, tuple[Configuration, Transition] | None],
        exhaustive: bool,
        edge_count: int,
    ):
        self.origin = origin
        self.order = order
        self.members = frozenset(order)
        self.edges = edges
        self.parents = parents
        self.exhaustive = exhaustive
        self.edge_count = edge_count

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, c: Configuration) -> bool:
        return c in self.members

    def path_to(self, c: Configuration) -> list[Transition]:
        """Transitions along the discovered path origin => c."""
        steps: list[Transition] = []
        node = c
        while True:
            parent = self.parents[node]
            if parent is None:
                break
            node, t = parent
            steps.append(t)
        steps.reverse()
        return steps


class BudgetExceeded(Exception):
    """Search hit its node or edge budget; carries the partial closure."""

    def __init__(self, partial: ReachSet, what: str):
        self.partial = partial
        super().__init__(f"reachability budget exceeded ({what})")


def post(
    c: Configuration,
    limits: SearchLimits | None = None,
    with_edges: bool = False,
) -> ReachSet:
    """Breadth-first closure of c under applicable non-null transitions.

    Exact when it completes; raises BudgetExceeded carrying the partial,
    non-exhaustive set otherwise.
    """
    limits = limits or SearchLimits()
    protocol = c.protocol
    rules = protocol.transitions
    order = [c]
    seen = {c}
    parents: dict[Configuration, tuple[Configuration, Transition] | None] = {c: None}
    edges: dict[Configuration, tuple[tuple[Transition, Configuration], ...]] | None = (
        {} if with_edges else None
    )
    edge_count = 0
    queue = deque([c])

    def bail(what: str) -> BudgetExceeded:
        return BudgetExceeded(
            ReachSet(c, order, edges, parents, False, edge_count), what
        )

    while queue:
        cur = queue.popleft()
        vec = cur.counts
        out: list[tuple[Transition, Configuration]] = []
        for t in rules:
            i, j = t.r1.index, t.r2.index
            if i == j:
                if vec[i] < 2:
                    continue
            elif vec[i] < 1 or vec[j] < 1:
                continue
            nxt_vec = list(vec)
            nxt_vec[i] -= 1
            nxt_vec[j] -= 1
            nxt_vec[t.p1.index] += 1
            nxt_vec[t.p2.index] += 1
            nxt = Configuration(protocol, nxt_vec)
            edge_count += 1
            if edge_count > limits.max_edges:
                raise bail("edges")
            if nxt not in seen:
                seen.add(nxt)
                parents[nxt] = (cur, t)
                order.append(nxt)
                if len(order) > limits.max_nodes:
                    raise bail("nodes")
                queue.append(nxt)
            if with_edges:
                out.append((t, nxt))
        if with_edges:
            edges[cur] = tuple(out)  # type: ignore[index]
    return ReachSet(c, order, edges, parents, True, edge_count)


def is_output_stable(
    c: Configuration,
    conv: OutputConvention,
    limits: SearchLimits | None = None,
    memo: dict[Configuration, bool] | None = None,
) -> bool:
    """True iff every configuration reachable from c has c's (defined) output.

    An undefined own output (split vote) is never stable. The optional memo
    caches verdicts across queries of one checking run.
    """
    if memo is not None and c in memo:
        return memo[c]
    target = output_of(c, conv)
    if target is None:
        if memo is not None:
            memo[c] = False
        return False
    limits = limits or SearchLimits()
    protocol = c.protocol
    rules = protocol.transitions
    order = [c]
    seen = {c}
    queue = deque([c])
    edge_count = 0
    stable = True

    def bail(what: str) -> BudgetExceeded:
        parents: dict[Configuration, tuple[Configuration, Transition] | None] = {}
        return BudgetExceeded(
            ReachSet(c, order, None, parents, False, edge_count), what
        )

    while queue:
        cur = queue.popleft()
        vec = cur.counts
        for t in rules:
            i, j = t.r1.index, t.r2.index
            if i == j:
                if vec[i] < 2:
                    continue
            elif vec[i] < 1 or vec[j] < 1:
                continue
            nxt_vec = list(vec)
            nxt_vec[i] -= 1
            nxt_vec[j] -= 1
            nxt_vec[t.p1.index] += 1
            nxt_vec[t.p2.index] += 1
            nxt = Configuration(protocol, nxt_vec)
            edge_count += 1
            if edge_count > limits.max_edges:
                raise bail("edges")
            if nxt in seen:
                continue
            if memo is not None and nxt in memo:
                if memo[nxt] and output_of(nxt, conv) == target:
                    # stable with the right output: entire subtree is safe
                    seen.add(nxt)
                    order.append(nxt)
                    continue
                stable = False
                break
            if output_of(nxt, conv) != target:
                stable = False
                break
            seen.add(nxt)
            order.append(nxt)
            if len(seen) > limits.max_nodes:
                raise bail("nodes")
            queue.append(nxt)
        if not stable:
            break
    if memo is not None:
        if stable:
            # every explored member shares the output and its post is inside
            # the explored set, so all of them are stable
            for node in seen:
                memo[node] = True
        else:
            memo[c] = False
    return stable


@dataclass(frozen=True)
class InputVerdict:
    """Per-input outcome of a grid check."""

    input: tuple[int, ...]
    approx_count: int | None
    verdict: str  # pass | fail | inconclusive | skipped
    note: str = ""
    witness: dict[str, int] | None = None
    witness_path: tuple[str, ...] | None = None

    def to_dict(self) -> dict:
        doc: dict = {"input": list(self.input), "verdict": self.verdict}
        if self.approx_count is not None:
            doc["a"] = self.approx_count
        if self.note:
            doc["note"] = self.note
        if self.witness is not None:
            doc["witness"] = self.witness
        if self.witness_path is not None:
            doc["witness_path"] = list(self.witness_path)
        return doc


@dataclass(frozen=True)
class CheckReport:
    """Aggregate of per-input verdicts; passes only if every input passed."""

    check: str
    results: tuple[InputVerdict, ...]

    @property
    def passed(self) -> bool:
        return all(r.verdict in ("pass", "skipped") for r in self.results)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "pass": self.passed,
            "results": [r.to_dict() for r in self.results],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def input_states(protocol: Protocol) -> tuple[State, ...]:
    """The protocol's input states in index order (the input-vector layout)."""
    return tuple(sorted(protocol.inputs))


def _unstable_marks(
    reach: ReachSet, conv: OutputConvention
) -> tuple[dict[Configuration, int | None], set[Configuration]]:
    """Outputs per member plus the exact set of unstable members.

    A member is unstable iff its own output is undefined, some successor has
    a different output, or some successor is unstable; the least fixed point
    is reverse reachability from the directly conflicting members.
    """
    assert reach.edges is not None
    outs = {cfg: output_of(cfg, conv) for cfg in reach.order}
    preds: dict[Configuration, list[Configuration]] = {c: [] for c in reach.order}
    unstable: set[Configuration] = set()
    frontier: deque[Configuration] = deque()
    for cfg in reach.order:
        if outs[cfg] is None:
            unstable.add(cfg)
            frontier.append(cfg)
        for _, nxt in reach.edges[cfg]:
            preds[nxt].append(cfg)
            if outs[nxt] != outs[cfg] and cfg not in unstable:
                unstable.add(cfg)
                frontier.append(cfg)
    while frontier:
        bad = frontier.popleft()
        for prev in preds[bad]:
            if prev not in unstable:
                unstable.add(prev)
                frontier.append(prev)
    return outs, unstable


def _certify(
    initial: Configuration,
    conv: OutputConvention,
    accepts: Callable[[int], bool],
    limits: SearchLimits,
) -> tuple[str, str, Configuration | None, list[Transition] | None]:
    """Core of both grid checks: from every reachable configuration, some
    stable configuration with an accepted output must remain reachable.

    Returns (verdict, note, witness configuration, witness path).
    """
    try:
        reach = post(initial, limits, with_edges=True)
    except BudgetExceeded as e:
        return ("inconclusive", str(e), None, None)
    outs, unstable = _unstable_marks(reach, conv)
    good = {
        cfg
        for cfg in reach.order
        if cfg not in unstable and outs[cfg] is not None and accepts(outs[cfg])
    }
    # reverse reachability from the good stable set
    assert reach.edges is not None
    preds: dict[Configuration, list[Configuration]] = {c: [] for c in reach.order}
    for cfg in reach.order:
        for _, nxt in reach.edges[cfg]:
            preds[nxt].append(cfg)
    can_reach = set(good)
    frontier = deque(good)
    while frontier:
        node = frontier.popleft()
        for prev in preds[node]:
            if prev not in can_reach:
                can_reach.add(prev)
                frontier.append(prev)
    for cfg in reach.order:  # BFS order: first failure is the shallowest
        if cfg not in can_reach:
            return (
                "fail",
                "no acceptable stable configuration reachable",
                cfg,
                reach.path_to(cfg),
            )
    return ("pass", "", None, None)


def _acceptor(expected: int | tuple[int, int]) -> tuple[Callable[[int], bool], str]:
    if isinstance(expected, tuple):
        lo, hi = expected
        return (lambda y: lo <= y <= hi), f"[{lo}, {hi}]"
    return (lambda y: y == expected), str(expected)


def check_stable_computation(
    protocol: Protocol,
    f: Callable[..., int | tuple[int, int]],
    inputs: Iterable[tuple[int, ...] | tuple[tuple[int, ...], int]],
    q0: Callable[..., int],
    limits: SearchLimits | None = None,
) -> CheckReport:
    """Certify stable computation of f on a finite input grid.

    Initial configurations hold the input counts on the input states and
    q0(...) agents on the quiescent state (plus, for approximating protocols,
    the given approximation count; inputs are then (m, a) pairs and f/q0 are
    called as f(m, a), q0(m, a)). The oracle may return an exact count or an
    inclusive (lo, hi) interval.
    """
    if protocol.output is None or protocol.quiescent is None:
        raise DomainError("protocol needs output and quiescent roles")
    limits = limits or SearchLimits()
    xs = input_states(protocol)
    conv = FunctionOutput(protocol.output)
    results = []
    for entry in inputs:
        if protocol.approx is not None:
            m, a = entry  # type: ignore[misc]
            m = tuple(m)
            expected = f(m, a)
            quiescent_count = q0(m, a)
        else:
            m = (entry,) if isinstance(entry, int) else tuple(entry)
            a = None
            expected = f(m)
            quiescent_count = q0(m)
        if len(m) != len(xs):
            raise DomainError(f"input {m} has wrong arity for {len(xs)} input states")
        counts = {s.name: v for s, v in zip(xs, m)}
        counts[protocol.quiescent.name] = quiescent_count
        if a is not None:
            counts[protocol.approx.name] = a
        initial = Configuration.from_dict(protocol, counts)
        accepts, shown = _acceptor(expected)
        verdict, note, witness, path = _certify(initial, conv, accepts, limits)
        if verdict == "fail":
            note = f"expected stable output {shown}; {note}"
        results.append(
            InputVerdict(
                input=m,
                approx_count=a,
                verdict=verdict,
                note=note,
                witness=witness.to_dict() if witness is not None else None,
                witness_path=tuple(str(t) for t in path) if path is not None else None,
            )
        )
    return CheckReport("stable_computation", tuple(results))


def check_stable_decision(
    protocol: Protocol,
    phi: Callable[[tuple[int, ...]], int],
    inputs: Iterable[tuple[int, ...]],
    limits: SearchLimits | None = None,
) -> CheckReport:
    """Certify stable decision of a predicate on a finite input grid.

    Initial configurations contain only the input states. Empty inputs are
    skipped (the vote is undefined on an empty population).
    """
    if protocol.voters1 is None:
        raise DomainError("protocol needs a voters1 role")
    limits = limits or SearchLimits()
    xs = input_states(protocol)
    conv = PredicateVote(protocol.voters1)
    results = []
    for entry in inputs:
        m = tuple(entry)
        if len(m) != len(xs):
            raise DomainError(f"input {m} has wrong arity for {len(xs)} input states")
        if sum(m) == 0:
            results.append(
                InputVerdict(m, None, "skipped", "vote undefined on empty population")
            )
            continue
        initial = Configuration.from_dict(
            protocol, {s.name: v for s, v in zip(xs, m)}
        )
        expected = int(bool(phi(m)))
        verdict, note, witness, path = _certify(
            initial, conv, lambda b: b == expected, limits
        )
        if verdict == "fail":
            note = f"expected stable vote {expected}; {note}"
        results.append(
            InputVerdict(
                input=m,
                approx_count=None,
                verdict=verdict,
                note=note,
                witness=witness.to_dict() if witness is not None else None,
                witness_path=tuple(str(t) for t in path) if path is not None else None,
            )
        )
    return CheckReport("stable_decision", tuple(results))


@dataclass(frozen=True)
class BottleneckReport:
    """Steps of a path that fired with both input counts at most b."""

    threshold: int
    hits: tuple[tuple[int, Transition, int, int], ...]


def find_bottlenecks(
    path: RecordedPath | TransitionSequence, b: int
) -> BottleneckReport:
    """Replay a path and report every b-bottleneck step.

    A step is a b-bottleneck when, in the configuration it fires from, both
    input states have count at most b.
    """
    origin = path.origin
    vec = list(origin.counts)
    hits: list[tuple[int, Transition, int, int]] = []
    for idx, t in enumerate(path.steps):
        i, j = t.r1.index, t.r2.index
        c1, c2 = vec[i], vec[j]
        if (c1 < 2 if i == j else (c1 < 1 or c2 < 1)):
            raise InvalidPath(idx, t)
        if c1 <= b and c2 <= b:
            hits.append((idx, t, c1, c2))
        vec[i] -= 1
        vec[j] -= 1
        vec[t.p1.index] += 1
        vec[t.p2.index] += 1
    return BottleneckReport(b, tuple(hits))


# b(n) = (constant / lam) * sqrt(n / t); the two normalizations in use
TIGHT_THRESHOLD_CONSTANT = 1.0 / math.sqrt(6.0)
COARSE_THRESHOLD_CONSTANT = 0.25


def bottleneck_threshold(
    n: int, t_n: float, lam: int, constant: float = TIGHT_THRESHOLD_CONSTANT
) -> float:
    """Theory-side count threshold below which a fast run should not have
    fired any transition: (constant/lam)*sqrt(n/t_n), defaulting to
    (1/lam)*sqrt(n/(6 t_n))."""
    if t_n <= 0:
        raise DomainError(f"time bound must be positive, got {t_n}")
    if n <= 0 or lam <= 0:
        raise DomainError("population size and state count must be positive")
    return constant * math.sqrt(n / t_n) / lam
