"""Path surgery: rewriting transition sequences with predictable endpoints.

Some protocols admit an *elimination order* over a set of states ``delta``:
the states can be listed d1..dd so that each di has a witness transition
consuming exactly one di whose other participants are all outside
{d1..di}.  When such an order exists, firing witnesses in order drains the
delta states, and simple integer matrices predict exactly how many firings
are needed, which co-input agents ("fuel") they consume, and what the final
configuration looks like.  This module finds elimination orders, builds the
matrices, and performs three rewrites, each validated by actually executing
the rewritten sequence:

* :func:`eliminate_delta` -- build a fresh path that drains given delta
  counts to zero, returning the fuel it needs and the all-gamma result.
* :func:`produce_e` -- edit an existing path so it ends with prescribed
  delta counts instead of the ones it naturally reaches, by adding and
  removing witness firings, run inside a buffer of spare agents.
* :func:`push_delta` -- compose the two on a doubled population: steer one
  copy of the path to produce the other copy's fuel, replay the original on
  the second copy, then drain everything, hitting an exact delta target.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Union

from .core import (
    Configuration,
    CountError,
    Protocol,
    ProtocolError,
    State,
    Transition,
    TransitionSequence,
    execute_path,
)

__all__ = [
    "MAX_ORDER",
    "SurgeryError",
    "SurgeryWarning",
    "NotOrderable",
    "InsufficientOccurrences",
    "InvalidEdit",
    "BufferTooSmall",
    "DeltaOrdering",
    "SurgeryMatrices",
    "DrainResult",
    "RetargetResult",
    "PushResult",
    "PathReport",
    "amax",
    "find_delta_ordering",
    "build_matrices",
    "eliminate_delta",
    "produce_e",
    "push_delta",
    "reserve_diagnostics",
    "verify_path_validity",
]

#: Largest supported elimination order.  The matrix entries grow like
#: 2**(2d+2), so anything beyond toy sizes is meaningless at desk scale.
MAX_ORDER = 16

_I64_MAX = 2**63 - 1


class SurgeryError(ProtocolError):
    """Base class for errors raised by path surgery."""


class SurgeryWarning(UserWarning):
    """Soft warning: a sufficient precondition is unmet; attempting anyway."""


class NotOrderable(SurgeryError):
    """No elimination order exists; carries the states that got stuck."""

    def __init__(self, remaining: frozenset[State]):
        names = ", ".join(sorted(s.name for s in remaining))
        super().__init__(f"no elimination order: stuck on {{{names}}}")
        self.remaining = remaining


class InsufficientOccurrences(SurgeryError):
    """The host path lacks enough removable firings of a witness."""

    def __init__(self, transition: Transition, needed: int, available: int):
        super().__init__(
            f"need to remove {needed} occurrences of '{transition}' "
            f"but the host path contains only {available}"
        )
        self.transition = transition
        self.needed = needed
        self.available = available


class InvalidEdit(SurgeryError):
    """The rewritten path failed its execution-level validity check."""


class BufferTooSmall(SurgeryError):
    """The standing reserve cannot keep the composed path nonnegative."""

    def __init__(self, state: State, index: int):
        super().__init__(
            f"reserve exhausted: count of {state} would go negative at step {index}"
        )
        self.state = state
        self.index = index


# ---------------------------------------------------------------------------
# Elimination orders


def _witness_shape(t: Transition, d: State) -> Optional[tuple[State, ...]]:
    """The other participants of t viewed as a witness consuming one d.

    Returns (other input, output, output) if d appears among the inputs,
    else None.  Callers still need to check the participants against the
    forbidden set; a transition like d,d -> ... reports d itself as the
    other input and is rejected by that check.
    """
    if d == t.r1:
        return (t.r2, t.p1, t.p2)
    if d == t.r2:
        return (t.r1, t.p1, t.p2)
    return None


def _ordering_violation(
    protocol: Protocol, delta: Sequence[State], witnesses: Sequence[Transition]
) -> Optional[str]:
    """Direct re-check of the elimination-order condition; None if valid.

    Deliberately a plain transcription of the definition, independent of the
    greedy search in find_delta_ordering.
    """
    if len(delta) != len(set(delta)):
        return "duplicate states in the order"
    if len(witnesses) != len(delta):
        return "need exactly one witness per ordered state"
    declared = set(protocol.transitions)
    for i, (d, t) in enumerate(zip(delta, witnesses)):
        if protocol.states[d.index] != d:
            return f"{d} is not a state of the protocol"
        if t not in declared:
            return f"witness '{t}' is not a transition of the protocol"
        others = _witness_shape(t, d)
        if others is None:
            return f"witness '{t}' does not take {d} as an input"
        forbidden = set(delta[: i + 1])
        bad = [s for s in others if s in forbidden]
        if bad:
            return (
                f"witness '{t}' for {d} touches {bad[0]}, which does not "
                f"come later in the order"
            )
    return None


@dataclass(frozen=True)
class DeltaOrdering:
    """An elimination order d1..dd with one witness transition per state.

    Witness i consumes exactly one delta[i], and its other input and both
    outputs avoid delta[:i+1], so firing it never disturbs earlier states.
    Instances are validated on construction.
    """

    protocol: Protocol
    delta: tuple[State, ...]
    witnesses: tuple[Transition, ...]

    def __post_init__(self) -> None:
        if len(self.delta) > MAX_ORDER:
            raise SurgeryError(
                f"elimination order of {len(self.delta)} states exceeds the "
                f"supported maximum of {MAX_ORDER}"
            )
        reason = _ordering_violation(self.protocol, self.delta, self.witnesses)
        if reason is not None:
            raise SurgeryError(f"invalid elimination order: {reason}")

    @property
    def d(self) -> int:
        return len(self.delta)

    @property
    def gamma(self) -> tuple[State, ...]:
        """The untouched states, in protocol declaration order."""
        drop = set(self.delta)
        return tuple(s for s in self.protocol.states if s not in drop)

    def position(self, s: State | str) -> int:
        if isinstance(s, str):
            s = self.protocol.state(s)
        return self.delta.index(s)

    def to_dict(self) -> dict[str, list[str]]:
        return {
            "delta": [s.name for s in self.delta],
            "witnesses": [str(t) for t in self.witnesses],
        }


def _resolve_states(protocol: Protocol, items: Iterable[State | str]) -> list[State]:
    out = []
    for item in items:
        s = protocol.state(item) if isinstance(item, str) else item
        if protocol.states[s.index] != s:
            raise SurgeryError(f"{s} is not a state of the protocol")
        out.append(s)
    return out


def find_delta_ordering(
    protocol: Protocol, delta: Iterable[State | str]
) -> DeltaOrdering:
    """Find an elimination order for the given states, or prove none exists.

    Works backwards from the last position: a state can sit at the end of
    the remaining order exactly when it has a witness whose other
    participants all lie outside the remaining set.  Filling positions from
    the back makes the greedy complete -- removing a state that is eligible
    for the last slot never breaks an arrangement of the rest -- so
    whenever any order exists, this search finds one.  Ties are broken by
    state index (the highest-indexed eligible state takes the last open
    slot, leaving low-indexed states toward the front), then by transition
    declaration order, so the result is deterministic.

    Raises NotOrderable with the stuck remaining set when no state
    qualifies for the next position.
    """
    states = sorted(set(_resolve_states(protocol, delta)))
    if len(states) > MAX_ORDER:
        raise SurgeryError(
            f"elimination order of {len(states)} states exceeds the "
            f"supported maximum of {MAX_ORDER}"
        )
    remaining = set(states)
    slots: list[tuple[State, Transition]] = []
    while remaining:
        for s in sorted(remaining, reverse=True):
            found = None
            for t in protocol.transitions:
                others = _witness_shape(t, s)
                if others is not None and not any(o in remaining for o in others):
                    found = t
                    break
            if found is not None:
                slots.append((s, found))
                remaining.remove(s)
                break
        else:
            raise NotOrderable(frozenset(remaining))
    slots.reverse()
    return DeltaOrdering(
        protocol,
        tuple(s for s, _ in slots),
        tuple(t for _, t in slots),
    )


# ---------------------------------------------------------------------------
# Matrices

Mat = tuple[tuple[int, ...], ...]


def _freeze(rows: Sequence[Sequence[int]]) -> Mat:
    for row in rows:
        for v in row:
            if abs(v) > _I64_MAX:
                raise CountError(f"matrix entry {v} exceeds the 64-bit range")
    return tuple(tuple(row) for row in rows)


def _mat_mul(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]]) -> list[list[int]]:
    cols = range(len(b[0]) if b else 0)
    return [[sum(row[k] * b[k][j] for k in range(len(b))) for j in cols] for row in a]


def _mat_vec(a: Sequence[Sequence[int]], v: Sequence[int]) -> list[int]:
    return [sum(row[k] * v[k] for k in range(len(v))) for row in a]


def _mat_add(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]]) -> list[list[int]]:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _mat_sub(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]]) -> list[list[int]]:
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _identity(n: int) -> list[list[int]]:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def _geometric_sum(m: Sequence[Sequence[int]], terms: int) -> list[list[int]]:
    """I + m + m**2 + ... + m**(terms-1)."""
    total = _identity(len(m))
    power = _identity(len(m))
    for _ in range(terms - 1):
        power = _mat_mul(power, m)
        total = _mat_add(total, power)
    return total


def amax(m: Sequence[Sequence[int]]) -> int:
    """Largest entry of a matrix in absolute value (0 for an empty matrix)."""
    return max((abs(v) for row in m for v in row), default=0)


@dataclass(frozen=True)
class SurgeryMatrices:
    """The integer matrices that predict a drain's exact bookkeeping.

    All delta-indexed axes follow the elimination order; gamma-indexed rows
    follow ``gamma`` (protocol declaration order).  Columns are witnesses.

    * ``offspring[k][j]``: copies of delta state k produced per firing of
      witness j (strictly lower triangular).
    * ``cascade = sum offspring**i``: total witness firings needed per unit
      of initial delta counts, offspring included.
    * ``helper[s][j]``: 1 iff witness j's other input is state s (all-state
      rows); ``demand = helper . cascade`` maps delta counts to the fuel a
      drain consumes.  ``demand_delta`` / ``demand_gamma`` are its delta /
      gamma rows.
    * ``gamma_out[g][j]``: gamma outputs per firing; ``gamma_yield =
      gamma_out . cascade`` maps drained delta counts to the gamma agents a
      drain produces.
    * ``offspring_net`` / ``cascade_net``: signed variants that also count
      the witness's other input as consumption, used when editing an
      existing path (where fuel is not supplied separately).
    * ``gamma_net[g][j]``: net gamma change per firing (outputs minus other
      input); ``gamma_shift = gamma_net . cascade_net`` maps a change in
      final delta counts to the resulting change in gamma counts.
    * ``shift_demand = gamma_shift . demand_delta``; ``host_coeff`` and
      ``inject_coeff`` are the composed coefficients applied to a host
      path's final delta counts and to injected delta counts in
      :func:`push_delta`.
    """

    ordering: DeltaOrdering
    gamma: tuple[State, ...]
    offspring: Mat
    cascade: Mat
    helper: Mat
    demand: Mat
    demand_delta: Mat
    demand_gamma: Mat
    gamma_out: Mat
    gamma_yield: Mat
    offspring_net: Mat
    cascade_net: Mat
    gamma_net: Mat
    gamma_shift: Mat
    shift_demand: Mat
    host_coeff: Mat
    inject_coeff: Mat

    @property
    def d(self) -> int:
        return self.ordering.d

    def fire_counts(self, c_delta: Sequence[int]) -> tuple[int, ...]:
        """Total firings of each witness needed to drain c_delta."""
        return tuple(_mat_vec(self.cascade, c_delta))

    def fuel(self, c_delta: Sequence[int]) -> Configuration:
        """The co-input agents consumed while draining c_delta."""
        return Configuration(
            self.ordering.protocol, _mat_vec(self.demand, c_delta)
        )

    def drain_result(self, c_delta: Sequence[int]) -> Configuration:
        """The all-gamma configuration a drain of c_delta ends in."""
        return self._embed_gamma(_mat_vec(self.gamma_yield, c_delta))

    def edit_vector(
        self, o_delta: Sequence[int], e_delta: Sequence[int]
    ) -> tuple[int, ...]:
        """Signed per-witness firing adjustments turning o_delta into e_delta."""
        diff = [o - e for o, e in zip(o_delta, e_delta)]
        return tuple(_mat_vec(self.cascade_net, diff))

    def _embed_gamma(self, values: Sequence[int]) -> Configuration:
        vec = [0] * len(self.ordering.protocol.states)
        for s, v in zip(self.gamma, values):
            vec[s.index] = v
        return Configuration(self.ordering.protocol, vec)

    @property
    def bounds(self) -> dict[str, int]:
        """Observed and guaranteed magnitude bounds, for checking/reporting."""
        d = self.d
        return {
            "max_cascade": amax(self.cascade),
            "cascade_limit": 2**d,
            "max_demand": amax(self.demand),
            "demand_limit": 2**d,
            "max_gamma_yield": amax(self.gamma_yield),
            "gamma_yield_limit": 2 ** (d + 1),
            "amax_gamma_shift": amax(self.gamma_shift),
            "gamma_shift_limit": 2 ** (d + 1),
            "amax_host_coeff": amax(self.host_coeff),
            "amax_inject_coeff": amax(self.inject_coeff),
            "push_coeff_limit": d * 2 ** (2 * d + 2),
        }

    def to_dict(self) -> dict[str, object]:
        return {
            "ordering": self.ordering.to_dict(),
            "gamma": [s.name for s in self.gamma],
            "offspring": [list(r) for r in self.offspring],
            "cascade": [list(r) for r in self.cascade],
            "helper": [list(r) for r in self.helper],
            "demand": [list(r) for r in self.demand],
            "gamma_out": [list(r) for r in self.gamma_out],
            "gamma_yield": [list(r) for r in self.gamma_yield],
            "offspring_net": [list(r) for r in self.offspring_net],
            "cascade_net": [list(r) for r in self.cascade_net],
            "gamma_net": [list(r) for r in self.gamma_net],
            "gamma_shift": [list(r) for r in self.gamma_shift],
            "shift_demand": [list(r) for r in self.shift_demand],
            "host_coeff": [list(r) for r in self.host_coeff],
            "inject_coeff": [list(r) for r in self.inject_coeff],
            "bounds": self.bounds,
        }


def build_matrices(protocol: Protocol, ordering: DeltaOrdering) -> SurgeryMatrices:
    """Construct every drain/edit matrix for a validated elimination order."""
    if ordering.protocol is not protocol and ordering.protocol != protocol:
        raise SurgeryError("ordering belongs to a different protocol")
    d = ordering.d
    n_states = len(protocol.states)
    pos = {s: i for i, s in enumerate(ordering.delta)}
    gamma = ordering.gamma
    gpos = {s: i for i, s in enumerate(gamma)}

    offspring = [[0] * d for _ in range(d)]
    offspring_net = [[0] * d for _ in range(d)]
    helper = [[0] * d for _ in range(n_states)]
    gamma_out = [[0] * d for _ in range(len(gamma))]
    gamma_net = [[0] * d for _ in range(len(gamma))]
    for j, (dj, t) in enumerate(zip(ordering.delta, ordering.witnesses)):
        other = t.r2 if t.r1 == dj else t.r1
        helper[other.index][j] = 1
        for out in (t.p1, t.p2):
            if out in pos:
                offspring[pos[out]][j] += 1
                offspring_net[pos[out]][j] += 1
            else:
                gamma_out[gpos[out]][j] += 1
                gamma_net[gpos[out]][j] += 1
        if other in pos:
            offspring_net[pos[other]][j] -= 1
        else:
            gamma_net[gpos[other]][j] -= 1

    cascade = _geometric_sum(offspring, d)
    cascade_net = _geometric_sum(offspring_net, d)
    demand = _mat_mul(helper, cascade)
    gamma_yield = _mat_mul(gamma_out, cascade)
    gamma_shift = _mat_mul(gamma_net, cascade_net)
    demand_delta = [demand[s.index] for s in ordering.delta]
    demand_gamma = [demand[s.index] for s in gamma]
    shift_demand = _mat_mul(gamma_shift, demand_delta)
    yield_minus_demand = _mat_sub(gamma_yield, demand_gamma)
    host_coeff = _mat_add(_mat_sub(gamma_shift, shift_demand), yield_minus_demand)
    inject_coeff = _mat_sub(yield_minus_demand, shift_demand)

    return SurgeryMatrices(
        ordering=ordering,
        gamma=gamma,
        offspring=_freeze(offspring),
        cascade=_freeze(cascade),
        helper=_freeze(helper),
        demand=_freeze(demand),
        demand_delta=_freeze(demand_delta),
        demand_gamma=_freeze(demand_gamma),
        gamma_out=_freeze(gamma_out),
        gamma_yield=_freeze(gamma_yield),
        offspring_net=_freeze(offspring_net),
        cascade_net=_freeze(cascade_net),
        gamma_net=_freeze(gamma_net),
        gamma_shift=_freeze(gamma_shift),
        shift_demand=_freeze(shift_demand),
        host_coeff=_freeze(host_coeff),
        inject_coeff=_freeze(inject_coeff),
    )


def reserve_diagnostics(
    ordering: DeltaOrdering,
    b1: int,
    e_delta: Optional[Sequence[int]] = None,
    injected_bound: Optional[int] = None,
) -> dict[str, int]:
    """Sufficient (never necessary) population levels for the rewrites.

    These are the guarantee thresholds: a host drawn from a population where
    every state's count clears ``edit_free_level`` is assured to contain
    enough removable witness firings, and a per-state reserve of
    ``buffer_level`` keeps any single edit valid.  For the two-copy
    composition, ``push_level`` and the slightly tighter
    ``push_level_alt`` are two admissible forms of the same bound (they
    differ in one term's constant; both are safe).  Smaller instances often
    work anyway -- the rewrites attempt them and validate by execution --
    so these numbers are for diagnosis, not enforcement.
    """
    d = ordering.d
    n = len(ordering.protocol.states)
    e_high = max([b1, *(e_delta or [])])
    out = {
        "buffer_level": d * 2 ** (d + 1) * e_high,
        "edit_free_level": n * b1 + d * 2**d * e_high * n * n,
    }
    if injected_bound is not None:
        b = injected_bound
        target_high = max(b1, d * 2 ** (d + 1) * (b1 + b))
        first = n * b1 + d * 2**d * target_high * n * n
        out["push_level"] = max(first, d * d * 2 ** (2 * d + 2) * (b1 + b))
        out["push_level_alt"] = max(
            first, (d * d + 1) * 2 ** (2 * d + 1) * (b1 + b)
        )
    return out


# ---------------------------------------------------------------------------
# Rewrites

DeltaCounts = Union[Mapping[Union[State, str], int], Sequence[int]]


def _delta_vector(ordering: DeltaOrdering, value: DeltaCounts, what: str) -> list[int]:
    """Normalize counts over the ordered delta states to a plain list."""
    if isinstance(value, Mapping):
        vec = [0] * ordering.d
        for key, v in value.items():
            vec[ordering.position(key)] = v
    else:
        vec = list(value)
        if len(vec) != ordering.d:
            raise SurgeryError(
                f"{what} must have {ordering.d} entries, got {len(vec)}"
            )
    for v in vec:
        if not isinstance(v, int) or v < 0:
            raise CountError(f"{what} entries must be nonnegative integers")
    return vec


def _embed_delta(ordering: DeltaOrdering, vec: Sequence[int]) -> Configuration:
    counts = [0] * len(ordering.protocol.states)
    for s, v in zip(ordering.delta, vec):
        counts[s.index] = v
    return Configuration(ordering.protocol, counts)


class PathReport(NamedTuple):
    """Outcome of replaying a transition sequence against an origin."""

    valid: bool
    index: Optional[int]
    state: Optional[State]


def verify_path_validity(
    origin: Configuration, path: TransitionSequence | Iterable[Transition]
) -> PathReport:
    """Replay a sequence, reporting the first step that would go negative.

    Unlike execute_path this never raises on underflow; failure is the
    return value, identifying the offending step index and the state whose
    count would drop below zero (the first input is checked first).
    """
    steps = path.steps if isinstance(path, TransitionSequence) else tuple(path)
    vec = list(origin.counts)
    for i, t in enumerate(steps):
        r1, r2 = t.r1.index, t.r2.index
        if r1 == r2:
            if vec[r1] < 2:
                return PathReport(False, i, t.r1)
        else:
            if vec[r1] < 1:
                return PathReport(False, i, t.r1)
            if vec[r2] < 1:
                return PathReport(False, i, t.r2)
        vec[r1] -= 1
        vec[r2] -= 1
        vec[t.p1.index] += 1
        vec[t.p2.index] += 1
    return PathReport(True, None, None)


class DrainResult(NamedTuple):
    """A freshly built drain: its fuel, all-gamma outcome, and path."""

    fuel: Configuration
    final: Configuration
    path: TransitionSequence

    def to_dict(self) -> dict[str, object]:
        return {
            "fuel": self.fuel.to_dict(),
            "final": self.final.to_dict(),
            "steps": [str(t) for t in self.path.steps],
        }


def eliminate_delta(
    protocol: Protocol, ordering: DeltaOrdering, c_delta: DeltaCounts
) -> DrainResult:
    """Build a path that drains c_delta to zero across all delta states.

    Returns the fuel configuration (the co-input agents the drain consumes;
    it may itself contain delta states), the resulting configuration (gamma
    states only), and the path, whose origin is c_delta plus the fuel.  The
    schedule is staged: stage i fires the firings owed to the delta agents
    produced during stage i-1, so every firing's first input already
    exists, and the fuel covers every other input exactly.
    """
    mats = build_matrices(protocol, ordering)
    c = _delta_vector(ordering, c_delta, "c_delta")
    fuel = mats.fuel(c)
    origin = _embed_delta(ordering, c) + fuel

    steps: list[Transition] = []
    vec = c
    for _ in range(ordering.d):
        if not any(vec):
            break
        for j, t in enumerate(ordering.witnesses):
            steps.extend([t] * vec[j])
        vec = _mat_vec(mats.offspring, vec)

    path = TransitionSequence(origin, tuple(steps))
    final = path.execute()
    expected = mats.drain_result(c)
    if final != expected:
        raise InvalidEdit(
            f"drain bookkeeping mismatch: executed {final!r}, predicted {expected!r}"
        )
    return DrainResult(fuel, final, path)


class RetargetResult(NamedTuple):
    """An edited host path, the buffer it runs in, and its predicted end."""

    edited: TransitionSequence
    buffer: Configuration
    predicted: Configuration
    additions: dict[Transition, int]
    removals: dict[Transition, int]

    def to_dict(self) -> dict[str, object]:
        return {
            "additions": {str(t): c for t, c in self.additions.items()},
            "removals": {str(t): c for t, c in self.removals.items()},
            "buffer": self.buffer.to_dict(),
            "predicted": self.predicted.to_dict(),
            "steps": [str(t) for t in self.edited.steps],
        }


def produce_e(
    protocol: Protocol,
    ordering: DeltaOrdering,
    host: TransitionSequence,
    e_delta: DeltaCounts,
    b1: int,
    buffer: Configuration | int | None = None,
) -> RetargetResult:
    """Edit a host path so it ends with exactly e_delta on the delta states.

    Where the host naturally ends with delta counts o_delta, the signed
    cascade prescribes per-witness firing adjustments for the difference
    o_delta - e_delta: positive entries are appended after the host (in
    witness order, so earlier witnesses feed the later ones' first inputs),
    negative entries remove the last occurrences from the host, leaving
    every removal at its original position.  The edit borrows transient
    slack from a buffer of spare agents -- by default b1-sized per the
    guarantee, d * 2**(d+1) * max(b1, e_delta) of every state -- and
    returns it in full: the predicted final configuration is

        buffer + o_gamma + gamma_shift . (o_delta - e_delta) + e_delta

    and the edited sequence is executed from buffer + host origin to check
    it.  Raises InsufficientOccurrences if the host lacks removable
    firings, InvalidEdit if the rewritten path underflows (possible when b1
    understates the host's final delta counts; a SurgeryWarning flags that).
    """
    mats = build_matrices(protocol, ordering)
    o = host.execute()
    o_delta = [o[s] for s in ordering.delta]
    e_vec = _delta_vector(ordering, e_delta, "e_delta")
    if b1 < 0:
        raise CountError("b1 must be nonnegative")
    if b1 < max(o_delta, default=0):
        warnings.warn(
            f"b1={b1} is below the host's largest final delta count "
            f"{max(o_delta)}; the buffer guarantee does not apply",
            SurgeryWarning,
            stacklevel=2,
        )

    edit = mats.edit_vector(o_delta, e_vec)
    removals = {
        t: -edit[j] for j, t in enumerate(ordering.witnesses) if edit[j] < 0
    }
    additions = {
        t: edit[j] for j, t in enumerate(ordering.witnesses) if edit[j] > 0
    }

    present = Counter(host.steps)
    for t, needed in removals.items():
        if present[t] < needed:
            raise InsufficientOccurrences(t, needed, present[t])

    drop: set[int] = set()
    short = dict(removals)
    for i in range(len(host.steps) - 1, -1, -1):
        if not short:
            break
        t = host.steps[i]
        if short.get(t):
            drop.add(i)
            short[t] -= 1
            if not short[t]:
                del short[t]
    kept = [t for i, t in enumerate(host.steps) if i not in drop]
    for t in ordering.witnesses:
        kept.extend([t] * additions.get(t, 0))

    if buffer is None:
        level = ordering.d * 2 ** (ordering.d + 1) * max([b1, *e_vec])
        buffer_cfg = Configuration(protocol, [level] * len(protocol.states))
    elif isinstance(buffer, int):
        buffer_cfg = Configuration(protocol, [buffer] * len(protocol.states))
    else:
        buffer_cfg = buffer

    shift = _mat_vec(
        mats.gamma_shift, [od - ed for od, ed in zip(o_delta, e_vec)]
    )
    predicted_counts = list(buffer_cfg.counts)
    for s in mats.gamma:
        predicted_counts[s.index] += o[s]
    for s, v in zip(mats.gamma, shift):
        predicted_counts[s.index] += v
    for s, v in zip(ordering.delta, e_vec):
        predicted_counts[s.index] += v
    if min(predicted_counts, default=0) < 0:
        raise InvalidEdit(
            "predicted final configuration is negative; the buffer cannot "
            "absorb this edit"
        )
    predicted = Configuration(protocol, predicted_counts)

    origin = buffer_cfg + host.origin
    report = verify_path_validity(origin, kept)
    if not report.valid:
        raise InvalidEdit(
            f"edited path drops {report.state} below zero at step {report.index}"
        )
    edited = TransitionSequence(origin, tuple(kept))
    final = edited.execute()
    if final != predicted:
        raise InvalidEdit(
            f"edit bookkeeping mismatch: executed {final!r}, predicted {predicted!r}"
        )
    return RetargetResult(edited, buffer_cfg, predicted, additions, removals)


class PushResult(NamedTuple):
    """The composed two-copy rewrite and its (exactly predicted) endpoint."""

    full: TransitionSequence
    final: Configuration
    predicted: Configuration

    def to_dict(self) -> dict[str, object]:
        return {
            "origin": self.full.origin.to_dict(),
            "final": self.final.to_dict(),
            "predicted": self.predicted.to_dict(),
            "steps": [str(t) for t in self.full.steps],
        }


def push_delta(
    protocol: Protocol,
    ordering: DeltaOrdering,
    x: Configuration,
    host: TransitionSequence,
    d_delta: DeltaCounts,
    t_delta: DeltaCounts,
    b1: int,
) -> PushResult:
    """Steer two copies of x plus injected delta agents to a delta target.

    Composes three stages from the doubled origin 2x + d_delta:

    1. retarget one copy of x through the host so it ends with the fuel the
       final drain will need plus the target t_delta, the second copy
       standing in as the buffer;
    2. replay the host unmodified on the second copy, ending in o;
    3. drain c = d_delta + o_delta with the staged schedule, consuming the
       fuel produced in stage 1.

    The final configuration restricted to the delta states equals t_delta
    exactly, and the gamma part equals

        2*o_gamma + host_coeff . o_delta + inject_coeff . d_delta
                  - gamma_shift . t_delta

    (the last term vanishes for the usual target t_delta = 0).  Raises
    BufferTooSmall when the composed path underflows and x is below the
    guaranteed reserve, InvalidEdit when it underflows despite a sufficient
    reserve, plus anything produce_e raises.
    """
    mats = build_matrices(protocol, ordering)
    if host.origin != x:
        raise SurgeryError("host path must start at x")
    o = host.execute()
    o_delta = [o[s] for s in ordering.delta]
    d_vec = _delta_vector(ordering, d_delta, "d_delta")
    t_vec = _delta_vector(ordering, t_delta, "t_delta")

    c = [dv + ov for dv, ov in zip(d_vec, o_delta)]
    drain = eliminate_delta(protocol, ordering, c)
    e2 = [drain.fuel[s] + tv for s, tv in zip(ordering.delta, t_vec)]
    retarget = produce_e(protocol, ordering, host, e2, b1)

    reserve_ok = all(
        xa >= pa for xa, pa in zip(x.counts, retarget.buffer.counts)
    )
    if not reserve_ok:
        warnings.warn(
            "x is below the guaranteed reserve for this edit; attempting anyway",
            SurgeryWarning,
            stacklevel=2,
        )

    origin = x + x + _embed_delta(ordering, d_vec)
    steps = retarget.edited.steps + host.steps + drain.path.steps
    report = verify_path_validity(origin, steps)
    if not report.valid:
        if not reserve_ok:
            raise BufferTooSmall(report.state, report.index)
        raise InvalidEdit(
            f"composed path drops {report.state} below zero at step "
            f"{report.index}"
        )
    full = TransitionSequence(origin, steps)
    final = execute_path(origin, steps)

    host_term = _mat_vec(mats.host_coeff, o_delta)
    inject_term = _mat_vec(mats.inject_coeff, d_vec)
    target_term = _mat_vec(mats.gamma_shift, t_vec)
    predicted_counts = [0] * len(protocol.states)
    for s in mats.gamma:
        predicted_counts[s.index] = 2 * o[s]
    for s, hv, iv, tv in zip(mats.gamma, host_term, inject_term, target_term):
        predicted_counts[s.index] += hv + iv - tv
    for s, tv in zip(ordering.delta, t_vec):
        predicted_counts[s.index] = tv
    if min(predicted_counts, default=0) < 0:
        raise InvalidEdit("predicted final configuration is negative")
    predicted = Configuration(protocol, predicted_counts)
    if final != predicted:
        raise InvalidEdit(
            f"push bookkeeping mismatch: executed {final!r}, predicted "
            f"{predicted!r}"
        )
    return PushResult(full, final, predicted)
