"""Population protocol model: states, transitions, configurations, parsing.

A protocol is a finite state set with a symmetric deterministic pairwise
transition function. Unordered state pairs without a declared transition map
to themselves (null transitions); those are never stored, only materialized
on demand. Configurations are nonnegative integer count vectors over states
with checked arithmetic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

U64_MAX = 2**64 - 1

_NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")


class ProtocolError(Exception):
    """Base class for protocol construction and file-format errors."""


class ParseError(ProtocolError):
    """Malformed protocol description; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateTransition(ParseError):
    """One unordered input pair was given two conflicting output pairs."""


class RoleError(ParseError):
    """A role annotation violates a role invariant (membership, disjointness)."""


class NotApplicable(ProtocolError):
    """Transition inputs are not present in the configuration."""


class InvalidAt(ProtocolError):
    """Transition sequence failed; carries the index of the first bad step."""

    def __init__(self, index: int, transition: "Transition"):
        self.index = index
        self.transition = transition
        super().__init__(f"step {index} not applicable: {transition}")


class CountError(ProtocolError):
    """Configuration arithmetic left the unsigned 64-bit range."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


@dataclass(frozen=True, order=True)
class State:
    """A protocol state: dense index plus unique identifier name."""

    index: int
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Transition:
    """One pairwise rule r1,r2 -> p1,p2 (inputs and outputs each sorted)."""

    r1: State
    r2: State
    p1: State
    p2: State

    @property
    def is_null(self) -> bool:
        return (self.r1, self.r2) == (self.p1, self.p2)

    def net(self, s: State) -> int:
        """Net count change of state s when this transition fires."""
        return (s == self.p1) + (s == self.p2) - (s == self.r1) - (s == self.r2)

    def consumes(self, s: State) -> bool:
        return self.net(s) < 0

    def produces(self, s: State) -> bool:
        return self.net(s) > 0

    @property
    def states(self) -> tuple[State, ...]:
        return (self.r1, self.r2, self.p1, self.p2)

    def __str__(self) -> str:
        return f"{self.r1},{self.r2} -> {self.p1},{self.p2}"


def _sorted_pair(a: State, b: State) -> tuple[State, State]:
    return (a, b) if a.index <= b.index else (b, a)


class Protocol:
    """Immutable protocol: states, total symmetric delta, role annotations.

    ``transitions`` holds the declared non-null rules; every other unordered
    pair is an implicit null transition. Roles (inputs, output, quiescent,
    approx, voters1) are optional and validated on construction.
    """

    def __init__(
        self,
        states: Sequence[str],
        transitions: Iterable[tuple[str, str, str, str]] = (),
        inputs: Iterable[str] = (),
        output: str | None = None,
        quiescent: str | None = None,
        approx: str | None = None,
        voters1: Iterable[str] | None = None,
    ):
        if not states:
            raise ParseError("protocol needs at least one state")
        seen: dict[str, State] = {}
        for i, name in enumerate(states):
            if not _NAME_RE.match(name):
                raise ParseError(f"bad state name {name!r}")
            if name in seen:
                raise ParseError(f"duplicate state name {name!r}")
            seen[name] = State(i, name)
        self.states: tuple[State, ...] = tuple(seen.values())
        self._by_name = seen

        self._delta: dict[tuple[int, int], tuple[State, State]] = {}
        self._order: list[tuple[int, int]] = []
        for r1, r2, p1, p2 in transitions:
            self._declare(r1, r2, p1, p2)

        self.inputs: frozenset[State] = frozenset(self.state(s) for s in inputs)
        self.output: State | None = self.state(output) if output else None
        self.quiescent: State | None = self.state(quiescent) if quiescent else None
        self.approx: State | None = self.state(approx) if approx else None
        self.voters1: frozenset[State] | None = (
            frozenset(self.state(s) for s in voters1) if voters1 is not None else None
        )
        self._check_roles()

    def _check_roles(self) -> None:
        if self.quiescent is not None and self.quiescent in self.inputs:
            raise RoleError(f"quiescent state {self.quiescent} must not be an input")
        if self.approx is not None:
            banned = set(self.inputs) | {self.output, self.quiescent}
            if self.approx in banned:
                raise RoleError(
                    f"approx state {self.approx} must be distinct from inputs, output, quiescent"
                )

    def _declare(self, r1: str, r2: str, p1: str, p2: str, line: int | None = None) -> None:
        ins = _sorted_pair(self.state(r1, line), self.state(r2, line))
        outs = _sorted_pair(self.state(p1, line), self.state(p2, line))
        key = (ins[0].index, ins[1].index)
        if key in self._delta:
            if self._delta[key] != outs:
                raise DuplicateTransition(
                    f"pair {ins[0]},{ins[1]} already maps to "
                    f"{self._delta[key][0]},{self._delta[key][1]}",
                    line,
                )
            return
        if outs == ins:
            return  # explicit null; not stored
        self._delta[key] = outs
        self._order.append(key)

    # -- lookups ---------------------------------------------------------

    def state(self, name: str, line: int | None = None) -> State:
        try:
            return self._by_name[name]
        except KeyError:
            raise ParseError(f"unknown state {name!r}", line) from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def output_pair(self, a: State, b: State) -> tuple[State, State]:
        """Total delta: the output pair for unordered inputs {a, b}."""
        ins = _sorted_pair(a, b)
        return self._delta.get((ins[0].index, ins[1].index), ins)

    def transition(self, a: State, b: State) -> Transition:
        """The (possibly null) transition for unordered inputs {a, b}."""
        ins = _sorted_pair(a, b)
        outs = self.output_pair(a, b)
        return Transition(ins[0], ins[1], outs[0], outs[1])

    @property
    def transitions(self) -> tuple[Transition, ...]:
        """Declared non-null transitions, in declaration order."""
        return tuple(
            Transition(self.states[i], self.states[j], *self._delta[(i, j)])
            for i, j in self._order
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Protocol):
            return NotImplemented
        return (
            [s.name for s in self.states] == [s.name for s in other.states]
            and self._delta == other._delta
            and self.inputs == other.inputs
            and self.output == other.output
            and self.quiescent == other.quiescent
            and self.approx == other.approx
            and self.voters1 == other.voters1
        )

    def __repr__(self) -> str:
        return f"Protocol({len(self.states)} states, {len(self._delta)} transitions)"

    # -- serialization ---------------------------------------------------

    def to_text(self) -> str:
        """Serialize to the line-oriented protocol file format."""
        lines = ["states: " + " ".join(s.name for s in self.states)]
        if self.inputs:
            lines.append("inputs: " + " ".join(s.name for s in sorted(self.inputs)))
        if self.output is not None:
            lines.append(f"output: {self.output}")
        if self.quiescent is not None:
            lines.append(f"quiescent: {self.quiescent}")
        if self.approx is not None:
            lines.append(f"approx: {self.approx}")
        if self.voters1 is not None:
            lines.append("voters1: " + " ".join(s.name for s in sorted(self.voters1)))
        for key in sorted(self._delta):
            i, j = key
            p1, p2 = self._delta[key]
            lines.append(
                f"transition: {self.states[i]} {self.states[j]} -> {p1} {p2}"
            )
        return "\n".join(lines) + "\n"


def _check_count(v: int) -> int:
    if not isinstance(v, int) or isinstance(v, bool):
        raise CountError(f"count must be an integer, got {v!r}")
    if v < 0:
        raise CountError(f"count went negative: {v}")
    if v > U64_MAX:
        raise CountError(f"count overflows 64 bits: {v}")
    return v


class Configuration:
    """Count vector over a protocol's states. Immutable value type.

    Equality and hashing are on the counts alone; configurations from
    different protocols should not be mixed.
    """

    __slots__ = ("protocol", "counts", "n")

    def __init__(self, protocol: Protocol, counts: Sequence[int]):
        if len(counts) != len(protocol.states):
            raise CountError(
                f"expected {len(protocol.states)} counts, got {len(counts)}"
            )
        counts = tuple(_check_count(v) for v in counts)
        object.__setattr__(self, "protocol", protocol)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", _check_count(sum(counts)))

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Configuration is immutable")

    @classmethod
    def from_dict(cls, protocol: Protocol, counts: Mapping[str, int]) -> "Configuration":
        vec = [0] * len(protocol.states)
        for name, v in counts.items():
            vec[protocol.state(name).index] = v
        return cls(protocol, vec)

    def __getitem__(self, s: State | str) -> int:
        if isinstance(s, str):
            s = self.protocol.state(s)
        return self.counts[s.index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.counts == other.counts

    def __hash__(self) -> int:
        return hash(self.counts)

    def __add__(self, other: "Configuration") -> "Configuration":
        return Configuration(
            self.protocol, [a + b for a, b in zip(self.counts, other.counts)]
        )

    def __sub__(self, other: "Configuration") -> "Configuration":
        return Configuration(
            self.protocol, [a - b for a, b in zip(self.counts, other.counts)]
        )

    def scale(self, k: int) -> "Configuration":
        if k < 0:
            raise CountError(f"cannot scale a configuration by {k}")
        return Configuration(self.protocol, [k * v for v in self.counts])

    def restrict(self, keep: Iterable[State]) -> "Configuration":
        """Zero out every state not in ``keep``."""
        kept = {s.index for s in keep}
        return Configuration(
            self.protocol,
            [v if i in kept else 0 for i, v in enumerate(self.counts)],
        )

    def support(self) -> tuple[State, ...]:
        return tuple(
            self.protocol.states[i] for i, v in enumerate(self.counts) if v > 0
        )

    def to_dict(self) -> dict[str, int]:
        return {
            self.protocol.states[i].name: v
            for i, v in enumerate(self.counts)
            if v > 0
        }

    def __repr__(self) -> str:
        inside = ", ".join(f"{v}*{k}" for k, v in self.to_dict().items()) or "empty"
        return "{" + inside + "}"


def is_applicable(c: Configuration, t: Transition) -> bool:
    """True iff the configuration contains the input pair as a multiset."""
    if t.r1 == t.r2:
        return c.counts[t.r1.index] >= 2
    return c.counts[t.r1.index] >= 1 and c.counts[t.r2.index] >= 1


def apply_transition(c: Configuration, t: Transition) -> Configuration:
    """Fire one transition: c - {r1,r2} + {p1,p2}. Raises NotApplicable."""
    if not is_applicable(c, t):
        raise NotApplicable(f"{t} not applicable in {c}")
    vec = list(c.counts)
    vec[t.r1.index] -= 1
    vec[t.r2.index] -= 1
    vec[t.p1.index] += 1
    vec[t.p2.index] += 1
    return Configuration(c.protocol, vec)


def is_silent(c: Configuration) -> bool:
    """True iff no non-null transition is applicable, so c can never change."""
    return not any(is_applicable(c, t) for t in c.protocol.transitions)


@dataclass(frozen=True)
class TransitionSequence:
    """An ordered list of transitions together with its origin configuration."""

    origin: Configuration
    steps: tuple[Transition, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self.steps)

    def execute(self) -> Configuration:
        return execute_path(self.origin, self.steps)

    def is_valid(self) -> bool:
        try:
            self.execute()
            return True
        except InvalidAt:
            return False


def execute_path(
    c: Configuration, path: TransitionSequence | Iterable[Transition]
) -> Configuration:
    """Run a transition sequence from c, returning the final configuration.

    Raises InvalidAt(index) at the first step whose transition is not
    applicable. Mutates a working vector internally; configurations passed
    in are never modified.
    """
    steps = path.steps if isinstance(path, TransitionSequence) else path
    vec = list(c.counts)
    for i, t in enumerate(steps):
        r1, r2 = t.r1.index, t.r2.index
        if r1 == r2:
            if vec[r1] < 2:
                raise InvalidAt(i, t)
        elif vec[r1] < 1 or vec[r2] < 1:
            raise InvalidAt(i, t)
        vec[r1] -= 1
        vec[r2] -= 1
        vec[t.p1.index] += 1
        vec[t.p2.index] += 1
    return Configuration(c.protocol, vec)


ROLE_KEYS = ("states", "inputs", "output", "quiescent", "approx", "voters1")


def parse_protocol(text: str) -> Protocol:
    """Parse the line-oriented protocol file format into a Protocol.

    Lines: ``states:``, one role line each of ``inputs:``, ``output:``,
    ``quiescent:``, ``approx:``, ``voters1:``, and any number of
    ``transition: a x -> b y`` lines. '#' starts a comment. Every token must
    be a declared state; unspecified pairs are null transitions.
    """
    stripped: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            stripped.append((lineno, line))

    names: list[str] = []
    states_no: int | None = None
    roles: dict[str, tuple[int, list[str]]] = {}
    rules: list[tuple[int, str, str, str, str]] = []
    for lineno, line in stripped:
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep or (key not in ROLE_KEYS and key != "transition"):
            raise ParseError(f"unrecognized line {line!r}", lineno)
        tokens = rest.split()
        if key == "transition":
            if "->" not in tokens:
                raise ParseError("transition needs '->'", lineno)
            arrow = tokens.index("->")
            ins, outs = tokens[:arrow], tokens[arrow + 1:]
            if len(ins) != 2 or len(outs) != 2:
                raise ParseError("transition needs two inputs and two outputs", lineno)
            rules.append((lineno, ins[0], ins[1], outs[0], outs[1]))
            continue
        if key in roles or (key == "states" and states_no is not None):
            raise ParseError(f"duplicate {key}: line", lineno)
        if not tokens:
            raise ParseError(f"{key}: line declares no states", lineno)
        if key in ("output", "quiescent", "approx") and len(tokens) != 1:
            raise ParseError(f"{key}: takes exactly one state", lineno)
        if key == "states":
            names, states_no = tokens, lineno
        else:
            roles[key] = (lineno, tokens)

    if states_no is None:
        raise ParseError("missing states: line")
    declared = set(names)
    if len(declared) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise ParseError(f"duplicate state name {dup!r}", states_no)
    for name in names:
        if not _NAME_RE.match(name):
            raise ParseError(f"bad state name {name!r}", states_no)
    for key, (lineno, tokens) in roles.items():
        for tok in tokens:
            if tok not in declared:
                raise ParseError(f"unknown state {tok!r}", lineno)

    def tokens_of(key: str) -> list[str]:
        return roles[key][1] if key in roles else []

    proto = Protocol(
        names,
        inputs=tokens_of("inputs"),
        output=tokens_of("output")[0] if "output" in roles else None,
        quiescent=tokens_of("quiescent")[0] if "quiescent" in roles else None,
        approx=tokens_of("approx")[0] if "approx" in roles else None,
        voters1=tokens_of("voters1") if "voters1" in roles else None,
    )
    for lineno, r1, r2, p1, p2 in rules:
        proto._declare(r1, r2, p1, p2, line=lineno)
    return proto
