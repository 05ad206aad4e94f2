"""Ready-made protocols and compilers for linear counting tasks.

The builtin zoo packages the small classics — doubling, exact and
approximate halving, truncated subtraction, and the voting predicates
(majority, parity, equality) — as :class:`ProtocolInstance` values that
carry their input conventions and output oracles. Two compilers
generalize the function protocols: :func:`compile_nlinear` emits an
exact protocol for any ``f(m) = sum ci * m(i)`` with natural
coefficients, and :func:`compile_qlinear_approx` emits a fast
approximator for nonnegative rational coefficients whose accuracy and
speed are tuned by the initial count of an auxiliary state.

Generated protocols are built as protocol-format source text and then
parsed, so every instance round-trips through the same file format that
hand-written protocols use.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from popproto.core import (
    Configuration,
    DomainError,
    Protocol,
    ProtocolError,
    State,
    is_silent,
    parse_protocol,
)
from popproto.linear import LinearSpec

__all__ = [
    "NegativeCoefficient",
    "NonNaturalCoefficient",
    "ProtocolInstance",
    "UnknownName",
    "builtin",
    "builtin_names",
    "compile_nlinear",
    "compile_qlinear_approx",
]


class UnknownName(ProtocolError):
    """Requested builtin protocol does not exist."""


class NonNaturalCoefficient(DomainError):
    """Exact compilation needs coefficients that are natural numbers."""


class NegativeCoefficient(DomainError):
    """Approximate compilation needs nonnegative coefficients."""


@dataclass(frozen=True)
class ProtocolInstance:
    """A protocol bundled with its input convention and output oracle.

    ``q0`` maps the input vector (and, for protocols with an approx
    state, the approximation count) to the initial quiescent count; it
    is ``None`` for voting protocols, whose initial configurations
    contain input states only. ``q0_bound`` states the linearity
    constant: ``q0(m[, a]) <= q0_bound * (sum(m) + a + 1)``.

    ``stabilized`` is a configuration predicate usable as a simulation
    stop condition: once it holds, the observable output can never
    change again. ``expected_output`` is the oracle — called as
    ``f(m)`` (or ``f(m, a)``) it returns the exact final output count,
    an inclusive ``(lo, hi)`` interval of admissible counts, or the
    expected vote in {0, 1} for voting protocols.
    """

    name: str
    protocol: Protocol
    q0: Callable[..., int] | None
    stabilized: Callable[[Configuration], bool]
    expected_output: Callable[..., int | tuple[int, int]]
    a0: int | None = None
    q0_bound: int | None = None

    @property
    def arity(self) -> int:
        return len(self.protocol.inputs)

    @property
    def uses_approx(self) -> bool:
        return self.protocol.approx is not None

    def input_states(self) -> tuple[State, ...]:
        return tuple(sorted(self.protocol.inputs))

    def initial(self, m: int | Sequence[int], a: int | None = None) -> Configuration:
        """Build the initial configuration for input ``m`` (and count ``a``).

        Counts are placed on the input states, the quiescent state
        (per ``q0``), and the approx state; all other states start at
        zero. Raises DomainError on arity/sign/approx-count misuse.
        """
        vec = (m,) if isinstance(m, int) else tuple(m)
        xs = self.input_states()
        if len(vec) != len(xs):
            raise DomainError(
                f"input {vec!r} has wrong arity for {len(xs)} input states"
            )
        counts: dict[str, int] = {}
        for s, v in zip(xs, vec):
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise DomainError(f"input counts must be nonnegative integers: {v!r}")
            counts[s.name] = v
        if self.uses_approx:
            floor = self.a0 if self.a0 is not None else 1
            if a is None:
                raise DomainError(f"{self.name} needs an approximation count")
            if not isinstance(a, int) or isinstance(a, bool) or a < floor:
                raise DomainError(f"approximation count must be an integer >= {floor}")
            counts[self.protocol.approx.name] = a
        elif a is not None:
            raise DomainError(f"{self.name} takes no approximation count")
        if self.q0 is not None:
            if self.protocol.quiescent is None:
                raise DomainError(f"{self.name} has q0 but no quiescent state")
            counts[self.protocol.quiescent.name] = (
                self.q0(vec, a) if self.uses_approx else self.q0(vec)
            )
        c = Configuration.from_dict(self.protocol, counts)
        if c.n == 0:
            raise DomainError("initial population is empty")
        return c

    def expected(self, m: int | Sequence[int], a: int | None = None):
        """Oracle value for input ``m``: exact count, interval, or vote."""
        vec = (m,) if isinstance(m, int) else tuple(m)
        if self.uses_approx:
            return self.expected_output(vec, a)
        return self.expected_output(vec)

    def source(self) -> str:
        """Protocol-format source text (parse_protocol round-trips it)."""
        return self.protocol.to_text()


# ---------------------------------------------------------------------------
# Builtin zoo
# ---------------------------------------------------------------------------


def _double() -> ProtocolInstance:
    """f(m) = 2m: each input converts one quiescent agent into two outputs.

    Layout q0 = m pairs every input agent with a partner, so the single
    rule runs to completion; stabilized once no input remains (then no
    rule is applicable, so the output count is final).
    """
    p = parse_protocol(
        "states: x y q\n"
        "inputs: x\n"
        "output: y\n"
        "quiescent: q\n"
        "transition: x q -> y y\n"
    )
    x = p.state("x")
    return ProtocolInstance(
        name="double",
        protocol=p,
        q0=lambda m: m[0],
        stabilized=lambda c: c[x] == 0,
        expected_output=lambda m: 2 * m[0],
        q0_bound=1,
    )


def _halve_slow() -> ProtocolInstance:
    """f(m) = floor(m/2), exactly: input pairs cancel into output + quiescent.

    No quiescent agents are needed initially. Stabilized once at most
    one input remains (the pairing rule then can never fire). The last
    pairing takes expected time linear in the population, so this is
    the slow exact route; halve_fast trades exactness for speed.
    """
    p = parse_protocol(
        "states: x y q\n"
        "inputs: x\n"
        "output: y\n"
        "quiescent: q\n"
        "transition: x x -> y q\n"
    )
    x = p.state("x")
    return ProtocolInstance(
        name="halve_slow",
        protocol=p,
        q0=lambda m: 0,
        stabilized=lambda c: c[x] <= 1,
        expected_output=lambda m: m[0] // 2,
        q0_bound=0,
    )


def _halve_fast() -> ProtocolInstance:
    """Approximate halving: a tokens alternate output/quiescent per input eaten.

    Each of the ``a`` approximation tokens flips between two phases,
    emitting an output on the first phase and a quiescent agent on the
    second, so outputs lead by at most one per token: the final output
    count lands in [floor(m/2), floor(m/2) + a]. Larger ``a`` is
    faster and coarser. Stabilized exactly when no input remains.
    """
    p = parse_protocol(
        "states: x a b y q\n"
        "inputs: x\n"
        "output: y\n"
        "quiescent: q\n"
        "approx: a\n"
        "transition: a x -> b y\n"
        "transition: b x -> a q\n"
    )
    x = p.state("x")
    return ProtocolInstance(
        name="halve_fast",
        protocol=p,
        q0=lambda m, a: 0,
        stabilized=lambda c: c[x] == 0,
        expected_output=lambda m, a: (m[0] // 2, m[0] // 2 + a),
        a0=1,
        q0_bound=0,
    )


def _subtract() -> ProtocolInstance:
    """f(m1, m2) = max(0, m1 - m2): outputs minted from x1, eaten by x2.

    Each x1 becomes an output against a quiescent catalyst (q0 = m1
    keeps a catalyst available) and each x2 destroys one output. The
    final output count is the truncated difference whichever order the
    rules fire in. Stabilized once x1 is gone and x2 or y is exhausted.
    """
    p = parse_protocol(
        "states: x1 x2 y q\n"
        "inputs: x1 x2\n"
        "output: y\n"
        "quiescent: q\n"
        "transition: x1 q -> y q\n"
        "transition: x2 y -> q q\n"
    )
    x1, x2, y = p.state("x1"), p.state("x2"), p.state("y")
    return ProtocolInstance(
        name="subtract",
        protocol=p,
        q0=lambda m: m[0],
        stabilized=lambda c: c[x1] == 0 and (c[x2] == 0 or c[y] == 0),
        expected_output=lambda m: max(0, m[0] - m[1]),
        q0_bound=1,
    )


def _majority() -> ProtocolInstance:
    """Vote on m1 >= m2 (ties answer 1).

    Opposing inputs cancel into follower states carrying their side's
    vote; a surviving input recruits followers to its side, and the
    tie rule lets 1-followers absorb 0-followers once no input
    remains. Stabilized when silent, which is exactly when the vote is
    unanimous and frozen.
    """
    p = parse_protocol(
        "states: x1 x2 q1 q2\n"
        "inputs: x1 x2\n"
        "voters1: x1 q1\n"
        "transition: x1 x2 -> q1 q2\n"
        "transition: x1 q2 -> x1 q1\n"
        "transition: x2 q1 -> x2 q2\n"
        "transition: q1 q2 -> q1 q1\n"
    )
    return ProtocolInstance(
        name="majority",
        protocol=p,
        q0=None,
        stabilized=is_silent,
        expected_output=lambda m: 1 if m[0] >= m[1] else 0,
    )


def _parity() -> ProtocolInstance:
    """Vote on whether m is odd.

    Input pairs cancel into even-voters, so one input survives iff m
    is odd; the survivor recruits even-voters to odd-voters, while
    even-voters reclaim odd-voters whenever no survivor backs them.
    Stabilized when silent (all-even, or survivor plus odd-voters).
    """
    p = parse_protocol(
        "states: x e o\n"
        "inputs: x\n"
        "voters1: x o\n"
        "transition: x x -> e e\n"
        "transition: x e -> x o\n"
        "transition: e o -> e e\n"
    )
    return ProtocolInstance(
        name="parity",
        protocol=p,
        q0=None,
        stabilized=is_silent,
        expected_output=lambda m: m[0] % 2,
    )


def _equality() -> ProtocolInstance:
    """Vote on m1 == m2.

    Opposing inputs cancel into equal-voters; any surviving input
    converts equal-voters to unequal-voters, and equal-voters clean up
    stray unequal-voters once every input has cancelled. Stabilized
    when silent.
    """
    p = parse_protocol(
        "states: x1 x2 e u\n"
        "inputs: x1 x2\n"
        "voters1: e\n"
        "transition: x1 x2 -> e e\n"
        "transition: x1 e -> x1 u\n"
        "transition: x2 e -> x2 u\n"
        "transition: e u -> e e\n"
    )
    return ProtocolInstance(
        name="equality",
        protocol=p,
        q0=None,
        stabilized=is_silent,
        expected_output=lambda m: 1 if m[0] == m[1] else 0,
    )


_BUILTINS: dict[str, Callable[[], ProtocolInstance]] = {
    "double": _double,
    "halve_slow": _halve_slow,
    "halve_fast": _halve_fast,
    "subtract": _subtract,
    "majority": _majority,
    "parity": _parity,
    "equality": _equality,
}


def builtin_names() -> tuple[str, ...]:
    """Names accepted by :func:`builtin`, sorted."""
    return tuple(sorted(_BUILTINS))


def builtin(name: str) -> ProtocolInstance:
    """Fetch a builtin protocol instance by name. Raises UnknownName."""
    try:
        make = _BUILTINS[name]
    except KeyError:
        known = ", ".join(sorted(_BUILTINS))
        raise UnknownName(f"no builtin named {name!r} (known: {known})") from None
    return make()


# ---------------------------------------------------------------------------
# Exact compiler: natural coefficients
# ---------------------------------------------------------------------------


def _multiply_rules(
    i: int, target: str, count: int, intermediates: list[str], rules: list[str]
) -> None:
    """Emit rules converting each x{i} into ``count`` copies of ``target``.

    count >= 2 uses a countdown chain x{i} -> x{i}_p{count-1} -> ... ->
    x{i}_p2, emitting one ``target`` per step against a quiescent agent
    and two on the last step; count == 1 relabels against a quiescent
    catalyst; count == 0 folds the input into the quiescent state.
    """
    x = f"x{i}"
    if count == 0:
        rules.append(f"transition: {x} q -> q q")
    elif count == 1:
        rules.append(f"transition: {x} q -> {target} q")
    elif count == 2:
        rules.append(f"transition: {x} q -> {target} {target}")
    else:
        chain = [f"x{i}_p{j}" for j in range(count - 1, 1, -1)]
        intermediates.extend(chain)
        prev = x
        for s in chain:
            rules.append(f"transition: {prev} q -> {target} {s}")
            prev = s
        rules.append(f"transition: {prev} q -> {target} {target}")


def compile_nlinear(coefficients: Sequence[int]) -> ProtocolInstance:
    """Compile f(m) = sum ci * m(i) with natural ci into an exact protocol.

    Every input agent is converted, one interaction with a quiescent
    agent at a time, into exactly ci output agents (zero coefficients
    fold their inputs into the quiescent state so stabilization is
    still detectable by counts alone). The initial quiescent count
    q0(m) = sum ci * m(i) + 1 covers every conversion with a catalyst
    to spare, and is linearly bounded by (max ci + 1) * (sum(m) + 1).

    The simulated final output count equals f(m) on every run; the
    instance's stabilized predicate (all inputs and chain intermediates
    at zero) freezes the output exactly when conversion completes.
    """
    cs = tuple(coefficients)
    if not cs:
        raise DomainError("need at least one coefficient")
    for v in cs:
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise NonNaturalCoefficient(
                f"coefficients must be natural numbers, got {v!r}"
            )
    k = len(cs)
    xs = [f"x{i}" for i in range(1, k + 1)]
    intermediates: list[str] = []
    rules: list[str] = []
    for i, ci in enumerate(cs, start=1):
        _multiply_rules(i, "y", ci, intermediates, rules)
    lines = [
        "states: " + " ".join(xs + intermediates + ["y", "q"]),
        "inputs: " + " ".join(xs),
        "output: y",
        "quiescent: q",
        *rules,
    ]
    p = parse_protocol("\n".join(lines) + "\n")
    watched = tuple(p.state(s) for s in xs + intermediates)
    return ProtocolInstance(
        name="nlinear(" + ",".join(str(v) for v in cs) + ")",
        protocol=p,
        q0=lambda m: sum(ci * v for ci, v in zip(cs, m)) + 1,
        stabilized=lambda c: all(c[s] == 0 for s in watched),
        expected_output=lambda m: sum(ci * v for ci, v in zip(cs, m)),
        q0_bound=max(cs) + 1 if max(cs) else 1,
    )


# ---------------------------------------------------------------------------
# Approximating compiler: nonnegative rational coefficients
# ---------------------------------------------------------------------------


def compile_qlinear_approx(
    spec: LinearSpec | Sequence[Fraction | int | str],
) -> ProtocolInstance:
    """Compile f(m) = sum floor(pi/ri * m(i)), all ci >= 0, approximately.

    Three rule groups run concurrently. First, per-input multiply
    chains turn each x{i} into exactly pi copies of an accumulator
    y{i} (coefficient 0 folds its input into the quiescent state).
    Second, the approximation tokens ``a`` split through a binary tree
    of depth ceil(log2 k) into one token family a{i}_1 per input (for
    k = 1 the ``a`` state is used directly). Third, each token family
    cycles through ri phases, consuming one y{i} per phase and
    emitting one final output y on the first phase of each cycle — so
    every full cycle converts ri accumulators into one output, and a
    token stranded mid-cycle overshoots by at most one output.

    With ``a`` tokens per input the final count obeys
    f(m) <= y-count <= f(m) + k*a; the oracle reports the symmetric
    envelope |y - f(m)| <= k*a as an inclusive interval. Accuracy and
    speed trade off through ``a``: stabilization takes expected
    parallel time O((n/a) * log n).

    The quiescent layout q0(m, a) = 2*(2k*a + sum pi*m(i)) + sum(m) + a
    doubles the worst-case consumption so quiescent agents stay
    plentiful (at least half the population) throughout.
    """
    if not isinstance(spec, LinearSpec):
        spec = LinearSpec(tuple(Fraction(v) for v in spec))
    if spec.k == 0:
        raise DomainError("need at least one coefficient")
    for c in spec.coefficients:
        if c < 0:
            raise NegativeCoefficient(f"coefficients must be nonnegative, got {c}")
    k = spec.k
    pairs = spec.pairs
    xs = [f"x{i}" for i in range(1, k + 1)]
    intermediates: list[str] = []
    accumulators: list[str] = []
    rules: list[str] = []

    for i, (p_i, _) in enumerate(pairs, start=1):
        if p_i == 0:
            _multiply_rules(i, "y", 0, intermediates, rules)
        else:
            accumulators.append(f"y{i}")
            _multiply_rules(i, f"y{i}", p_i, intermediates, rules)

    tree: list[str] = []
    entries: dict[int, str] = {}
    if k == 1:
        entries[1] = "a"
    else:
        depth = (k - 1).bit_length()
        for level in range(1, depth + 1):
            tree.extend("a_" + "".join(bits) for bits in product("01", repeat=level))
        rules.append("transition: a q -> a_0 a_1")
        for level in range(1, depth):
            for bits in product("01", repeat=level):
                s = "".join(bits)
                rules.append(f"transition: a_{s} q -> a_{s}0 a_{s}1")
        leaves = ["".join(bits) for bits in product("01", repeat=depth)]
        for i in range(1, k + 1):
            entries[i] = f"a{i}_1"
            tree.append(entries[i])
            rules.append(f"transition: a_{leaves[i - 1]} q -> {entries[i]} q")

    cycles: list[str] = []
    for i, (p_i, r_i) in enumerate(pairs, start=1):
        if p_i == 0:
            continue
        yi = f"y{i}"
        if r_i == 1:
            rules.append(f"transition: {yi} q -> y q")
            continue
        phases = [entries[i]] + [f"a{i}_{j}" for j in range(2, r_i + 1)]
        cycles.extend(phases[1:])
        rules.append(f"transition: {phases[0]} {yi} -> {phases[1]} y")
        for j in range(1, r_i):
            nxt = phases[(j + 1) % r_i]
            rules.append(f"transition: {phases[j]} {yi} -> {nxt} q")

    states = xs + intermediates + accumulators + ["a"] + tree + cycles + ["y", "q"]
    lines = [
        "states: " + " ".join(states),
        "inputs: " + " ".join(xs),
        "output: y",
        "quiescent: q",
        "approx: a",
        *rules,
    ]
    p = parse_protocol("\n".join(lines) + "\n")
    watched = tuple(p.state(s) for s in xs + intermediates + accumulators)
    max_p = max((p_i for p_i, _ in pairs), default=0)

    def q0(m: tuple[int, ...], a: int) -> int:
        return 2 * (2 * k * a + sum(p_i * v for (p_i, _), v in zip(pairs, m))) + sum(
            m
        ) + a

    def expected(m: tuple[int, ...], a: int) -> tuple[int, int]:
        exact = spec.evaluate(m)
        return (max(0, exact - k * a), exact + k * a)

    return ProtocolInstance(
        name="qlinear(" + ",".join(str(c) for c in spec.coefficients) + ")",
        protocol=p,
        q0=q0,
        stabilized=lambda c: all(c[s] == 0 for s in watched),
        expected_output=expected,
        a0=1,
        q0_bound=max(2 * max_p + 1, 4 * k + 1),
    )
