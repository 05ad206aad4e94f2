"""Semilinear sets and finite-window classifiers for counting functions.

The sets a population can stably recognize are exactly the semilinear ones:
finite unions of periodic cosets ``{b + n1*p1 + ... + nl*pl}``.  This
module gives exact membership tests for those sets, the density test on
configurations, and classifiers for the function/predicate shapes that
separate fast from slow protocols: linear specs over rational
coefficients, eventually-affine behavior probed by the second-difference
identity on a finite window, and eventually-constant behavior probed by
exhaustive window evaluation.

The window checks are deliberately modest: "eventually X" quantifies over
all sufficiently large inputs, which no finite procedure can decide, so
every verdict here records the window it inspected and claims nothing
beyond it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, NamedTuple, Optional, Sequence, Union

from .core import Configuration, DomainError

__all__ = [
    "DimensionMismatch",
    "PeriodicCoset",
    "SemilinearSet",
    "LinearSpec",
    "LinearClass",
    "LinearClassification",
    "AffineFit",
    "Counterexample",
    "Constant",
    "CounterexamplePair",
    "coset_member",
    "semilinear_member",
    "is_alpha_dense",
    "classify_linear",
    "check_eventually_affine_window",
    "check_eventually_constant_window",
    "floor_toward_zero",
]


class DimensionMismatch(ValueError):
    """Vectors of different lengths were combined."""


IntVector = tuple[int, ...]


def _int_vector(value: Sequence[int], what: str) -> IntVector:
    out = tuple(value)
    for v in out:
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise ValueError(f"{what} entries must be nonnegative integers: {v!r}")
    return out


def floor_toward_zero(q: Union[Fraction, int]) -> int:
    """The integer closest to 0 within distance < 1 of q (truncation)."""
    return int(q)


# ---------------------------------------------------------------------------
# Semilinear sets


@dataclass(frozen=True)
class PeriodicCoset:
    """The set {base + n1*p1 + ... + nl*pl | n1..nl in N}.

    With no periods this is the singleton {base}.  All entries are
    nonnegative integers, so membership is decidable by a finite search.
    """

    base: IntVector
    periods: tuple[IntVector, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", _int_vector(self.base, "base"))
        object.__setattr__(
            self,
            "periods",
            tuple(_int_vector(p, "period") for p in self.periods),
        )
        for p in self.periods:
            if len(p) != len(self.base):
                raise DimensionMismatch(
                    f"period has dimension {len(p)}, base has {len(self.base)}"
                )

    @property
    def dim(self) -> int:
        return len(self.base)

    def __contains__(self, v: Sequence[int]) -> bool:
        return coset_member(self, v)

    def to_dict(self) -> dict[str, list]:
        return {
            "base": list(self.base),
            "periods": [list(p) for p in self.periods],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PeriodicCoset":
        return cls(tuple(data["base"]), tuple(tuple(p) for p in data["periods"]))


@dataclass(frozen=True)
class SemilinearSet:
    """A finite union of periodic cosets; membership is the disjunction."""

    cosets: tuple[PeriodicCoset, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "cosets", tuple(self.cosets))
        dims = {c.dim for c in self.cosets}
        if len(dims) > 1:
            raise DimensionMismatch(f"cosets of mixed dimensions {sorted(dims)}")

    @property
    def dim(self) -> Optional[int]:
        return self.cosets[0].dim if self.cosets else None

    def __contains__(self, v: Sequence[int]) -> bool:
        return semilinear_member(self, v)

    def to_dict(self) -> list[dict]:
        return [c.to_dict() for c in self.cosets]

    @classmethod
    def from_dict(cls, data: Iterable[dict]) -> "SemilinearSet":
        return cls(tuple(PeriodicCoset.from_dict(d) for d in data))


def coset_member(coset: PeriodicCoset, v: Sequence[int]) -> bool:
    """Exact membership: does some choice of n1..nl hit v?

    Depth-first search over period multiplicities.  Periods are taken in
    decreasing L1-norm order and each multiplicity is capped by the
    componentwise quotient against what remains, so the search is finite
    and complete (all periods are nonnegative; an all-zero period can
    contribute nothing and is skipped).
    """
    target = _int_vector(v, "vector")
    if len(target) != coset.dim:
        raise DimensionMismatch(
            f"vector has dimension {len(target)}, coset has {coset.dim}"
        )
    remaining = [t - b for t, b in zip(target, coset.base)]
    if any(r < 0 for r in remaining):
        return False
    periods = sorted(
        (p for p in coset.periods if any(p)),
        key=lambda p: sum(p),
        reverse=True,
    )

    def search(rem: list[int], idx: int) -> bool:
        if not any(rem):
            return True
        if idx == len(periods):
            return False
        p = periods[idx]
        cap = min(r // c for r, c in zip(rem, p) if c)
        for n in range(cap + 1):
            if search([r - n * c for r, c in zip(rem, p)], idx + 1):
                return True
        return False

    return search(remaining, 0)


def semilinear_member(s: SemilinearSet, v: Sequence[int]) -> bool:
    """Membership in the union; False for the empty union."""
    if s.cosets and len(tuple(v)) != s.dim:
        raise DimensionMismatch(
            f"vector has dimension {len(tuple(v))}, set has {s.dim}"
        )
    return any(coset_member(c, v) for c in s.cosets)


# ---------------------------------------------------------------------------
# Density


def is_alpha_dense(
    c: Union[Configuration, Sequence[int]], alpha: Union[Fraction, int, str]
) -> bool:
    """Is every *present* state's count at least alpha times the total?

    Zero coordinates are exempt; the comparison is exact rational
    arithmetic, so pass alpha as a Fraction, an int, or a string like
    "1/10" (a float would smuggle in binary rounding).  Requires
    0 < alpha <= 1.
    """
    a = Fraction(alpha)
    if not 0 < a <= 1:
        raise DomainError(f"alpha must satisfy 0 < alpha <= 1, got {a}")
    counts = c.counts if isinstance(c, Configuration) else _int_vector(c, "vector")
    total = sum(counts)
    return all(count >= a * total for count in counts if count > 0)


# ---------------------------------------------------------------------------
# Linear specs


class LinearClass(enum.Enum):
    """Coefficient classes of a linear spec.

    NON_INTEGER_ONLY is an alias of Q_NONNEG_LINEAR: nonnegative
    coefficients with at least one non-integer form a single class, and the
    classification carries (integer, nonnegative) flags to tell the
    sub-cases apart.
    """

    N_LINEAR = "NLinear"
    Q_NONNEG_LINEAR = "QNonnegLinear"
    NON_INTEGER_ONLY = "QNonnegLinear"
    HAS_NEGATIVE = "HasNegative"


class LinearClassification(NamedTuple):
    label: LinearClass
    integer: bool
    nonnegative: bool


@dataclass(frozen=True)
class LinearSpec:
    """A linear function f(m) = sum_i floor(ci * m(i)) over rationals.

    Coefficients are exact Fractions (lowest terms, positive denominator);
    the floor truncates toward zero, which matters only for negative
    coefficients.
    """

    coefficients: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "coefficients",
            tuple(Fraction(c) for c in self.coefficients),
        )

    @property
    def k(self) -> int:
        return len(self.coefficients)

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        """(numerator, denominator) views of the coefficients."""
        return tuple((c.numerator, c.denominator) for c in self.coefficients)

    def evaluate(self, m: Sequence[int]) -> int:
        if len(m) != self.k:
            raise DimensionMismatch(f"input has dimension {len(m)}, spec has {self.k}")
        return sum(floor_toward_zero(c * v) for c, v in zip(self.coefficients, m))

    def __call__(self, *m: int) -> int:
        return self.evaluate(m)


def classify_linear(spec: LinearSpec) -> LinearClassification:
    """Label a linear spec by its coefficient signs and integrality.

    N_LINEAR: all coefficients are naturals.  Q_NONNEG_LINEAR: all
    nonnegative, at least one a proper fraction.  HAS_NEGATIVE: some
    coefficient is negative.  The flags report integrality and
    nonnegativity independently of the label.
    """
    integer = all(c.denominator == 1 for c in spec.coefficients)
    nonnegative = all(c >= 0 for c in spec.coefficients)
    if not nonnegative:
        label = LinearClass.HAS_NEGATIVE
    elif integer:
        label = LinearClass.N_LINEAR
    else:
        label = LinearClass.Q_NONNEG_LINEAR
    return LinearClassification(label, integer, nonnegative)


# ---------------------------------------------------------------------------
# Window checks

#: Largest supported arity for the affine window check: the probe count
#: grows like (W+1)^k * 2^k oracle calls.
MAX_AFFINE_ARITY = 4


@dataclass(frozen=True)
class AffineFit:
    """An affine description that matched f on the whole window.

    Valid evidence only for inputs in [n0, n0+window]^k.  b may be any
    integer; natural_coefficients flags whether every fitted slope lies in
    N (the class of interest) or not (reported, not judged).
    """

    b: int
    coefficients: IntVector
    n0: int
    window: int

    @property
    def natural_coefficients(self) -> bool:
        return all(c >= 0 for c in self.coefficients)

    def evaluate(self, m: Sequence[int]) -> int:
        return self.b + sum(c * v for c, v in zip(self.coefficients, m))


@dataclass(frozen=True)
class Counterexample:
    """A witness that f is not affine from m at displacement v.

    kind "second_difference": moving by v twice from m changes f by
    different amounts (v is 0/1-valued).  kind "fit": the slopes measured
    at the window corner do not predict f(m+v) (possible on narrow windows
    where the corner probes underdetermine the plane).
    """

    m: IntVector
    v: IntVector
    n0: int
    window: int
    kind: str = "second_difference"


@dataclass(frozen=True)
class Constant:
    """The predicate held one value on the whole inspected window."""

    value: int
    m0: int
    window: int


@dataclass(frozen=True)
class CounterexamplePair:
    """Two window points on which the predicate disagrees."""

    m: IntVector
    m_prime: IntVector
    m0: int
    window: int


def _as_int(value: object, point: tuple[int, ...]) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"oracle returned {value!r} at {point}; expected an int")
    return value


def check_eventually_affine_window(
    f: Callable[..., int], k: int, n0: int, window: int
) -> Union[AffineFit, Counterexample]:
    """Probe f for affine behavior on the box [n0, n0+window]^k.

    Tests the second-difference identity f(m+v) - f(m) = f(m+2v) - f(m+v)
    for every box point m and every 0/1-valued displacement v (the oracle
    is also evaluated up to 2 above the box).  On a full pass, slopes are
    read off at the box corner (ci = f(corner+ui) - f(corner)), the
    intercept solved, and the fit re-verified at every box point.  A pass
    is evidence on this window only, never proof of eventual behavior.

    The oracle is called as f(m1, ..., mk) and must return ints.  Any
    exception it raises propagates unchanged.
    """
    if window < 1:
        raise DomainError(f"window must be >= 1, got {window}")
    if not 1 <= k <= MAX_AFFINE_ARITY:
        raise DomainError(f"arity must be in 1..{MAX_AFFINE_ARITY}, got {k}")
    if n0 < 0:
        raise DomainError(f"n0 must be >= 0, got {n0}")

    cache: dict[tuple[int, ...], int] = {}

    def probe(m: tuple[int, ...]) -> int:
        if m not in cache:
            cache[m] = _as_int(f(*m), m)
        return cache[m]

    box = list(product(range(n0, n0 + window + 1), repeat=k))
    displacements = [v for v in product((0, 1), repeat=k) if any(v)]
    for m in box:
        for v in displacements:
            m1 = tuple(a + b for a, b in zip(m, v))
            m2 = tuple(a + 2 * b for a, b in zip(m, v))
            if probe(m1) - probe(m) != probe(m2) - probe(m1):
                return Counterexample(m, v, n0, window)

    corner = (n0,) * k
    units = [tuple(int(i == j) for j in range(k)) for i in range(k)]
    coeffs = tuple(
        probe(tuple(a + b for a, b in zip(corner, u))) - probe(corner)
        for u in units
    )
    b = probe(corner) - sum(c * n0 for c in coeffs)
    for m in box:
        if probe(m) != b + sum(c * v for c, v in zip(coeffs, m)):
            v = tuple(a - b_ for a, b_ in zip(m, corner))
            return Counterexample(corner, v, n0, window, kind="fit")
    return AffineFit(b, coeffs, n0, window)


def check_eventually_constant_window(
    phi: Callable[..., int], k: int, m0: int, window: int
) -> Union[Constant, CounterexamplePair]:
    """Evaluate a 0/1 predicate on the box [m0, m0+window]^k.

    Returns the single value it took, or the box corner together with the
    first point (in lexicographic order) that disagrees with it.  A
    Constant verdict is evidence on this window only.

    The oracle is called as phi(m1, ..., mk); True/False returns are
    accepted and reported as 1/0.
    """
    if window < 1:
        raise DomainError(f"window must be >= 1, got {window}")
    if k < 1:
        raise DomainError(f"arity must be >= 1, got {k}")
    if m0 < 0:
        raise DomainError(f"m0 must be >= 0, got {m0}")

    def probe(m: tuple[int, ...]) -> int:
        value = phi(*m)
        if isinstance(value, bool):
            return int(value)
        if value in (0, 1):
            return value
        raise TypeError(f"predicate returned {value!r} at {m}; expected 0/1")

    points = product(range(m0, m0 + window + 1), repeat=k)
    first = next(points)
    reference = probe(first)
    for m in points:
        if probe(m) != reference:
            return CounterexamplePair(first, m, m0, window)
    return Constant(reference, m0, window)
