"""Semilinear membership, density, linear specs, and window classifiers."""

from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from popproto import Configuration, DomainError, parse_protocol
from popproto.linear import (
    MAX_AFFINE_ARITY,
    AffineFit,
    Constant,
    Counterexample,
    CounterexamplePair,
    DimensionMismatch,
    LinearClass,
    LinearSpec,
    PeriodicCoset,
    SemilinearSet,
    check_eventually_affine_window,
    check_eventually_constant_window,
    classify_linear,
    coset_member,
    floor_toward_zero,
    is_alpha_dense,
    semilinear_member,
)


class TestCosets:
    def test_single_period_membership(self):
        coset = PeriodicCoset((1, 0), ((2, 1),))
        assert (1, 0) in coset
        assert (3, 1) in coset and (7, 3) in coset
        assert (2, 0) not in coset and (1, 1) not in coset and (0, 0) not in coset

    def test_no_periods_is_a_singleton(self):
        coset = PeriodicCoset((4, 2))
        assert (4, 2) in coset and (4, 3) not in coset

    def test_overlapping_periods_need_search(self):
        coset = PeriodicCoset((0, 0), ((1, 1), (1, 0)))
        assert (3, 2) in coset  # 2*(1,1) + 1*(1,0)
        assert (2, 3) not in coset  # second coordinate can't exceed the first

    def test_zero_period_is_harmless(self):
        coset = PeriodicCoset((1,), ((0,), (2,)))
        assert (5,) in coset and (2,) not in coset

    def test_dimensions_must_agree(self):
        with pytest.raises(DimensionMismatch):
            PeriodicCoset((1, 0), ((1,),))

    def test_round_trip(self):
        coset = PeriodicCoset((1, 0), ((2, 1),))
        assert PeriodicCoset.from_dict(coset.to_dict()) == coset


class TestSemilinear:
    def test_union_of_parities_covers_everything(self):
        evens = PeriodicCoset((0,), ((2,),))
        odds = PeriodicCoset((1,), ((2,),))
        s = SemilinearSet((evens, odds))
        assert all((m,) in s for m in range(20))

    def test_halving_graph(self):
        # {(m, floor(m/2))} = {(0,0) + n(2,1)} u {(1,0) + n(2,1)}
        graph = SemilinearSet(
            (
                PeriodicCoset((0, 0), ((2, 1),)),
                PeriodicCoset((1, 0), ((2, 1),)),
            )
        )
        assert (5, 2) in graph
        assert (5, 3) not in graph
        assert all((m, m // 2) in graph for m in range(12))
        assert all((m, m // 2 + 1) not in graph for m in range(12))

    def test_empty_union_is_empty(self):
        assert (0,) not in SemilinearSet(())

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(DimensionMismatch):
            SemilinearSet((PeriodicCoset((0,)), PeriodicCoset((0, 0))))
        with pytest.raises(DimensionMismatch):
            semilinear_member(SemilinearSet((PeriodicCoset((0, 0)),)), (1,))

    def test_round_trip(self):
        s = SemilinearSet((PeriodicCoset((0, 1), ((1, 1),)),))
        assert SemilinearSet.from_dict(s.to_dict()) == s


class TestDensity:
    def test_exact_threshold_counts(self):
        assert is_alpha_dense((2, 0, 8), Fraction(1, 5))  # 2 >= 10/5 exactly
        assert not is_alpha_dense((2, 0, 8), Fraction(1, 4))  # 2 < 10/4

    def test_zero_counts_are_exempt(self):
        assert is_alpha_dense((0, 0, 9), 1)

    def test_accepts_configurations_and_strings(self):
        p = parse_protocol("states: a b")
        c = Configuration.from_dict(p, {"a": 3, "b": 9})
        assert is_alpha_dense(c, "1/4")
        assert not is_alpha_dense(c, "1/3")

    def test_alpha_must_be_a_proper_weight(self):
        with pytest.raises(DomainError):
            is_alpha_dense((1,), 0)
        with pytest.raises(DomainError):
            is_alpha_dense((1,), Fraction(3, 2))


class TestLinearSpec:
    def test_floor_truncates_toward_zero(self):
        assert floor_toward_zero(Fraction(5, 2)) == 2
        assert floor_toward_zero(Fraction(-5, 2)) == -2
        assert floor_toward_zero(7) == 7

    def test_evaluate_floors_per_term(self):
        spec = LinearSpec((Fraction(1, 2), Fraction(2, 3)))
        assert spec.k == 2
        assert spec.evaluate((5, 4)) == 2 + 2
        assert spec(5, 4) == 4
        assert spec(1, 1) == 0  # floor(1/2) + floor(2/3)

    def test_negative_coefficients_truncate_toward_zero(self):
        spec = LinearSpec((Fraction(-1, 2),))
        assert spec(5) == -2

    def test_pairs_are_lowest_terms(self):
        spec = LinearSpec((Fraction(2, 4), Fraction(3)))
        assert spec.pairs == ((1, 2), (3, 1))

    def test_dimension_check(self):
        with pytest.raises(DimensionMismatch):
            LinearSpec((Fraction(1),)).evaluate((1, 2))

    def test_classification(self):
        natural = classify_linear(LinearSpec((Fraction(2), Fraction(0))))
        assert natural.label is LinearClass.N_LINEAR
        assert natural.integer and natural.nonnegative

        fractional = classify_linear(LinearSpec((Fraction(1, 2),)))
        assert fractional.label is LinearClass.Q_NONNEG_LINEAR
        assert not fractional.integer and fractional.nonnegative

        signed = classify_linear(LinearSpec((Fraction(1), Fraction(-1))))
        assert signed.label is LinearClass.HAS_NEGATIVE
        assert signed.integer and not signed.nonnegative

    def test_fraction_only_label_is_an_alias(self):
        assert LinearClass.NON_INTEGER_ONLY is LinearClass.Q_NONNEG_LINEAR


class TestAffineWindow:
    def test_product_is_flagged_on_the_diagonal(self):
        verdict = check_eventually_affine_window(lambda a, b: a * b, 2, 1, 2)
        assert isinstance(verdict, Counterexample)
        assert verdict.m == (1, 1) and verdict.v == (1, 1)
        assert verdict.kind == "second_difference"

    def test_doubling_fits(self):
        verdict = check_eventually_affine_window(lambda m: 2 * m, 1, 0, 3)
        assert isinstance(verdict, AffineFit)
        assert verdict.b == 0 and verdict.coefficients == (2,)
        assert verdict.natural_coefficients

    def test_predecessor_fits_with_negative_intercept(self):
        verdict = check_eventually_affine_window(lambda m: m - 1, 1, 1, 4)
        assert isinstance(verdict, AffineFit)
        assert verdict.b == -1 and verdict.coefficients == (1,)
        assert verdict.natural_coefficients
        assert verdict.evaluate((10,)) == 9

    def test_square_is_flagged(self):
        verdict = check_eventually_affine_window(lambda m: m * m, 1, 0, 2)
        assert isinstance(verdict, Counterexample)

    def test_truncated_subtraction_is_affine_past_the_kink(self):
        f = lambda a, b: max(0, a - b)  # noqa: E731
        far = check_eventually_affine_window(f, 2, 5, 1)
        assert isinstance(far, Counterexample)  # the kink is inside any box
        one_sided = check_eventually_affine_window(lambda a: max(0, a - 3), 1, 3, 3)
        assert isinstance(one_sided, AffineFit)
        assert one_sided.b == -3 and one_sided.coefficients == (1,)

    def test_guards(self):
        assert MAX_AFFINE_ARITY == 4
        with pytest.raises(DomainError):
            check_eventually_affine_window(lambda *m: 0, 5, 0, 1)
        with pytest.raises(DomainError):
            check_eventually_affine_window(lambda m: 0, 1, 0, 0)
        with pytest.raises(DomainError):
            check_eventually_affine_window(lambda m: 0, 1, -1, 1)
        with pytest.raises(TypeError):
            check_eventually_affine_window(lambda m: True, 1, 0, 1)
        with pytest.raises(TypeError):
            check_eventually_affine_window(lambda m: 0.5, 1, 0, 1)


class TestConstantWindow:
    def test_majority_is_not_eventually_constant(self):
        verdict = check_eventually_constant_window(
            lambda a, b: 1 if a >= b else 0, 2, 1, 4
        )
        assert isinstance(verdict, CounterexamplePair)
        assert verdict.m == (1, 1) and verdict.m_prime == (1, 2)

    def test_parity_flips_immediately(self):
        verdict = check_eventually_constant_window(lambda m: m % 2, 1, 1, 1)
        assert isinstance(verdict, CounterexamplePair)
        assert verdict.m == (1,) and verdict.m_prime == (2,)

    def test_threshold_is_constant_past_its_step(self):
        verdict = check_eventually_constant_window(lambda a: 1 if a >= 1 else 0, 1, 1, 4)
        assert isinstance(verdict, Constant)
        assert verdict.value == 1

    def test_bools_are_accepted(self):
        verdict = check_eventually_constant_window(lambda a, b: a >= b >= 1, 2, 1, 2)
        assert isinstance(verdict, (Constant, CounterexamplePair))

    def test_non_bits_are_rejected(self):
        with pytest.raises(TypeError):
            check_eventually_constant_window(lambda m: 2, 1, 0, 1)


# -- properties -------------------------------------------------------------

small_nat = st.integers(min_value=0, max_value=4)


@settings(max_examples=60, deadline=None)
@given(
    base=st.tuples(small_nat, small_nat),
    periods=st.lists(
        st.tuples(small_nat, small_nat).filter(any), min_size=0, max_size=3
    ),
    v=st.tuples(
        st.integers(min_value=0, max_value=10), st.integers(min_value=0, max_value=10)
    ),
)
def test_coset_membership_agrees_with_enumeration(base, periods, v):
    coset = PeriodicCoset(base, tuple(periods))
    # any multiplicity beyond max(v) overshoots some nonzero coordinate
    cap = max(v) + 1
    brute = any(
        tuple(b + sum(n * p[i] for n, p in zip(ns, periods)) for i, b in enumerate(base))
        == v
        for ns in product(range(cap + 1), repeat=len(periods))
    )
    assert coset_member(coset, v) == brute


@settings(max_examples=60, deadline=None)
@given(
    coeffs=st.lists(small_nat, min_size=1, max_size=3),
    b=st.integers(min_value=-5, max_value=5),
    n0=st.integers(min_value=0, max_value=3),
    window=st.integers(min_value=1, max_value=3),
)
def test_affine_functions_are_recovered_exactly(coeffs, b, n0, window):
    k = len(coeffs)
    f = lambda *m: b + sum(c * v for c, v in zip(coeffs, m))  # noqa: E731
    verdict = check_eventually_affine_window(f, k, n0, window)
    assert isinstance(verdict, AffineFit)
    assert verdict.b == b and verdict.coefficients == tuple(coeffs)


@settings(max_examples=60, deadline=None)
@given(
    nums=st.lists(st.integers(min_value=0, max_value=9), min_size=1, max_size=3),
    m=st.lists(st.integers(min_value=0, max_value=30), min_size=1, max_size=3),
)
def test_linear_spec_matches_per_term_floors(nums, m):
    k = min(len(nums), len(m))
    spec = LinearSpec(tuple(Fraction(n, 3) for n in nums[:k]))
    assert spec.evaluate(m[:k]) == sum(n * v // 3 for n, v in zip(nums[:k], m[:k]))
