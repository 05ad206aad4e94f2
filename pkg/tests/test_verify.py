"""Exact reachability, stability certification, and bottleneck accounting."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from popproto import Configuration, DomainError, parse_protocol
from popproto.sim import PredicateHolds, run_until
from popproto.verify import (
    BottleneckReport,
    BudgetExceeded,
    FunctionOutput,
    PredicateVote,
    SearchLimits,
    bottleneck_threshold,
    check_stable_computation,
    check_stable_decision,
    find_bottlenecks,
    input_states,
    is_output_stable,
    output_of,
    post,
)

DOUBLE = parse_protocol(
    """
states: x y q
inputs: x
output: y
quiescent: q
transition: x q -> y y
"""
)

MAJORITY = parse_protocol(
    """
states: x1 x2 q1 q2
inputs: x1 x2
voters1: x1 q1
transition: x1 x2 -> q1 q2
transition: x1 q2 -> x1 q1
transition: x2 q1 -> x2 q2
transition: q1 q2 -> q1 q1
"""
)


def cfg(protocol, **counts):
    return Configuration.from_dict(protocol, counts)


class TestOutputs:
    def test_function_output_counts_y(self):
        conv = FunctionOutput(DOUBLE.state("y"))
        assert output_of(cfg(DOUBLE, y=3, q=1), conv) == 3
        assert output_of(cfg(DOUBLE), conv) == 0

    def test_vote_outputs(self):
        conv = PredicateVote(frozenset({MAJORITY.state("x1"), MAJORITY.state("q1")}))
        assert output_of(cfg(MAJORITY, x1=2, q1=1), conv) == 1
        assert output_of(cfg(MAJORITY, x2=3), conv) == 0
        assert output_of(cfg(MAJORITY, x1=1, x2=1), conv) is None  # split
        assert output_of(cfg(MAJORITY), conv) is None  # empty

    def test_input_states_are_in_index_order(self):
        assert [s.name for s in input_states(MAJORITY)] == ["x1", "x2"]


class TestReachability:
    def test_closure_of_doubling_is_the_firing_chain(self):
        reach = post(cfg(DOUBLE, x=2, q=2))
        assert len(reach) == 3  # one configuration per number of firings
        final = cfg(DOUBLE, y=4)
        assert final in reach
        assert cfg(DOUBLE, x=1, q=1, y=2) in reach
        assert cfg(DOUBLE, x=2, q=1) not in reach

    def test_path_to_replays(self):
        reach = post(cfg(DOUBLE, x=3, q=3), with_edges=True)
        final = cfg(DOUBLE, y=6)
        path = reach.path_to(final)
        assert len(path) == 3

    def test_budget_raises_with_partial_set(self):
        big = cfg(DOUBLE, x=30, q=30)
        with pytest.raises(BudgetExceeded) as exc:
            post(big, SearchLimits(max_nodes=5))
        assert len(exc.value.partial) >= 5

    def test_silent_configuration_closure_is_itself(self):
        reach = post(cfg(DOUBLE, y=5))
        assert len(reach) == 1


class TestStability:
    def test_all_output_configuration_is_stable(self):
        conv = FunctionOutput(DOUBLE.state("y"))
        assert is_output_stable(cfg(DOUBLE, y=4), conv)

    def test_pending_firings_are_unstable(self):
        conv = FunctionOutput(DOUBLE.state("y"))
        assert not is_output_stable(cfg(DOUBLE, x=1, q=1), conv)

    def test_split_vote_is_never_stable(self):
        conv = PredicateVote(frozenset({MAJORITY.state("x1"), MAJORITY.state("q1")}))
        assert not is_output_stable(cfg(MAJORITY, x1=1, x2=1), conv)


class TestComputationCheck:
    def test_doubling_certifies_on_a_grid(self):
        report = check_stable_computation(
            DOUBLE,
            lambda m: 2 * m[0],
            [(m,) for m in range(5)],
            q0=lambda m: m[0],
        )
        assert report.passed
        assert all(r.verdict == "pass" for r in report.results)

    def test_starving_the_quiescent_state_fails_with_witness(self):
        report = check_stable_computation(
            DOUBLE,
            lambda m: 2 * m[0],
            [(m,) for m in range(4)],
            q0=lambda m: 0,
        )
        assert not report.passed
        failing = [r for r in report.results if r.verdict == "fail"]
        assert [list(r.input) for r in failing] == [[1], [2], [3]]
        assert failing[0].witness == {"x": 1}

    def test_interval_oracle_is_inclusive(self):
        report = check_stable_computation(
            DOUBLE,
            lambda m: (2 * m[0], 2 * m[0] + 1),
            [(m,) for m in range(4)],
            q0=lambda m: m[0],
        )
        assert report.passed

    def test_budget_yields_inconclusive_not_false(self):
        report = check_stable_computation(
            DOUBLE,
            lambda m: 2 * m[0],
            [(5,)],
            q0=lambda m: m[0],
            limits=SearchLimits(max_nodes=2),
        )
        assert not report.passed
        assert report.results[0].verdict == "inconclusive"

    def test_report_serializes(self):
        report = check_stable_computation(
            DOUBLE, lambda m: 2 * m[0], [(2,)], q0=lambda m: m[0]
        )
        doc = report.to_dict()
        assert doc["check"] == "stable_computation"
        assert doc["pass"] is True
        assert doc["results"][0] == {"input": [2], "verdict": "pass"}
        assert '"pass": true' in report.to_json()

    def test_requires_output_and_quiescent_roles(self):
        bare = parse_protocol("states: x y\ntransition: x x -> y y")
        with pytest.raises(DomainError):
            check_stable_computation(bare, lambda m: 0, [(1,)], q0=lambda m: 0)


class TestDecisionCheck:
    def test_majority_certifies_on_a_grid(self):
        report = check_stable_decision(
            MAJORITY,
            lambda m: 1 if m[0] >= m[1] else 0,
            [(m1, m2) for m1 in range(4) for m2 in range(4)],
        )
        assert report.passed

    def test_empty_input_is_skipped(self):
        report = check_stable_decision(
            MAJORITY, lambda m: 1, [(0, 0)]
        )
        assert report.passed
        assert report.results[0].verdict == "skipped"

    def test_wrong_predicate_fails(self):
        report = check_stable_decision(
            MAJORITY,
            lambda m: 1 if m[0] > m[1] else 0,  # ties actually decide 1
            [(2, 2)],
        )
        assert not report.passed
        assert report.results[0].verdict == "fail"


class TestBottlenecks:
    def test_recorded_run_has_no_low_count_firings_when_wide(self):
        c = cfg(DOUBLE, x=20, q=20)
        res = run_until(
            c, PredicateHolds(lambda c: c["x"] == 10, "half-drained"),
            random.Random(3), record=True,
        )
        report = find_bottlenecks(res.recorded_path, 0)
        assert isinstance(report, BottleneckReport)
        assert report.hits == ()  # counts never reach 0 before half-drain

    def test_final_firings_are_bottlenecks(self):
        c = cfg(DOUBLE, x=2, q=2)
        res = run_until(
            c, PredicateHolds(lambda c: c["x"] == 0, "drained"),
            random.Random(5), record=True,
        )
        report = find_bottlenecks(res.recorded_path, 1)
        # the last firing happens at x=1, q=1
        assert report.hits[-1][0] == len(res.recorded_path.steps) - 1

    def test_threshold_formula(self):
        assert bottleneck_threshold(600, 1.0, 1) == pytest.approx(math.sqrt(100.0))
        assert bottleneck_threshold(64, 4.0, 2, constant=0.25) == pytest.approx(0.5)
        with pytest.raises(DomainError):
            bottleneck_threshold(10, 0.0, 1)


# -- properties -------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(m=st.integers(min_value=0, max_value=6), q_extra=st.integers(min_value=0, max_value=2))
def test_closure_members_keep_population_and_stay_certified(m, q_extra):
    """Every reachable configuration conserves n, and certification is
    closed downward: re-running the check from any reachable configuration's
    input-free remainder still stabilizes to the same count."""
    initial = cfg(DOUBLE, x=m, q=m + q_extra)
    reach = post(initial)
    conv = FunctionOutput(DOUBLE.state("y"))
    memo = {}
    for node in reach.order:
        assert node.n == initial.n
        if is_output_stable(node, conv, memo=memo):
            assert node["y"] == 2 * m
