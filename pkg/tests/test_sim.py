"""Scheduler distribution, stop conditions, and the accelerated runner."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from popproto import Configuration, parse_protocol
from popproto.sim import (
    FirstOf,
    InteractionBudget,
    PopulationTooSmall,
    PredicateHolds,
    SilentOnly,
    StopReason,
    estimate_stabilization_time,
    run_accelerated,
    run_until,
    step,
    trial_seed,
)

DOUBLE = parse_protocol("states: x y q\ntransition: x q -> y y")
HALVE = parse_protocol("states: x y q\ntransition: x x -> y q")
PAIRS_ONLY = parse_protocol("states: a b c")  # every interaction is null


def double_config(m):
    return Configuration.from_dict(DOUBLE, {"x": m, "q": m})


class TestStopConditions:
    def test_predicate_already_true_stops_immediately(self):
        c = double_config(5)
        res = run_until(c, PredicateHolds(lambda c: True, "now"), random.Random(0))
        assert res.interactions == 0
        assert res.stop_reason is StopReason.STOP_CONDITION_MET
        assert res.final == c

    def test_silent_start_reports_silent(self):
        c = Configuration.from_dict(DOUBLE, {"y": 4})
        res = run_until(c, SilentOnly(), random.Random(0))
        assert res.interactions == 0
        assert res.stop_reason is StopReason.SILENT

    def test_predicate_wins_over_silence(self):
        c = Configuration.from_dict(DOUBLE, {"y": 4})
        res = run_until(c, PredicateHolds(lambda c: True, "now"), random.Random(0))
        assert res.stop_reason is StopReason.STOP_CONDITION_MET

    def test_no_rules_means_immediately_silent(self):
        c = Configuration.from_dict(PAIRS_ONLY, {"a": 2, "b": 2})
        res = run_until(c, InteractionBudget(17), random.Random(1))
        assert res.interactions == 0
        assert res.stop_reason is StopReason.SILENT

    @pytest.mark.parametrize("runner", [run_until, run_accelerated])
    def test_budget_is_exact(self, runner):
        # a,a -> b,b -> a,a cycles forever; only the budget can stop it
        cycler = parse_protocol(
            "states: a b\ntransition: a a -> b b\ntransition: b b -> a a"
        )
        c = Configuration.from_dict(cycler, {"a": 2})
        res = runner(c, InteractionBudget(17), random.Random(1))
        assert res.interactions == 17
        assert res.stop_reason is StopReason.BUDGET

    @pytest.mark.parametrize("runner", [run_until, run_accelerated])
    def test_first_of_takes_the_earliest(self, runner):
        res = runner(
            double_config(50),
            FirstOf((PredicateHolds(lambda c: c["x"] == 0, "done"), InteractionBudget(3))),
            random.Random(2),
        )
        assert res.stop_reason is StopReason.BUDGET
        assert res.interactions == 3

    def test_stop_reason_strings(self):
        assert str(StopReason.STOP_CONDITION_MET) == "StopConditionMet"
        assert str(StopReason.SILENT) == "Silent"
        assert str(StopReason.BUDGET) == "Budget"

    def test_population_of_one_is_rejected(self):
        c = Configuration.from_dict(DOUBLE, {"x": 1})
        with pytest.raises(PopulationTooSmall):
            run_until(c, SilentOnly(), random.Random(0))


class TestRunners:
    @pytest.mark.parametrize("runner", [run_until, run_accelerated])
    def test_doubling_terminates_exactly(self, runner):
        res = runner(
            double_config(40), PredicateHolds(lambda c: c["x"] == 0, "drained"),
            random.Random(7),
        )
        assert res.final.to_dict() == {"y": 80}
        assert res.n == 80
        assert res.interactions >= 40  # at least one interaction per firing

    def test_parallel_time_is_exact(self):
        res = run_until(
            double_config(10), PredicateHolds(lambda c: c["x"] == 0, "drained"),
            random.Random(3),
        )
        assert res.parallel_time == Fraction(res.interactions, 20)
        assert res.parallel_time * res.n == res.interactions

    def test_recorded_path_replays_to_final(self):
        res = run_until(
            double_config(12), PredicateHolds(lambda c: c["x"] == 0, "drained"),
            random.Random(11), record=True,
        )
        path = res.recorded_path
        assert path is not None
        assert len(path.steps) == 12  # one firing per x
        assert path.sequence().execute() == res.final
        for k, snap in path.snapshots:
            assert path.sequence().origin.n == snap.n

    def test_accelerated_does_not_record(self):
        res = run_accelerated(
            double_config(12), PredicateHolds(lambda c: c["x"] == 0, "drained"),
            random.Random(11),
        )
        assert res.recorded_path is None

    def test_same_seed_same_result(self):
        a = run_until(double_config(25), SilentOnly(), random.Random(99))
        b = run_until(double_config(25), SilentOnly(), random.Random(99))
        assert a.final == b.final and a.interactions == b.interactions


class TestSeeds:
    def test_trial_seed_is_stable(self):
        assert trial_seed(0, 0) == trial_seed(0, 0)
        assert trial_seed(7, 3) != trial_seed(7, 4)
        assert trial_seed(7, 3) != trial_seed(8, 3)

    def test_trial_seeds_spread(self):
        seeds = {trial_seed(42, t) for t in range(1000)}
        assert len(seeds) == 1000


class TestTimeStats:
    def test_estimate_aggregates_trials(self):
        stop = PredicateHolds(lambda c: c["x"] == 0, "drained")
        ts = estimate_stabilization_time(DOUBLE, double_config(30), stop, 5, 123)
        assert ts.trials == 5 and len(ts.records) == 5
        assert ts.min <= ts.mean <= ts.max
        times = [float(r.parallel_time) for r in ts.records]
        assert ts.mean == pytest.approx(sum(times) / 5)

    def test_estimate_rejects_foreign_config(self):
        with pytest.raises(ValueError):
            estimate_stabilization_time(
                HALVE, double_config(4), SilentOnly(), 1, 0
            )


class TestDistribution:
    """The scheduler must pick unordered agent pairs uniformly."""

    def test_pair_frequencies_match_uniform_pair_law(self):
        # counts (a,b,c) = (2,2,1): n=5, 10 unordered agent pairs
        c = Configuration.from_dict(PAIRS_ONLY, {"a": 2, "b": 2, "c": 1})
        expected = {  # P(state pair) * 10
            ("a", "a"): 1, ("b", "b"): 1,
            ("a", "b"): 4, ("a", "c"): 2, ("b", "c"): 2,
        }
        rng = random.Random(2024)
        observed = dict.fromkeys(expected, 0)
        draws = 5000
        for _ in range(draws):
            _, t = step(c, rng)
            observed[(t.r1.name, t.r2.name)] += 1
        chi = stats.chisquare(
            [observed[k] for k in sorted(expected)],
            [expected[k] * draws / 10 for k in sorted(expected)],
        )
        assert chi.pvalue > 1e-3, (observed, chi)

    def test_firing_probability_matches_eligible_fraction(self):
        # {x:3, q:2} under x,q -> y,y: P(fire) = 2*3*2/(5*4) = 0.6
        c = Configuration.from_dict(DOUBLE, {"x": 3, "q": 2})
        rng = random.Random(77)
        draws = 4000
        fired = sum(step(c, rng)[0] != c for _ in range(draws))
        chi = stats.chisquare([fired, draws - fired], [0.6 * draws, 0.4 * draws])
        assert chi.pvalue > 1e-3, (fired, chi)

    def test_accelerated_matches_stepwise_in_distribution(self):
        # same stopping times (in interactions) for x,x -> y,q halving
        c = Configuration.from_dict(HALVE, {"x": 30})
        stop = PredicateHolds(lambda c: c["x"] <= 1, "halved")
        slow, fast = [], []
        for t in range(400):
            slow.append(run_until(c, stop, random.Random(trial_seed(5, t))).interactions)
            fast.append(
                run_accelerated(c, stop, random.Random(trial_seed(6, t))).interactions
            )
        ks = stats.ks_2samp(slow, fast)
        assert ks.pvalue > 1e-3, ks


# -- properties -------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(
    m=st.integers(min_value=1, max_value=60),
    seed=st.integers(min_value=0, max_value=2**32),
    accelerated=st.booleans(),
)
def test_runs_conserve_population_and_count_time(m, seed, accelerated):
    runner = run_accelerated if accelerated else run_until
    c = double_config(m)
    res = runner(c, PredicateHolds(lambda c: c["x"] == 0, "drained"), random.Random(seed))
    assert res.final.n == c.n
    assert res.final["y"] == 2 * m
    assert res.interactions >= m
    assert res.parallel_time == Fraction(res.interactions, c.n)


@settings(max_examples=25, deadline=None)
@given(
    budget=st.integers(min_value=0, max_value=30),
    seed=st.integers(min_value=0, max_value=2**32),
    accelerated=st.booleans(),
)
def test_budget_is_never_exceeded(budget, seed, accelerated):
    runner = run_accelerated if accelerated else run_until
    c = Configuration.from_dict(HALVE, {"x": 40})
    res = runner(c, InteractionBudget(budget), random.Random(seed))
    assert res.interactions <= budget
    assert res.stop_reason is StopReason.BUDGET
