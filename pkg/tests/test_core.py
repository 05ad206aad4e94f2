"""States, transitions, configurations, paths, and the text format."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from popproto import (
    Configuration,
    CountError,
    DuplicateTransition,
    InvalidAt,
    NotApplicable,
    ParseError,
    RoleError,
    TransitionSequence,
    apply_transition,
    execute_path,
    is_applicable,
    is_silent,
    parse_protocol,
)

from .conftest import WORKED_TEXT

DOUBLE_TEXT = """\
states: x y q
inputs: x
output: y
quiescent: q
transition: x q -> y y
"""


class TestParsing:
    def test_states_keep_declaration_order(self, worked):
        assert [s.name for s in worked.states] == ["d1", "d2", "d3", "g1", "g2"]
        assert [s.index for s in worked.states] == [0, 1, 2, 3, 4]

    def test_transitions_keep_declaration_order(self, worked):
        t1 = worked.transitions[0]
        assert (t1.r1.name, t1.r2.name) == ("d1", "d3")

    def test_pairs_are_normalized_by_state_index(self):
        p = parse_protocol("states: a b\ntransition: b a -> b b")
        (t,) = p.transitions
        assert (t.r1.name, t.r2.name) == ("a", "b")
        assert (t.p1.name, t.p2.name) == ("b", "b")

    def test_output_pair_is_sorted(self, worked):
        t1 = worked.transitions[0]
        assert (t1.p1.name, t1.p2.name) == ("d2", "g1")
        assert str(t1) == "d1,d3 -> d2,g1"

    def test_lookup_is_symmetric(self, worked):
        d1, d3 = worked.state("d1"), worked.state("d3")
        assert worked.transition(d1, d3) == worked.transition(d3, d1)

    def test_unspecified_pairs_are_null(self, worked):
        d1, d2 = worked.state("d1"), worked.state("d2")
        assert worked.output_pair(d1, d2) == (d1, d2)

    def test_explicit_null_is_not_stored(self):
        p = parse_protocol("states: a b\ntransition: a b -> b a")
        assert p.transitions == ()

    def test_identical_redeclaration_is_tolerated(self):
        p = parse_protocol(
            "states: a b\ntransition: a a -> b b\ntransition: a a -> b b"
        )
        assert len(p.transitions) == 1

    def test_conflicting_redeclaration_raises(self):
        with pytest.raises(DuplicateTransition):
            parse_protocol(
                "states: a b\ntransition: a a -> b b\ntransition: a a -> a b"
            )

    def test_transition_order_ignored_by_equality(self):
        a = parse_protocol(
            "states: a b c\ntransition: a a -> b b\ntransition: b b -> c c"
        )
        b = parse_protocol(
            "states: a b c\ntransition: b b -> c c\ntransition: a a -> b b"
        )
        assert a == b

    @pytest.mark.parametrize(
        "text",
        [
            "transition: a a -> b b",  # no states line
            "states: a b\ntransition: a c -> b b",  # unknown state
            "states: a b\ntransition: a b b b",  # missing arrow
            "states: a b\ntransition: a -> b",  # not pairs
            "states: a a",  # duplicate declaration
            "states: a-b",  # bad name
            "states: a b\nfluxcapacitor: a",  # unknown role key
        ],
    )
    def test_malformed_text_raises(self, text):
        with pytest.raises(ParseError):
            parse_protocol(text)

    def test_roles_are_validated(self):
        with pytest.raises(RoleError):
            parse_protocol(DOUBLE_TEXT.replace("quiescent: q", "quiescent: x"))
        with pytest.raises(RoleError):
            parse_protocol(DOUBLE_TEXT + "approx: y")
        with pytest.raises(ParseError):
            parse_protocol(DOUBLE_TEXT.replace("output: y", "output: y q"))
        with pytest.raises(ParseError):
            parse_protocol(DOUBLE_TEXT + "voters1: z")

    def test_roles_round_trip(self):
        p = parse_protocol(DOUBLE_TEXT)
        assert [s.name for s in p.inputs] == ["x"]
        assert p.output is not None and p.output.name == "y"
        assert p.quiescent is not None and p.quiescent.name == "q"
        assert parse_protocol(p.to_text()) == p

    def test_to_text_round_trip(self, worked):
        assert parse_protocol(worked.to_text()) == worked


class TestConfiguration:
    def test_from_dict_defaults_to_zero(self, worked):
        c = Configuration.from_dict(worked, {"d1": 2})
        assert c.counts == (2, 0, 0, 0, 0)
        assert c.n == 2

    def test_getitem_by_name_and_state(self, worked):
        c = Configuration.from_dict(worked, {"g1": 3})
        assert c["g1"] == 3 and c[worked.state("g1")] == 3

    def test_arithmetic(self, worked):
        a = Configuration.from_dict(worked, {"d1": 2, "g1": 1})
        b = Configuration.from_dict(worked, {"d1": 1})
        assert (a + b).to_dict() == {"d1": 3, "g1": 1}
        assert (a - b).to_dict() == {"d1": 1, "g1": 1}
        assert a.scale(2).to_dict() == {"d1": 4, "g1": 2}

    def test_subtraction_may_not_go_negative(self, worked):
        a = Configuration.from_dict(worked, {"d1": 1})
        b = Configuration.from_dict(worked, {"d1": 2})
        with pytest.raises(CountError):
            a - b

    @pytest.mark.parametrize("bad", [-1, 1.5, True, 2**64])
    def test_counts_are_validated(self, worked, bad):
        with pytest.raises(CountError):
            Configuration(worked, [bad, 0, 0, 0, 0])

    def test_restrict_and_support(self, worked):
        c = Configuration.from_dict(worked, {"d1": 2, "g2": 5})
        gammas = [worked.state("g1"), worked.state("g2")]
        assert c.restrict(gammas).to_dict() == {"g2": 5}
        assert [s.name for s in c.support()] == ["d1", "g2"]

    def test_hash_and_eq(self, worked):
        a = Configuration.from_dict(worked, {"d1": 1})
        b = Configuration(worked, (1, 0, 0, 0, 0))
        assert a == b and hash(a) == hash(b)


class TestFiring:
    def test_distinct_inputs_need_one_each(self, worked):
        t1 = worked.transitions[0]
        assert is_applicable(Configuration.from_dict(worked, {"d1": 1, "d3": 1}), t1)
        assert not is_applicable(Configuration.from_dict(worked, {"d1": 2}), t1)

    def test_same_state_pair_needs_two_agents(self, worked):
        t4 = worked.transitions[3]  # g2 g2 -> g1 g1
        assert not is_applicable(Configuration.from_dict(worked, {"g2": 1}), t4)
        assert is_applicable(Configuration.from_dict(worked, {"g2": 2}), t4)

    def test_apply_moves_the_pair(self, worked):
        t1 = worked.transitions[0]
        c = Configuration.from_dict(worked, {"d1": 1, "d3": 2})
        assert apply_transition(c, t1).to_dict() == {"d2": 1, "d3": 1, "g1": 1}

    def test_apply_rejects_missing_inputs(self, worked):
        with pytest.raises(NotApplicable):
            apply_transition(Configuration.from_dict(worked, {"d1": 1}), worked.transitions[0])

    def test_silence(self, worked):
        assert is_silent(Configuration.from_dict(worked, {"d1": 3, "g2": 1}))
        assert not is_silent(Configuration.from_dict(worked, {"g2": 2}))

    def test_empty_configuration_is_silent(self, worked):
        assert is_silent(Configuration(worked, [0] * 5))


class TestPaths:
    def test_execute_path(self, worked):
        t1, t2, t3 = worked.transitions[:3]
        c = Configuration.from_dict(worked, {"d1": 1, "d3": 1, "g1": 1})
        final = execute_path(c, [t1, t2, t3])
        assert final.to_dict() == {"g1": 3}

    def test_invalid_step_is_located(self, worked):
        t1 = worked.transitions[0]
        c = Configuration.from_dict(worked, {"d1": 1, "d3": 1})
        with pytest.raises(InvalidAt) as exc:
            execute_path(c, [t1, t1])
        assert exc.value.index == 1

    def test_sequence_validity(self, worked):
        t1 = worked.transitions[0]
        c = Configuration.from_dict(worked, {"d1": 1, "d3": 1})
        assert TransitionSequence(c, (t1,)).is_valid()
        assert not TransitionSequence(c, (t1, t1)).is_valid()
        assert TransitionSequence(c, (t1,)).execute().to_dict() == {"d2": 1, "g1": 1}


# -- properties -------------------------------------------------------------

counts5 = st.lists(st.integers(min_value=0, max_value=50), min_size=5, max_size=5)


@given(counts5, counts5)
def test_addition_then_subtraction_is_identity(a_counts, b_counts):
    p = parse_protocol(WORKED_TEXT)
    a = Configuration(p, a_counts)
    b = Configuration(p, b_counts)
    assert (a + b) - b == a
    assert (a + b).n == a.n + b.n


@given(counts5, st.integers(min_value=0, max_value=4))
def test_firing_conserves_population(counts, ti):
    p = parse_protocol(WORKED_TEXT)
    c = Configuration(p, counts)
    t = p.transitions[ti]
    if is_applicable(c, t):
        after = apply_transition(c, t)
        assert after.n == c.n
        assert after[t.p1] >= 1
