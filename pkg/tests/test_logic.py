import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainlogic import logic
from chainlogic.logic import (
    And,
    ExprSyntaxError,
    Lit,
    MissingVariableError,
    Not,
    Or,
    TooManyVariablesError,
    Var,
)

from helpers import python_eval, random_assignment, random_expr


class TestParse:
    def test_conjunction(self):
        assert logic.parse("A and B") == And((Var("A"), Var("B")))

    def test_precedence_or_over_and(self):
        assert logic.parse("A or (B and C)") == Or((Var("A"), And((Var("B"), Var("C")))))

    def test_single_variable(self):
        assert logic.parse("A") == Var("A")

    def test_dangling_operator_reports_token(self):
        with pytest.raises(ExprSyntaxError) as exc:
            logic.parse("A and or B")
        assert exc.value.token_index == 3

    def test_precedence_not_binds_tightest(self):
        assert logic.parse("not A and B or C") == Or((And((Not(Var("A")), Var("B"))), Var("C")))

    def test_nary_flattening(self):
        expr = logic.parse("A and B and C")
        assert expr == And((Var("A"), Var("B"), Var("C")))

    def test_parentheses_preserve_nesting(self):
        expr = logic.parse("(A and B) and C")
        assert expr == And((And((Var("A"), Var("B"))), Var("C")))

    def test_keywords_case_insensitive(self):
        assert logic.parse("A AND NOT b Or C") == logic.parse("A and not b or C")

    def test_whitespace_insensitive(self):
        assert logic.parse("  A   and(B or   C ) ") == logic.parse("A and (B or C)")

    def test_literals(self):
        assert logic.parse("true and false") == And((Lit(True), Lit(False)))

    def test_empty_input(self):
        with pytest.raises(ExprSyntaxError):
            logic.parse("   ")

    def test_unbalanced_parens(self):
        with pytest.raises(ExprSyntaxError):
            logic.parse("(A and B")

    def test_unknown_character(self):
        with pytest.raises(ExprSyntaxError) as exc:
            logic.parse("A & B")
        assert exc.value.position == 2

    def test_trailing_token(self):
        with pytest.raises(ExprSyntaxError):
            logic.parse("A B")


class TestEvaluate:
    def test_and_false(self):
        assert logic.evaluate(logic.parse("A and B"), {"A": True, "B": False}) is False

    def test_disjunction_true(self):
        expr = logic.parse("A or (B and C)")
        assert logic.evaluate(expr, {"A": False, "B": True, "C": True}) is True

    def test_missing_variable_named(self):
        with pytest.raises(MissingVariableError) as exc:
            logic.evaluate(logic.parse("A and B"), {"A": True})
        assert exc.value.name == "B"

    def test_literal_only_needs_no_assignment(self):
        assert logic.evaluate(logic.parse("(true or (false and true))"), {}) is True


class TestSubstitute:
    def test_simple(self):
        assert logic.substitute(logic.parse("A and B"), {"A": True, "B": True}) == "(true and true)"

    def test_nested(self):
        expr = logic.parse("A or (B and C)")
        result = logic.substitute(expr, {"A": False, "B": True, "C": False})
        assert result == "(false or (true and false))"

    def test_negation(self):
        assert logic.substitute(logic.parse("not A"), {"A": False}) == "(not false)"

    def test_missing_variable(self):
        with pytest.raises(MissingVariableError):
            logic.substitute(logic.parse("A and B"), {"A": True})


class TestTruthTable:
    def test_and_has_one_true_row(self):
        rows = logic.truth_table(logic.parse("A and B"))
        assert len(rows) == 4
        assert sum(result for _, result in rows) == 1

    def test_disjunction_counts(self):
        rows = logic.truth_table(logic.parse("A or (B and C)"))
        assert len(rows) == 8
        assert sum(result for _, result in rows) == 5

    def test_tautology(self):
        assert all(result for _, result in logic.truth_table(logic.parse("A or not A")))

    def test_lexicographic_assignment_order(self):
        rows = logic.truth_table(logic.parse("B and A"))
        assert [tuple(a.values()) for a, _ in rows[:2]] == [(False, False), (False, True)]
        assert list(rows[0][0]) == ["A", "B"]

    def test_variable_cap(self):
        wide = Or(tuple(Var(f"V{i}") for i in range(17)))
        with pytest.raises(TooManyVariablesError):
            logic.truth_table(wide)


class TestProperties:
    def test_round_trip_seeded(self):
        rng = random.Random(11)
        for _ in range(300):
            expr = random_expr(rng)
            assert logic.parse(logic.render(expr)) == expr

    def test_evaluate_agrees_with_independent_python_oracle(self):
        rng = random.Random(12)
        for _ in range(300):
            expr = random_expr(rng, max_depth=3)
            for assignment, result in logic.truth_table(expr):
                assert result == python_eval(logic.render(expr), assignment)

    def test_substitution_coherence(self):
        rng = random.Random(13)
        for _ in range(200):
            expr = random_expr(rng, max_depth=3)
            assignment = random_assignment(rng, expr)
            folded = logic.parse(logic.substitute(expr, assignment))
            assert logic.evaluate(folded, {}) == logic.evaluate(expr, assignment)

    @given(st.booleans(), st.booleans())
    def test_de_morgan(self, a, b):
        assignment = {"A": a, "B": b}
        left = logic.evaluate(logic.parse("not (A and B)"), assignment)
        right = logic.evaluate(logic.parse("(not A) or (not B)"), assignment)
        assert left == right

    @settings(max_examples=200)
    @given(st.randoms(use_true_random=False))
    def test_round_trip_hypothesis(self, rng):
        expr = random_expr(rng)
        assert logic.parse(logic.render(expr)) == expr


class TestNodeInvariants:
    def test_conjunction_arity(self):
        with pytest.raises(logic.ExpressionError):
            And((Var("A"),))

    def test_disjunction_arity(self):
        with pytest.raises(logic.ExpressionError):
            Or((Var("A"),))

    def test_variable_name_validation(self):
        with pytest.raises(logic.ExpressionError):
            Var("not")
        with pytest.raises(logic.ExpressionError):
            Var("2A")

    def test_variables_are_sorted_and_deduplicated(self):
        assert logic.variables(logic.parse("B or (A and B)")) == ("A", "B")
