from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsaudit import builtins
from rsaudit.errors import MalformedFormula, SpecError
from rsaudit.knowledge import ast
from rsaudit.knowledge.dsl import load_task, parse_task, to_dsl


def rule_of(text: str) -> ast.Expr:
    spec = parse_task(f"concept a, b, c : 4; label y : 2; rule {text}; support all; nondeterministic;")
    return spec.knowledge.rules[0]


class TestParsing:
    def test_xor_task_structure(self):
        spec = builtins.task("xor")
        assert spec.name == "xor"
        assert spec.concepts.names == ("c1", "c2", "c3")
        assert spec.concepts.cardinalities == (2, 2, 2)
        assert spec.labels.cardinalities == (2,)
        assert len(spec.support.vectors) == 8

    def test_conjunction_binds_tighter_than_disjunction(self):
        assert rule_of("a | b & c") == ast.BinOp("or", ast.Var("a"), ast.BinOp("and", ast.Var("b"), ast.Var("c")))

    def test_xor_between_or_and_and(self):
        e = rule_of("a | b ^ c & a")
        assert e.op == "or" and e.right.op == "xor" and e.right.right.op == "and"

    def test_implication_is_right_associative(self):
        e = rule_of("a -> b -> c")
        assert e == ast.BinOp("implies", ast.Var("a"), ast.BinOp("implies", ast.Var("b"), ast.Var("c")))

    def test_iff_is_loosest(self):
        e = rule_of("y <-> a -> b")
        assert e.op == "iff" and e.right.op == "implies"

    def test_arithmetic_precedence(self):
        e = rule_of("y == a + b * c")
        assert e.op == "==" and e.right.op == "+" and e.right.right.op == "*"

    def test_negation_over_comparison(self):
        e = rule_of("!a == b")
        assert isinstance(e, ast.Not) and e.operand.op == "=="

    def test_word_operators(self):
        assert rule_of("a and not b or c") == rule_of("a & !b | c")
        assert rule_of("a xor b iff c implies a") == rule_of("a ^ b <-> c -> a")

    def test_true_false_constants(self):
        assert rule_of("true") == ast.Const(1)
        assert rule_of("false | a") == ast.BinOp("or", ast.Const(0), ast.Var("a"))

    def test_defines_expand(self):
        spec = parse_task("concept a, b : 2; label y : 2; define both = a & b; rule y <-> both; support all;")
        (rule,) = spec.knowledge.expanded_rules()
        assert rule == ast.BinOp("iff", ast.Var("y"), ast.BinOp("and", ast.Var("a"), ast.Var("b")))

    def test_explicit_support_with_weights(self):
        spec = parse_task("concept a : 3; label y : 3; rule y == a; support (0) @ 0.25, (2) @ 0.75;")
        assert spec.support.vectors == ((0,), (2,))
        np.testing.assert_allclose(spec.support.probabilities(), [0.25, 0.75])

    def test_map_table(self):
        spec = parse_task("concept a, b : 2; label y : 2; map (0, 0) -> 0; map (0, 1) -> 1; "
                          "map (1, 0) -> 1; map (1, 1) -> 0; support all;")
        assert spec.knowledge.is_table
        assert spec.knowledge.table[(1, 1)] == frozenset({(0,)})

    def test_comment_and_newlines(self):
        spec = parse_task("# header\nconcept a : 2;  # trailing\nlabel y : 2;\nrule y <-> a;\nsupport all;\n")
        assert spec.concepts.names == ("a",)


class TestErrors:
    def test_unknown_atom_reports_line_and_column(self):
        with pytest.raises(MalformedFormula) as info:
            parse_task("concept a : 2;\nlabel y : 2;\nrule y <-> z;\nsupport all;")
        assert info.value.line == 3
        assert info.value.column == 6

    def test_unexpected_character(self):
        with pytest.raises(MalformedFormula) as info:
            parse_task("concept a : 2;\nlabel y : 2;\nrule y <-> a $ a;")
        assert (info.value.line, info.value.column) == (3, 14)

    def test_missing_semicolon(self):
        with pytest.raises(MalformedFormula):
            parse_task("concept a : 2 label y : 2;")

    def test_duplicate_declaration(self):
        with pytest.raises(MalformedFormula, match="declared twice"):
            parse_task("concept a : 2; concept a : 3; label y : 2; rule y <-> a; support all;")

    def test_chained_comparison(self):
        with pytest.raises(MalformedFormula, match="chained"):
            rule_of("a < b < c")

    def test_chained_iff(self):
        with pytest.raises(MalformedFormula, match="associative"):
            rule_of("a <-> b <-> c")

    def test_rules_and_table_conflict(self):
        with pytest.raises(MalformedFormula):
            parse_task("concept a : 2; label y : 2; rule y <-> a; map (0) -> 0; support all;")

    def test_partial_weights_rejected(self):
        with pytest.raises(SpecError):
            parse_task("concept a : 2; label y : 2; rule y <-> a; support (0) @ 0.5, (1);")

    def test_single_valued_concept_rejected(self):
        with pytest.raises(SpecError):
            parse_task("concept a : 1; label y : 2; rule y <-> a; support all;")

    def test_load_task_attaches_path(self, tmp_path):
        path = tmp_path / "bad.task"
        path.write_text("concept a : 2;\nlabel y : 2;\nrule y <-> q;\n")
        with pytest.raises(MalformedFormula) as info:
            load_task(path)
        assert info.value.path == str(path)
        assert info.value.line == 3


class TestEvaluate:
    def test_vectorised_arithmetic(self):
        e = rule_of("(a + b) % 3 == c")
        env = {"a": np.array([0, 1, 2]), "b": np.array([2, 2, 2]), "c": np.array([2, 0, 0])}
        np.testing.assert_array_equal(ast.evaluate(e, env), [1, 1, 0])

    def test_modulo_by_zero(self):
        with pytest.raises(MalformedFormula):
            ast.evaluate(rule_of("a % b"), {"a": np.array([1]), "b": np.array([0])})

    def test_connective_truth_tables(self):
        a = np.array([0, 0, 1, 1])
        b = np.array([0, 1, 0, 1])
        env = {"a": a, "b": b}
        cases = {"a -> b": [1, 1, 0, 1], "a <-> b": [1, 0, 0, 1], "a ^ b": [0, 1, 1, 0],
                 "a | b": [0, 1, 1, 1], "a & b": [0, 0, 0, 1], "!a": [1, 1, 0, 0]}
        for text, want in cases.items():
            np.testing.assert_array_equal(ast.evaluate(rule_of(text), env), want, err_msg=text)


NAMES = ("a", "b", "c")


def expressions():
    leaves = st.one_of(st.sampled_from(NAMES).map(ast.Var), st.integers(0, 3).map(ast.Const))
    ops = ast.LOGICAL + ast.ARITHMETIC + ast.COMPARISON

    def extend(children):
        return st.one_of(
            children.map(ast.Not),
            children.map(ast.Neg),
            st.builds(ast.BinOp, st.sampled_from(ops), children, children),
        )

    return st.recursive(leaves, extend, max_leaves=8)


class TestRoundTrip:
    @settings(max_examples=200, deadline=None)
    @given(expressions())
    def test_text_round_trip_preserves_value(self, expr):
        text = ast.to_text(expr)
        parsed = rule_of(text)
        grid = np.array(np.meshgrid(*[np.arange(4)] * 3, indexing="ij")).reshape(3, -1)
        env = dict(zip(NAMES, grid))
        env["y"] = np.zeros(grid.shape[1], dtype=np.int64)
        try:
            want = ast.evaluate(expr, env)
        except MalformedFormula:
            with pytest.raises(MalformedFormula):
                ast.evaluate(parsed, env)
            return
        np.testing.assert_array_equal(np.broadcast_to(ast.evaluate(parsed, env), want.shape), want, err_msg=text)

    @settings(max_examples=100, deadline=None)
    @given(expressions())
    def test_text_round_trip_is_structural(self, expr):
        assert rule_of(ast.to_text(expr)) == expr

    @pytest.mark.parametrize("name", ["xor", "addition", "evenodd", "addmul-conj", "bdd-forward-stop"])
    def test_builtin_dsl_round_trip(self, name):
        spec = builtins.task(name)
        again = parse_task(to_dsl(spec))
        assert again.concepts == spec.concepts
        assert again.labels == spec.labels
        assert again.knowledge.expanded_rules() == spec.knowledge.expanded_rules()
        assert set(again.support.vectors) == set(spec.support.vectors)
