import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meancompare.battery import fd_derivative, fd_second_derivative, suite_expression_derivatives
from meancompare.expr import (
    Add,
    Const,
    DomainError,
    EvalError,
    EvalOverflowError,
    Exp,
    Log,
    Mul,
    Neg,
    ParseError,
    Pow,
    Var,
    compose,
    differentiate,
    eval_array,
    eval_expr,
    parse_expr,
    serialize,
)


def d(src, k=1):
    e = parse_expr(src)
    for _ in range(k):
        e = differentiate(e)
    return e


class TestParse:
    def test_variable(self):
        assert parse_expr("x") == Var()

    def test_power(self):
        assert parse_expr("x^2") == Pow(Var(), 2.0)

    def test_sum_of_log_and_scaled_root(self):
        e = parse_expr("log(x) + 3*x^0.5")
        assert e == Add(Log(Var()), Mul(Const(3.0), Pow(Var(), 0.5)))
        assert parse_expr(serialize(e)) == e

    @pytest.mark.parametrize("src,x,expected", [
        ("1 - 2 - 3", 0, -4),
        ("8 / 4 / 2", 0, 1),
        ("2 ^ 3 ^ 2", 0, 512),
        ("-x^2", 3, -9),
        ("2*x^-1", 4, 0.5),
        ("1.5e1 + x", 1, 16),
        ("exp(log(x))", 2.5, 2.5),
        ("(x + 1) * (x - 1)", 3, 8),
    ])
    def test_precedence_and_associativity(self, src, x, expected):
        assert eval_expr(parse_expr(src), x) == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("src,pos", [("x +", 3), ("(x", 2), ("x ^ x", 4), ("sin(x)", 0), ("x $ 2", 2)])
    def test_errors_carry_position(self, src, pos):
        with pytest.raises(ParseError) as err:
            parse_expr(src)
        assert err.value.position == pos

    def test_unknown_identifier(self):
        with pytest.raises(ParseError, match="y"):
            parse_expr("y + 1")

    def test_literal_overflow(self):
        with pytest.raises(ParseError):
            parse_expr("1e999")


class TestEval:
    @pytest.mark.parametrize("src,x,expected", [("x^2", 3, 9), ("log(x)", 1, 0), ("x + x^3", 2, 10)])
    def test_examples(self, src, x, expected):
        assert eval_expr(parse_expr(src), x) == expected

    @pytest.mark.parametrize("src,x", [("log(x)", 0), ("log(x)", -1), ("x^-1", 0), ("x^0.5", -4),
                                       ("1/x", 0), ("0^(-2)", 0)])
    def test_domain_errors(self, src, x):
        with pytest.raises(DomainError):
            eval_expr(parse_expr(src), x)

    def test_negative_base_integer_power(self):
        assert eval_expr(parse_expr("x^3"), -2) == -8

    def test_overflow_is_reported(self):
        with pytest.raises(EvalOverflowError):
            eval_expr(parse_expr("exp(x)"), 1000)

    def test_array_matches_scalar(self):
        e = parse_expr("x^1.5 - 2*log(x) + exp(-x)/x")
        xs = np.linspace(0.1, 5, 50)
        assert np.allclose(eval_array(e, xs), [eval_expr(e, x) for x in xs], rtol=1e-14)

    def test_array_domain_error(self):
        with pytest.raises(DomainError):
            eval_array(parse_expr("log(x)"), np.array([1.0, -1.0]))

    def test_compose(self):
        e = compose(parse_expr("exp(x)"), parse_expr("2*x"))
        assert eval_expr(e, 0.5) == pytest.approx(math.e)


class TestDerivative:
    def test_examples(self):
        assert eval_expr(d("x^2"), 3) == 6
        assert eval_expr(d("log(x)"), 2) == 0.5

    def test_second_derivative_example(self):
        # oracle: extrapolated second difference of the expression itself
        e = parse_expr("x + exp(x)")
        oracle, _ = fd_second_derivative(lambda t: eval_expr(e, t), 0.0)
        assert oracle == pytest.approx(1.0, abs=1e-9)
        assert eval_expr(d("x + exp(x)", 2), 0.0) == pytest.approx(oracle, abs=1e-9)

    @pytest.mark.parametrize("src", ["x^2.5 * exp(-x)", "log(1 + x^2) / x", "(x - 1/x)^3", "exp(exp(x/4))"])
    def test_against_finite_differences(self, src):
        e = parse_expr(src)
        for x in (0.7, 1.3, 2.9):
            n1, _ = fd_derivative(lambda t: eval_expr(e, t), x)
            n2, _ = fd_second_derivative(lambda t: eval_expr(e, t), x)
            assert eval_expr(e.derivative, x) == pytest.approx(n1, rel=1e-8, abs=1e-8)
            assert eval_expr(e.derivative.derivative, x) == pytest.approx(n2, rel=1e-7, abs=1e-7)

    def test_constants_vanish(self):
        assert d("3") == Const(0.0)
        assert d("x") == Const(1.0)

    def test_random_expressions(self):
        res = suite_expression_derivatives(1000, seed=11)
        assert res.passed, res.detail


atoms = st.sampled_from(["x", "2", "0.5", "1e-3", "3.25"])


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*", "/"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(children, st.sampled_from(["2", "-1", "0.5", "(-1.5)"])).map(lambda t: f"({t[0]})^{t[1]}"),
        children.map(lambda c: f"exp({c})"),
        children.map(lambda c: f"log({c})"),
        children.map(lambda c: f"-{c}"),
    )


sources = st.recursive(atoms, _combine, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(sources)
def test_round_trip(src):
    e = parse_expr(src)
    once = serialize(e)
    assert parse_expr(once) == e
    assert serialize(parse_expr(once)) == once


@settings(max_examples=200, deadline=None)
@given(sources, st.floats(0.1, 5.0))
def test_no_hidden_nan(src, x):
    e = parse_expr(src)
    for node in (e, e.derivative, e.derivative.derivative):
        try:
            v = eval_expr(node, x)
        except EvalError:
            continue
        assert math.isfinite(v)


@pytest.mark.parametrize("e", [Neg(Const(-2.0)), Exp(Pow(Neg(Var()), 2.0)), Pow(Var(), -0.5),
                               Mul(Const(-3.0), Pow(Var(), 2.0))])
def test_serialized_nodes_keep_their_value(e):
    assert eval_expr(parse_expr(serialize(e)), 1.5) == eval_expr(e, 1.5)
