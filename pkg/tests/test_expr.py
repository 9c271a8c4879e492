import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrw.errors import ExpressionSyntaxError
from rrw.expr import (compile_program, derivative, evaluate, is_polynomial,
                      parse_expression, to_source)


@pytest.mark.parametrize(
    ("text", "x", "expected"),
    [
        ("0.5", 0.3, 0.5),
        ("x", 0.7, 0.7),
        ("0.5 + 2*(x-0.5)^4", 1.0, 0.625),
        ("1 - x", 0.25, 0.75),
        ("2*x/4", 1.0, 0.5),
        ("min(x, 0.5)", 0.8, 0.5),
        ("max(x, 0.5)", 0.2, 0.5),
        ("abs(x - 0.5)", 0.2, 0.3),
        ("-x + 1", 0.4, 0.6),
        ("x^-1/4", 0.5, 0.5),
        ("2^3", 0.0, 8.0),
        ("1e-1 + x", 0.0, 0.1),
    ],
)
def test_evaluate(text, x, expected):
    tree = parse_expression(text)
    assert evaluate(tree, x) == pytest.approx(expected, abs=1e-15)


def test_precedence():
    assert evaluate(parse_expression("1 - 2 - 3"), 0.0) == -4
    assert evaluate(parse_expression("8 / 2 / 2"), 0.0) == 2
    assert evaluate(parse_expression("2 + 3 * 4"), 0.0) == 14
    assert evaluate(parse_expression("-x^2"), 2.0) == -4  # unary binds looser than ^


@pytest.mark.parametrize("bad", ["", "x +", "(x", "x)", "min(x)", "x ^ 0.5", "y", "1..2", "x @ 2"])
def test_syntax_errors(bad):
    with pytest.raises(ExpressionSyntaxError):
        parse_expression(bad)


def test_syntax_error_position():
    with pytest.raises(ExpressionSyntaxError) as exc:
        parse_expression("x + $")
    assert exc.value.position == 4


def test_vectorized_matches_scalar():
    tree = parse_expression("0.5 + 1.5*(x-0.5)^2 - 8*(x-0.5)^4")
    xs = np.linspace(0, 1, 101)
    vec = evaluate(tree, xs)
    scalars = np.array([evaluate(tree, float(x)) for x in xs])
    np.testing.assert_allclose(vec, scalars, rtol=0, atol=0)


def test_derivative_polynomial_exact():
    tree = parse_expression("0.5 + 2*(x-0.5)^4")
    d1 = derivative(tree)
    d2 = derivative(d1)
    assert evaluate(d1, 0.5) == 0.0
    assert evaluate(d2, 0.5) == 0.0
    assert evaluate(d1, 1.0) == pytest.approx(8 * 0.5 ** 3, abs=1e-15)


def test_derivative_piecewise():
    tree = parse_expression("min(2*x, 1)")
    d = derivative(tree)
    assert evaluate(d, 0.2) == 2.0
    assert evaluate(d, 0.8) == 0.0
    tree = parse_expression("abs(x - 0.5)")
    d = derivative(tree)
    assert evaluate(d, 0.2) == -1.0
    assert evaluate(d, 0.8) == 1.0


def test_derivative_quotient():
    tree = parse_expression("x / (1 + x)")
    d = derivative(tree)
    assert evaluate(d, 1.0) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize(
    ("text", "poly"),
    [("x^2 + 1", True), ("x / 2", True), ("min(x, 1)", False),
     ("1 / x", False), ("x^-1", False), ("abs(x)", False)],
)
def test_is_polynomial(text, poly):
    assert is_polynomial(parse_expression(text)) is poly


# -- round trips ------------------------------------------------------------

_leaf = st.one_of(
    st.just("x"),
    st.floats(min_value=0.0, max_value=4.0, allow_nan=False).map(lambda v: repr(v)),
)


def _exprs(depth):
    if depth == 0:
        return _leaf
    sub = _exprs(depth - 1)
    return st.one_of(
        _leaf,
        st.tuples(sub, st.sampled_from("+-*/"), sub).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(sub, st.integers(min_value=0, max_value=4)).map(lambda t: f"({t[0]})^{t[1]}"),
        st.tuples(sub, sub).map(lambda t: f"min({t[0]}, {t[1]})"),
        sub.map(lambda s: f"-({s})"),
        sub.map(lambda s: f"abs({s})"),
    )


@given(_exprs(3))
@settings(max_examples=150, deadline=None)
def test_parse_print_parse_round_trip(text):
    try:
        tree = parse_expression(text)
    except ExpressionSyntaxError:
        return
    printed = to_source(tree)
    tree2 = parse_expression(printed)
    xs = np.linspace(0, 1, 101)
    with np.errstate(all="ignore"):
        a = np.asarray(evaluate(tree, xs), dtype=float)
        b = np.asarray(evaluate(tree2, xs), dtype=float)
    mask = np.isfinite(a)
    np.testing.assert_array_equal(mask, np.isfinite(b))
    np.testing.assert_allclose(a[mask], b[mask], rtol=0, atol=1e-15)


def test_round_trip_spec_grid():
    # the documented round-trip contract: agreement within 1e-15 on 10^3 points
    text = "0.5 + 1.5*(x-0.5)^2 - 8*(x-0.5)^4"
    tree = parse_expression(text)
    tree2 = parse_expression(to_source(tree))
    xs = np.linspace(0, 1, 1000)
    np.testing.assert_allclose(evaluate(tree, xs), evaluate(tree2, xs), rtol=0, atol=1e-15)


def test_compile_program_matches_tree():
    from rrw._kernels import eval_program

    for text in ("0.5 + 2*(x-0.5)^4", "min(8*(2*x-1), 1)", "abs(x-0.25)/2",
                 "max(x, 1-x)", "-x^3 + x"):
        tree = parse_expression(text)
        codes, args = compile_program(tree)
        stack = np.empty(64)
        for x in np.linspace(0, 1, 11):
            assert eval_program(stack, codes, args, x) == pytest.approx(
                float(evaluate(tree, float(x))), abs=1e-15)
