import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multisymp.expr import (
    NonConstantDivisor,
    NotPolynomial,
    UnboundSymbol,
    ZeroTest,
    as_expr,
    constant_term,
    differentiate,
    evaluate,
    evaluate_array,
    free_symbols,
    integrate_poly,
    is_zero,
    substitute,
    symbols,
)
from multisymp.parser import ParseError, parse_expr
from multisymp.verdict import Verdict, classify, combine, probe_tolerance

x, y, z = symbols("x y z")


def test_canonical_equality():
    assert as_expr("(x+1)^2") == x**2 + 2 * x + 1
    assert as_expr("x*y - y*x") == 0
    assert as_expr("0.25*x") == x * Fraction(1, 4)
    assert str(as_expr("x - x")) == "0"


def test_power_binds_tighter_than_negation():
    assert as_expr("-x^2") == -(x**2)
    assert evaluate(as_expr("-x^2"), {"x": 3.0}) == -9.0


def test_differentiate_chain_rule():
    e = as_expr("sin(x*y)")
    assert differentiate(e, "x") == as_expr("y*cos(x*y)")
    assert differentiate(as_expr("exp(2*x)"), "x") == as_expr("2*exp(2*x)")
    assert differentiate(as_expr("cos(x)"), "x") == as_expr("-sin(x)")


def test_integrate_poly():
    assert integrate_poly(as_expr("x*y^2"), "y") == as_expr("x*y^3/3")
    with pytest.raises(NotPolynomial):
        integrate_poly(as_expr("sin(y)"), "y")


def test_substitute_and_evaluate():
    e = substitute(as_expr("x*y"), {"x": as_expr("y+1")})
    assert e == as_expr("y^2 + y")
    assert evaluate(as_expr("exp(x)"), {"x": 1.0}) == pytest.approx(math.e)
    with pytest.raises(UnboundSymbol):
        evaluate(x + y, {"x": 1.0})
    arr = evaluate_array(as_expr("x^2 + 1"), {"x": np.array([0.0, 1.0, 2.0])})
    assert arr.tolist() == [1.0, 2.0, 5.0]


def test_constant_and_symbols():
    assert constant_term(as_expr("x + 5/2")) == Fraction(5, 2)
    assert free_symbols(as_expr("sin(x) + z")) == {"x", "z"}


def test_zero_decisions():
    assert is_zero(as_expr("x - x")) is ZeroTest.ZERO
    assert is_zero(as_expr("x + 1")) is ZeroTest.NONZERO
    trig = as_expr("sin(x)^2 + cos(x)^2 - 1")
    assert is_zero(trig) is ZeroTest.UNKNOWN
    assert classify(trig) is Verdict.NUMERIC_ZERO
    assert classify(as_expr("x - x")) is Verdict.SYMBOLIC_ZERO
    assert classify(as_expr("sin(x)^2 - 1/2")) is Verdict.NONZERO


def test_probe_tolerance_context():
    tiny = as_expr("sin(x)^2 + cos(x)^2 - 1 + 1/1000000*sin(x)")
    assert classify(tiny) is Verdict.NONZERO
    with probe_tolerance(1e-3):
        assert classify(tiny) is Verdict.NUMERIC_ZERO
    assert classify(tiny) is Verdict.NONZERO


def test_combine_takes_worst():
    assert combine([]) is Verdict.SYMBOLIC_ZERO
    assert combine([Verdict.SYMBOLIC_ZERO, Verdict.NUMERIC_ZERO]) is Verdict.NUMERIC_ZERO
    assert combine([Verdict.NONZERO, Verdict.ERROR]) is Verdict.ERROR


@pytest.mark.parametrize(
    "src, offset",
    [("x +* 2", 3), ("(x + 1", 6), ("sin x", 4), ("", 0)],
)
def test_parse_errors_carry_offset(src, offset):
    with pytest.raises(ParseError) as info:
        parse_expr(src)
    assert info.value.position == offset


def test_division_by_nonconstant_rejected():
    with pytest.raises((ParseError, NonConstantDivisor)):
        as_expr("x/y")
    assert as_expr("x/(1+1)") == x * Fraction(1, 2)


def test_unknown_function_rejected():
    with pytest.raises(ParseError):
        parse_expr("tan(x)")


# --- properties -------------------------------------------------------------

_atoms = st.sampled_from(["x", "y", "z", "1", "2", "-3", "1/2", "sin(x)", "cos(y)", "exp(z)"])


@st.composite
def exprs(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(_atoms)
    op = draw(st.sampled_from(["+", "-", "*"]))
    a, b = draw(exprs(depth=depth - 1)), draw(exprs(depth=depth - 1))
    return f"({a}) {op} ({b})"


@settings(max_examples=80, deadline=None)
@given(exprs(), exprs(), exprs())
def test_ring_axioms(a, b, c):
    a, b, c = as_expr(a), as_expr(b), as_expr(c)
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert a * (b + c) == a * b + a * c
    assert a - a == 0


@settings(max_examples=80, deadline=None)
@given(exprs())
def test_printing_round_trips(a):
    e = as_expr(a)
    assert as_expr(str(e)) == e


@settings(max_examples=60, deadline=None)
@given(exprs(), exprs())
def test_product_rule(a, b):
    a, b = as_expr(a), as_expr(b)
    assert differentiate(a * b, "x") == differentiate(a, "x") * b + a * differentiate(b, "x")


@settings(max_examples=60, deadline=None)
@given(exprs(), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_evaluation_matches_structure(a, vx, vy, vz):
    e = as_expr(a)
    pt = {"x": vx, "y": vy, "z": vz}
    doubled = evaluate(e + e, pt)
    assert doubled == pytest.approx(2 * evaluate(e, pt), rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(0, 3), st.integers(0, 3)), max_size=4))
def test_integrate_inverts_differentiate(terms):
    e = sum((as_expr(c) * x**i * y**j for c, i, j in terms), as_expr(0))
    assert differentiate(integrate_poly(e, "y"), "y") == e
