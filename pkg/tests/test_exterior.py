import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multisymp.expr import as_expr
from multisymp.exterior import (
    BundleChart,
    ChartMismatch,
    DecomposableAnsatz,
    DegreeMismatch,
    DiffForm,
    FiberedMap,
    MultiVector,
    NoInverse,
    Section,
    contract,
    exterior_derivative,
    homotopy_operator,
    involutivity_check,
    lie_derivative,
    prolong,
    pullback_form,
    pushforward_mv,
    sn_bracket,
    volume_sign,
    wedge,
)
from multisymp.randgen import random_chart, random_form, random_multivector, random_poly
from multisymp.verdict import Verdict

TQP = BundleChart(("t",), ("q", "p"))
dt, dq, dp = TQP.dz("t"), TQP.dz("q"), TQP.dz("p")
Dt, Dq, Dp = TQP.partial("t"), TQP.partial("q"), TQP.partial("p")
t, q, p = as_expr("t"), as_expr("q"), as_expr("p")


def form(chart, degree, *terms):
    return DiffForm.from_terms(chart, degree, [(as_expr(c), b) for c, b in terms])


def mv(chart, degree, *terms):
    return MultiVector.from_terms(chart, degree, [(as_expr(c), b) for c, b in terms])


# --- chart ------------------------------------------------------------------


@pytest.mark.parametrize(
    "base, fiber",
    [((), ("q",)), (("t",), ()), (("t",), ("t",)), (("t",), ("u_q_t",)), (("t",), ("__s",)), (("t",), ("2q",))],
)
def test_chart_rejects_bad_names(base, fiber):
    with pytest.raises(ValueError):
        BundleChart(base, fiber)


def test_volume_sign_makes_base_multivector_dual():
    for m in range(1, 5):
        chart = BundleChart(tuple(f"x{i}" for i in range(m)), ("y",))
        assert contract(chart.base_multivector(), chart.volume()) == DiffForm.scalar(chart, 1)
        assert volume_sign(m) == (-1) ** (m * (m - 1) // 2)


# --- wedge and alternation ----------------------------------------------------


def test_wedge_basics():
    chart = BundleChart(("x", "y"), ("u",))
    dx, dy = chart.dz("x"), chart.dz("y")
    assert wedge(dx, dy)[(0, 1)] == 1
    assert wedge(dx, dx).is_zero()
    assert wedge(dq, dp) == -wedge(dp, dq)


def test_from_terms_applies_permutation_sign():
    assert form(TQP, 2, ("1", ["p", "q"])) == -wedge(dq, dp)
    assert form(TQP, 2, ("1", ["q", "q"])).is_zero()


def test_cross_kind_wedge_rejected():
    with pytest.raises((TypeError, ChartMismatch, DegreeMismatch)):
        wedge(dq, Dq)


def test_chart_mismatch_rejected():
    other = BundleChart(("s",), ("q",))
    with pytest.raises(ChartMismatch):
        wedge(dq, other.dz("q"))


# --- contraction --------------------------------------------------------------


def test_contraction_order_is_literal_composition():
    # i(dq^dp) applies i(dp) first, then i(dq): i(dq)(-dq) = -1
    assert contract(wedge(Dq, Dp), wedge(dq, dp)) == DiffForm.scalar(TQP, -1)
    assert contract(Dq, contract(Dp, wedge(dq, dp))) == DiffForm.scalar(TQP, -1)


def test_contraction_of_lower_degree_is_zero():
    out = contract(wedge(Dq, Dp), dq)
    assert out.is_zero() and out.degree == 0


def test_single_contraction():
    assert contract(Dq, wedge(dq, dp)) == dp


# --- d and Lie derivative ------------------------------------------------------


def test_exterior_derivative_examples():
    assert exterior_derivative(dq * p) == wedge(dp, dq)
    theta = dq * p - dt * as_expr("(p^2 + q^2)/2")
    expected = wedge(dp, dq) - wedge(dp, dt) * p - wedge(dq, dt) * q
    assert exterior_derivative(theta) == expected


def test_lie_derivative_examples():
    assert lie_derivative(Dt, wedge(dq, dp)).is_zero()
    assert lie_derivative(Dt * t, dt) == dt


def test_lie_derivative_on_lower_degree_form():
    # deg a < deg X: L(X)a = -(-1)^r i(X) da with r = 2
    X = wedge(Dq * p, Dt) + wedge(Dq, Dp) * q
    a = dq * as_expr("t*p") + dt * as_expr("q^2")
    assert lie_derivative(X, a) == -contract(X, exterior_derivative(a))


def test_lie_derivative_out_of_range_is_zero():
    vol = wedge(wedge(dt, dq), dp)
    out = lie_derivative(wedge(Dq, Dp), vol * q)
    assert out.degree <= TQP.dim


# --- Schouten-Nijenhuis bracket -----------------------------------------------


def test_bracket_of_constant_fields_vanishes():
    chart = BundleChart(("x", "y"), ("u",))
    assert sn_bracket(chart.partial("x"), chart.partial("y")).is_zero()


def test_bracket_matches_lie_bracket():
    assert sn_bracket(Dp * q, Dq * p) == Dq * q - Dp * p


def test_bracket_with_function():
    # [X, g] for a vector field is X(g)
    g = MultiVector.scalar(TQP, as_expr("q^2"))
    assert sn_bracket(Dq, g) == MultiVector.scalar(TQP, as_expr("2*q"))


# --- pullback, prolongation, pushforward -----------------------------------------


OSC = Section(TQP, {"q": as_expr("cos(t)"), "p": as_expr("-sin(t)")})


def test_pullback_along_section():
    assert pullback_form(OSC, dq) == dt * as_expr("-sin(t)")
    top = wedge(dq, dp) * as_expr("q + t")
    assert pullback_form(OSC, top).is_zero()


def test_identity_pullback():
    a = wedge(dq, dp) * as_expr("t*q") + wedge(dt, dq)
    assert pullback_form(FiberedMap.identity(TQP), a) == a


def test_prolong_examples():
    assert prolong(OSC) == Dt + Dq * as_expr("-sin(t)") + Dp * as_expr("-cos(t)")
    const = Section(TQP, {"q": as_expr("1"), "p": as_expr("2")})
    assert prolong(const) == TQP.base_multivector()


def test_prolong_is_transverse_in_two_dimensions():
    # literal contraction order: i(d1 ^ d2)(dx1 ^ dx2) = -1
    chart = BundleChart(("t", "x"), ("u",))
    psi = Section(chart, {"u": as_expr("t^2*x - x")})
    assert contract(prolong(psi), chart.volume()) == DiffForm.scalar(chart, -1)


def test_section_must_cover_fiber():
    with pytest.raises(ChartMismatch):
        Section(TQP, {"q": as_expr("t")})
    with pytest.raises(ValueError):
        Section(TQP, {"q": as_expr("t"), "p": as_expr("q")})


ROT = FiberedMap(
    TQP,
    {"q": as_expr("3/5*q - 4/5*p"), "p": as_expr("4/5*q + 3/5*p")},
    {"q": as_expr("3/5*q + 4/5*p"), "p": as_expr("-4/5*q + 3/5*p")},
)


def test_pushforward_rotation():
    assert pushforward_mv(ROT, Dq) == Dq * as_expr("3/5") + Dp * as_expr("4/5")
    assert pushforward_mv(FiberedMap.identity(TQP), Dq * p) == Dq * p


def test_pushforward_needs_inverse():
    with pytest.raises(NoInverse):
        pushforward_mv(FiberedMap(TQP, {"q": as_expr("q + 1")}), Dq)


def test_pushforward_functoriality():
    rng = np.random.default_rng(7)
    shear = FiberedMap(TQP, {"q": as_expr("q + p^2"), "p": as_expr("p + t")}, {"q": as_expr("q - (p - t)^2"), "p": as_expr("p - t")})
    assert shear.check_inverse() is Verdict.SYMBOLIC_ZERO
    for _ in range(10):
        X = random_multivector(rng, TQP, int(rng.integers(1, 3)))
        back = pushforward_mv(shear.inverted(), pushforward_mv(shear, X))
        assert (back - X).verdict() is Verdict.SYMBOLIC_ZERO


def test_map_composition():
    twice = ROT.compose(ROT)
    assert twice.targets["q"] == as_expr("-7/25*q - 24/25*p")
    assert twice.check_inverse() is Verdict.SYMBOLIC_ZERO


# --- involutivity ---------------------------------------------------------------


def test_single_generator_is_involutive():
    A = DecomposableAnsatz(TQP, {"q": {"t": as_expr("p*q")}, "p": {"t": as_expr("sin(q)")}})
    assert involutivity_check(A).involutive


def test_constant_ansatz_is_involutive():
    chart = BundleChart(("x1", "x2"), ("y1",))
    A = DecomposableAnsatz(chart, {"y1": {"x1": as_expr("2"), "x2": as_expr("-1")}})
    assert involutivity_check(A).involutive


def test_obstruction_is_reported():
    # V1 = d1 + x2 dy, V2 = d2: [V1, V2] = -dy, so V1(X_2) - V2(X_1) = 0 - 1
    chart = BundleChart(("x1", "x2"), ("y1",))
    A = DecomposableAnsatz(chart, {"y1": {"x1": as_expr("x2"), "x2": as_expr("0")}})
    res = involutivity_check(A)
    assert not res.involutive
    assert [e for _, e, _ in res.obstructions] == [as_expr("-1")]


def test_fiber_linear_ansatz_on_one_fiber_is_involutive():
    chart = BundleChart(("x1", "x2"), ("y1",))
    A = DecomposableAnsatz(chart, {"y1": {"x1": as_expr("y1"), "x2": as_expr("0")}})
    assert involutivity_check(A).involutive


# --- homotopy operator -------------------------------------------------------------


def test_homotopy_inverts_d_on_closed_forms():
    a = exterior_derivative(dq * as_expr("p*t^2") + dt * as_expr("q^3"))
    assert exterior_derivative(homotopy_operator(a)) == a


# --- properties --------------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_d_squared_vanishes(seed):
    rng = np.random.default_rng(seed)
    chart = random_chart(rng, 2, 3)
    a = random_form(rng, chart, int(rng.integers(0, chart.dim + 1)))
    assert exterior_derivative(exterior_derivative(a)).is_zero()


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_cartan_formula_for_vector_fields(seed):
    rng = np.random.default_rng(seed)
    chart = random_chart(rng, 2, 3)
    X = random_multivector(rng, chart, 1)
    a = random_form(rng, chart, int(rng.integers(0, chart.dim + 1)))
    expected = exterior_derivative(contract(X, a)) + contract(X, exterior_derivative(a))
    assert lie_derivative(X, a) == expected


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_sn_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    chart = random_chart(rng, 2, 3)
    i, j = (int(v) for v in rng.integers(0, min(3, chart.dim) + 1, size=2))
    X, Y = random_multivector(rng, chart, i), random_multivector(rng, chart, j)
    sign = -1 if ((i + 1) * (j + 1)) % 2 else 1
    assert sn_bracket(X, Y) == -(sn_bracket(Y, X) * sign)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_sn_contraction_property(seed):
    rng = np.random.default_rng(seed)
    chart = random_chart(rng, 2, 3)
    X = random_multivector(rng, chart, 1)
    Y = random_multivector(rng, chart, int(rng.integers(0, min(3, chart.dim) + 1)))
    a = random_form(rng, chart, int(rng.integers(0, chart.dim + 1)))
    lhs = contract(sn_bracket(X, Y), a)
    rhs = lie_derivative(X, contract(Y, a)) - contract(Y, lie_derivative(X, a))
    assert lhs == rhs


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_homotopy_property(seed):
    rng = np.random.default_rng(seed)
    chart = random_chart(rng, 2, 3)
    k = int(rng.integers(0, chart.dim))
    a = exterior_derivative(random_form(rng, chart, k))
    assert exterior_derivative(homotopy_operator(a)) == a


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_prolong_integral_section(seed):
    rng = np.random.default_rng(seed)
    chart = random_chart(rng, 2, 2)
    psi = Section(chart, {j: random_poly(rng, chart.base) for j in chart.fiber})
    assert contract(prolong(psi), chart.volume()) == DiffForm.scalar(chart, volume_sign(chart.m))
    for j in chart.fiber:
        # the pulled-back vertical 1-form dy - sum u dx vanishes on the prolongation
        jets = psi.jet_bindings()
        contact = chart.dz(j)
        for mu in chart.base:
            contact = contact - chart.dz(mu) * jets[f"u_{j}_{mu}"]
        assert pullback_form(psi, contact).is_zero()
