import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multisymp.expr import ZERO, as_expr, evaluate
from multisymp.exterior import (
    BundleChart,
    DecomposableAnsatz,
    DiffForm,
    FiberedMap,
    HomotopyNotPolynomial,
    MultiVector,
    Section,
    contract,
    exterior_derivative,
    lie_derivative,
    pullback_form,
    sn_bracket,
    wedge,
)
from multisymp.randgen import random_chart, random_form, random_multivector
from multisymp.symmetry import (
    NotCartan,
    OrderMismatch,
    cartan_check,
    check_conserved,
    current_on_section,
    finite_cartan_check,
    gauge_check,
    generalized_noether_current,
    higher_cartan_order,
    homotopy_potential,
    infinitesimal_symmetry_check,
    linear_vector_fields,
    noether_current,
    search_higher_order,
    stokes_flux_check,
    transform_conserved,
)
from multisymp.systems import mv_kernel_residual, system_from_coordinate_data, system_from_theta
from multisymp.verdict import Verdict, classify

TQP = BundleChart(("t",), ("q", "p"))
dt, dq, dp = TQP.dz("t"), TQP.dz("q"), TQP.dz("p")
Dt, Dq, Dp = TQP.partial("t"), TQP.partial("q"), TQP.partial("p")
H = as_expr("(p^2 + q^2)/2")
OSC = system_from_theta(TQP, dq * as_expr("p") - dt * H)
FREE = system_from_theta(TQP, dq * as_expr("p") - dt * as_expr("p^2/2"))
HAM = DecomposableAnsatz(TQP, {"q": {"t": as_expr("p")}, "p": {"t": as_expr("-q")}})
NEWTON = DecomposableAnsatz(TQP, {"q": {"t": as_expr("p")}, "p": {"t": ZERO}})
EXACT = Section(TQP, {"q": as_expr("cos(t)"), "p": as_expr("-sin(t)")})
ROTATION = Dq * as_expr("p") - Dp * as_expr("q")
BOOST = Dq * as_expr("t") + Dp
ZERO_FIELD = MultiVector(TQP, 1)

WAVE_CHART = BundleChart(("t", "x"), ("phi", "pt", "px"))


def _wave():
    c = WAVE_CHART
    dphi, dx, dT = c.dz("phi"), c.dz("x"), c.dz("t")
    theta = (
        wedge(dphi, dx) * as_expr("pt")
        - wedge(dphi, dT) * as_expr("px")
        - wedge(dT, dx) * as_expr("(pt^2 - px^2)/2")
    )
    return system_from_theta(c, theta)


DDW = _wave()
WAVE = Section(WAVE_CHART, {"phi": as_expr("sin(t - x)"), "pt": as_expr("cos(t - x)"), "px": as_expr("cos(t - x)")})
WAVE_WITNESSES = [
    DecomposableAnsatz(WAVE_CHART, {"phi": {"t": as_expr("pt"), "x": as_expr("-px")}}),
    DecomposableAnsatz(
        WAVE_CHART,
        {
            "phi": {"t": as_expr("pt"), "x": as_expr("-px")},
            "pt": {"t": as_expr("px"), "x": as_expr("phi")},
            "px": {"t": as_expr("pt"), "x": as_expr("-px")},
        },
    ),
]

DEGENERATE_CHART = BundleChart(("t",), ("q", "p", "r"))
DEGENERATE = system_from_theta(
    DEGENERATE_CHART,
    DEGENERATE_CHART.dz("q") * as_expr("p") - DEGENERATE_CHART.dz("t") * H,
)


def scalar(e):
    return DiffForm.scalar(TQP, as_expr(e))


# --- conserved quantities and symmetries --------------------------------------------


def test_check_conserved_examples():
    assert check_conserved(OSC, scalar("-(p^2 + q^2)/2"), [HAM])[0].passed
    assert all(mc.passed for mc in check_conserved(OSC, scalar("7"), [HAM, NEWTON]) if mc.kernel.passed)
    (mc,) = check_conserved(OSC, scalar("q"), [HAM])
    assert mc.kernel is Verdict.SYMBOLIC_ZERO
    assert not mc.record.passed
    assert mc.record.residual in (as_expr("p"), as_expr("-p"))


def test_non_witness_is_flagged():
    (mc,) = check_conserved(OSC, scalar("-(p^2 + q^2)/2"), [NEWTON])
    assert mc.kernel is Verdict.NONZERO and not mc.passed


def test_infinitesimal_symmetry_examples():
    assert infinitesimal_symmetry_check(OSC, Dt, [HAM])[0].passed
    assert not infinitesimal_symmetry_check(OSC, Dq * as_expr("q"), [HAM])[0].passed
    assert infinitesimal_symmetry_check(OSC, ZERO_FIELD, [HAM])[0].passed


def test_cartan_examples():
    assert cartan_check(OSC, Dt).kind == "ExactCartan"
    assert cartan_check(OSC, Dq * as_expr("q")).kind == "NotCartan"
    assert cartan_check(OSC, ZERO_FIELD).kind == "ExactCartan"
    assert cartan_check(OSC, ROTATION).kind == "Cartan"
    assert cartan_check(FREE, BOOST).kind == "Cartan"


def test_finite_cartan_examples():
    ident = FiberedMap.identity(TQP)
    assert finite_cartan_check(OSC, ident).passed
    rot = FiberedMap(TQP, {"q": as_expr("3/5*q - 4/5*p"), "p": as_expr("4/5*q + 3/5*p")})
    assert finite_cartan_check(OSC, rot).verdict is Verdict.SYMBOLIC_ZERO
    shift = FiberedMap(TQP, {"q": as_expr("q + 1")})
    assert not finite_cartan_check(OSC, shift).passed


def test_gauge_examples():
    zero = system_from_theta(TQP, DiffForm(TQP, 1))
    assert gauge_check(zero, Dq * as_expr("t*p")).passed
    for Y in (Dt, Dq, Dp, ROTATION):
        assert not gauge_check(OSC, Y).passed
    assert gauge_check(DEGENERATE, DEGENERATE_CHART.partial("r")).passed


# --- Noether currents -------------------------------------------------------------------


def test_energy_current():
    rep = noether_current(OSC, Dt)
    assert rep.kind == "ExactCartan" and rep.passed
    assert rep.xi == scalar("-(p^2 + q^2)/2")
    assert check_conserved(OSC, rep.xi, [HAM])[0].passed


def test_momentum_current():
    rep = noether_current(FREE, Dq)
    assert rep.xi == scalar("p")
    assert rep.passed and check_conserved(FREE, rep.xi, [NEWTON])[0].passed


def test_boost_current_uses_potential():
    rep = noether_current(FREE, BOOST)
    assert rep.kind == "Cartan" and rep.zeta is not None
    assert rep.xi == scalar("p*t - q")
    assert check_conserved(FREE, rep.xi, [NEWTON])[0].passed


def test_gauge_current_is_closed():
    rep = noether_current(DEGENERATE, DEGENERATE_CHART.partial("r"))
    assert rep.gauge and rep.xi.is_zero()


def test_not_cartan_raises():
    with pytest.raises(NotCartan):
        noether_current(OSC, Dq * as_expr("q"))


def test_wave_currents_are_conserved():
    for Y in (WAVE_CHART.partial("t"), WAVE_CHART.partial("x"), WAVE_CHART.partial("phi")):
        rep = noether_current(DDW, Y)
        assert rep.passed
        for A in WAVE_WITNESSES:
            assert mv_kernel_residual(DDW, A).passed
        assert all(mc.passed for mc in check_conserved(DDW, rep.xi, WAVE_WITNESSES))


def test_coordinate_data_system_without_theta():
    S = system_from_coordinate_data(TQP, {("q", "t"): as_expr("-p")}, as_expr("p^2/2"))
    rep = noether_current(S, Dq)
    assert rep.passed and rep.kind == "Cartan"
    assert check_conserved(S, rep.xi, [NEWTON])[0].passed


# --- homotopy potential -------------------------------------------------------------------


def test_homotopy_potential_examples():
    K = homotopy_potential(wedge(dq, dp))
    assert K in ((dp * as_expr("q") - dq * as_expr("p")) * as_expr("1/2"), (dq * as_expr("p") - dp * as_expr("q")) * as_expr("1/2"))
    assert exterior_derivative(K) == wedge(dq, dp)
    f = as_expr("q^2*p - t*q + p")
    assert homotopy_potential(exterior_derivative(scalar(f))) == scalar(f)
    with pytest.raises(HomotopyNotPolynomial):
        homotopy_potential(wedge(dt, dq) * as_expr("sin(t)"))


def test_homotopy_potential_with_center():
    f = as_expr("q^2*p - t*q")
    center = {"t": 1, "q": 2, "p": -1}
    K = homotopy_potential(exterior_derivative(scalar(f)), center)
    assert K.coeffs[()] == f - evaluate(f, {"t": 1.0, "q": 2.0, "p": -1.0})


# --- higher-order Cartan symmetries -----------------------------------------------------------


def test_cartan_order_examples():
    assert higher_cartan_order(OSC, Dt, 3).order == 1
    co = higher_cartan_order(OSC, Dt * as_expr("t"), 4)
    assert co.order is None and co.label == "NotCartanUpTo(4)"
    first = co.powers[0]
    assert first != 0 and all(p in (first, -first) for p in co.powers)
    assert higher_cartan_order(DEGENERATE, DEGENERATE_CHART.partial("r"), 2).order == 1


def test_generalized_current_specializes_to_order_one():
    for S, Y in ((OSC, Dt), (OSC, ROTATION), (FREE, Dq), (FREE, BOOST), (DDW, WAVE_CHART.partial("t"))):
        a, b = noether_current(S, Y), generalized_noether_current(S, Y, 1)
        assert a.xi == b.xi and str(a.xi) == str(b.xi) and a.kind == b.kind
    gauge = generalized_noether_current(DEGENERATE, DEGENERATE_CHART.partial("r"), 1)
    assert gauge.xi.is_zero()


def test_generalized_current_rejects_wrong_order():
    with pytest.raises(OrderMismatch):
        generalized_noether_current(OSC, Dt, 2)
    with pytest.raises(OrderMismatch):
        generalized_noether_current(OSC, Dq * as_expr("q"), 1)


FREE2_CHART = BundleChart(("t",), ("q1", "q2", "p1", "p2"))
FREE2 = system_from_theta(
    FREE2_CHART,
    FREE2_CHART.dz("q1") * as_expr("p1")
    + FREE2_CHART.dz("q2") * as_expr("p2")
    - FREE2_CHART.dz("t") * as_expr("(p1^2 + p2^2)/2"),
)
FREE2_WITNESS = DecomposableAnsatz(
    FREE2_CHART,
    {"q1": {"t": as_expr("p1")}, "q2": {"t": as_expr("p2")}, "p1": {"t": ZERO}, "p2": {"t": ZERO}},
)


def test_order_two_search():
    result = search_higher_order(FREE2, 2, [FREE2_WITNESS])
    assert result.searched == len(linear_vector_fields(FREE2_CHART)) == 465
    assert not result.empty
    for Y, co, report in result.hits:
        assert co.order == 2
        assert not co.powers[0].verdict().passed and co.powers[1].verdict().passed
        assert report.passed
        assert all(mc.passed for mc in check_conserved(FREE2, report.xi, [FREE2_WITNESS]))


# --- transforms and currents on sections -------------------------------------------------------


def test_transform_examples():
    energy = scalar("-(p^2 + q^2)/2")
    assert transform_conserved(energy, Dt).xi.is_zero()
    assert transform_conserved(energy, FiberedMap.identity(TQP)).xi == energy
    rot = FiberedMap(TQP, {"q": as_expr("3/5*q - 4/5*p"), "p": as_expr("4/5*q + 3/5*p")})
    moved = transform_conserved(scalar("p"), rot).xi
    assert moved == scalar("4/5*q + 3/5*p")
    # the rotated momentum is not conserved by free motion, since q drifts
    assert not check_conserved(FREE, moved, [NEWTON])[0].passed
    boost = FiberedMap(TQP, {"q": as_expr("q + t"), "p": as_expr("p + 1")})
    assert check_conserved(FREE, transform_conserved(scalar("p"), boost).xi, [NEWTON])[0].passed


def test_current_on_section_mechanics():
    res = current_on_section(scalar("-(p^2 + q^2)/2"), EXACT)
    assert classify(res.divergence).passed
    assert current_on_section(scalar("q"), EXACT).divergence == as_expr("-sin(t)")
    zero = current_on_section(DiffForm(TQP, 0), EXACT)
    assert zero.divergence == ZERO and all(v == ZERO for v in zero.flux.values())


def test_wave_energy_flux():
    xi = noether_current(DDW, WAVE_CHART.partial("t")).xi
    res = current_on_section(xi, WAVE)
    assert res.divergence == ZERO
    assert abs(stokes_flux_check(xi, WAVE, [(0, 1), (0, 1)], 32)) < 1e-8


def test_stokes_examples():
    c = WAVE_CHART
    const = c.dz("x") * as_expr("3")
    assert stokes_flux_check(const, WAVE, [(0, 1), (0, 2)], 8) == pytest.approx(0.0, abs=1e-14)
    # psi^* (t dx) has d = dt ^ dx, so the flux equals the box area
    assert stokes_flux_check(c.dz("x") * as_expr("t"), WAVE, [(0, 1), (0, 2)], 8) == pytest.approx(2.0, abs=1e-12)


# --- properties ---------------------------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_higher_order_closedness_identity(seed):
    # d L^(n-1)(Y) i(Y) Omega = L^n(Y) Omega for closed Omega, so the left side
    # vanishes whenever L^n(Y) Omega does
    rng = np.random.default_rng(seed)
    chart = random_chart(rng, 2, 2)
    omega = exterior_derivative(random_form(rng, chart, chart.m))
    Y = random_multivector(rng, chart, 1)
    src, power = contract(Y, omega), omega
    for n in range(1, 4):
        power = lie_derivative(Y, power)
        assert exterior_derivative(src) == power
        src = lie_derivative(Y, src)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_homotopy_identity(seed):
    rng = np.random.default_rng(seed)
    chart = random_chart(rng, 2, 3)
    a = exterior_derivative(random_form(rng, chart, int(rng.integers(0, chart.dim))))
    if a.is_zero():
        return
    assert exterior_derivative(homotopy_potential(a)) == a


def test_cartan_implies_symmetry():
    library = [(OSC, Y, [HAM]) for Y in (Dt, ROTATION)] + [(FREE, Y, [NEWTON]) for Y in (Dt, Dq, BOOST)]
    library += [(DDW, WAVE_CHART.partial(z), WAVE_WITNESSES) for z in ("t", "x", "phi")]
    for S, Y, family in library:
        assert cartan_check(S, Y).is_cartan
        assert all(mc.passed for mc in infinitesimal_symmetry_check(S, Y, family))


def test_cartan_fields_close_under_bracket():
    pairs = [(OSC, Dt, ROTATION), (FREE, Dt, BOOST), (FREE, Dq, BOOST), (FREE, Dt, Dq)]
    pairs += [(DDW, WAVE_CHART.partial("t"), WAVE_CHART.partial("phi"))]
    for S, Y1, Y2 in pairs:
        assert cartan_check(S, Y1).is_cartan and cartan_check(S, Y2).is_cartan
        assert cartan_check(S, sn_bracket(Y1, Y2)).is_cartan
    assert sn_bracket(Dt, BOOST) == Dq


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_divergence_matches_pullback_numerically(seed):
    rng = np.random.default_rng(seed)
    xi = random_form(rng, WAVE_CHART, 1)
    res = current_on_section(xi, WAVE)
    d = exterior_derivative(pullback_form(WAVE, xi))
    pt = {"t": float(rng.uniform(-1, 1)), "x": float(rng.uniform(-1, 1))}
    top = d.coeffs.get((0, 1), ZERO)
    assert evaluate(res.divergence, pt) == pytest.approx(evaluate(top, pt), abs=1e-12)
