"""Premultisymplectic systems on a bundle chart and their field equations.

A system carries the closed (m+1)-form ``omega_form`` (optionally with a
potential ``theta``, omega_form = -d theta) and, when available, coordinate
data (F, E) realizing the normal form

    Omega = dF^mu_j ^ dy^j ^ d^{m-1}x_mu + dE ^ d^m x,    d^{m-1}x_mu = i(d_mu) d^m x.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .exterior import (
    BundleChart,
    DecomposableAnsatz,
    DiffForm,
    MultiVector,
    Section,
    contract,
    exterior_derivative,
    jet_name,
    prolong,
    pullback_form,
    volume_sign,
    wedge,
)
from .expr import (
    ONE,
    ZERO,
    Expr,
    NotPolynomial,
    UnboundSymbol,
    ZeroTest,
    as_expr,
    constant_term,
    differentiate,
    evaluate,
    evaluate_array,
    integrate_poly,
    is_zero,
    substitute,
)
from .verdict import Verdict, classify, combine

__all__ = [
    "NotInNormalForm",
    "VerticalConditionViolated",
    "MissingTheta",
    "NotClosed",
    "CoordinateData",
    "PremultisymplecticSystem",
    "FieldEquationResidual",
    "Nondegeneracy",
    "AllSolutions",
    "ALL_SOLUTIONS",
    "DecomposableAnsatz",
    "system_from_theta",
    "system_from_omega",
    "system_from_coordinate_data",
    "extract_coordinate_data",
    "normal_form",
    "structural_checks",
    "nondegeneracy_probe",
    "random_points",
    "section_residual_sect1",
    "section_residual_sect2",
    "sect_sign",
    "euler_equations",
    "jet_residual",
    "mv_kernel_residual",
    "solve_ansatz_at_point",
    "integral_section_check",
    "action_evaluate",
]


class NotInNormalForm(ValueError):
    def __init__(self, terms, reason: str = ""):
        self.terms = terms
        msg = reason or "form is not in the coordinate normal form"
        super().__init__(f"{msg}: {terms}")


class VerticalConditionViolated(ValueError):
    pass


class MissingTheta(ValueError):
    pass


class NotClosed(ValueError):
    pass


@dataclass(frozen=True)
class CoordinateData:
    """F[(fiber, base)] and E, normalized to zero constant terms."""

    F: dict
    E: Expr

    def normalized(self) -> "CoordinateData":
        return CoordinateData({k: _drop_constant(v) for k, v in self.F.items()}, _drop_constant(self.E))


def _drop_constant(e: Expr) -> Expr:
    return e - constant_term(e)


@dataclass
class PremultisymplecticSystem:
    chart: BundleChart
    omega_form: DiffForm
    theta: DiffForm | None = None
    data: CoordinateData | None = None
    name: str = ""

    @property
    def volume(self) -> DiffForm:
        return self.chart.volume()

    @property
    def m(self) -> int:
        return self.chart.m


# ---------------------------------------------------------------------------
# Normal-form basis.


def _base_slot(chart: BundleChart, mu: str) -> DiffForm:
    """d^{m-1}x_mu = i(d_mu) d^m x (the constant 1 when m = 1)."""
    return contract(chart.partial(mu), chart.volume())


def _potential_basis(chart: BundleChart) -> dict:
    """(j, mu) -> (key, sign) with dy^j ^ d^{m-1}x_mu = sign * dz_key."""
    out = {}
    for j in chart.fiber:
        for mu in chart.base:
            b = wedge(chart.dz(j), _base_slot(chart, mu))
            ((key, c),) = b.coeffs.items()
            out[(j, mu)] = (key, int(c.poly()[()]))
    return out


def normal_form(chart: BundleChart, data: CoordinateData) -> DiffForm:
    """Omega assembled literally from coordinate data."""
    out = DiffForm(chart, chart.m + 1)
    for (j, mu), f in data.F.items():
        dF = exterior_derivative(DiffForm.scalar(chart, f))
        out = out + wedge(wedge(dF, chart.dz(j)), _base_slot(chart, mu))
    dE = exterior_derivative(DiffForm.scalar(chart, data.E))
    out = out + wedge(dE, chart.volume())
    if out.is_zero():
        return DiffForm(chart, chart.m + 1)
    return out


def _data_from_potential(chart: BundleChart, theta: DiffForm) -> CoordinateData | None:
    """Read (F, E) off theta = -F^mu_j dy^j ^ d^{m-1}x_mu - E d^m x, if of that shape."""
    if theta.degree != chart.m:
        return None
    basis = _potential_basis(chart)
    by_key = {key: (jm, sign) for jm, (key, sign) in basis.items()}
    vol_key = tuple(range(chart.m))
    F = {jm: ZERO for jm in basis}
    E = ZERO
    for key, c in theta.coeffs.items():
        if key == vol_key:
            E = -c
        elif key in by_key:
            jm, sign = by_key[key]
            F[jm] = -c * sign
        else:
            return None
    return CoordinateData(F, E).normalized()


def _fiber_count(chart: BundleChart, key: tuple) -> int:
    return sum(1 for i in key if not chart.is_base(i))


def _triple_vertical_terms(omega: DiffForm) -> list:
    """Terms surviving i(Z1)i(Z2)i(Z3) for coordinate vertical fields."""
    chart = omega.chart
    if chart.m < 2 or chart.n < 3:
        return []
    bad = []
    for trio in combinations(chart.fiber, 3):
        Z = MultiVector.from_terms(chart, 3, [(ONE, trio)])
        r = contract(Z, omega)
        if not r.is_zero():
            bad.append((trio, r))
    return bad


# ---------------------------------------------------------------------------
# Constructors.


def system_from_coordinate_data(chart: BundleChart, F: Mapping, E, name: str = "") -> PremultisymplecticSystem:
    """F maps (fiber, base) pairs, or fiber -> {base: expr}, to expressions."""
    table = {}
    for j in chart.fiber:
        for mu in chart.base:
            table[(j, mu)] = ZERO
    for k, v in F.items():
        if isinstance(k, tuple):
            table[tuple(k)] = as_expr(v)
        else:
            for mu, f in v.items():
                table[(k, mu)] = as_expr(f)
    unknown = {jm for jm in table if jm[0] not in chart.fiber or jm[1] not in chart.base}
    if unknown:
        raise ValueError(f"coordinate data refers to unknown pairs {sorted(unknown)}")
    data = CoordinateData(table, as_expr(E))
    return PremultisymplecticSystem(chart, normal_form(chart, data), None, data.normalized(), name)


def system_from_theta(chart: BundleChart, theta: DiffForm, name: str = "") -> PremultisymplecticSystem:
    if theta.chart != chart:
        raise ValueError("theta lives on a different chart")
    if theta.degree != chart.m and not theta.is_zero():
        raise ValueError(f"theta must have degree {chart.m}, got {theta.degree}")
    if theta.is_zero():
        theta = DiffForm(chart, chart.m)
    omega = -exterior_derivative(theta)
    if omega.is_zero():
        omega = DiffForm(chart, chart.m + 1)
    bad = _triple_vertical_terms(omega)
    if bad:
        raise VerticalConditionViolated(f"i(Z1)i(Z2)i(Z3)Omega != 0 for {[t for t, _ in bad]}")
    system = PremultisymplecticSystem(chart, omega, theta, None, name)
    data = _data_from_potential(chart, theta)
    if data is None:
        try:
            data = extract_coordinate_data(system)
        except NotInNormalForm:
            data = None
    system.data = data
    return system


def system_from_omega(chart: BundleChart, omega: DiffForm, name: str = "") -> PremultisymplecticSystem:
    if omega.is_zero():
        omega = DiffForm(chart, chart.m + 1)
    if omega.degree != chart.m + 1:
        raise ValueError(f"omega must have degree {chart.m + 1}, got {omega.degree}")
    dOmega = exterior_derivative(omega)
    if not dOmega.is_zero():
        raise NotClosed(f"d(omega) = {dOmega}")
    system = PremultisymplecticSystem(chart, omega, None, None, name)
    try:
        system.data = extract_coordinate_data(system)
    except NotInNormalForm:
        pass
    return system


def _fiber_potential(omega: DiffForm) -> DiffForm:
    """K with dK = omega for closed omega, integrating one fiber axis at a time.

    The last fiber coordinate goes first; each step removes every term
    containing its differential, so for dq ^ dp this gives -p dq.
    """
    chart = omega.chart
    potential = DiffForm(chart, omega.degree - 1)
    rest = omega
    for y in reversed(chart.fiber):
        part = contract(chart.partial(y), rest)
        if part.is_zero():
            continue
        k = part.map_coeffs(lambda c: integrate_poly(c, y))
        potential = potential + k
        rest = rest - exterior_derivative(k)
    return potential


def extract_coordinate_data(S: PremultisymplecticSystem) -> CoordinateData:
    """(F, E) with Omega = normal_form(F, E), constant terms set to zero.

    Cached data is returned when the system was built from it.  Otherwise a
    potential of the potential shape is produced by integrating along the
    fiber axes (Omega has no purely horizontal (m+1)-component, so the
    fibers alone recover all of it) and read off.
    """
    if S.data is not None:
        return S.data
    chart, omega = S.chart, S.omega_form
    bad = {k: c for k, c in omega.coeffs.items() if _fiber_count(chart, k) >= 3}
    if bad:
        terms = DiffForm(chart, omega.degree, bad)
        raise NotInNormalForm(terms.records(), "terms with three or more vertical factors")
    if omega.is_zero():
        return CoordinateData({(j, mu): ZERO for j in chart.fiber for mu in chart.base}, ZERO)
    try:
        potential = _fiber_potential(omega)
    except NotPolynomial as exc:
        raise NotInNormalForm(omega.records(), f"fiber dependence is not polynomial ({exc})") from None
    data = _data_from_potential(chart, -potential)
    if data is None:
        raise NotInNormalForm(potential.records(), "potential has terms outside the normal-form basis")
    mismatch = normal_form(chart, data) - omega
    if not mismatch.is_zero():
        raise NotInNormalForm(mismatch.records(), "rebuilt form differs from omega")
    return data


def structural_checks(S: PremultisymplecticSystem, seed: int = 0) -> list:
    """[(name, verdict, detail)] for the structural hypotheses on a system."""
    chart, omega = S.chart, S.omega_form
    out = []
    d_omega = exterior_derivative(omega)
    out.append(("closed", d_omega.verdict(seed), str(d_omega)))
    if S.theta is not None:
        diff = omega + exterior_derivative(S.theta)
        out.append(("omega_is_minus_d_theta", diff.verdict(seed), str(diff)))
    bad = _triple_vertical_terms(omega)
    out.append(
        (
            "triple_vertical",
            Verdict.NONZERO if bad else Verdict.SYMBOLIC_ZERO,
            "; ".join(f"{','.join(t)}: {r}" for t, r in bad),
        )
    )
    try:
        data = extract_coordinate_data(S)
        out.append(("normal_form", Verdict.SYMBOLIC_ZERO, _data_text(chart, data)))
    except NotInNormalForm as exc:
        out.append(("normal_form", Verdict.NONZERO, str(exc)))
    return out


def _data_text(chart: BundleChart, data: CoordinateData) -> str:
    parts = [f"F[{j},{mu}] = {data.F[(j, mu)]}" for j in chart.fiber for mu in chart.base]
    parts.append(f"E = {data.E}")
    return "; ".join(parts)


# ---------------------------------------------------------------------------
# Nondegeneracy.


@dataclass
class Nondegeneracy:
    multisymplectic: bool
    ranks: list
    kernel_dims: list

    @property
    def label(self) -> str:
        return "Multisymplectic" if self.multisymplectic else "Premultisymplectic"


def random_points(chart: BundleChart, count: int, seed: int = 0, low: float = -2.0, high: float = 2.0) -> list:
    rng = np.random.default_rng(seed)
    return [
        {z: float(v) for z, v in zip(chart.coords, rng.uniform(low, high, size=chart.dim))}
        for _ in range(count)
    ]


def nondegeneracy_probe(S: PremultisymplecticSystem, points: Sequence[Mapping], tol: float = 1e-9) -> Nondegeneracy:
    """Numeric rank of v -> i(v)Omega at each point (rows: coordinate fields)."""
    chart = S.chart
    cols = list(combinations(range(chart.dim), chart.m))
    rows = []
    for z in chart.coords:
        r = contract(chart.partial(z), S.omega_form)
        rows.append([r.coeffs.get(k, ZERO) for k in cols])
    ranks, kernels = [], []
    for pt in points:
        mat = np.array([[evaluate(c, pt) for c in row] for row in rows], dtype=float)
        rank = int(np.linalg.matrix_rank(mat, tol=tol)) if mat.size else 0
        ranks.append(rank)
        kernels.append(chart.dim - rank)
    return Nondegeneracy(all(k == 0 for k in kernels), ranks, kernels)


# ---------------------------------------------------------------------------
# Field equations.


@dataclass
class FieldEquationResidual:
    labels: list
    exprs: list
    verdicts: list = field(default_factory=list)

    @classmethod
    def build(cls, labels, exprs, seed: int = 0) -> "FieldEquationResidual":
        exprs = [as_expr(e) for e in exprs]
        return cls(list(labels), exprs, [classify(e, seed=seed) for e in exprs])

    @property
    def verdict(self) -> Verdict:
        return combine(self.verdicts)

    @property
    def passed(self) -> bool:
        return self.verdict.passed

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.exprs))

    def records(self) -> list:
        return [
            {"label": lab, "residual": str(e), "verdict": v.value}
            for lab, e, v in zip(self.labels, self.exprs, self.verdicts)
        ]


def _top_coefficient(a: DiffForm) -> Expr:
    return a.coeffs.get(tuple(range(a.chart.m)), ZERO)


def section_residual_sect1(S: PremultisymplecticSystem, psi: Section, seed: int = 0) -> FieldEquationResidual:
    """psi^*(i(Y)Omega) for Y over the coordinate basis fields."""
    chart = S.chart
    labels, exprs = [], []
    for z in chart.coords:
        form = pullback_form(psi, contract(chart.partial(z), S.omega_form))
        labels.append(f"d/d{z}")
        exprs.append(_top_coefficient(form))
    return FieldEquationResidual.build(labels, exprs, seed)


def _one_form_coefficients(chart: BundleChart, a: DiffForm) -> list:
    return [a.coeffs.get((i,), ZERO) for i in range(chart.dim)]


def section_residual_sect2(S: PremultisymplecticSystem, psi: Section, seed: int = 0) -> FieldEquationResidual:
    """Coefficients of i(prolong psi)(Omega o psi)."""
    chart = S.chart
    along = S.omega_form.subs(psi.bindings())
    form = contract(prolong(psi), along)
    labels = [f"d{z}" for z in chart.coords]
    return FieldEquationResidual.build(labels, _one_form_coefficients(chart, form), seed)


def sect_sign(m: int) -> int:
    """sect1[z] = sect_sign(m) * sect2[z] for every coordinate z."""
    return volume_sign(m) * (-1) ** m


def _jet_ansatz(chart: BundleChart) -> DecomposableAnsatz:
    return DecomposableAnsatz(
        chart, {j: {mu: jet_name(j, mu) for mu in chart.base} for j in chart.fiber}
    )


def jet_residual(S: PremultisymplecticSystem) -> list:
    """Coefficients of i(X_u)Omega, X_u = wedge(d_mu + u^j_mu d_j) with jet symbols u."""
    form = contract(_jet_ansatz(S.chart).multivector(), S.omega_form)
    return _one_form_coefficients(S.chart, form)


def euler_equations(S: PremultisymplecticSystem) -> list:
    """Field equations in first-jet symbols ``u_<fiber>_<base>``, as (label, expr).

    Built from the coordinate data:

        vertical[j]:   dE/dy^j - dF^mu_j/dx^mu + (dF^mu_i/dy^j - dF^mu_j/dy^i) u^i_mu
        horizontal[nu]: dF^mu_j/dx^mu u^j_nu + dF^mu_j/dy^i (u^i_mu u^j_nu - u^i_nu u^j_mu)
                        - dE/dy^j u^j_nu

    each multiplied by (-1)^m * volume_sign(m) so that substituting a section's
    derivatives gives exactly the dy^j and dx^nu coefficients of
    section_residual_sect2.
    """
    chart = S.chart
    data = extract_coordinate_data(S)
    F, E = data.F, data.E
    u = {(j, mu): as_expr(jet_name(j, mu)) for j in chart.fiber for mu in chart.base}
    sign = (-1) ** chart.m * volume_sign(chart.m)
    div = {j: sum((differentiate(F[(j, mu)], mu) for mu in chart.base), ZERO) for j in chart.fiber}
    dE = {j: differentiate(E, j) for j in chart.fiber}
    dF = {(j, mu, i): differentiate(F[(j, mu)], i) for j in chart.fiber for mu in chart.base for i in chart.fiber}
    out = []
    for nu in chart.base:
        e = ZERO
        for j in chart.fiber:
            e = e + (div[j] - dE[j]) * u[(j, nu)]
            for mu in chart.base:
                for i in chart.fiber:
                    e = e + dF[(j, mu, i)] * (u[(i, mu)] * u[(j, nu)] - u[(i, nu)] * u[(j, mu)])
        out.append((f"horizontal[{nu}]", e * sign))
    for j in chart.fiber:
        e = dE[j] - div[j]
        for mu in chart.base:
            for i in chart.fiber:
                e = e + (dF[(i, mu, j)] - dF[(j, mu, i)]) * u[(i, mu)]
        out.append((f"vertical[{j}]", e * sign))
    return out


def mv_kernel_residual(S: PremultisymplecticSystem, A: DecomposableAnsatz, seed: int = 0) -> FieldEquationResidual:
    chart = S.chart
    form = contract(A.multivector(), S.omega_form)
    labels = [f"d{z}" for z in chart.coords]
    return FieldEquationResidual.build(labels, _one_form_coefficients(chart, form), seed)


def integral_section_check(A: DecomposableAnsatz, psi: Section, seed: int = 0) -> FieldEquationResidual:
    """X^j_mu o psi - d psi^j / dx^mu for all (j, mu)."""
    chart = A.chart
    binds = psi.bindings()
    labels, exprs = [], []
    for j in chart.fiber:
        for mu in chart.base:
            labels.append(f"X[{j},{mu}]")
            exprs.append(substitute(A[(j, mu)], binds) - differentiate(psi.funcs[j], mu))
    return FieldEquationResidual.build(labels, exprs, seed)


# ---------------------------------------------------------------------------
# Pointwise solver.


class AllSolutions:
    """Sentinel: the residual vanishes identically at the point."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "AllSolutions"


ALL_SOLUTIONS = AllSolutions()


def _exact(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def solve_ansatz_at_point(
    S: PremultisymplecticSystem,
    point: Mapping,
    seed: int = 0,
    restarts: int = 32,
    max_iter: int = 200,
    accept: float = 1e-10,
):
    """Numeric solutions X^j_mu of i(X)Omega = 0 at ``point``.

    Returns ALL_SOLUTIONS when every residual is identically zero there,
    otherwise a sorted list of distinct solutions, each a dict
    {(fiber, base): float}.
    """
    chart = S.chart
    missing = [z for z in chart.coords if z not in point]
    if missing:
        raise UnboundSymbol(missing[0])
    binds = {z: _exact(point[z]) for z in chart.coords}
    residuals = [substitute(r, binds) for r in jet_residual(S)]
    if all(is_zero(r) is ZeroTest.ZERO for r in residuals):
        return ALL_SOLUTIONS
    unknowns = [(j, mu) for j in chart.fiber for mu in chart.base]
    names = [jet_name(j, mu) for j, mu in unknowns]
    residuals = [r for r in residuals if r.poly()]
    jac = [[differentiate(r, n) for n in names] for r in residuals]

    def value(x):
        env = dict(zip(names, x))
        return np.array([evaluate(r, env) for r in residuals])

    def jacobian(x):
        env = dict(zip(names, x))
        return np.array([[evaluate(c, env) for c in row] for row in jac])

    rng = np.random.default_rng(seed)
    starts = [np.zeros(len(names))] + [rng.uniform(-2.0, 2.0, size=len(names)) for _ in range(restarts)]
    found = []
    for x in starts:
        x = _gauss_newton(value, jacobian, x, max_iter)
        if np.linalg.norm(value(x)) < accept:
            if not any(np.allclose(x, y, atol=1e-7, rtol=0) for y in found):
                found.append(x)
    found.sort(key=lambda v: tuple(v))
    return [{k: float(v) for k, v in zip(unknowns, x)} for x in found]


def _gauss_newton(value, jacobian, x, max_iter: int):
    r = value(x)
    norm = np.linalg.norm(r)
    for _ in range(max_iter):
        if norm < 1e-14:
            break
        step = np.linalg.lstsq(jacobian(x), -r, rcond=None)[0]
        t = 1.0
        while t > 1e-6:
            cand = x + t * step
            rc = value(cand)
            nc = np.linalg.norm(rc)
            if nc < norm:
                x, r, norm = cand, rc, nc
                break
            t /= 2
        else:
            break
    return x


# ---------------------------------------------------------------------------
# Action.


def action_evaluate(S: PremultisymplecticSystem, psi: Section, box, points: int = 32) -> float:
    """Integral of psi^* theta over a coordinate box by Gauss-Legendre."""
    if S.theta is None:
        raise MissingTheta("the action needs a potential theta")
    chart = S.chart
    if isinstance(box, Mapping):
        bounds = [tuple(map(float, box[x])) for x in chart.base]
    else:
        bounds = [tuple(map(float, b)) for b in box]
    if len(bounds) != chart.m:
        raise ValueError(f"box needs {chart.m} intervals")
    density = _top_coefficient(pullback_form(psi, S.theta)) if S.theta.degree == chart.m else ZERO
    nodes, weights = np.polynomial.legendre.leggauss(points)
    axes, wts = [], []
    for lo, hi in bounds:
        half = (hi - lo) / 2
        axes.append(lo + half * (nodes + 1))
        wts.append(weights * half)
    grids = np.meshgrid(*axes, indexing="ij")
    wgrid = np.ones_like(grids[0])
    for k, w in enumerate(wts):
        shape = [1] * chart.m
        shape[k] = points
        wgrid = wgrid * w.reshape(shape)
    values = evaluate_array(density, dict(zip(chart.base, grids)))
    return float(np.sum(np.broadcast_to(values, wgrid.shape) * wgrid))
