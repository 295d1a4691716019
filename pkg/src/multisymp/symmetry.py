"""Symmetries, Noether currents and conservation laws.

Statements quantified over all solutions (conserved quantities, symmetries)
are checked against explicit witness families of decomposable ansatze; a
pass means "conserved relative to the supplied witnesses".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .exterior import (
    DecomposableAnsatz,
    DegreeMismatch,
    DiffForm,
    FiberedMap,
    HomotopyNotPolynomial,
    MultiVector,
    Section,
    contract,
    exterior_derivative,
    homotopy_operator,
    lie_derivative,
    pullback_form,
    sn_bracket,
)
from .expr import ONE, ZERO, Expr, as_expr, evaluate_array
from .systems import NotClosed, PremultisymplecticSystem, mv_kernel_residual
from .verdict import Verdict, classify, combine

__all__ = [
    "NotCartan",
    "OrderMismatch",
    "NotClosed",
    "HomotopyNotPolynomial",
    "CheckRecord",
    "MemberCheck",
    "CartanResult",
    "CartanOrder",
    "NoetherReport",
    "ConservedQuantity",
    "FluxResult",
    "SearchResult",
    "check_conserved",
    "infinitesimal_symmetry_check",
    "cartan_check",
    "finite_cartan_check",
    "noether_current",
    "homotopy_potential",
    "higher_cartan_order",
    "generalized_noether_current",
    "transform_conserved",
    "current_on_section",
    "stokes_flux_check",
    "gauge_check",
    "linear_vector_fields",
    "search_higher_order",
]


class NotCartan(ValueError):
    def __init__(self, residual: DiffForm):
        self.residual = residual
        super().__init__(f"L(Y)Omega = {residual}")


class OrderMismatch(ValueError):
    pass


@dataclass
class CheckRecord:
    """A named residual (form or scalar) with its zero verdict."""

    name: str
    residual: object
    verdict: Verdict

    @classmethod
    def of(cls, name: str, residual, seed: int = 0) -> "CheckRecord":
        if isinstance(residual, (DiffForm, MultiVector)):
            return cls(name, residual, residual.verdict(seed))
        residual = as_expr(residual)
        return cls(name, residual, classify(residual, seed=seed))

    @property
    def passed(self) -> bool:
        return self.verdict.passed

    def as_dict(self) -> dict:
        return {"name": self.name, "residual": str(self.residual), "verdict": self.verdict.value}


@dataclass
class MemberCheck:
    """Outcome for one witness ansatz: is it a witness at all, and the test."""

    index: int
    kernel: Verdict
    record: CheckRecord

    @property
    def passed(self) -> bool:
        return self.kernel.passed and self.record.passed


def _family_verdict(members: Sequence[MemberCheck]) -> Verdict:
    return combine([m.kernel for m in members] + [m.record.verdict for m in members])


def _degree_of(xi: DiffForm, degree: int) -> DiffForm:
    if xi.is_zero():
        return DiffForm(xi.chart, max(degree, 0))
    if xi.degree != degree:
        raise DegreeMismatch(f"expected a {degree}-form, got degree {xi.degree}")
    return xi


def _scalar(a: DiffForm) -> Expr:
    return a.coeffs.get((), ZERO) if a.degree == 0 else ZERO


# ---------------------------------------------------------------------------
# Conserved quantities and symmetries.


def check_conserved(
    S: PremultisymplecticSystem, xi: DiffForm, family: Sequence[DecomposableAnsatz], seed: int = 0
) -> list:
    """(-1)^(m+1) i(X) d xi = L(X) xi for every witness X."""
    m = S.m
    xi = _degree_of(xi, m - 1)
    dxi = exterior_derivative(xi)
    sign = 1 if (m + 1) % 2 == 0 else -1
    out = []
    for k, A in enumerate(family):
        kernel = mv_kernel_residual(S, A, seed).verdict
        res = contract(A.multivector(), dxi) * sign
        out.append(MemberCheck(k, kernel, CheckRecord.of(f"L(X{k})xi", _scalar(res), seed)))
    return out


def infinitesimal_symmetry_check(
    S: PremultisymplecticSystem, Y: MultiVector, family: Sequence[DecomposableAnsatz], seed: int = 0
) -> list:
    """i([Y, X])Omega for each witness X."""
    out = []
    for k, A in enumerate(family):
        kernel = mv_kernel_residual(S, A, seed).verdict
        res = contract(sn_bracket(Y, A.multivector()), S.omega_form)
        out.append(MemberCheck(k, kernel, CheckRecord.of(f"i([Y,X{k}])Omega", res, seed)))
    return out


@dataclass
class CartanResult:
    kind: str  # "ExactCartan", "Cartan" or "NotCartan"
    lie_omega: DiffForm
    lie_theta: DiffForm | None

    @property
    def is_cartan(self) -> bool:
        return self.kind != "NotCartan"


def cartan_check(S: PremultisymplecticSystem, Y: MultiVector, seed: int = 0) -> CartanResult:
    lo = lie_derivative(Y, S.omega_form)
    if not lo.verdict(seed).passed:
        return CartanResult("NotCartan", lo, None)
    if S.theta is None:
        return CartanResult("Cartan", lo, None)
    lt = lie_derivative(Y, S.theta)
    return CartanResult("ExactCartan" if lt.verdict(seed).passed else "Cartan", lo, lt)


def finite_cartan_check(S: PremultisymplecticSystem, phi: FiberedMap, seed: int = 0) -> CheckRecord:
    """Phi^* Omega - Omega."""
    return CheckRecord.of("Phi*Omega - Omega", pullback_form(phi, S.omega_form) - S.omega_form, seed)


def gauge_check(S: PremultisymplecticSystem, Y: MultiVector, seed: int = 0) -> CheckRecord:
    return CheckRecord.of("i(Y)Omega", contract(Y, S.omega_form), seed)


# ---------------------------------------------------------------------------
# Noether currents.


def homotopy_potential(a: DiffForm, center: Mapping | None = None) -> DiffForm:
    """A form b with db = a, for closed polynomial a of degree >= 1."""
    if a.is_zero():
        return DiffForm(a.chart, max(a.degree - 1, 0))
    if a.degree < 1:
        raise DegreeMismatch("homotopy potential needs a form of degree >= 1")
    da = exterior_derivative(a)
    if not da.is_zero():
        raise NotClosed(f"da = {da}")
    return homotopy_operator(a, None, center)


@dataclass
class NoetherReport:
    Y: MultiVector
    order: int
    xi: DiffForm
    zeta: DiffForm | None
    residuals: list = field(default_factory=list)
    kind: str = ""
    gauge: bool = False

    @property
    def verdict(self) -> Verdict:
        return combine(r.verdict for r in self.residuals)

    @property
    def passed(self) -> bool:
        return self.verdict.passed


def noether_current(S: PremultisymplecticSystem, Y: MultiVector, seed: int = 0, center=None) -> NoetherReport:
    """Order-1 current xi with d xi = i(Y)Omega."""
    cartan = cartan_check(S, Y, seed)
    if not cartan.is_cartan:
        raise NotCartan(cartan.lie_omega)
    m = S.m
    iyo = contract(Y, S.omega_form)
    zeta = None
    if cartan.kind == "ExactCartan":
        xi = contract(Y, S.theta)
    elif S.theta is not None:
        zeta = homotopy_potential(cartan.lie_theta, center)
        xi = contract(Y, S.theta) - zeta
    else:
        xi = homotopy_potential(iyo, center)
    xi = _degree_of(xi, m - 1)
    residual = exterior_derivative(xi) - iyo
    gauge = iyo.verdict(seed).passed
    return NoetherReport(
        Y, 1, xi, zeta, [CheckRecord.of("d(xi) - i(Y)Omega", residual, seed)], cartan.kind, gauge
    )


@dataclass
class CartanOrder:
    order: int | None  # None: not Cartan up to n_max
    n_max: int
    powers: list  # L^k(Y)Omega for k = 1..(order or n_max)
    symmetry: list = field(default_factory=list)  # MemberCheck per witness

    @property
    def label(self) -> str:
        return f"order {self.order}" if self.order else f"NotCartanUpTo({self.n_max})"


def _lie_powers(Y: MultiVector, a: DiffForm, n: int) -> list:
    out = []
    for _ in range(n):
        a = lie_derivative(Y, a)
        out.append(a)
    return out


def higher_cartan_order(
    S: PremultisymplecticSystem,
    Y: MultiVector,
    n_max: int,
    family: Sequence[DecomposableAnsatz] = (),
    seed: int = 0,
) -> CartanOrder:
    """Least n <= n_max with L^n(Y)Omega = 0."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    powers = []
    a = S.omega_form
    order = None
    for k in range(1, n_max + 1):
        a = lie_derivative(Y, a)
        powers.append(a)
        if a.verdict(seed).passed:
            order = k
            break
    sym = infinitesimal_symmetry_check(S, Y, family, seed) if family else []
    return CartanOrder(order, n_max, powers, sym)


def generalized_noether_current(
    S: PremultisymplecticSystem, Y: MultiVector, n: int, seed: int = 0, center=None
) -> NoetherReport:
    """Order-n current: d xi = L^(n-1)(Y) i(Y)Omega."""
    if n < 1:
        raise OrderMismatch("order must be positive")
    powers = _lie_powers(Y, S.omega_form, n)
    for k, p in enumerate(powers, start=1):
        if p.verdict(seed).passed and k < n:
            raise OrderMismatch(f"L^{k}(Y)Omega already vanishes; order is {k}, not {n}")
    if not powers[-1].verdict(seed).passed:
        raise OrderMismatch(f"L^{n}(Y)Omega does not vanish")
    m = S.m
    iyo = contract(Y, S.omega_form)
    source = iyo
    for _ in range(n - 1):
        source = lie_derivative(Y, source)
    closed = exterior_derivative(source)
    zeta = None
    kind = "Cartan"
    if S.theta is not None:
        lt = S.theta
        for _ in range(n):
            lt = lie_derivative(Y, lt)
        base = contract(Y, S.theta)
        for _ in range(n - 1):
            base = lie_derivative(Y, base)
        if n == 1 and lt.verdict(seed).passed:
            kind, xi = "ExactCartan", base
        else:
            zeta = homotopy_potential(lt, center)
            xi = base - zeta
    else:
        xi = homotopy_potential(source, center)
    xi = _degree_of(xi, m - 1)
    residuals = [
        CheckRecord.of("d(L^(n-1)(Y) i(Y)Omega)", closed, seed),
        CheckRecord.of("d(xi) - L^(n-1)(Y) i(Y)Omega", exterior_derivative(xi) - source, seed),
    ]
    return NoetherReport(Y, n, xi, zeta, residuals, kind, iyo.verdict(seed).passed)


@dataclass
class ConservedQuantity:
    xi: DiffForm
    provenance: str = "user-given"  # "user-given", "noether" or "transformed"


def transform_conserved(xi: DiffForm, by) -> ConservedQuantity:
    """L(Y)xi for a vector field Y, or Phi^* xi for a map Phi."""
    if isinstance(by, MultiVector):
        if by.degree != 1:
            raise DegreeMismatch("transform by a vector field (degree 1)")
        out = lie_derivative(by, xi)
        if out.is_zero():
            out = DiffForm(xi.chart, xi.degree)
    elif isinstance(by, FiberedMap):
        out = pullback_form(by, xi)
    else:
        raise TypeError("transform by a vector field or a FiberedMap")
    return ConservedQuantity(out, "transformed")


# ---------------------------------------------------------------------------
# Currents along sections.


@dataclass
class FluxResult:
    flux: dict  # base name -> component X^mu
    divergence: Expr
    pulled: DiffForm

    def field(self, chart) -> MultiVector:
        return MultiVector(chart, 1, {(chart.idx(mu),): c for mu, c in self.flux.items()})


def current_on_section(xi: DiffForm, psi: Section) -> FluxResult:
    """Flux field X with i(X)eta = psi^* xi and its divergence (d psi^* xi = div X eta)."""
    chart = psi.chart
    m = chart.m
    xi = _degree_of(xi, m - 1)
    pulled = pullback_form(psi, xi)
    flux = {}
    vol = chart.volume()
    for mu in chart.base:
        slot = contract(chart.partial(mu), vol)
        ((key, sign),) = slot.coeffs.items()
        flux[mu] = pulled.coeffs.get(key, ZERO) * sign
    dpulled = exterior_derivative(pulled)
    div = dpulled.coeffs.get(tuple(range(m)), ZERO)
    return FluxResult(flux, div, pulled)


def stokes_flux_check(xi: DiffForm, psi: Section, box, points: int = 32) -> float:
    """Integral of psi^* xi over the boundary of a coordinate box.

    Each face x^mu = const contributes +-int X^mu over the remaining
    coordinates (outward orientation), X the flux field of psi^* xi.
    """
    chart = psi.chart
    m = chart.m
    if isinstance(box, Mapping):
        bounds = [tuple(map(float, box[x])) for x in chart.base]
    else:
        bounds = [tuple(map(float, b)) for b in box]
    if len(bounds) != m:
        raise ValueError(f"box needs {m} intervals")
    flux = current_on_section(xi, psi).flux
    nodes, weights = np.polynomial.legendre.leggauss(points)
    total = 0.0
    for a, mu in enumerate(chart.base):
        others = [k for k in range(m) if k != a]
        axes, wts = [], []
        for k in others:
            lo, hi = bounds[k]
            half = (hi - lo) / 2
            axes.append(lo + half * (nodes + 1))
            wts.append(weights * half)
        grids = np.meshgrid(*axes, indexing="ij") if axes else []
        wgrid = np.ones(grids[0].shape) if grids else np.ones(())
        for k, w in enumerate(wts):
            shape = [1] * len(wts)
            shape[k] = points
            wgrid = wgrid * w.reshape(shape)
        for side, value in ((1.0, bounds[a][1]), (-1.0, bounds[a][0])):
            env = {chart.base[k]: g for k, g in zip(others, grids)}
            env[mu] = np.full(wgrid.shape, value)
            vals = evaluate_array(flux[mu], env)
            total += side * float(np.sum(np.broadcast_to(vals, wgrid.shape) * wgrid))
    return total


# ---------------------------------------------------------------------------
# Bounded search for higher-order Cartan symmetries.


def linear_vector_fields(chart, max_terms: int = 2) -> list:
    """Vector fields sum of up to ``max_terms`` terms c d_z with c in {1} or a coordinate."""
    atoms = []
    coeffs = [ONE] + [as_expr(z) for z in chart.coords]
    for z in chart.coords:
        for c in coeffs:
            atoms.append(MultiVector(chart, 1, {(chart.idx(z),): c}))
    out = []
    for k in range(1, max_terms + 1):
        for combo in combinations(atoms, k):
            Y = combo[0]
            for extra in combo[1:]:
                Y = Y + extra
            if not Y.is_zero():
                out.append(Y)
    return out


@dataclass
class SearchResult:
    order: int
    searched: int
    hits: list  # (Y, CartanOrder, NoetherReport)

    @property
    def empty(self) -> bool:
        return not self.hits


def search_higher_order(
    S: PremultisymplecticSystem,
    order: int,
    family: Sequence[DecomposableAnsatz],
    candidates: Sequence[MultiVector] | None = None,
    seed: int = 0,
) -> SearchResult:
    """Enumerate candidate fields; keep those of exactly the requested Cartan
    order that also pass the symmetry check against ``family``."""
    if candidates is None:
        candidates = linear_vector_fields(S.chart)
    hits = []
    for Y in candidates:
        co = higher_cartan_order(S, Y, order, family, seed)
        if co.order != order:
            continue
        if not all(mc.passed for mc in co.symmetry):
            continue
        try:
            report = generalized_noether_current(S, Y, order, seed)
        except HomotopyNotPolynomial:
            continue
        hits.append((Y, co, report))
    return SearchResult(order, len(candidates), hits)
