"""Graded exterior algebra on a single adapted bundle chart.

Differential forms and multivector fields are both stored as maps from
strictly increasing tuples of coordinate indices to canonical expressions.
Coordinates are ordered base first, then fiber.

Contraction is the composition of interior products

    i(X1 ^ ... ^ Xr) = i(X1) o ... o i(Xr)       (i(Xr) applied first)

so ``i(d/dx1 ^ ... ^ d/dxm)(dx1 ^ ... ^ dxm) = (-1)^(m(m-1)/2)``.  With
``L(X) = d i(X) - (-1)^r i(X) d`` this is the ordering under which the
Schouten-Nijenhuis bracket obtained from the factor-wise Leibniz expansion
satisfies both ``L([Y,X]) = [L(Y), L(X)]`` and the derivation rule
``[X, Y^Z] = [X,Y]^Z + (-1)^((i+1)j) Y^[X,Z]``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .expr import (
    ONE,
    ZERO,
    Expr,
    NotPolynomial,
    as_expr,
    differentiate,
    free_symbols,
    integrate_poly,
    substitute,
)
from .verdict import Verdict, classify, combine

__all__ = [
    "ChartMismatch",
    "DegreeMismatch",
    "NoInverse",
    "HomotopyNotPolynomial",
    "BundleChart",
    "DiffForm",
    "MultiVector",
    "Section",
    "FiberedMap",
    "DecomposableAnsatz",
    "Involutivity",
    "jet_name",
    "volume_sign",
    "wedge",
    "contract",
    "exterior_derivative",
    "lie_derivative",
    "sn_bracket",
    "pullback_form",
    "prolong",
    "pushforward_mv",
    "involutivity_check",
    "homotopy_operator",
]


class ChartMismatch(ValueError):
    pass


class DegreeMismatch(ValueError):
    pass


class NoInverse(ValueError):
    pass


class HomotopyNotPolynomial(ValueError):
    pass


_JET = re.compile(r"u_.+_.+\Z")


def volume_sign(m: int) -> int:
    """i(d/dx1 ^ ... ^ d/dxm)(dx1 ^ ... ^ dxm)."""
    return -1 if (m * (m - 1) // 2) % 2 else 1


def jet_name(fiber: str, base: str) -> str:
    """Reserved symbol name standing for d(fiber)/d(base) along a section."""
    return f"u_{fiber}_{base}"


@dataclass(frozen=True)
class BundleChart:
    """Adapted chart (x^1..x^m ; y^1..y^n) of a fiber bundle."""

    base: tuple
    fiber: tuple
    index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(self.base))
        object.__setattr__(self, "fiber", tuple(self.fiber))
        names = self.base + self.fiber
        if not self.base or not self.fiber:
            raise ValueError("a bundle chart needs at least one base and one fiber coordinate")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names in {names}")
        for n in names:
            if _JET.match(n) or n.startswith("__"):
                raise ValueError(f"coordinate name {n!r} is reserved")
            as_expr(n)  # validates identifier syntax
        object.__setattr__(self, "index", {n: i for i, n in enumerate(names)})

    @property
    def coords(self) -> tuple:
        return self.base + self.fiber

    @property
    def m(self) -> int:
        return len(self.base)

    @property
    def n(self) -> int:
        return len(self.fiber)

    @property
    def dim(self) -> int:
        return len(self.base) + len(self.fiber)

    def is_base(self, i: int) -> bool:
        return i < len(self.base)

    def idx(self, name) -> int:
        if isinstance(name, int):
            return name
        try:
            return self.index[name]
        except KeyError:
            raise ChartMismatch(f"{name!r} is not a coordinate of this chart") from None

    def symbol(self, i: int) -> Expr:
        return as_expr(self.coords[i])

    def dz(self, name) -> "DiffForm":
        return DiffForm(self, 1, {(self.idx(name),): ONE})

    def partial(self, name) -> "MultiVector":
        return MultiVector(self, 1, {(self.idx(name),): ONE})

    def volume(self) -> "DiffForm":
        """The base volume form dx1 ^ ... ^ dxm."""
        return DiffForm(self, self.m, {tuple(range(self.m)): ONE})

    def base_multivector(self) -> "MultiVector":
        """The base m-vector Y with i(Y)(dx1 ^ ... ^ dxm) = 1."""
        return MultiVector(self, self.m, {tuple(range(self.m)): as_expr(volume_sign(self.m))})

    def jet_symbols(self) -> dict:
        return {(j, mu): as_expr(jet_name(j, mu)) for j in self.fiber for mu in self.base}


def _sort_sign(idx: Sequence[int]):
    """Sorted tuple and permutation sign; (None, 0) on repeated indices."""
    if len(set(idx)) != len(idx):
        return None, 0
    inv = 0
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            if idx[a] > idx[b]:
                inv += 1
    return tuple(sorted(idx)), (-1 if inv & 1 else 1)


class _Graded:
    """Keyed coefficient container shared by forms and multivectors."""

    __slots__ = ("chart", "degree", "coeffs")
    _symbol = "?"

    def __init__(self, chart: BundleChart, degree: int, coeffs: Mapping | None = None):
        if degree < 0 or degree > chart.dim:
            raise DegreeMismatch(f"degree {degree} out of range for a {chart.dim}-dimensional chart")
        self.chart = chart
        self.degree = degree
        clean = {}
        for key, c in (coeffs or {}).items():
            c = as_expr(c)
            if c.poly():
                clean[key] = c
        self.coeffs = clean

    @classmethod
    def from_terms(cls, chart: BundleChart, degree: int, terms: Iterable):
        """Build from (coefficient, index-or-name sequence) pairs in any order."""
        acc: dict = {}
        for c, basis in terms:
            idx = [chart.idx(b) for b in basis]
            if len(idx) != degree:
                raise DegreeMismatch(f"basis {basis} does not have length {degree}")
            key, sign = _sort_sign(idx)
            if key is None:
                continue
            _acc(acc, key, as_expr(c) * sign)
        return cls(chart, degree, acc)

    @classmethod
    def zero(cls, chart: BundleChart, degree: int = 0):
        return cls(chart, degree)

    @classmethod
    def scalar(cls, chart: BundleChart, f):
        return cls(chart, 0, {(): as_expr(f)})

    # -- container protocol --------------------------------------------------

    def __getitem__(self, basis) -> Expr:
        if isinstance(basis, (str, int)):
            basis = (basis,)
        key, sign = _sort_sign([self.chart.idx(b) for b in basis])
        if key is None:
            return ZERO
        return self.coeffs.get(key, ZERO) * sign

    def items(self):
        return sorted(self.coeffs.items())

    def is_zero(self) -> bool:
        return not self.coeffs

    def names(self, key: tuple) -> tuple:
        return tuple(self.chart.coords[i] for i in key)

    def map_coeffs(self, fn):
        return type(self)(self.chart, self.degree, {k: fn(c) for k, c in self.coeffs.items()})

    def subs(self, bindings: Mapping):
        return self.map_coeffs(lambda c: substitute(c, bindings))

    def free_symbols(self) -> frozenset:
        out: frozenset = frozenset()
        for c in self.coeffs.values():
            out |= free_symbols(c)
        return out

    # -- linear structure --------------------------------------------------------

    def _check(self, other):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.chart != self.chart:
            raise ChartMismatch("operands live on different charts")

    def __add__(self, other):
        self._check(other)
        if other.degree != self.degree:
            if other.is_zero():
                return self
            if self.is_zero():
                return other
            raise DegreeMismatch(f"cannot add degrees {self.degree} and {other.degree}")
        acc = dict(self.coeffs)
        for k, c in other.coeffs.items():
            _acc(acc, k, c)
        return type(self)(self.chart, self.degree, acc)

    def __neg__(self):
        return self.map_coeffs(lambda c: -c)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, f):
        f = as_expr(f)
        return self.map_coeffs(lambda c: c * f)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        if self.chart != other.chart:
            return False
        if self.is_zero() and other.is_zero():
            return True
        return self.degree == other.degree and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((type(self).__name__, self.degree, frozenset(self.coeffs.items())))

    def verdict(self, seed: int = 0) -> Verdict:
        """Worst zero verdict over all coefficients."""
        return combine(classify(c, seed=seed) for c in self.coeffs.values())

    def records(self) -> list:
        """JSON-friendly ``[{"coeff": str, "basis": [names]}]``."""
        return [{"coeff": str(c), "basis": list(self.names(k))} for k, c in self.items()]

    def _basis_str(self, key) -> str:
        return "∧".join(self._symbol + n for n in self.names(key))

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for k, c in self.items():
            if not k:
                parts.append(f"({c})")
            elif c == ONE:
                parts.append(self._basis_str(k))
            elif c == -ONE:
                parts.append("-" + self._basis_str(k))
            else:
                parts.append(f"({c})*{self._basis_str(k)}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"{type(self).__name__}[{self.degree}]({self})"


def _acc(acc: dict, key: tuple, c: Expr) -> None:
    prev = acc.get(key)
    v = c if prev is None else prev + c
    if v.poly():
        acc[key] = v
    else:
        acc.pop(key, None)


class DiffForm(_Graded):
    """Differential k-form on a bundle chart."""

    __slots__ = ()
    _symbol = "d"


class MultiVector(_Graded):
    """Multivector field of degree r (degree 1: ordinary vector field)."""

    __slots__ = ()
    _symbol = "∂"


def _same_chart(a: _Graded, b: _Graded) -> None:
    if a.chart != b.chart:
        raise ChartMismatch("operands live on different charts")


# ---------------------------------------------------------------------------
# Algebraic operations.


@lru_cache(maxsize=65536)
def _merge(k1: tuple, k2: tuple):
    if set(k1) & set(k2):
        return None, 0
    inv = sum(1 for x in k1 for y in k2 if x > y)
    return tuple(sorted(k1 + k2)), (-1 if inv & 1 else 1)


def wedge(a, b):
    """Graded-commutative exterior product of two forms or two multivectors."""
    if type(a) is not type(b):
        raise TypeError("wedge needs two forms or two multivector fields")
    _same_chart(a, b)
    deg = a.degree + b.degree
    if deg > a.chart.dim:
        return type(a)(a.chart, 0)
    acc: dict = {}
    for k1, c1 in a.coeffs.items():
        for k2, c2 in b.coeffs.items():
            key, sign = _merge(k1, k2)
            if key is None:
                continue
            _acc(acc, key, c1 * c2 * sign)
    return type(a)(a.chart, deg, acc)


@lru_cache(maxsize=65536)
def _contract_key(vkey: tuple, fkey: tuple):
    """i(d_j1 ^ ... ^ d_jr)(dz_I): remaining key and sign, or (None, 0).

    i(d_jr) acts first, so i(d_q ^ d_p)(dq ^ dp) = i(d_q)(-dq) = -1.
    """
    rest = list(fkey)
    sign = 1
    for j in reversed(vkey):
        try:
            pos = rest.index(j)
        except ValueError:
            return None, 0
        if pos & 1:
            sign = -sign
        del rest[pos]
    return tuple(rest), sign


def contract(X: MultiVector, a: DiffForm) -> DiffForm:
    """Contraction i(X)a; the zero 0-form when deg a < deg X."""
    if not isinstance(X, MultiVector) or not isinstance(a, DiffForm):
        raise TypeError("contract expects a multivector field and a form")
    _same_chart(X, a)
    if a.degree < X.degree:
        return DiffForm(a.chart, 0)
    acc: dict = {}
    for vk, f in X.coeffs.items():
        for fk, c in a.coeffs.items():
            rest, sign = _contract_key(vk, fk)
            if rest is None:
                continue
            _acc(acc, rest, f * c * sign)
    return DiffForm(a.chart, a.degree - X.degree, acc)


@lru_cache(maxsize=65536)
def _insert(i: int, key: tuple):
    if i in key:
        return None, 0
    pos = sum(1 for k in key if k < i)
    return tuple(sorted(key + (i,))), (-1 if pos & 1 else 1)


def exterior_derivative(a: DiffForm) -> DiffForm:
    chart = a.chart
    if a.degree + 1 > chart.dim:
        return DiffForm(chart, 0)
    acc: dict = {}
    names = chart.coords
    for key, f in a.coeffs.items():
        fs = free_symbols(f)
        for i, name in enumerate(names):
            if name not in fs:
                continue
            nk, sign = _insert(i, key)
            if nk is None:
                continue
            _acc(acc, nk, differentiate(f, name) * sign)
    return DiffForm(chart, a.degree + 1, acc)


def lie_derivative(X: MultiVector, a: DiffForm) -> DiffForm:
    """Graded Lie derivative L(X)a = d i(X)a - (-1)^r i(X) da."""
    _same_chart(X, a)
    r = X.degree
    deg = a.degree - r + 1
    if deg < 0 or deg > a.chart.dim:
        return DiffForm(a.chart, 0)
    first = exterior_derivative(contract(X, a)) if a.degree >= r else DiffForm(a.chart, 0)
    second = contract(X, exterior_derivative(a))
    if r % 2 == 0:
        second = -second
    out = first + second
    if out.is_zero():
        return DiffForm(a.chart, deg)
    return out


def _vec_derivative(chart: BundleChart, i: int, f: Expr) -> Expr:
    return differentiate(f, chart.coords[i])


def _lie_pair(chart, c: Expr, i: int, d: Expr, j: int):
    """[c d_i, d d_j] as a list of (coeff, index) pairs."""
    out = []
    dd = _vec_derivative(chart, i, d) if c.poly() else ZERO
    if dd.poly():
        out.append((c * dd, j))
    dc = _vec_derivative(chart, j, c)
    if dc.poly():
        out.append((-(d * dc), i))
    return out


def _bracket_terms(chart, f: Expr, vk: tuple, g: Expr, wk: tuple, acc: dict) -> None:
    """Accumulate [f d_vk, g d_wk] using the Leibniz expansion over factors.

    f d_(i1..ip) is the decomposable (f d_i1) ^ d_i2 ^ ... ^ d_ip; brackets of
    constant coordinate fields vanish, so only pairs touching the first factor
    of either side contribute.
    """
    p, q = len(vk), len(wk)
    if p == 0 and q == 0:
        return
    if q == 0:
        # [X1 ^ ... ^ Xp, g] = sum_a (-1)^(p-a) Xa(g) X1..^Xa..Xp   (a 1-indexed)
        for a in range(p):
            dg = _vec_derivative(chart, vk[a], g)
            if not dg.poly():
                continue
            s = -1 if (p - 1 - a) & 1 else 1
            _acc(acc, vk[:a] + vk[a + 1:], dg * f * s)
        return
    if p == 0:
        # graded antisymmetry: [f, Q] = -(-1)^((0-1)(q-1)) [Q, f]
        tmp: dict = {}
        _bracket_terms(chart, g, wk, f, vk, tmp)
        s = 1 if (q - 1) % 2 == 0 else -1
        for k, c in tmp.items():
            _acc(acc, k, c * (-s))
        return
    for a in range(p):
        for b in range(q):
            if a > 0 and b > 0:
                continue
            xc = f if a == 0 else ONE
            yc = g if b == 0 else ONE
            pair = _lie_pair(chart, xc, vk[a], yc, wk[b])
            if not pair:
                continue
            extra = (ONE if a == 0 else f) * (ONE if b == 0 else g)
            xrest = vk[:a] + vk[a + 1:]
            yrest = wk[:b] + wk[b + 1:]
            s = -1 if (a + b) & 1 else 1
            for c, idx in pair:
                key, sign = _sort_sign((idx,) + xrest + yrest)
                if key is None:
                    continue
                _acc(acc, key, c * extra * (sign * s))


def sn_bracket(Y: MultiVector, X: MultiVector) -> MultiVector:
    """Schouten-Nijenhuis bracket [Y, X] of degree deg Y + deg X - 1."""
    if not isinstance(Y, MultiVector) or not isinstance(X, MultiVector):
        raise TypeError("sn_bracket expects multivector fields")
    _same_chart(Y, X)
    chart = Y.chart
    deg = Y.degree + X.degree - 1
    if deg < 0 or deg > chart.dim:
        return MultiVector(chart, 0)
    acc: dict = {}
    for vk, f in Y.coeffs.items():
        for wk, g in X.coeffs.items():
            _bracket_terms(chart, f, vk, g, wk, acc)
    return MultiVector(chart, deg, acc)


# ---------------------------------------------------------------------------
# Sections and maps.


class Section:
    """Local section psi: x -> (x, psi^j(x)) of the bundle."""

    def __init__(self, chart: BundleChart, funcs: Mapping):
        self.chart = chart
        missing = set(chart.fiber) - set(funcs)
        extra = set(funcs) - set(chart.fiber)
        if missing or extra:
            raise ChartMismatch(f"section must define exactly the fiber coordinates {chart.fiber}")
        self.funcs = {j: as_expr(funcs[j]) for j in chart.fiber}
        base = set(chart.base)
        for j, f in self.funcs.items():
            if not free_symbols(f) <= base:
                raise ValueError(f"section component {j} = {f} depends on non-base symbols")

    def bindings(self) -> dict:
        return dict(self.funcs)

    def targets(self) -> dict:
        out = {x: as_expr(x) for x in self.chart.base}
        out.update(self.funcs)
        return out

    def jet_bindings(self) -> dict:
        """Jet symbol name -> derivative of the section component."""
        return {
            jet_name(j, mu): differentiate(self.funcs[j], mu)
            for j in self.chart.fiber
            for mu in self.chart.base
        }

    def __repr__(self) -> str:
        return "Section(" + ", ".join(f"{j}={f}" for j, f in self.funcs.items()) + ")"


class FiberedMap:
    """Chart map z -> F(z) with optional user-supplied inverse."""

    def __init__(self, chart: BundleChart, targets: Mapping, inverse: Mapping | None = None):
        self.chart = chart
        unknown = set(targets) - set(chart.coords)
        if unknown:
            raise ChartMismatch(f"unknown coordinates in map targets: {sorted(unknown)}")
        self.targets = {z: as_expr(targets.get(z, z)) for z in chart.coords}
        self.inverse = None
        if inverse is not None:
            self.inverse = {z: as_expr(inverse.get(z, z)) for z in chart.coords}

    @classmethod
    def identity(cls, chart: BundleChart) -> "FiberedMap":
        ident = {z: z for z in chart.coords}
        return cls(chart, ident, ident)

    @property
    def fibered(self) -> bool:
        base = set(self.chart.base)
        return all(free_symbols(self.targets[x]) <= base for x in self.chart.base)

    def compose(self, other: "FiberedMap") -> "FiberedMap":
        """self o other."""
        _same_chart(self, other)
        tg = {z: substitute(self.targets[z], other.targets) for z in self.chart.coords}
        inv = None
        if self.inverse is not None and other.inverse is not None:
            inv = {z: substitute(other.inverse[z], self.inverse) for z in self.chart.coords}
        return FiberedMap(self.chart, tg, inv)

    def inverted(self) -> "FiberedMap":
        if self.inverse is None:
            raise NoInverse("map has no inverse")
        return FiberedMap(self.chart, self.inverse, self.targets)

    def inverse_residuals(self) -> list:
        """target(inverse(z)) - z for every coordinate."""
        if self.inverse is None:
            raise NoInverse("map has no inverse")
        return [substitute(self.targets[z], self.inverse) - as_expr(z) for z in self.chart.coords]

    def check_inverse(self, seed: int = 0) -> Verdict:
        return combine(classify(r, seed=seed) for r in self.inverse_residuals())


def _map_targets(F) -> dict:
    if isinstance(F, Section):
        return F.targets()
    if isinstance(F, FiberedMap):
        return F.targets
    raise TypeError("expected a Section or FiberedMap")


def pullback_form(F, a: DiffForm) -> DiffForm:
    """F^* a by substitution and the Jacobian of F."""
    if F.chart != a.chart:
        raise ChartMismatch("map and form live on different charts")
    chart = a.chart
    targets = _map_targets(F)
    names = chart.coords
    dF = {}

    def dtarget(i):
        if i not in dF:
            dF[i] = exterior_derivative(DiffForm.scalar(chart, targets[names[i]]))
        return dF[i]

    products: dict = {}

    def basis_image(key):
        img = products.get(key)
        if img is None:
            img = DiffForm.scalar(chart, ONE)
            for i in key:
                img = wedge(img, dtarget(i))
            products[key] = img
        return img

    out = DiffForm(chart, a.degree)
    for key, c in a.items():
        img = basis_image(key)
        if img.is_zero():
            continue
        out = out + img * substitute(c, targets)
    if out.is_zero():
        return DiffForm(chart, a.degree)
    return out


def prolong(psi: Section) -> MultiVector:
    """Canonical prolongation: wedge over mu of (d_mu + d_mu psi^j d_j)."""
    chart = psi.chart
    out = MultiVector.scalar(chart, ONE)
    for mu in chart.base:
        v = {(chart.idx(mu),): ONE}
        for j in chart.fiber:
            v[(chart.idx(j),)] = differentiate(psi.funcs[j], mu)
        out = wedge(out, MultiVector(chart, 1, v))
    return out


def pushforward_mv(F: FiberedMap, X: MultiVector) -> MultiVector:
    """F_* X: push each factor by the Jacobian, then re-express via F^-1."""
    if F.inverse is None:
        raise NoInverse("pushforward of multivector fields needs the inverse map")
    _same_chart(F, X)
    chart = X.chart
    names = chart.coords
    jac = {}

    def column(i):
        if i not in jac:
            jac[i] = MultiVector(
                chart, 1, {(b,): differentiate(F.targets[names[b]], names[i]) for b in range(chart.dim)}
            )
        return jac[i]

    out = MultiVector(chart, X.degree)
    for key, f in X.items():
        img = MultiVector.scalar(chart, f)
        for i in key:
            img = wedge(img, column(i))
        out = out + img
    return out.subs(F.inverse)


# ---------------------------------------------------------------------------
# Decomposable kappa-transverse ansatz.


class DecomposableAnsatz:
    """X = wedge over mu of (d_mu + X^j_mu d_j); i(X)(d^m x) = volume_sign(m)."""

    def __init__(self, chart: BundleChart, coeffs: Mapping):
        self.chart = chart
        table = {}
        for j in chart.fiber:
            row = coeffs.get(j, {})
            unknown = set(row) - set(chart.base)
            if unknown:
                raise ChartMismatch(f"ansatz row {j} has unknown base entries {sorted(unknown)}")
            for mu in chart.base:
                table[(j, mu)] = as_expr(row.get(mu, 0))
        extra = set(coeffs) - set(chart.fiber)
        if extra:
            raise ChartMismatch(f"ansatz has unknown fiber rows {sorted(extra)}")
        self.coeffs = table

    def __getitem__(self, jm) -> Expr:
        return self.coeffs[jm]

    def vector(self, mu: str) -> MultiVector:
        chart = self.chart
        v = {(chart.idx(mu),): ONE}
        for j in chart.fiber:
            v[(chart.idx(j),)] = self.coeffs[(j, mu)]
        return MultiVector(chart, 1, v)

    def multivector(self) -> MultiVector:
        out = MultiVector.scalar(self.chart, ONE)
        for mu in self.chart.base:
            out = wedge(out, self.vector(mu))
        return out

    def subs(self, bindings: Mapping) -> "DecomposableAnsatz":
        rows: dict = {}
        for (j, mu), c in self.coeffs.items():
            rows.setdefault(j, {})[mu] = substitute(c, bindings)
        return DecomposableAnsatz(self.chart, rows)


@dataclass
class Involutivity:
    involutive: bool
    obstructions: list  # (label, expr, verdict) for the nonvanishing entries

    def __bool__(self) -> bool:
        return self.involutive


def involutivity_check(A: DecomposableAnsatz, seed: int = 0) -> Involutivity:
    """Frobenius test for the distribution spanned by V_mu = d_mu + X^j_mu d_j.

    [V_mu, V_nu] is vertical, so the distribution is involutive exactly when
    V_mu(X^j_nu) - V_nu(X^j_mu) vanishes for all mu < nu and all j.
    """
    chart = A.chart

    def apply(mu, f):
        out = differentiate(f, mu)
        for k in chart.fiber:
            out = out + A[(k, mu)] * differentiate(f, k)
        return out

    obstructions = []
    for mu, nu in combinations(chart.base, 2):
        for j in chart.fiber:
            r = apply(mu, A[(j, nu)]) - apply(nu, A[(j, mu)])
            v = classify(r, seed=seed)
            if not v.passed:
                obstructions.append((f"[V_{mu},V_{nu}]^{j}", r, v))
    return Involutivity(not obstructions, obstructions)


# ---------------------------------------------------------------------------
# Radial homotopy.

_HOMOTOPY_PARAM = "__s"


def homotopy_operator(a: DiffForm, coords=None, center: Mapping | None = None) -> DiffForm:
    """K(a) for the straight-line contraction of ``coords`` onto ``center``.

    With h_s(z) = z0 + s (z - z0) on the chosen coordinates (the others held
    fixed), K(a) = int_0^1 i(d/ds) H^* a ds, so that a = dK(a) + K(da) whenever
    a has no component surviving at s = 0.  Coefficients must be polynomial
    in the contracted coordinates.
    """
    chart = a.chart
    names = chart.coords if coords is None else tuple(coords)
    scaled = {chart.idx(n) for n in names}
    center = center or {}
    s = as_expr(_HOMOTOPY_PARAM)
    shift = {}
    for i in scaled:
        z = chart.coords[i]
        z0 = as_expr(center.get(z, 0))
        shift[i] = (as_expr(z) - z0, z0)
    scaling = {chart.coords[i]: z0 + s * dz for i, (dz, z0) in shift.items()}
    if a.degree == 0:
        return DiffForm(chart, 0)
    acc: dict = {}
    for key, c in a.coeffs.items():
        pos = [p for p, i in enumerate(key) if i in scaled]
        if not pos:
            continue
        f = len(pos)
        try:
            radial = integrate_poly(substitute(c, scaling) * s ** (f - 1), s)
        except NotPolynomial:
            raise HomotopyNotPolynomial(
                f"coefficient {c} is not polynomial in {', '.join(chart.coords[i] for i in sorted(scaled))}"
            ) from None
        radial = substitute(radial, {_HOMOTOPY_PARAM: 1})
        if not radial.poly():
            continue
        for p in pos:
            rest = key[:p] + key[p + 1:]
            term = radial * shift[key[p]][0]
            _acc(acc, rest, -term if p & 1 else term)
    return DiffForm(chart, a.degree - 1, acc)
