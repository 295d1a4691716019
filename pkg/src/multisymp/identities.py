"""Randomized identity suite for the exterior algebra.

Each case draws a chart with m <= 2, n <= 3 and polynomial coefficients of
degree <= 2 from a generator seeded by (seed, case), so any single case can
be replayed on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exterior import (
    DiffForm,
    contract,
    exterior_derivative,
    lie_derivative,
    sn_bracket,
    wedge,
)
from .randgen import random_chart, random_form, random_multivector
from .verdict import Verdict, combine

__all__ = ["IdentityResult", "IDENTITIES", "run_identity_suite"]


def _sign(e: int) -> int:
    return -1 if e % 2 else 1


def _d_squared(rng, chart):
    a = random_form(rng, chart, int(rng.integers(0, chart.dim + 1)))
    return exterior_derivative(exterior_derivative(a))


def _leibniz(rng, chart):
    k = int(rng.integers(0, chart.dim + 1))
    l = int(rng.integers(0, chart.dim + 1 - k))
    a, b = random_form(rng, chart, k), random_form(rng, chart, l)
    lhs = exterior_derivative(wedge(a, b))
    rhs = wedge(exterior_derivative(a), b) + wedge(a, exterior_derivative(b)) * _sign(k)
    return lhs - rhs


def _contraction_degree(rng, chart):
    r = int(rng.integers(0, chart.dim + 1))
    k = int(rng.integers(0, chart.dim + 1))
    X, a = random_multivector(rng, chart, r), random_form(rng, chart, k)
    out = contract(X, a)
    if k < r:
        # "equal to zero if k < r": the zero 0-form
        return out if out.degree == 0 else out + DiffForm.scalar(chart, 1)
    if out.is_zero() or out.degree == k - r:
        return DiffForm(chart, 0)
    return DiffForm.scalar(chart, out.degree - (k - r))


def _degrees(rng, chart, count, total):
    while True:
        ds = [int(v) for v in rng.integers(0, 4, size=count)]
        if sum(ds) <= total and all(d <= chart.dim for d in ds):
            return ds


def _sn_antisymmetry(rng, chart):
    i, j = _degrees(rng, chart, 2, 6)
    X, Y = random_multivector(rng, chart, i), random_multivector(rng, chart, j)
    return sn_bracket(X, Y) + sn_bracket(Y, X) * _sign((i + 1) * (j + 1))


def _sn_derivation(rng, chart):
    while True:
        i, j, k = _degrees(rng, chart, 3, 7)
        if j + k <= chart.dim:
            break
    X = random_multivector(rng, chart, i)
    Y = random_multivector(rng, chart, j)
    Z = random_multivector(rng, chart, k)
    lhs = sn_bracket(X, wedge(Y, Z))
    rhs = wedge(sn_bracket(X, Y), Z) + wedge(Y, sn_bracket(X, Z)) * _sign((i + 1) * j)
    return lhs - rhs


def _sn_jacobi(rng, chart):
    i, j, k = _degrees(rng, chart, 3, 5)
    X = random_multivector(rng, chart, i)
    Y = random_multivector(rng, chart, j)
    Z = random_multivector(rng, chart, k)
    return (
        sn_bracket(X, sn_bracket(Y, Z)) * _sign((i + 1) * (k + 1))
        + sn_bracket(Y, sn_bracket(Z, X)) * _sign((j + 1) * (i + 1))
        + sn_bracket(Z, sn_bracket(X, Y)) * _sign((k + 1) * (j + 1))
    )


def _sn_contraction(rng, chart):
    j = int(rng.integers(0, min(3, chart.dim) + 1))
    k = int(rng.integers(0, chart.dim + 1))
    X = random_multivector(rng, chart, 1)
    Y = random_multivector(rng, chart, j)
    a = random_form(rng, chart, k)
    lhs = contract(sn_bracket(X, Y), a)
    rhs = lie_derivative(X, contract(Y, a)) - contract(Y, lie_derivative(X, a))
    return lhs - rhs


def _lie_relation(rng, chart):
    i, j = _degrees(rng, chart, 2, 5)
    Y, X = random_multivector(rng, chart, i), random_multivector(rng, chart, j)
    a = random_form(rng, chart, int(rng.integers(0, chart.dim + 1)))
    lhs = lie_derivative(sn_bracket(Y, X), a)
    rhs = lie_derivative(Y, lie_derivative(X, a)) - lie_derivative(X, lie_derivative(Y, a)) * _sign(
        (i - 1) * (j - 1)
    )
    return lhs - rhs


IDENTITIES = {
    "d_squared": _d_squared,
    "graded_leibniz": _leibniz,
    "contraction_degree": _contraction_degree,
    "sn_antisymmetry": _sn_antisymmetry,
    "sn_derivation": _sn_derivation,
    "sn_jacobi": _sn_jacobi,
    "sn_contraction": _sn_contraction,
    "sn_lie_relation": _lie_relation,
}


@dataclass
class IdentityResult:
    name: str
    cases: int
    verdicts: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (case, residual text)

    @property
    def verdict(self) -> Verdict:
        return combine(self.verdicts)


def run_identity_suite(seed: int = 0, cases: int = 200, names=None) -> list:
    out = []
    order = list(IDENTITIES)
    for name in names or order:
        tag = order.index(name)
        fn = IDENTITIES[name]
        res = IdentityResult(name, cases)
        for case in range(cases):
            rng = np.random.default_rng([seed, tag, case])
            chart = random_chart(rng, max_base=2, max_fiber=3)
            residual = fn(rng, chart)
            v = residual.verdict(seed)
            res.verdicts.append(v)
            if not v.passed:
                res.failures.append((case, str(residual)))
        out.append(res)
    return out
