"""Seeded random polynomial data for identity testing."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np

from .exterior import BundleChart, DiffForm, MultiVector, Section
from .expr import ONE, ZERO, Expr, as_expr


def random_poly(rng: np.random.Generator, names, max_degree: int = 2, terms: int = 3) -> Expr:
    """Sparse polynomial with small integer/half-integer coefficients."""
    out = ZERO
    syms = [as_expr(n) for n in names]
    for _ in range(int(rng.integers(1, terms + 1))):
        c = Fraction(int(rng.integers(-3, 4)), int(rng.choice([1, 2])))
        if c == 0:
            continue
        mono = ONE
        for _ in range(int(rng.integers(0, max_degree + 1))):
            mono = mono * syms[int(rng.integers(len(syms)))]
        out = out + as_expr(c) * mono
    return out


def _random_graded(cls, rng, chart: BundleChart, degree: int, max_terms: int, max_degree: int):
    keys = list(combinations(range(chart.dim), degree))
    count = min(len(keys), int(rng.integers(1, max_terms + 1)))
    chosen = rng.choice(len(keys), size=count, replace=False)
    return cls(chart, degree, {keys[int(i)]: random_poly(rng, chart.coords, max_degree) for i in chosen})


def random_form(rng, chart: BundleChart, degree: int, max_terms: int = 3, max_degree: int = 2) -> DiffForm:
    return _random_graded(DiffForm, rng, chart, degree, max_terms, max_degree)


def random_multivector(rng, chart: BundleChart, degree: int, max_terms: int = 3, max_degree: int = 2) -> MultiVector:
    return _random_graded(MultiVector, rng, chart, degree, max_terms, max_degree)


def random_chart(rng, max_base: int = 2, max_fiber: int = 2) -> BundleChart:
    m = int(rng.integers(1, max_base + 1))
    n = int(rng.integers(1, max_fiber + 1))
    return BundleChart(tuple(f"x{i}" for i in range(1, m + 1)), tuple(f"y{j}" for j in range(1, n + 1)))


def random_coordinate_data(rng, chart: BundleChart, max_degree: int = 2) -> tuple:
    """(F, E) with polynomial entries in all coordinates."""
    F = {(j, mu): random_poly(rng, chart.coords, max_degree) for j in chart.fiber for mu in chart.base}
    return F, random_poly(rng, chart.coords, max_degree)


def random_section(rng, chart: BundleChart, max_degree: int = 2) -> Section:
    return Section(chart, {j: random_poly(rng, chart.base, max_degree) for j in chart.fiber})
