"""Zero verdicts: exact where decidable, randomized probing otherwise."""

from __future__ import annotations

import contextlib
import contextvars
import enum
from typing import Iterable, Sequence

import numpy as np

from .expr import Expr, ZeroTest, _poly_terms_abs, evaluate, free_symbols, is_zero

PROBE_POINTS = 20
PROBE_TOL = 1e-9
PROBE_RANGE = (-2.0, 2.0)

_tolerance = contextvars.ContextVar("probe_tolerance", default=PROBE_TOL)


@contextlib.contextmanager
def probe_tolerance(tol: float):
    """Override the numeric-probe tolerance for verdicts computed inside."""
    token = _tolerance.set(float(tol))
    try:
        yield
    finally:
        _tolerance.reset(token)


class Verdict(str, enum.Enum):
    SYMBOLIC_ZERO = "symbolic-zero"
    NUMERIC_ZERO = "numeric-zero"
    NONZERO = "nonzero"
    ERROR = "error"

    @property
    def passed(self) -> bool:
        return self in (Verdict.SYMBOLIC_ZERO, Verdict.NUMERIC_ZERO)

    def __str__(self) -> str:
        return self.value


def probe_zero(e: Expr, seed: int = 0, points: int = PROBE_POINTS, tol: float | None = None) -> bool:
    """True if ``e`` vanishes (relative to its term scale) at random points."""
    if tol is None:
        tol = _tolerance.get()
    names = sorted(free_symbols(e))
    rng = np.random.default_rng(seed)
    poly = e.poly()
    for _ in range(points):
        pt = {n: float(v) for n, v in zip(names, rng.uniform(*PROBE_RANGE, size=len(names)))}
        val = evaluate(e, pt)
        scale = max(1.0, _poly_terms_abs(poly, pt))
        if not np.isfinite(val) or abs(val) > tol * scale:
            return False
    return True


def classify(e: Expr, seed: int = 0, tol: float | None = None) -> Verdict:
    z = is_zero(e)
    if z is ZeroTest.ZERO:
        return Verdict.SYMBOLIC_ZERO
    if z is ZeroTest.NONZERO:
        return Verdict.NONZERO
    return Verdict.NUMERIC_ZERO if probe_zero(e, seed=seed, tol=tol) else Verdict.NONZERO


def combine(verdicts: Iterable[Verdict]) -> Verdict:
    """Worst verdict of a collection (empty collections pass symbolically)."""
    order = [Verdict.SYMBOLIC_ZERO, Verdict.NUMERIC_ZERO, Verdict.NONZERO, Verdict.ERROR]
    worst = Verdict.SYMBOLIC_ZERO
    for v in verdicts:
        if order.index(v) > order.index(worst):
            worst = v
    return worst


def classify_all(exprs: Sequence[Expr], seed: int = 0, tol: float | None = None) -> list:
    return [classify(e, seed=seed, tol=tol) for e in exprs]
