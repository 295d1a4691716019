"""Exact scalar expressions over named real coordinates.

Expressions are immutable trees built from rational constants, symbols,
n-ary sums and products, integer powers and the unary functions ``sin``,
``cos`` and ``exp``.  The canonical form is the fully expanded sum of
monomials over *atoms* (symbols and function applications whose arguments
are themselves canonical), with terms and factors sorted by a fixed total
order.  For the polynomial subclass this makes zero-testing exact.

Arithmetic operators on :class:`Expr` always return canonical results;
the node constructors (:class:`Add`, :class:`Mul`, ...) build raw trees,
which is what the parser produces.
"""

from __future__ import annotations

import enum
import math
import re
import threading
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Sym",
    "Add",
    "Mul",
    "Pow",
    "Func",
    "FUNCTIONS",
    "ZeroTest",
    "UnboundSymbol",
    "NotPolynomial",
    "NonConstantDivisor",
    "as_expr",
    "sym",
    "symbols",
    "normalize",
    "differentiate",
    "is_zero",
    "evaluate",
    "evaluate_array",
    "substitute",
    "integrate_poly",
    "free_symbols",
    "is_polynomial",
    "constant_term",
    "ZERO",
    "ONE",
]

FUNCTIONS = ("sin", "cos", "exp")

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

Number = Union[int, Fraction]


class UnboundSymbol(KeyError):
    """Raised by evaluation when a free symbol has no value."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unbound symbol {self.name!r}"


class NotPolynomial(ValueError):
    pass


class NonConstantDivisor(ValueError):
    pass


class ZeroTest(enum.Enum):
    ZERO = "zero"
    NONZERO = "nonzero"
    UNKNOWN = "unknown"


# ---------------------------------------------------------------------------
# Atom interning.
#
# A polynomial is a dict mapping a monomial to its rational coefficient.  A
# monomial is a sorted tuple of atom ids with repetition (x^2*y -> (ix, ix, iy)),
# so multiplication is tuple concatenation plus a C-level sort.  Ids are only
# an internal handle; printed order always comes from the structural sort key.

_atom_ids: dict = {}
_atoms: list = []
_atom_lock = threading.Lock()


def _intern(key, node: "Expr") -> int:
    aid = _atom_ids.get(key)
    if aid is not None:
        return aid
    with _atom_lock:
        aid = _atom_ids.get(key)
        if aid is None:
            aid = len(_atoms)
            _atoms.append(node)
            _atom_ids[key] = aid
    return aid


def _freeze(poly: dict) -> tuple:
    return tuple(sorted(poly.items()))


# ---------------------------------------------------------------------------
# Sparse polynomial kernels.


def _padd(a: dict, b: dict, scale: Number = 1) -> dict:
    out = dict(a)
    for m, c in b.items():
        v = out.get(m, 0) + c * scale
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def _iadd(out: dict, b: dict, scale: Number = 1) -> None:
    """In-place ``out += scale * b``; ``out`` must be a private dict."""
    for m, c in b.items():
        v = out.get(m, 0) + c * scale
        if v:
            out[m] = v
        else:
            out.pop(m, None)


def _pscale(a: dict, k: Number) -> dict:
    if not k:
        return {}
    if k == 1:
        return a
    return {m: c * k for m, c in a.items()}


def _pmul(a: dict, b: dict) -> dict:
    if not a or not b:
        return {}
    if len(b) > len(a):
        a, b = b, a
    out: dict = {}
    get = out.get
    for m2, c2 in b.items():
        for m1, c1 in a.items():
            if m1 and m2:
                m = tuple(sorted(m1 + m2))
            else:
                m = m1 or m2
            out[m] = get(m, 0) + c1 * c2
    return {m: c for m, c in out.items() if c}


def _ppow(a: dict, n: int) -> dict:
    result = {(): 1}
    base = a
    while n:
        if n & 1:
            result = _pmul(result, base)
        n >>= 1
        if n:
            base = _pmul(base, base)
    return result


def _const_poly(c: Number) -> dict:
    return {(): c} if c else {}


def _as_const(poly: dict):
    """Return the rational value of a constant polynomial, else None."""
    if not poly:
        return 0
    if len(poly) == 1 and () in poly:
        return poly[()]
    return None


# ---------------------------------------------------------------------------
# Nodes.

_KIND_CONST, _KIND_SYM, _KIND_POW, _KIND_FUNC, _KIND_MUL, _KIND_ADD = range(6)


class Expr:
    """Base class of expression nodes.

    ``_poly`` caches the expanded canonical polynomial; ``_canon`` marks a
    node that is already in canonical form.
    """

    __slots__ = ("_poly", "_canon", "_skey")

    def __init__(self):
        self._poly = None
        self._canon = False
        self._skey = None

    # -- canonical data -----------------------------------------------------

    def poly(self) -> dict:
        p = self._poly
        if p is None:
            p = self._compute_poly()
            self._poly = p
        return p

    def _compute_poly(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def sort_key(self) -> tuple:
        k = self._skey
        if k is None:
            k = self._compute_key()
            self._skey = k
        return k

    # -- comparison ---------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, Expr):
            if isinstance(other, (int, Fraction)):
                other = Const(other)
            else:
                return NotImplemented
        return self.poly() == other.poly()

    def __ne__(self, other) -> bool:
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __hash__(self) -> int:
        return hash(_freeze(self.poly()))

    # -- arithmetic (canonical results) ------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        return _from_poly(_padd(self.poly(), other.poly()))

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return _from_poly(_padd(self.poly(), other.poly(), -1))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return _from_poly(_pscale(self.poly(), -1))

    def __pos__(self):
        return normalize(self)

    def __mul__(self, other):
        other = _coerce(other)
        return _from_poly(_pmul(self.poly(), other.poly()))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        c = _as_const(other.poly())
        if c is None:
            raise NonConstantDivisor(f"cannot divide by non-constant {other}")
        if not c:
            raise ZeroDivisionError("division by zero constant")
        return _from_poly(_pscale(self.poly(), Fraction(1) / c))

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("only integer exponents are supported")
        return _from_poly(_pow_poly(self.poly(), n))

    # -- presentation -------------------------------------------------------

    def __repr__(self) -> str:
        return f"Expr({str(self)!r})"

    @property
    def is_canonical(self) -> bool:
        return self._canon

    @property
    def free_symbols(self) -> frozenset:
        return free_symbols(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        if isinstance(value, float):
            value = Fraction(repr(value))
        value = Fraction(value)
        self.value = value.numerator if value.denominator == 1 else value
        self._poly = _const_poly(self.value)
        self._canon = True

    def _compute_key(self):
        return (_KIND_CONST, 0, Fraction(self.value))

    def __str__(self) -> str:
        return str(self.value)


class Sym(Expr):
    __slots__ = ("name", "aid")

    def __init__(self, name: str):
        super().__init__()
        if not _IDENT.match(name):
            raise ValueError(f"invalid symbol name {name!r}")
        self.name = name
        self.aid = _intern(("s", name), self)
        self._poly = {(self.aid,): 1}
        self._canon = True

    def _compute_key(self):
        return (_KIND_SYM, 0, self.name)

    def __str__(self) -> str:
        return self.name


class Func(Expr):
    __slots__ = ("name", "_arg", "aid")

    def __init__(self, name: str, arg):
        super().__init__()
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name = name
        self._arg = _coerce(arg)
        self.aid = None

    @property
    def arg(self) -> Expr:
        return self._arg

    def _compute_poly(self):
        arg = normalize(self._arg)
        c = _as_const(arg.poly())
        if c == 0:
            return _const_poly(0 if self.name == "sin" else 1)
        node = self if self._arg is arg else Func(self.name, arg)
        aid = _intern(("f", self.name, _freeze(arg.poly())), node)
        if node is not self:
            node = _atoms[aid]
        node._mark_atom(aid)
        return {(aid,): 1}

    def _mark_atom(self, aid: int) -> None:
        if self.aid is None and self._arg.is_canonical:
            self.aid = aid
            self._poly = {(aid,): 1}
            self._canon = True

    def _compute_key(self):
        return (_KIND_FUNC, 1, self._arg.sort_key(), self.name)

    def __str__(self) -> str:
        return f"{self.name}({self._arg})"


class Pow(Expr):
    __slots__ = ("_base", "exp")

    def __init__(self, base, exp: int):
        super().__init__()
        if not isinstance(exp, int):
            raise TypeError("only integer exponents are supported")
        self._base = _coerce(base)
        self.exp = exp

    @property
    def base(self) -> Expr:
        if self._base is None:
            self._materialize()
        return self._base

    def _materialize(self):
        ((m, _),) = self._poly.items()
        self._base = _atoms[m[0]]

    def _compute_poly(self):
        return _pow_poly(self._base.poly(), self.exp)

    def _compute_key(self):
        return (_KIND_POW, 2, self.base.sort_key(), self.exp)

    def __str__(self) -> str:
        b = self.base
        bs = str(b)
        if not isinstance(b, (Sym, Func)) and not (isinstance(b, Const) and b.value >= 0 and isinstance(b.value, int)):
            bs = f"({bs})"
        return f"{bs}^{self.exp}"


class Mul(Expr):
    __slots__ = ("_factors",)

    def __init__(self, *factors):
        super().__init__()
        self._factors = tuple(_coerce(f) for f in factors)

    @property
    def factors(self) -> tuple:
        if self._factors is None:
            self._materialize()
        return self._factors

    def _materialize(self):
        ((m, c),) = self._poly.items()
        parts = _monomial_factors(m)
        if c != 1:
            parts.insert(0, Const(c))
        self._factors = tuple(parts)

    def _compute_poly(self):
        p = {(): 1}
        for f in self._factors:
            p = _pmul(p, f.poly())
            if not p:
                break
        return p

    def _compute_key(self):
        fs = self.factors
        return (_KIND_MUL, len(fs), tuple(f.sort_key() for f in fs))

    def __str__(self) -> str:
        fs = self.factors
        parts = []
        lead = ""
        for i, f in enumerate(fs):
            if i == 0 and isinstance(f, Const) and f.value == -1 and len(fs) > 1:
                lead = "-"
                continue
            s = str(f)
            if isinstance(f, (Add, Mul)) or (isinstance(f, Const) and f.value < 0 and (i > 0 or parts)):
                s = f"({s})"
            elif isinstance(f, Const) and isinstance(f.value, Fraction) and i > 0:
                s = f"({s})"
            parts.append(s)
        return lead + "*".join(parts)


class Add(Expr):
    __slots__ = ("_terms",)

    def __init__(self, *terms):
        super().__init__()
        self._terms = tuple(_coerce(t) for t in terms)

    @property
    def terms(self) -> tuple:
        if self._terms is None:
            self._materialize()
        return self._terms

    def _materialize(self):
        nodes = [_from_poly({m: c}) for m, c in self._poly.items()]
        nodes.sort(key=Expr.sort_key)
        self._terms = tuple(nodes)

    def _compute_poly(self):
        p: dict = {}
        for t in self._terms:
            _iadd(p, t.poly())
        return p

    def _compute_key(self):
        ts = self.terms
        return (_KIND_ADD, len(ts), tuple(t.sort_key() for t in ts))

    def __str__(self) -> str:
        out = []
        for i, t in enumerate(self.terms):
            s = str(t)
            if isinstance(t, Add):
                s = f"({s})"
            if i == 0:
                out.append(s)
            elif s.startswith("-"):
                out.append(" - " + s[1:])
            else:
                out.append(" + " + s)
        return "".join(out) if out else "0"


def _pow_poly(p: dict, n: int) -> dict:
    if n >= 0:
        return _ppow(p, n)
    c = _as_const(p)
    if c is None:
        raise ValueError("negative exponents are only allowed on constants")
    if not c:
        raise ZeroDivisionError("zero to a negative power")
    return _const_poly(Fraction(1) / Fraction(c) ** (-n))


def _monomial_factors(m: tuple) -> list:
    parts = []
    i = 0
    while i < len(m):
        j = i
        while j < len(m) and m[j] == m[i]:
            j += 1
        atom = _atoms[m[i]]
        parts.append(atom if j - i == 1 else _canonical_pow(atom, j - i, m[i:j]))
        i = j
    parts.sort(key=Expr.sort_key)
    return parts


def _canonical_pow(atom: Expr, e: int, mono: tuple) -> Pow:
    node = Pow.__new__(Pow)
    Expr.__init__(node)
    node._base = atom
    node.exp = e
    node._poly = {mono: 1}
    node._canon = True
    return node


ZERO = Const(0)
ONE = Const(1)


def _from_poly(poly: dict) -> Expr:
    """Build the canonical node for a polynomial (children built lazily)."""
    if not poly:
        return ZERO
    if len(poly) > 1:
        node = Add.__new__(Add)
        Expr.__init__(node)
        node._terms = None
    else:
        ((m, c),) = poly.items()
        if not m:
            return Const(c)
        if c == 1 and len(m) == 1:
            return _atoms[m[0]]
        if c == 1 and m[0] == m[-1]:
            return _canonical_pow(_atoms[m[0]], len(m), m)
        node = Mul.__new__(Mul)
        Expr.__init__(node)
        node._factors = None
    node._poly = poly
    node._canon = True
    return node


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction, float)) and not isinstance(x, bool):
        return Const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def as_expr(x) -> Expr:
    """Coerce numbers to constants, strings via the parser; normalize."""
    if isinstance(x, str):
        from .parser import parse_expr

        return normalize(parse_expr(x))
    return normalize(_coerce(x))


def sym(name: str) -> Sym:
    return Sym(name)


def symbols(names: str) -> tuple:
    return tuple(Sym(n) for n in names.replace(",", " ").split())


# ---------------------------------------------------------------------------
# Operations.


def normalize(e: Expr) -> Expr:
    """Return the canonical form of ``e`` (idempotent)."""
    e = _coerce(e)
    if e._canon:
        return e
    return _from_poly(e.poly())


def _sym_name(s) -> str:
    if isinstance(s, Sym):
        return s.name
    if isinstance(s, str):
        return s
    raise TypeError("expected a symbol or symbol name")


@lru_cache(maxsize=None)
def _atom_free(aid: int) -> frozenset:
    atom = _atoms[aid]
    if isinstance(atom, Sym):
        return frozenset((atom.name,))
    return _poly_free(atom.arg.poly())


def _poly_free(poly: dict) -> frozenset:
    aids = {a for m in poly for a in m}
    out: set = set()
    for a in aids:
        out |= _atom_free(a)
    return frozenset(out)


def free_symbols(e: Expr) -> frozenset:
    """Names of the symbols ``e`` depends on (after canonicalization)."""
    return _poly_free(_coerce(e).poly())


def is_polynomial(e: Expr) -> bool:
    return all(isinstance(_atoms[a], Sym) for m in _coerce(e).poly() for a in m)


def constant_term(e: Expr) -> Number:
    return _coerce(e).poly().get((), 0)


@lru_cache(maxsize=None)
def _datom(aid: int, name: str):
    """Derivative of an atom w.r.t. a symbol, as a frozen polynomial."""
    atom = _atoms[aid]
    if isinstance(atom, Sym):
        return {(): 1} if atom.name == name else {}
    if name not in _atom_free(aid):
        return {}
    arg = atom.arg
    darg = _dpoly(arg.poly(), name)
    if atom.name == "sin":
        outer = Func("cos", arg).poly()
    elif atom.name == "cos":
        outer = _pscale(Func("sin", arg).poly(), -1)
    else:
        outer = atom.poly()
    return _pmul(outer, darg)


def _dpoly(poly: dict, name: str) -> dict:
    out: dict = {}
    for m, c in poly.items():
        if not m:
            continue
        prev = None
        for i, a in enumerate(m):
            if a == prev:
                continue
            prev = a
            da = _datom(a, name)
            if not da:
                continue
            k = m.count(a)
            rest = m[:i] + m[i + 1:]
            _iadd(out, _pmul(da, {rest: c * k}))
    return out


def differentiate(e: Expr, s) -> Expr:
    """Exact partial derivative of ``e`` with respect to the symbol ``s``."""
    return _from_poly(_dpoly(_coerce(e).poly(), _sym_name(s)))


def is_zero(e: Expr) -> ZeroTest:
    """Tri-state zero test: exact on polynomials, conservative otherwise."""
    p = _coerce(e).poly()
    if not p:
        return ZeroTest.ZERO
    if all(isinstance(_atoms[a], Sym) for m in p for a in m):
        return ZeroTest.NONZERO
    return ZeroTest.UNKNOWN


_MATH = {"sin": math.sin, "cos": math.cos, "exp": math.exp}
_NUMPY = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


def _eval_tree(e: Expr, point: Mapping, fns: dict, cache: dict):
    if e._canon and not isinstance(e, (Sym, Const)):
        return _eval_poly(e.poly(), point, fns, cache)
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Sym):
        try:
            return point[e.name]
        except KeyError:
            raise UnboundSymbol(e.name) from None
    if isinstance(e, Add):
        total = 0.0
        for t in e.terms:
            total = total + _eval_tree(t, point, fns, cache)
        return total
    if isinstance(e, Mul):
        prod = 1.0
        for f in e.factors:
            prod = prod * _eval_tree(f, point, fns, cache)
        return prod
    if isinstance(e, Pow):
        return _eval_tree(e.base, point, fns, cache) ** e.exp
    if isinstance(e, Func):
        return fns[e.name](_eval_tree(e.arg, point, fns, cache))
    raise TypeError(type(e).__name__)


def _eval_atom(aid: int, point: Mapping, fns: dict, cache: dict):
    v = cache.get(aid)
    if v is None:
        atom = _atoms[aid]
        if isinstance(atom, Sym):
            try:
                v = point[atom.name]
            except KeyError:
                raise UnboundSymbol(atom.name) from None
        else:
            v = fns[atom.name](_eval_poly(atom.arg.poly(), point, fns, cache))
        cache[aid] = v
    return v


def _eval_poly(poly: dict, point: Mapping, fns: dict, cache: dict):
    total = 0.0
    for m, c in poly.items():
        term = float(c)
        for a in m:
            term = term * _eval_atom(a, point, fns, cache)
        total = total + term
    return total


def evaluate(e: Expr, point: Mapping[str, float]) -> float:
    """IEEE double value of ``e`` at ``point`` (a name -> float map)."""
    return float(_eval_tree(_coerce(e), point, _MATH, {}))


def evaluate_array(e: Expr, point: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorized evaluation; values in ``point`` may be numpy arrays."""
    v = _eval_tree(_coerce(e), point, _NUMPY, {})
    shape = np.broadcast_shapes(*(np.shape(x) for x in point.values())) if point else ()
    return np.broadcast_to(np.asarray(v, dtype=float), shape)


def _poly_terms_abs(poly: dict, point: Mapping) -> float:
    """Sum of absolute term values, used as a scale for numeric probing."""
    cache: dict = {}
    return sum(abs(_eval_poly({m: c}, point, _MATH, cache)) for m, c in poly.items())


def substitute(e: Expr, bindings: Mapping) -> Expr:
    """Simultaneously replace symbols by expressions, then normalize."""
    e = _coerce(e)
    if not bindings:
        return normalize(e)
    table = {_sym_name(k): _coerce(v).poly() for k, v in bindings.items()}
    return _from_poly(_subs_poly(e.poly(), table, {}))


def _subs_atom(aid: int, table: dict, memo: dict):
    r = memo.get(aid)
    if r is not None:
        return r
    atom = _atoms[aid]
    if isinstance(atom, Sym):
        r = table.get(atom.name)
        if r is None:
            r = atom.poly()
    elif _atom_free(aid).isdisjoint(table):
        r = atom.poly()
    else:
        arg = _from_poly(_subs_poly(atom.arg.poly(), table, memo))
        r = Func(atom.name, arg).poly()
    memo[aid] = r
    return r


def _subs_poly(poly: dict, table: dict, memo: dict) -> dict:
    if _poly_free(poly).isdisjoint(table):
        return poly
    out: dict = {}
    for m, c in poly.items():
        term = {(): c}
        i = 0
        while i < len(m):
            j = i
            while j < len(m) and m[j] == m[i]:
                j += 1
            term = _pmul(term, _ppow(_subs_atom(m[i], table, memo), j - i))
            i = j
        _iadd(out, term)
    return out


def integrate_poly(e: Expr, s) -> Expr:
    """Antiderivative in ``s`` with zero constant term.

    Raises :class:`NotPolynomial` when ``s`` occurs inside a function.
    """
    name = _sym_name(s)
    s_id = Sym(name).aid
    out: dict = {}
    for m, c in _coerce(e).poly().items():
        for a in set(m):
            if a != s_id and name in _atom_free(a):
                raise NotPolynomial(f"{name} occurs inside {_atoms[a]}")
        k = m.count(s_id)
        nm = tuple(sorted(m + (s_id,)))
        _iadd(out, {nm: Fraction(c) / (k + 1)})
    return _from_poly(out)


def lead_monomials(e: Expr) -> Iterable:
    """Monomials of the canonical form, as (coefficient, atom tuple) pairs."""
    for m, c in _coerce(e).poly().items():
        yield c, tuple(_atoms[a] for a in m)
