"""TOML system definitions.

A file declares the chart, one of ``[theta]``, ``[omega]`` or
``[coordinate_data]``, and optional named objects::

    [chart]
    base = ["t"]
    fiber = ["q", "p"]

    [theta]
    terms = [{ coeff = "p", basis = ["q"] }, { coeff = "-(p^2 + q^2)/2", basis = ["t"] }]

    [sections.exact]
    q = "cos(t)"
    p = "-sin(t)"

    [vector_fields.time]
    t = "1"

    [ansatze.hamiltonian]        # X^j_mu, keyed fiber -> base
    q = { t = "p" }
    p = { t = "-q" }

    [conserved.energy]
    terms = [{ coeff = "-(p^2 + q^2)/2", basis = [] }]

    [maps.rotation]
    targets = { q = "3/5*q - 4/5*p", p = "4/5*q + 3/5*p" }
    inverse = { q = "3/5*q + 4/5*p", p = "-4/5*q + 3/5*p" }

Forms are always coefficient/basis records; ``^`` in expressions is a power.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from importlib import resources

import tomli

from .exterior import (
    BundleChart,
    DecomposableAnsatz,
    DiffForm,
    FiberedMap,
    MultiVector,
    Section,
    exterior_derivative,
)
from .expr import Expr, as_expr, free_symbols
from .parser import ParseError
from .systems import (
    NotClosed,
    PremultisymplecticSystem,
    VerticalConditionViolated,
    system_from_coordinate_data,
    system_from_omega,
    system_from_theta,
)

__all__ = ["SystemFileError", "SystemFile", "load_system_file", "parse_system", "corpus_names", "corpus_path"]


class SystemFileError(ValueError):
    """Input error located by a dotted path inside the document."""

    def __init__(self, where: str, message: str, offset: int | None = None, kind: str = "ValidationError"):
        self.where = where
        self.kind = kind
        self.offset = offset
        self.message = message
        loc = where if offset is None else f"{where} (offset {offset})"
        super().__init__(f"{loc}: {message}")

    def as_dict(self) -> dict:
        out = {"kind": self.kind, "where": self.where, "message": self.message}
        if self.offset is not None:
            out["offset"] = self.offset
        return out


@dataclass
class SystemFile:
    name: str
    chart: BundleChart
    system: PremultisymplecticSystem
    source: str  # "theta", "omega" or "coordinate_data"
    digest: str = ""
    notes: list = field(default_factory=list)
    sections: dict = field(default_factory=dict)
    vector_fields: dict = field(default_factory=dict)
    ansatze: dict = field(default_factory=dict)
    conserved: dict = field(default_factory=dict)
    maps: dict = field(default_factory=dict)


def _expr(text, where: str) -> Expr:
    if isinstance(text, bool) or not isinstance(text, (str, int, float)):
        raise SystemFileError(where, f"expected an expression string, got {type(text).__name__}")
    try:
        return as_expr(str(text))
    except ParseError as exc:
        raise SystemFileError(where, str(exc), exc.position, "SyntaxError") from None
    except ValueError as exc:
        raise SystemFileError(where, str(exc)) from None


def _table(doc, key: str, where: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise SystemFileError(f"{where}{key}", "expected a table")
    return value


def _names(value, where: str) -> tuple:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SystemFileError(where, "expected a list of coordinate names")
    return tuple(value)


def _form(chart: BundleChart, entry, where: str, degree: int | None = None) -> DiffForm:
    if not isinstance(entry, dict) or not isinstance(entry.get("terms", []), list):
        raise SystemFileError(where, "expected a table with a 'terms' list")
    terms = []
    for k, rec in enumerate(entry.get("terms", [])):
        here = f"{where}.terms[{k}]"
        if not isinstance(rec, dict) or "coeff" not in rec or "basis" not in rec:
            raise SystemFileError(here, "each term needs 'coeff' and 'basis'")
        basis = _names(rec["basis"], f"{here}.basis")
        unknown = [b for b in basis if b not in chart.index]
        if unknown:
            raise SystemFileError(f"{here}.basis", f"undeclared coordinates {unknown}")
        if len(set(basis)) != len(basis):
            raise SystemFileError(f"{here}.basis", "repeated coordinate in basis")
        if degree is None:
            degree = len(basis)
        elif len(basis) != degree:
            raise SystemFileError(f"{here}.basis", f"expected {degree} basis entries")
        terms.append((_expr(rec["coeff"], f"{here}.coeff"), basis))
    return DiffForm.from_terms(chart, degree or 0, terms)


def _check_symbols(chart: BundleChart, e: Expr, where: str, allowed=None) -> Expr:
    allowed = set(chart.coords) if allowed is None else set(allowed)
    extra = sorted(free_symbols(e) - allowed)
    if extra:
        raise SystemFileError(where, f"undeclared symbols {extra}")
    return e


def _build_system(chart: BundleChart, doc: dict, name: str):
    present = [k for k in ("theta", "omega", "coordinate_data") if k in doc]
    if len(present) != 1:
        raise SystemFileError("<root>", "exactly one of [theta], [omega], [coordinate_data] is required")
    source = present[0]
    notes = []
    if source == "coordinate_data":
        entry = _table(doc, "coordinate_data", "")
        F = {}
        for j, row in _table(entry, "F", "coordinate_data.").items():
            if j not in chart.fiber or not isinstance(row, dict):
                raise SystemFileError(f"coordinate_data.F.{j}", "expected a fiber coordinate mapped to a base table")
            for mu, text in row.items():
                if mu not in chart.base:
                    raise SystemFileError(f"coordinate_data.F.{j}.{mu}", "unknown base coordinate")
                where = f"coordinate_data.F.{j}.{mu}"
                F[(j, mu)] = _check_symbols(chart, _expr(text, where), where)
        E = _check_symbols(chart, _expr(entry.get("E", "0"), "coordinate_data.E"), "coordinate_data.E")
        return system_from_coordinate_data(chart, F, E, name), source, notes
    form = _form(chart, doc[source], source, chart.m if source == "theta" else chart.m + 1)
    for key, c in form.coeffs.items():
        _check_symbols(chart, c, source)
    if source == "theta":
        try:
            return system_from_theta(chart, form, name), source, notes
        except VerticalConditionViolated as exc:
            notes.append(f"VerticalConditionViolated: {exc}")
            omega = -exterior_derivative(form)
            return PremultisymplecticSystem(chart, omega, form, None, name), source, notes
    try:
        return system_from_omega(chart, form, name), source, notes
    except NotClosed as exc:
        notes.append(f"NotClosed: {exc}")
        return PremultisymplecticSystem(chart, form, None, None, name), source, notes


def parse_system(text: str, name: str = "") -> SystemFile:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise SystemFileError("<toml>", str(exc), getattr(exc, "pos", None), "SyntaxError") from None
    name = str(doc.get("name", name))
    chart_table = _table(doc, "chart", "")
    try:
        chart = BundleChart(
            _names(chart_table.get("base"), "chart.base"), _names(chart_table.get("fiber"), "chart.fiber")
        )
    except SystemFileError:
        raise
    except ValueError as exc:
        raise SystemFileError("chart", str(exc)) from None
    system, source, notes = _build_system(chart, doc, name)
    sf = SystemFile(name, chart, system, source, notes=notes)

    for sec, entry in _table(doc, "sections", "").items():
        where = f"sections.{sec}"
        if not isinstance(entry, dict):
            raise SystemFileError(where, "expected a table")
        funcs = {j: _expr(v, f"{where}.{j}") for j, v in entry.items()}
        try:
            sf.sections[sec] = Section(chart, funcs)
        except ValueError as exc:
            raise SystemFileError(where, str(exc)) from None

    for vf, entry in _table(doc, "vector_fields", "").items():
        where = f"vector_fields.{vf}"
        if not isinstance(entry, dict):
            raise SystemFileError(where, "expected a table")
        terms = []
        for z, v in entry.items():
            if z not in chart.index:
                raise SystemFileError(f"{where}.{z}", "undeclared coordinate")
            terms.append((_check_symbols(chart, _expr(v, f"{where}.{z}"), f"{where}.{z}"), [z]))
        sf.vector_fields[vf] = MultiVector.from_terms(chart, 1, terms)

    for an, entry in _table(doc, "ansatze", "").items():
        where = f"ansatze.{an}"
        if not isinstance(entry, dict) or not all(isinstance(r, dict) for r in entry.values()):
            raise SystemFileError(where, "expected fiber -> {base: expr} tables")
        rows = {
            j: {mu: _check_symbols(chart, _expr(v, f"{where}.{j}.{mu}"), f"{where}.{j}.{mu}") for mu, v in row.items()}
            for j, row in entry.items()
        }
        try:
            sf.ansatze[an] = DecomposableAnsatz(chart, rows)
        except ValueError as exc:
            raise SystemFileError(where, str(exc)) from None

    for cq, entry in _table(doc, "conserved", "").items():
        where = f"conserved.{cq}"
        xi = _form(chart, entry, where, chart.m - 1)
        for c in xi.coeffs.values():
            _check_symbols(chart, c, where)
        sf.conserved[cq] = xi

    for mp, entry in _table(doc, "maps", "").items():
        where = f"maps.{mp}"
        if not isinstance(entry, dict) or not isinstance(entry.get("targets"), dict):
            raise SystemFileError(where, "expected a table with 'targets'")
        targets = {z: _expr(v, f"{where}.targets.{z}") for z, v in entry["targets"].items()}
        inverse = entry.get("inverse")
        if inverse is not None:
            if not isinstance(inverse, dict):
                raise SystemFileError(f"{where}.inverse", "expected a table")
            inverse = {z: _expr(v, f"{where}.inverse.{z}") for z, v in inverse.items()}
        try:
            sf.maps[mp] = FiberedMap(chart, targets, inverse)
        except ValueError as exc:
            raise SystemFileError(where, str(exc)) from None
    return sf


def corpus_names() -> list:
    folder = resources.files("multisymp") / "corpus"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".toml"))


def corpus_path(name: str):
    return resources.files("multisymp") / "corpus" / f"{name}.toml"


def load_system_file(path: str) -> SystemFile:
    """Load a system file; a bare corpus name (e.g. ``oscillator``) also works."""
    if not os.path.exists(path) and path in corpus_names():
        data = corpus_path(path).read_bytes()
        label = f"{path}.toml"
    else:
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise SystemFileError("<file>", f"cannot read {path}: {exc.strerror}") from None
        label = os.path.basename(path)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SystemFileError("<file>", f"not UTF-8: {exc}") from None
    sf = parse_system(text, label.rsplit(".", 1)[0])
    sf.digest = hashlib.sha256(data).hexdigest()
    return sf
