"""Command-line front end: ``multisymp <command> FILE [options]``.

Reports are a single JSON document (keys sorted) on stdout.  Exit status is
0 when every check passes, 1 when any check fails and 2 on input errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

from . import __version__
from .expr import as_expr, evaluate, substitute
from .exterior import FiberedMap, NoInverse
from .identities import run_identity_suite
from .parser import ParseError
from .symmetry import (
    CheckRecord,
    HomotopyNotPolynomial,
    NotClosed,
    OrderMismatch,
    cartan_check,
    check_conserved,
    current_on_section,
    finite_cartan_check,
    gauge_check,
    generalized_noether_current,
    higher_cartan_order,
    infinitesimal_symmetry_check,
    noether_current,
    stokes_flux_check,
    transform_conserved,
)
from .sysfile import SystemFileError, load_system_file
from .systems import (
    ALL_SOLUTIONS,
    MissingTheta,
    NotInNormalForm,
    action_evaluate,
    euler_equations,
    nondegeneracy_probe,
    random_points,
    section_residual_sect1,
    section_residual_sect2,
    sect_sign,
    solve_ansatz_at_point,
    structural_checks,
)
from .verdict import Verdict, classify, combine, probe_tolerance

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
NONDEGENERACY_POINTS = 10
FLUX_TOLERANCE = 1e-8


class InputError(Exception):
    def __init__(self, kind: str, message: str, extra: dict | None = None):
        self.kind = kind
        self.message = message
        self.extra = extra or {}
        super().__init__(message)


# ---------------------------------------------------------------------------
# Report helpers.


def _record(name: str, verdict: Verdict, residuals=(), **extra) -> dict:
    out = {"name": name, "verdict": verdict.value, "residuals": list(residuals)}
    out.update(extra)
    return out


def _entries(labels, exprs, verdicts) -> list:
    return [
        {"label": lab, "residual": str(e), "verdict": v.value} for lab, e, v in zip(labels, exprs, verdicts)
    ]


def _fer_record(name: str, fer) -> dict:
    return _record(name, fer.verdict, _entries(fer.labels, fer.exprs, fer.verdicts))


def _basis_label(basis) -> str:
    return "∧".join(f"d{z}" for z in basis) or "1"


def _check_record(rec: CheckRecord, name: str | None = None) -> dict:
    form = rec.residual
    if hasattr(form, "records"):
        res = [{"label": _basis_label(r["basis"]), "residual": r["coeff"]} for r in form.records()]
    else:
        res = [] if rec.verdict is Verdict.SYMBOLIC_ZERO else [{"label": rec.name, "residual": str(form)}]
    return _record(name or rec.name, rec.verdict, res)


def _members(prefix: str, members, names, kernel: bool = True) -> list:
    out = []
    for mc, nm in zip(members, names):
        if kernel:
            out.append(_record(f"witness[{nm}] in kernel", mc.kernel))
        out.append(_check_record(mc.record, f"{prefix}[{nm}]"))
    return out


def _lookup(table: dict, name: str, what: str):
    if name not in table:
        known = ", ".join(sorted(table)) or "none"
        raise InputError("UnknownName", f"no {what} named {name!r} (known: {known})")
    return table[name]


def _family(sf, names) -> list:
    return [_lookup(sf.ansatze, n, "ansatz") for n in names or ()]


def _form_json(form) -> list:
    return form.records()


def _base_report(command: str, args, sf=None) -> dict:
    rep = {"tool": "multisymp", "version": __version__, "command": command, "seed": args.seed}
    rep["tolerance"] = args.tolerance
    if sf is not None:
        rep["input"] = {"name": sf.name, "sha256": sf.digest, "source": sf.source}
        if sf.notes:
            rep["notes"] = list(sf.notes)
    return rep


def _bound(text: str) -> float:
    try:
        return float(evaluate(as_expr(text), {"pi": math.pi}))
    except (ParseError, KeyError, ValueError) as exc:
        raise InputError("BadBox", f"cannot read interval bound {text!r}: {exc}") from None


def _box(specs, m: int) -> list:
    if not specs or len(specs) != m:
        raise InputError("BadBox", f"need {m} --box intervals of the form lo:hi")
    out = []
    for s in specs:
        lo, sep, hi = s.partition(":")
        if not sep:
            raise InputError("BadBox", f"interval {s!r} is not of the form lo:hi")
        out.append((_bound(lo), _bound(hi)))
    return out


def _point(text: str, chart) -> dict:
    pt = {}
    for part in text.split(","):
        name, sep, val = part.partition("=")
        name = name.strip()
        if not sep or name not in chart.index:
            raise InputError("BadPoint", f"cannot read point component {part!r}")
        pt[name] = _bound(val)
    missing = [z for z in chart.coords if z not in pt]
    if missing:
        raise InputError("BadPoint", f"point misses coordinates {missing}")
    return pt


# ---------------------------------------------------------------------------
# Commands.


def cmd_check(args) -> dict:
    sf = load_system_file(args.file)
    S = sf.system
    rep = _base_report("check", args, sf)
    rep["omega"] = _form_json(S.omega_form)
    records = []
    for name, verdict, detail in structural_checks(S, args.seed):
        res = [] if verdict.passed else [{"label": name, "residual": detail}]
        records.append(_record(name, verdict, res))
    if S.data is not None:
        rep["coordinate_data"] = {
            "E": str(S.data.E),
            "F": {j: {mu: str(S.data.F[(j, mu)]) for mu in sf.chart.base} for j in sf.chart.fiber},
        }
    nd = nondegeneracy_probe(S, random_points(sf.chart, NONDEGENERACY_POINTS, args.seed))
    rep["nondegeneracy"] = {"classification": nd.label, "kernel_dims": nd.kernel_dims, "ranks": nd.ranks}
    rep["records"] = records
    return rep


def cmd_field_equations(args) -> dict:
    sf = load_system_file(args.file)
    S = sf.system
    rep = _base_report("field-equations", args, sf)
    records = []
    equations = None
    try:
        equations = euler_equations(S)
        rep["equations"] = [{"label": lab, "expr": str(e)} for lab, e in equations]
    except NotInNormalForm as exc:
        rep["equations_note"] = f"NotInNormalForm: {exc}"
    if args.section:
        psi = _lookup(sf.sections, args.section, "section")
        s1 = section_residual_sect1(S, psi, args.seed)
        s2 = section_residual_sect2(S, psi, args.seed)
        records.append(_fer_record("sect1", s1))
        records.append(_fer_record("sect2", s2))
        sign = sect_sign(S.m)
        diffs = [a - b * sign for a, b in zip(s1.exprs, s2.exprs)]
        vs = [classify(d, args.seed) for d in diffs]
        records.append(_record("sect1_matches_sect2", combine(vs), _entries(sf.chart.coords, diffs, vs)))
        if equations is not None:
            eq = dict(equations)
            jets, binds = psi.jet_bindings(), psi.bindings()
            labels, diffs = [], []
            for z, e in zip(sf.chart.coords, s2.exprs):
                lab = f"horizontal[{z}]" if z in sf.chart.base else f"vertical[{z}]"
                labels.append(lab)
                diffs.append(substitute(substitute(eq[lab], jets), binds) - e)
            vs = [classify(d, args.seed) for d in diffs]
            records.append(_record("equations_match_sect2", combine(vs), _entries(labels, diffs, vs)))
    if args.solve_at:
        pt = _point(args.solve_at, sf.chart)
        sols = solve_ansatz_at_point(S, pt, seed=args.seed)
        if sols is ALL_SOLUTIONS:
            rep["solutions"] = "all"
        else:
            rep["solutions"] = [{f"{j},{mu}": v for (j, mu), v in s.items()} for s in sols]
        rep["solver"] = {"point": pt, "restarts": 32, "seed": args.seed}
    rep["records"] = records
    return rep


def cmd_noether(args) -> dict:
    sf = load_system_file(args.file)
    S = sf.system
    Y = _lookup(sf.vector_fields, args.symmetry, "vector field")
    family = _family(sf, args.verify_with)
    rep = _base_report("noether", args, sf)
    records = []
    co = higher_cartan_order(S, Y, args.order_max, family, args.seed)
    rep["cartan_order"] = co.label
    if co.order is None:
        last = co.powers[-1]
        res = [{"label": _basis_label(r["basis"]), "residual": r["coeff"]} for r in last.records()]
        records.append(_record("cartan_order", Verdict.NONZERO, res, detail=co.label))
    else:
        records.append(_record("cartan_order", Verdict.SYMBOLIC_ZERO, detail=co.label))
    records.extend(_members("symmetry", co.symmetry, args.verify_with or ()))
    if co.order is not None:
        try:
            if co.order == 1:
                report = noether_current(S, Y, args.seed)
            else:
                report = generalized_noether_current(S, Y, co.order, args.seed)
        except (HomotopyNotPolynomial, NotClosed, OrderMismatch) as exc:
            records.append(_record("noether_current", Verdict.ERROR, [{"label": type(exc).__name__, "residual": str(exc)}]))
        else:
            rep["xi"] = _form_json(report.xi)
            rep["xi_text"] = str(report.xi)
            rep["kind"] = report.kind
            rep["gauge"] = report.gauge
            if report.zeta is not None:
                rep["zeta"] = _form_json(report.zeta)
            records.extend(_check_record(r) for r in report.residuals)
            members = check_conserved(S, report.xi, family, args.seed)
            records.extend(_members("conserved", members, args.verify_with or (), kernel=False))
    rep["records"] = records
    return rep


def cmd_symmetry(args) -> dict:
    sf = load_system_file(args.file)
    S = sf.system
    rep = _base_report("symmetry", args, sf)
    records = []
    if bool(args.field) == bool(args.map):
        raise InputError("Usage", "give exactly one of --field or --map")
    if args.field:
        Y = _lookup(sf.vector_fields, args.field, "vector field")
        family = _family(sf, args.verify_with)
        cartan = cartan_check(S, Y, args.seed)
        rep["kind"] = cartan.kind
        records.append(_check_record(CheckRecord.of("L(Y)Omega", cartan.lie_omega, args.seed), "cartan"))
        rep["gauge"] = gauge_check(S, Y, args.seed).passed
        members = infinitesimal_symmetry_check(S, Y, family, args.seed)
        records.extend(_members("symmetry", members, args.verify_with or ()))
    else:
        phi: FiberedMap = _lookup(sf.maps, args.map, "map")
        rep["fibered"] = phi.fibered
        records.append(_check_record(finite_cartan_check(S, phi, args.seed), "finite_cartan"))
        if phi.inverse is not None:
            residuals = phi.inverse_residuals()
            vs = [classify(r, args.seed) for r in residuals]
            records.append(_record("inverse", combine(vs), _entries(sf.chart.coords, residuals, vs)))
    rep["records"] = records
    return rep


def cmd_conserved(args) -> dict:
    sf = load_system_file(args.file)
    S = sf.system
    xi = _lookup(sf.conserved, args.quantity, "conserved quantity")
    rep = _base_report("conserved", args, sf)
    provenance = "user-given"
    if args.transform_field:
        xi = transform_conserved(xi, _lookup(sf.vector_fields, args.transform_field, "vector field")).xi
        provenance = "transformed"
    elif args.transform_map:
        xi = transform_conserved(xi, _lookup(sf.maps, args.transform_map, "map")).xi
        provenance = "transformed"
    rep["xi"] = _form_json(xi)
    rep["provenance"] = provenance
    family = _family(sf, args.verify_with)
    records = _members("conserved", check_conserved(S, xi, family, args.seed), args.verify_with or ())
    if args.section:
        psi = _lookup(sf.sections, args.section, "section")
        flux = current_on_section(xi, psi)
        rep["flux"] = {mu: str(c) for mu, c in flux.flux.items()}
        records.append(_check_record(CheckRecord.of("div X", flux.divergence, args.seed), "divergence"))
        if args.box:
            value = stokes_flux_check(xi, psi, _box(args.box, sf.chart.m), args.points)
            rep["boundary_flux"] = value
            v = Verdict.NUMERIC_ZERO if abs(value) < FLUX_TOLERANCE else Verdict.NONZERO
            records.append(_record("boundary_flux", v, [] if v.passed else [{"label": "flux", "residual": repr(value)}]))
    rep["records"] = records
    return rep


def cmd_action(args) -> dict:
    sf = load_system_file(args.file)
    psi = _lookup(sf.sections, args.section, "section")
    rep = _base_report("action", args, sf)
    try:
        rep["value"] = action_evaluate(sf.system, psi, _box(args.box, sf.chart.m), args.points)
    except MissingTheta as exc:
        raise InputError("MissingTheta", str(exc)) from None
    rep["points"] = args.points
    rep["records"] = []
    return rep


def cmd_identities(args) -> dict:
    rep = _base_report("identities", args)
    rep["cases"] = args.cases
    records = []
    for res in run_identity_suite(args.seed, args.cases):
        failures = [{"label": f"case {c}", "residual": text} for c, text in res.failures[:5]]
        records.append(_record(res.name, res.verdict, failures, cases=res.cases, failed=len(res.failures)))
    rep["records"] = records
    return rep


COMMANDS = {
    "check": cmd_check,
    "field-equations": cmd_field_equations,
    "noether": cmd_noether,
    "symmetry": cmd_symmetry,
    "conserved": cmd_conserved,
    "action": cmd_action,
    "identities": cmd_identities,
}


# ---------------------------------------------------------------------------
# Entry point.


def _common(sub: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if sub else None
    p.add_argument("--seed", type=int, default=default if sub else 0, help="seed for probes and solvers")
    p.add_argument("--pretty", action="store_true", default=default if sub else False, help="human-readable output")
    p.add_argument("--tolerance", type=float, default=default if sub else 1e-9, help="numeric probe tolerance")
    p.add_argument("--timings", action="store_true", default=default if sub else False, help="add wall-clock timings")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multisymp", parents=[_common(False)], description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)
    common = _common(True)

    p = subs.add_parser("check", parents=[common], help="structural checks on a system")
    p.add_argument("file")

    p = subs.add_parser("field-equations", parents=[common], help="field equations and section residuals")
    p.add_argument("file")
    p.add_argument("--section")
    p.add_argument("--solve-at", metavar="z=v,...", help="solve i(X)Omega = 0 numerically at a point")

    p = subs.add_parser("noether", parents=[common], help="Noether current of a symmetry")
    p.add_argument("file")
    p.add_argument("--symmetry", required=True)
    p.add_argument("--order-max", type=int, default=1)
    p.add_argument("--verify-with", nargs="*", default=[], metavar="ANSATZ")

    p = subs.add_parser("symmetry", parents=[common], help="Cartan and symmetry checks")
    p.add_argument("file")
    p.add_argument("--field")
    p.add_argument("--map")
    p.add_argument("--verify-with", nargs="*", default=[], metavar="ANSATZ")

    p = subs.add_parser("conserved", parents=[common], help="verify a conserved quantity")
    p.add_argument("file")
    p.add_argument("--quantity", required=True)
    p.add_argument("--verify-with", nargs="*", default=[], metavar="ANSATZ")
    p.add_argument("--section")
    p.add_argument("--box", nargs="*", metavar="LO:HI")
    p.add_argument("--points", type=int, default=32)
    p.add_argument("--transform-field")
    p.add_argument("--transform-map")

    p = subs.add_parser("action", parents=[common], help="evaluate the action of a section")
    p.add_argument("file")
    p.add_argument("--section", required=True)
    p.add_argument("--box", nargs="+", required=True, metavar="LO:HI")
    p.add_argument("--points", type=int, default=32)

    p = subs.add_parser("identities", parents=[common], help="randomized exterior-algebra identities")
    p.add_argument("--cases", type=int, default=200)
    return parser


def _status(rep: dict) -> int:
    verdicts = [Verdict(r["verdict"]) for r in rep.get("records", [])]
    return EXIT_OK if combine(verdicts).passed else EXIT_FAIL


def render_pretty(rep: dict) -> str:
    lines = []
    head = f"{rep['command']}"
    if "input" in rep:
        head += f" {rep['input']['name']}"
    lines.append(f"{head}: {rep.get('status', '')}")
    for key in ("kind", "cartan_order", "xi_text", "value", "boundary_flux"):
        if key in rep:
            lines.append(f"  {key}: {rep[key]}")
    if "nondegeneracy" in rep:
        lines.append(f"  nondegeneracy: {rep['nondegeneracy']['classification']}")
    if "equations_note" in rep:
        lines.append(f"  {rep['equations_note']}")
    for eq in rep.get("equations", []):
        lines.append(f"  0 = {eq['expr']}    [{eq['label']}]")
    for r in rep.get("records", []):
        lines.append(f"  {r['verdict']:<14} {r['name']}")
        for res in r["residuals"]:
            if res.get("verdict") in (None, "nonzero", "error"):
                lines.append(f"      {res['label']}: {res['residual']}")
    if "error" in rep:
        lines.append(f"  error: {rep['error']['kind']}: {rep['error']['message']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        with probe_tolerance(args.tolerance):
            rep = COMMANDS[args.command](args)
        code = _status(rep)
    except SystemFileError as exc:
        rep = _base_report(args.command, args)
        rep["error"] = exc.as_dict()
        code = EXIT_INPUT
    except (InputError, NoInverse) as exc:
        rep = _base_report(args.command, args)
        kind = exc.kind if isinstance(exc, InputError) else type(exc).__name__
        rep["error"] = {"kind": kind, "message": str(exc)}
        code = EXIT_INPUT
    rep["status"] = {EXIT_OK: "pass", EXIT_FAIL: "fail", EXIT_INPUT: "input-error"}[code]
    if args.timings:
        rep["timings"] = {"total_seconds": round(time.perf_counter() - start, 6)}
    if args.pretty:
        sys.stdout.write(render_pretty(rep) + "\n")
    else:
        sys.stdout.write(json.dumps(rep, sort_keys=True, indent=2) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
