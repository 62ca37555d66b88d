"""Command-line front end.

Exit status: 0 when every requested check passes, 1 when a check fails
(including a generator or invariant that does not verify), 2 on input errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .catalog import SECTION_ORDER, emit_report, run_catalog
from .determining import (
    criterion_residual, extract_system, general_field, pde_from_problem, solve_ansatz_full,
    structural_reduce, verify_generator,
)
from .errors import (
    ExprSyntaxError, MalformedDocument, NotSelfSimilar, RankDeficientSampling, SchemaError,
    SymbolicError, UnsupportedInvariantForm,
)
from .jet import VectorField
from .lang import load_problem, parse, render
from .reduction import InvariantPair, reduce, reduction_soundness, verify_invariants

DEFAULT_SEED = 42
DEFAULT_TOL = 1e-8


class InputError(Exception):
    pass


def _expr(text, prob, what):
    try:
        return parse(text, declared=set(prob.params), functions=prob.functions)
    except ExprSyntaxError as exc:
        raise InputError(f"--{what}: {exc}") from None


def _field(args, prob) -> VectorField:
    return VectorField(_expr(args.xi, prob, "xi"), _expr(args.eta, prob, "eta"),
                       _expr(args.phi, prob, "phi"))


def _emit(doc: dict, lines: list, args) -> str:
    if args.format == "machine":
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    return "\n".join(lines) + "\n"


def cmd_determine(args, prob):
    pde = pde_from_problem(prob)
    res = criterion_residual(pde, general_field(), args.mode)
    system = extract_system(res, args.mode)
    rows = [{"monomial": render(m), "coefficient": render(c)} for m, c in system.rows]
    lines = [f"determining system for {prob.name} ({args.mode} mode): {len(rows)} rows"]
    lines += [f"  [{r['monomial']}]  {r['coefficient']} = 0" for r in rows]
    doc = {"problem": prob.name, "mode": args.mode, "multiplier": render(system.multiplier),
           "rows": rows}
    if "f" in pde.assumptions and args.mode == "free":
        red = structural_reduce(system, pde.assumptions)
        doc["facts"] = sorted(f.label for f in red.facts)
        doc["reduced"] = [render(c) for _, c in red.equations]
        lines.append("facts: " + ", ".join(f"{f} = 0" for f in doc["facts"]))
        lines += [f"  {e} = 0" for e in doc["reduced"]]
    return 0, _emit(doc, lines, args)


def cmd_verify_generator(args, prob):
    pde = pde_from_problem(prob)
    X = _field(args, prob)
    rep = verify_generator(pde, X, args.tol, args.seed)
    doc = {"problem": prob.name, "xi": render(X.xi), "eta": render(X.eta), "phi": render(X.phi),
           "passed": rep.passed, "symbolic_zero": rep.symbolic_zero,
           "max_scaled": f"{rep.max_scaled:.3e}", "points": rep.points, "seed": rep.seed,
           "tol": f"{rep.tol:.3e}", "residual": render(rep.residual),
           "witness": rep.witness}
    lines = [f"generator xi={doc['xi']}, eta={doc['eta']}, phi={doc['phi']}",
             f"verdict: {'verified' if rep.passed else 'not verified'}",
             f"max scaled residual: {doc['max_scaled']} over {rep.points} points (seed {rep.seed})",
             f"residual: {doc['residual']}"]
    if rep.witness:
        lines.append("witness: " + ", ".join(f"{k}={v:.6g}" for k, v in sorted(rep.witness.items())))
    return (0 if rep.passed else 1), _emit(doc, lines, args)


def cmd_solve_ansatz(args, prob):
    if not prob.bases:
        raise InputError("the problem file declares no bases")
    pde = pde_from_problem(prob)
    try:
        res = solve_ansatz_full(pde, prob.bases, args.tol, args.seed)
    except RankDeficientSampling as exc:
        doc = {"problem": prob.name, "error": str(exc)}
        return 1, _emit(doc, [f"sampling failed: {exc}"], args)
    fields = [{"xi": render(X.xi), "eta": render(X.eta), "phi": render(X.phi)} for X in res.fields]
    doc = {"problem": prob.name, "unknowns": res.unknowns, "dimension": len(fields),
           "fields": fields, "seed": res.seed}
    lines = [f"symmetries in the span of the bases: {len(fields)} of {res.unknowns} unknowns"]
    lines += [f"  xi={f['xi']}, eta={f['eta']}, phi={f['phi']}" for f in fields]
    ok = all(r.passed for r in res.reports)
    return (0 if ok else 1), _emit(doc, lines, args)


def _pair(args, prob) -> InvariantPair:
    try:
        return InvariantPair.of(_expr(args.r, prob, "r"), _expr(args.w, prob, "w"), seed=args.seed)
    except UnsupportedInvariantForm as exc:
        raise InputError(str(exc)) from None


def cmd_verify_invariants(args, prob):
    X = _field(args, prob)
    inv = _pair(args, prob)
    rep = verify_invariants(X, inv, args.tol, args.seed, params=tuple(prob.params))
    doc = {"problem": prob.name, "r": render(inv.r), "w": render(inv.w),
           "X(r)": render(rep.x_of_r), "X(w)": render(rep.x_of_w), "exact": rep.exact,
           "rank2": rep.rank2, "passed": rep.passed, "max_scaled": f"{rep.max_scaled:.3e}"}
    lines = [f"invariants r={doc['r']}, w={doc['w']}",
             f"X(r) = {doc['X(r)']}", f"X(w) = {doc['X(w)']}",
             f"jacobian rank 2: {'yes' if rep.rank2 else 'no'}",
             f"verdict: {'verified' if rep.passed else 'not verified'}"]
    return (0 if rep.passed else 1), _emit(doc, lines, args)


def cmd_reduce(args, prob):
    pde = pde_from_problem(prob)
    inv = _pair(args, prob)
    try:
        ode = reduce(pde, inv, seed=args.seed)
    except NotSelfSimilar as exc:
        doc = {"problem": prob.name, "error": "not self-similar", "detail": str(exc.args[0])}
        return 1, _emit(doc, [f"not self-similar: {exc.args[0]}"], args)
    sound, err = reduction_soundness(ode, seed=args.seed)
    doc = {"problem": prob.name, "r": render(inv.r), "w": render(inv.w),
           "ode": render(ode.R, True), "order": ode.order, "multiplier": render(ode.multiplier),
           "status": ode.status, "ansatz": {k: render(v) for k, v in sorted(ode.ansatz.items())},
           "soundness": f"{err:.3e}"}
    lines = [f"reduced equation ({ode.status}): {doc['ode']} = 0",
             f"multiplier: {doc['multiplier']}"]
    lines += [f"  {k} = {v}" for k, v in doc["ansatz"].items()]
    return (0 if sound else 1), _emit(doc, lines, args)


def cmd_catalog(args, _prob=None):
    rep = run_catalog(args.case or None, args.seed, args.tol)
    return rep.exit_code, emit_report(rep, args.format)


COMMANDS = {
    "determine": cmd_determine,
    "verify-generator": cmd_verify_generator,
    "solve-ansatz": cmd_solve_ansatz,
    "verify-invariants": cmd_verify_invariants,
    "reduce": cmd_reduce,
    "catalog": cmd_catalog,
}


def _common(suppress: bool) -> argparse.ArgumentParser:
    """Global flags; subcommands repeat them without defaults so a value given
    before the subcommand is not overwritten."""
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=d(DEFAULT_SEED),
                        help=f"random seed for the numeric oracles (default {DEFAULT_SEED})")
    common.add_argument("--tol", type=float, default=d(DEFAULT_TOL),
                        help=f"scaled-residual tolerance (default {DEFAULT_TOL:g})")
    common.add_argument("--format", choices=("human", "machine"), default=d("human"))
    common.add_argument("--out", metavar="PATH", default=d(None),
                        help="write the report here instead of stdout")
    return common


def build_parser() -> argparse.ArgumentParser:
    top, common = _common(False), _common(True)
    p = argparse.ArgumentParser(prog="grdcsym", parents=[top],
                                description="Lie point symmetries of reaction-diffusion-convection equations")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("determine", parents=[common], help="print the determining system")
    d.add_argument("file")
    d.add_argument("--mode", choices=("free", "evolution"), default="evolution")

    g = sub.add_parser("verify-generator", parents=[common], help="check a candidate generator")
    g.add_argument("file")
    for c in ("xi", "eta", "phi"):
        g.add_argument(f"--{c}", required=True)

    s = sub.add_parser("solve-ansatz", parents=[common], help="symmetries in the span of the file's bases")
    s.add_argument("file")

    v = sub.add_parser("verify-invariants", parents=[common], help="check invariants of a generator")
    v.add_argument("file")
    for c in ("xi", "eta", "phi", "r", "w"):
        v.add_argument(f"--{c}", required=True)

    r = sub.add_parser("reduce", parents=[common], help="reduce the equation to an ODE")
    r.add_argument("file")
    r.add_argument("--r", required=True)
    r.add_argument("--w", required=True)

    c = sub.add_parser("catalog", parents=[common], help="run the built-in reference cases")
    c.add_argument("--case", action="append", choices=SECTION_ORDER + ("all",),
                   help="section to run; repeatable (default: all)")
    return p


EXPRESSION_FLAGS = ("--xi", "--eta", "--phi", "--r", "--w")


def _glue_negative_values(argv):
    """Turn ``--eta -t`` into ``--eta=-t`` so argparse does not read -t as a flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in EXPRESSION_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        prob = load_problem(args.file) if hasattr(args, "file") else None
        code, text = COMMANDS[args.command](args, prob)
    except (InputError, SchemaError, ExprSyntaxError, MalformedDocument, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SymbolicError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
