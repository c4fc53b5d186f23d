"""Command-line interface: analyze, sweep, examples, verify.

Exit status: 0 success, 2 parse/validation error, 3 numerical failure,
4 reference-value mismatch in ``examples``, 5 verify-suite failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone

import numpy as np

from .errors import ArtifactError, ParseError, ValidationError
from .tolerances import tolerances, use_tolerances

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_MISMATCH, EXIT_VERIFY = 0, 2, 3, 4, 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message)


def _dims(text: str):
    try:
        lo, hi = (int(x) for x in text.split(".."))
    except ValueError:
        raise ParseError(f"--dims: expected LO..HI, got {text!r}") from None
    if not 1 <= lo <= hi:
        raise ParseError("--dims: need 1 <= LO <= HI")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="artifact", description=__doc__.splitlines()[0])
    ap.add_argument("--strict", action="store_true", help="treat a non-Hermitian resonance matrix as fatal")
    ap.add_argument("--tol-scale", type=float, default=1.0, help="multiply all default tolerances")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="resonance points and indices of one model")
    a.add_argument("--model", required=True, help="ModelFile JSON path, or builtin:NAME")
    a.add_argument("--lambda", dest="lam", type=float, help="spectral level (defaults to the embedded model's)")
    a.add_argument("--interval", nargs=2, type=float, metavar=("A", "B"))
    a.add_argument("--at", type=float, metavar="R", help="analyse the single real resonance point R")
    a.add_argument("--plot", metavar="PATH", help="write an SVG of the group splitting")
    a.add_argument("--out", metavar="PATH")
    a.add_argument("--no-classify", action="store_true", help="skip the boundary classification")

    s = sub.add_parser("sweep", help="total index against lambda (CSV)")
    s.add_argument("--model", required=True)
    s.add_argument("--lambda-grid", required=True, metavar="A:B:N")
    s.add_argument("--interval", nargs=2, type=float, metavar=("A", "B"), default=(0.0, 1.0))
    s.add_argument("--out", metavar="PATH")
    s.add_argument("--plot", metavar="PATH", help="eigenvalue trajectories (finite models)")

    e = sub.add_parser("examples", help="run a built-in reference example")
    e.add_argument("name", nargs="?", help="example name; omit to list")
    e.add_argument("--out", metavar="PATH")

    v = sub.add_parser("verify", help="randomized verification suite")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--trials", type=int, default=50)
    v.add_argument("--dims", type=_dims, default=(2, 6), metavar="LO..HI")
    v.add_argument("--out", metavar="PATH")
    v.add_argument("--debug-corrupt-tolerance", action="store_true", help=argparse.SUPPRESS)
    return ap


def _write(path, text):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _stamp(report: dict) -> dict:
    report["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return report


def cmd_analyze(args) -> int:
    from .operator_models import EmbeddedModel
    from .index_flow import total_resonance_index
    from .reporting import dumps, flow_report, load_model, point_report, splitting_svg

    m = load_model(args.model)
    lam = args.lam
    if lam is None:
        if not isinstance(m, EmbeddedModel):
            raise ValidationError("--lambda is required for this model")
        lam = m.lam
    if args.at is not None:
        report = point_report(m, lam, args.at)
    elif args.interval is not None:
        a, b = args.interval
        fr = total_resonance_index(m, lam, a, b)
        report = flow_report(m, fr, classify=not args.no_classify)
    else:
        raise ValidationError("give --interval A B or --at R")
    if args.plot:
        pts = [p["r_lambda"] for p in report["points"]]
        _write(args.plot, splitting_svg(m, lam, pts))
    _write(args.out, dumps(_stamp(report)))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .operator_models import FinitePencil
    from .reporting import csv_text, load_model, parse_grid, sweep_rows, trajectories_svg

    m = load_model(args.model)
    grid = parse_grid(args.lambda_grid)
    a, b = args.interval
    rows = sweep_rows(m, grid, a, b, warn=lambda msg: print(f"warning: {msg}", file=sys.stderr))
    _write(args.out, csv_text(rows))
    if args.plot:
        if not isinstance(m, FinitePencil):
            raise ValidationError("--plot in sweep needs a finite model")
        _write(args.plot, trajectories_svg(m, float(np.mean(grid)), a, b))
    return EXIT_OK


def cmd_examples(args) -> int:
    from .reporting import dumps
    from .suite import EXAMPLES, run_example

    if not args.name:
        print("\n".join(EXAMPLES))
        return EXIT_OK
    res = run_example(args.name)
    _write(args.out, dumps(res))
    return EXIT_OK if res["match"] else EXIT_MISMATCH


def cmd_verify(args) -> int:
    from .reporting import dumps
    from .suite import verify

    summary = verify(args.seed, args.trials, args.dims, corrupt=args.debug_corrupt_tolerance)
    for line in summary.lines():
        print(line, file=sys.stderr if args.out is None else sys.stdout)
    if args.out:
        _write(args.out, dumps(summary.to_dict()))
    elif summary.failures:
        sys.stdout.write(dumps({"failures": summary.failures}))
    return EXIT_OK if summary.ok else EXIT_VERIFY


COMMANDS = {"analyze": cmd_analyze, "sweep": cmd_sweep, "examples": cmd_examples, "verify": cmd_verify}


def _fail(exc: ArtifactError) -> int:
    print(json.dumps(exc.to_dict()), file=sys.stderr)
    return exc.exit_status


def _glue_values(argv):
    # argparse takes '-3:3:101' for an option; bind such values to their flag
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--lambda-grid":
            out.append(f"{tok}={next(it, '')}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = _glue_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = build_parser().parse_args(argv)
    except ParseError as exc:
        return _fail(exc)
    tol = tolerances().scaled(args.tol_scale)
    if args.strict:
        import dataclasses
        tol = dataclasses.replace(tol, strict=True)
    try:
        with use_tolerances(tol):
            return COMMANDS[args.command](args)
    except ArtifactError as exc:
        return _fail(exc)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(json.dumps({"error": "numerical_error", "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
