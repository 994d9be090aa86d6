"""Command line entry point: ``steinbounds report|sweep|np-curve|selftest``.

Exit codes: 0 success, 1 validation error, 2 computation error, 3 selftest failure.
On error a one-line JSON record is written to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .errors import SteinBoundsError


def _common(p):
    p.add_argument("specfile")
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (env {harness.SEED_ENV})")
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo sample budget")
    p.add_argument("--out", default=None, help="output path (default: spec output.path or stdout)")
    p.add_argument("--format", choices=("csv", "human"), default=None)
    p.add_argument("--jobs", type=int, default=1, help="worker threads; output does not depend on it")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="steinbounds",
        description="Non-asymptotic bounds on the optimal type-II error of simple hypothesis tests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("report", help="bounds and optimal ln beta for each alpha"))
    _common(sub.add_parser("sweep", help="bounds across the scales of a sweep directive"))
    _common(sub.add_parser("np-curve", help="vertices of the exact operating characteristic"))
    st = sub.add_parser("selftest", help="run the built-in invariant suites")
    st.add_argument("--seed", type=int, default=None)
    st.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)
    return parser


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error(exc: SteinBoundsError) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    sys.stderr.write(json.dumps(record) + "\n")
    return exc.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        from .selftest import run_selftest

        result = run_selftest(seed=args.seed, fault=args.inject_fault, out=sys.stdout)
        return 0 if result.ok else 3
    try:
        spec = harness.load_spec(args.specfile)
        fmt = args.format or spec.output_format
        out = args.out or spec.output_path
        if args.command == "np-curve":
            curve = harness.np_curve(spec)
            text = harness.curve_to_csv(curve) if fmt == "csv" else harness.curve_to_human(curve)
        else:
            cfg = harness.resolve_config(spec, args.seed, args.samples, args.jobs)
            sweep = args.command == "sweep"
            rows = harness.run_sweep(spec, cfg) if sweep else harness.run_report(spec, cfg)
            text = (
                harness.rows_to_csv(rows, sweep)
                if fmt == "csv"
                else harness.rows_to_human(rows, sweep)
            )
    except SteinBoundsError as exc:
        return _error(exc)
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "OSError", "message": str(exc), "exit_code": 1}) + "\n")
        return 1
    _emit(text, out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
