"""Command-line entry point: ``sced solve | sweep | compare``.

Exit status is 0 for every completed run, converged or not, and 2 for bad
input (unreadable case, invalid partition, bad parameters).
"""

import argparse
import sys

from .alr import AlrParams
from .bench import (
    METHODS, SweepSpec, compare_methods, load_case_and_partition, run_single, run_sweep,
    table_csv, table_text,
)
from .case import CaseError
from .lr import LrParams

EXIT_INPUT = 2


def _vector(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty vector")
    return vals[0] if len(vals) == 1 else vals


def _add_case_args(p, areas=True):
    p.add_argument("--case", required=True, help="case JSON file, or 'canonical' for the built-in case")
    if areas:
        p.add_argument("--areas", help="JSON object mapping bus id to area id (overrides the case's areas)")
    p.add_argument("--strict-boundary", action="store_true",
                   help="reject partitions whose boundary buses carry load or generation")


def _add_param_args(p, metric=True):
    g = p.add_argument_group("method parameters")
    g.add_argument("--step-a", type=float, help="LR step size a in 1/(a + b v)")
    g.add_argument("--step-b", type=float, help="LR step size b in 1/(a + b v)")
    g.add_argument("--mu0", type=_vector, help="LR initial tie-limit multipliers")
    g.add_argument("--alpha", type=float, help="ALR multiplier step")
    g.add_argument("--gamma", type=float, help="ALR penalty weight")
    g.add_argument("--lambda0", type=_vector, help="initial balance multipliers (scalar or a,b,...)")
    g.add_argument("--stop-tol", type=float, help="stopping tolerance (default 0.01)")
    g.add_argument("--max-iter", type=int, help="iteration limit")
    if metric:
        g.add_argument("--criterion", choices=("gen_load", "mismatch", "none"),
                       help="stopping metric (default gen_load)")


def _params(args, method):
    common = {k: getattr(args, k) for k in ("lambda0", "stop_tol", "max_iter", "criterion")
              if getattr(args, k, None) is not None}
    if method == "lr":
        extra = {k: getattr(args, k) for k in ("step_a", "step_b", "mu0") if getattr(args, k, None) is not None}
        return LrParams(**common, **extra)
    if method == "alr":
        extra = {k: getattr(args, k) for k in ("alpha", "gamma") if getattr(args, k, None) is not None}
        return AlrParams(**common, **extra)
    return None


def _emit(reports, args, sweep_parameter=None):
    sys.stdout.write(table_text(reports, sweep_parameter))
    if getattr(args, "csv", None):
        with open(args.csv, "w", newline="") as fh:
            fh.write(table_csv(reports, sweep_parameter))


def cmd_solve(args):
    case, part = load_case_and_partition(args.case, args.areas, args.strict_boundary)
    report, trace = run_single(case, part, args.method, _params(args, args.method), args.trace)
    _emit([report], args)
    if trace is not None and "oscillating" in trace.annotations:
        print("note: mismatch stalled over a 50-iteration window (oscillating)")
    return 0


def cmd_sweep(args):
    spec = SweepSpec.from_file(args.spec)
    rows = run_sweep(spec)
    _emit(rows, args, spec.parameter)
    return 0


def cmd_compare(args):
    case, part = load_case_and_partition(args.case, args.areas, args.strict_boundary)
    reports = compare_methods(case, part, _params(args, "lr"), _params(args, "alr"),
                              criterion=args.criterion_tol, fixed_iters=args.fixed_iters)
    _emit(reports, args)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="sced", description="Multi-area economic dispatch: centralized, LR and ALR.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one case with one method")
    _add_case_args(p)
    p.add_argument("--method", required=True, choices=METHODS)
    _add_param_args(p)
    p.add_argument("--trace", help="write the per-iteration trace CSV here")
    p.add_argument("--csv", help="also write the summary table as CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="sensitivity sweep over one parameter")
    p.add_argument("--spec", required=True, help="sweep spec JSON file")
    p.add_argument("--csv", help="also write the summary table as CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="LR vs ALR under a common stopping rule")
    _add_case_args(p)
    p.add_argument("--criterion", dest="criterion_tol", type=float, required=True,
                   help="common |gen - load| tolerance")
    p.add_argument("--fixed-iters", type=int, help="run both methods for exactly N iterations instead")
    _add_param_args(p, metric=False)
    p.add_argument("--csv", help="also write the summary table as CSV")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CaseError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
