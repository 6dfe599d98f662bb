"""``bench run ...``: command-line front end to :mod:`fpaccel.bench`."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import DEFAULT_METHODS, PROBLEMS, BenchSpec, BenchSpecError, run_bench, summarize


def _methods(text: str) -> tuple[str, ...]:
    return tuple(m.strip() for m in text.split(",") if m.strip())


def _start(text: str) -> tuple[float, ...]:
    """Comma-separated numbers, or a path to a whitespace-separated text file."""
    path = Path(text)
    tokens = path.read_text().split() if path.is_file() else text.split(",")
    try:
        return tuple(float(v) for v in tokens)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad start vector: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Benchmark fixed-point accelerators on EM problems.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a method x replication grid")
    run.add_argument("--problem", required=True, choices=PROBLEMS)
    run.add_argument("--methods", type=_methods, default=DEFAULT_METHODS,
                     help="comma-separated; also aa_eps, and pxem for mvt (default: %(default)s)")
    run.add_argument("--reps", type=int, default=20)
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--order", type=int, default=None, help="AA order m (default: from the dimension)")
    run.add_argument("--qnz-order", type=int, default=5, help="secant pairs q for qnz")
    run.add_argument("--epsilon", type=float, default=0.01)
    run.add_argument("--epsilon-c", type=float, default=0.0)
    run.add_argument("--tol", type=float, default=1e-8)
    run.add_argument("--max-fevals", type=int, default=25000)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", required=True)
    run.add_argument("--n", type=int, default=None, help="observations")
    run.add_argument("--p", type=int, default=None, help="probit covariates")
    run.add_argument("--q", type=int, default=None, help="mvt dimension")
    run.add_argument("--nu", type=float, default=None, help="mvt degrees of freedom")
    run.add_argument("--packing", choices=("tri", "full"), default="tri", help="mvt covariance vectorization")
    run.add_argument("--start", type=_start, default=None,
                     help="starting vector as comma-separated values or a file (default: per-problem)")
    run.add_argument("--trace", action="store_true", help="write trace-<method>-<rep>.jsonl files")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    spec = BenchSpec(
        problem=args.problem, methods=args.methods, reps=args.reps, seed=args.seed,
        order=args.order, qnz_order=args.qnz_order, epsilon=args.epsilon, epsilon_c=args.epsilon_c,
        tol=args.tol, max_fevals=args.max_fevals, n=args.n, p=args.p, q=args.q, nu=args.nu,
        packing=args.packing, start=args.start, out=args.out, trace=args.trace, jobs=args.jobs,
    )
    try:
        spec.validate()
    except BenchSpecError as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2
    records = run_bench(spec)
    table = summarize(records)
    width = max(len(m) for m in table)
    print(f"{'method':<{width}}  {'conv':>5}  {'fevals(med)':>11}  {'fevals(mean)':>12}  {'-logL(mean)':>14}")
    for method, row in table.items():
        ll = row["mean_negative_loglik"]
        print(f"{method:<{width}}  {row['proportion_converged']:>5.2f}  {row['n_map_evals']['median']:>11.1f}"
              f"  {row['n_map_evals']['mean']:>12.1f}  {'nan' if ll is None else format(ll, '.6f'):>14}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
