"""Command-line benchmark harness.

Example::

    chebfmm-bench --geometry sphere --n 5000 --depth 3 --acc 4 \
        --variant all --out results/

writes ``results/report.md`` and ``results/report.csv``.  Exit codes:
0 success, 1 usage error, 2 a variant exceeded the memory budget (the
report still contains the other variants with OOM markers for the rest).
"""

from __future__ import annotations

import argparse
import sys

from .bench import ExperimentConfig, run_experiment
from .m2l import VARIANTS


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 for usage errors (2 is the budget code)
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="chebfmm-bench",
        description="Benchmark M2L variants of the Chebyshev fast multipole method.",
    )
    p.add_argument("--geometry", default="sphere",
                   help="sphere | oblate | prolate | file:PATH (default sphere)")
    p.add_argument("--n", type=int, default=5000, help="particle count (default 5000)")
    p.add_argument("--depth", type=int, default=3, help="octree depth (default 3)")
    p.add_argument("--kernel", choices=("laplace", "helmholtz"), default="laplace")
    p.add_argument("--wavenumber", type=float, default=1.0,
                   help="Helmholtz wavenumber (default 1.0)")
    p.add_argument("--acc", type=int, default=None,
                   help="accuracy shorthand: order = Acc, epsilon = 10^-Acc")
    p.add_argument("--order", type=int, default=None, help="interpolation order")
    p.add_argument("--epsilon", type=float, default=None, help="low-rank target accuracy")
    p.add_argument("--variant", choices=VARIANTS + ("all",), default="all")
    p.add_argument("--compression", choices=("svd", "aca"), default="svd")
    p.add_argument("--block-size", type=int, default=128,
                   help="blocked-variant buffer capacity (default 128)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads; 1 is the reproducibility mode")
    p.add_argument("--out", default="out", metavar="DIR", help="report directory")
    p.add_argument("--error-metric", choices=("l2", "paper"), default="l2")
    p.add_argument("--memory-budget-gb", type=float, default=2.0,
                   help="precompute memory budget in GiB (default 2.0)")
    p.add_argument("--timing-repeats", type=int, default=3,
                   help="repetitions of the apply phase for timing (default 3)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.acc is None and (args.order is None or args.epsilon is None):
        parser.error("provide --acc or both --order and --epsilon")
    if args.acc is not None and (args.order is not None or args.epsilon is not None):
        parser.error("--acc conflicts with --order/--epsilon")
    if args.geometry not in ("sphere", "oblate", "prolate") and not args.geometry.startswith("file:"):
        parser.error(f"unknown geometry {args.geometry!r}")

    config = ExperimentConfig(
        geometry=args.geometry,
        n=args.n,
        depth=args.depth,
        kernel=args.kernel,
        wavenumber=args.wavenumber,
        acc=args.acc,
        order=args.order,
        epsilon=args.epsilon,
        variant=args.variant,
        compression=args.compression,
        block_size=args.block_size,
        seed=args.seed,
        threads=args.threads,
        out_dir=args.out,
        error_metric=args.error_metric,
        budget_bytes=int(args.memory_budget_gb * 2**30),
        timing_repeats=args.timing_repeats,
    )
    try:
        report = run_experiment(config)
    except (ValueError, OSError) as exc:
        print(f"chebfmm-bench: error: {exc}", file=sys.stderr)
        return 1
    for variant, res in report.results.items():
        if res.status == "oom":
            print(f"{variant}: OOM ({res.message})", file=sys.stderr)
        else:
            print(f"{variant}: eps_l2 = {res.eps_l2:.3e}, "
                  f"precompute {res.precompute_s:.3f} s, "
                  f"apply {res.apply_s_mean:.3f} s")
    print(f"report written to {config.out_dir}/report.md and report.csv")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
