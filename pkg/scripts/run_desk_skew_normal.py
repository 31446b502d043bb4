"""Desk-scale skew-normal studies for alpha = 1, 3, 5 under the independence Wasserstein and Jeffreys priors.

    python3 scripts/run_desk_skew_normal.py --seed 1 --alpha 1 3 --outdir results/skew_normal
"""

import argparse
import os
import sys
import time
from dataclasses import replace

from wprior.sim import REPORT_FORMATS, emit_report, preset, report_markdown, run_scenario


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--alpha", type=int, nargs="+", choices=(1, 3, 5), default=(1, 3, 5))
    ap.add_argument("--outdir", default="results/desk_skew_normal")
    ap.add_argument("--replicates", type=int, default=None)
    ap.add_argument("--sizes", type=int, nargs="+", default=None, help="override the sample sizes")
    ap.add_argument("--full", action="store_true", help="250 replicates, n in {50, 250, 500}")
    args = ap.parse_args(argv)

    for alpha in args.alpha:
        sc = preset(f"{'full' if args.full else 'desk'}_sn{alpha}", seed=args.seed)
        if args.replicates:
            sc = replace(sc, replicates=args.replicates)
        if args.sizes:
            sc = replace(sc, sample_sizes=tuple(args.sizes))
        t0 = time.perf_counter()
        report = run_scenario(sc, lambda ev: print(f"  alpha={alpha} n={ev['n']} replicate {ev['replicate'] + 1}",
                                                  file=sys.stderr))
        outdir = os.path.join(args.outdir, f"alpha{alpha}")
        for fmt in REPORT_FORMATS:
            emit_report(report, fmt, outdir)
        print(report_markdown(report))
        print(f"{time.perf_counter() - t0:.0f} s; reports in {outdir}\n")


if __name__ == "__main__":
    main()
