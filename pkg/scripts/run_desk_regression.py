"""Desk-scale regression study: 50 replicates at n = 50 and n = 250 under the flat Wasserstein prior.

    python3 scripts/run_desk_regression.py --seed 1 --outdir results/regression
"""

import argparse
import sys
import time
from dataclasses import replace

from wprior.sim import REPORT_FORMATS, emit_report, preset, report_markdown, run_scenario


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--outdir", default="results/desk_regression")
    ap.add_argument("--replicates", type=int, default=None)
    ap.add_argument("--full", action="store_true", help="250 replicates, n in {50, 250, 500}")
    args = ap.parse_args(argv)

    sc = preset("full_regression" if args.full else "desk_regression", seed=args.seed)
    if args.replicates:
        sc = replace(sc, replicates=args.replicates)
    t0 = time.perf_counter()
    report = run_scenario(sc, lambda ev: print(f"  n={ev['n']} replicate {ev['replicate'] + 1}/{sc.replicates}",
                                              file=sys.stderr))
    for fmt in REPORT_FORMATS:
        emit_report(report, fmt, args.outdir)
    print(report_markdown(report))
    print(f"{time.perf_counter() - t0:.0f} s; reports in {args.outdir}")


if __name__ == "__main__":
    main()
