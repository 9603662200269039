"""Randomized gamma bound and P-metric inequality suites, with per-inequality margin summaries.

    python scripts/metrics_audit.py [--trials 1000] [--n 100000] [--seed 0] [--out audit.json]
"""
import argparse
import json

import numpy as np

from idfields.checks import metrics_audit

MARGINS = ("margin_gamma", "margin_kf_upper", "margin_kf_lower", "margin_kf_chain")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    chk = metrics_audit(args.trials, args.seed, args.n)
    rows = chk.details["per_trial"]
    print(chk.line())
    print(f"{'inequality':18s} {'min margin':>12s} {'median':>10s} {'violations':>10s}")
    for key in MARGINS:
        m = np.array([r[key] for r in rows])
        print(f"{key[7:]:18s} {m.min():12.4g} {np.median(m):10.4g} {int((m < 0).sum()):10d}")
    print(f"{chk.seconds:.0f}s for {args.trials} trials")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(chk.to_dict(), fh, indent=2)


if __name__ == "__main__":
    main()
