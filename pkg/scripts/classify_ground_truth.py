"""Verdicts for the four ground-truth models across psi choices and divergence ratios.

    python scripts/classify_ground_truth.py [--curves out/curves]

Prints one row per (model, psi, ratio) with the shell ratio, the mean growth
S_Rm / S_R1 and the fraction of sampled atoms whose curve grew by the ratio.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from idfields.flowclass import FlowClassConfig, classify
from idfields.spectral import StormProfile, make_moving_maxima, make_penrose, make_poisson_line

GRID = np.linspace(-130.0, 130.0, 2081)

MODELS = [
    ("indicator moving maxima", lambda: make_moving_maxima(StormProfile("indicator"), 1.0, 1), "dissipative"),
    ("poisson line", lambda: make_poisson_line(StormProfile("exp_bump"), 1.0), "conservative"),
    ("penrose brownian k=1", lambda: make_penrose("brownian", 1.0, GRID, k=1), "conservative"),
    ("penrose brownian k=2", lambda: make_penrose("brownian", 1.0, GRID, k=2), "conservative"),
    ("penrose brownian k=3", lambda: make_penrose("brownian", 1.0, GRID, k=3), "dissipative"),
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--curves", default=None, help="directory for growth-curve CSVs (default psi and ratio)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if args.curves:
        Path(args.curves).mkdir(parents=True, exist_ok=True)

    print(f"{'model':24s} {'psi':8s} {'q':>3s} {'verdict':13s} {'shell':>7s} {'growth':>8s} {'frac>=q':>8s} {'s':>5s}")
    wrong = 0
    for name, make, expected in MODELS:
        model = make()
        for psi in ("min1_sq", "exp_inv"):
            for q in (2.0, 4.0, 8.0):
                t0 = time.perf_counter()
                rep = classify(model, FlowClassConfig(psi=psi, divergence_ratio=q, seed=args.seed))
                dt = time.perf_counter() - t0
                mark = "" if rep.verdict == expected else f"  (expected {expected})"
                wrong += rep.verdict != expected
                print(f"{name:24s} {psi:8s} {q:3.0f} {rep.verdict:13s} {rep.shell_ratio:7.3f} {rep.mean_ratio:8.2f} "
                      f"{rep.diverging_fraction:8.3f} {dt:5.1f}{mark}")
                if args.curves and psi == "min1_sq" and q == 4.0:
                    (Path(args.curves) / f"{name.replace(' ', '_')}.csv").write_text(rep.curves_csv())
    print(f"{wrong} verdicts differ from the expected class")


if __name__ == "__main__":
    main()
