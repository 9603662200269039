"""Penrose fBm rasters for H = 0.1, 0.5, 0.9 with the smoothness and stationarity checks.

    python scripts/figure1.py --out out/figure1 [--size 128] [--seed 0] [--png]

Writes penrose_H*.pgm and .csv (and a side-by-side PNG with --png).
"""
import argparse
import json
import time
from pathlib import Path

import numpy as np

from idfields.cli import FIGURE1_H, read_pgm, run_figure1


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/figure1")
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--stationarity-seeds", type=int, default=50)
    ap.add_argument("--png", action="store_true", help="also write a three-panel PNG (needs Pillow)")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    checks, fields, files = run_figure1(args.seed, args.size, 1.0, out, args.stationarity_seeds)
    for c in checks:
        print(c.line())
    for H in FIGURE1_H:
        v = fields[H].values
        print(f"H={H}: min {v.min():.4f}  mean {v.mean():.4f}  max {v.max():.4f}")
    if args.png:
        from PIL import Image
        gap = np.full((args.size, 4), 255, np.uint8)
        panels = [read_pgm(f) for f in files]
        row = np.hstack([p for pair in zip(panels, [gap] * 3) for p in pair][:-1])
        Image.fromarray(row).save(out / "figure1.png")
    (out / "report.json").write_text(json.dumps({"checks": [c.to_dict() for c in checks], "files": files,
                                                 "seconds": time.perf_counter() - t0}, indent=2))
    print(f"wrote {len(files)} rasters to {out} in {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
