"""Command-line interface.

    idfields simulate CONFIG [--grid SPEC] [--seed N] [--error-budget B] [--out csv|pgm|json]
    idfields figure1 [--seed N] [--size 128] [--out DIR]
    idfields metrics-audit [--trials N] [--seed N]
    idfields fdd-check CONFIG / maxid-check CONFIG / classify CONFIG

Config files (JSON or TOML) hold a ``model`` table and optional per-command
tables (``simulate``, ``fdd_check``, ``maxid_check``, ``classify``); unknown
keys are errors.  Every check command writes a JSON report (schema 1) and
exits 0 iff all checks pass.  The default seed comes from $IDFIELDS_SEED.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .checks import Check, _jsonable, fdd_check, maxid_check, metrics_audit
from .exactdist import FddQuery, fdd_cdf
from .fields import DEFAULT_BUDGET, FieldRealization, simulate_field
from .integrator import field_values
from .point_process import sample_poisson
from .flowclass import PSI_REGISTRY, FlowClassConfig, classify
from .quad import QuadratureSpec
from .rng import default_seed, derive_seed
from .spectral.config import grid_from_spec, load_config, model_from_config
from .spectral.penrose import make_penrose
from .spectral.storms import _no_extra
from .gaussian import square_grid

SECTIONS = {"model", "simulate", "fdd_check", "maxid_check", "classify"}
FIGURE1_H = (0.1, 0.5, 0.9)


# ---- config and output helpers ------------------------------------------------------

def read_config(path) -> tuple[dict, str]:
    cfg = load_config(path)
    _no_extra(cfg, SECTIONS, "config")
    if "model" not in cfg:
        raise ValueError("config needs a [model] table")
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()
    return cfg, digest


def parse_grid(text: str):
    """'linspace:a:b:n', 'square:size:extent', or a JSON list of points."""
    kind, _, rest = text.partition(":")
    if kind == "linspace":
        a, b, n = rest.split(":")
        return grid_from_spec({"linspace": [float(a), float(b), int(n)]})
    if kind == "square":
        size, extent = rest.split(":")
        return grid_from_spec({"square": [int(size), float(extent)]})
    return grid_from_spec(json.loads(text))


def field_csv(real: FieldRealization) -> str:
    grid = np.asarray(real.grid)
    head = ",".join([f"t{i}" for i in range(grid.shape[1])] + ["value"])
    rows = [",".join(repr(float(v)) for v in list(p) + [x]) for p, x in zip(grid, real.values)]
    return "\n".join([head] + rows) + "\n"


def lattice_shape(grid) -> tuple[int, int]:
    """(rows, cols) of a row-major rectangular lattice; error otherwise."""
    grid = np.asarray(grid, float)
    if grid.ndim != 2 or grid.shape[1] != 2:
        raise ValueError("PGM output needs a 2-D grid")
    xs, ys = np.unique(grid[:, 0]), np.unique(grid[:, 1])
    if len(xs) * len(ys) != len(grid):
        raise ValueError("PGM output needs a full rectangular lattice")
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    if not np.array_equal(np.column_stack([xx.ravel(), yy.ravel()]), grid):
        raise ValueError("PGM output needs the lattice in row-major order (x fastest)")
    return len(ys), len(xs)


def to_pgm(values, shape) -> bytes:
    """8-bit P5 raster; linear gray ramp with the frame min at 0 and max at 255."""
    v = np.asarray(values, float).reshape(shape)
    lo, hi = float(v.min()), float(v.max())
    scaled = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo) * 255.0
    pix = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    return f"P5\n{shape[1]} {shape[0]}\n255\n".encode() + pix.tobytes()


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def run_report(argv, checks: list[Check], t0: float, config_hash: str | None = None, extra=None) -> dict:
    rep = {
        "schema": 1,
        "command": list(argv),
        "config_hash": config_hash,
        "pass": all(c.passed for c in checks),
        "checks": [c.to_dict() for c in checks],
        "wall_time": round(time.perf_counter() - t0, 3),
    }
    if extra:
        rep.update(_jsonable(extra))
    return rep


def emit(report: dict, path: str | None):
    text = json.dumps(report, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    print(text)
    return 0 if report.get("pass", True) else 1


def quad_from_args(args) -> QuadratureSpec:
    return QuadratureSpec(args.quadrature, args.mc_samples, args.tolerance, args.seed)


# ---- commands ----------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg, _ = read_config(args.config)
    sim = dict(cfg.get("simulate", {}))
    _no_extra(sim, {"grid", "error_budget", "seed"}, "simulate")
    model = model_from_config(cfg["model"])
    if args.grid:
        grid = parse_grid(args.grid)
    elif "grid" in sim:
        grid = grid_from_spec(sim["grid"])
    elif hasattr(model, "points"):
        grid = model.points
    else:
        raise ValueError("no grid given (use --grid or a [simulate] grid)")
    seed = args.seed if args.seed is not None else sim.get("seed", default_seed())
    budget = args.error_budget if args.error_budget is not None else sim.get("error_budget", DEFAULT_BUDGET)
    real = simulate_field(model, grid, seed, budget, config_echo=cfg["model"])
    out = args.output
    if args.out == "csv":
        text = field_csv(real)
        Path(out).write_text(text) if out else sys.stdout.write(text)
    elif args.out == "json":
        text = json.dumps(_jsonable(real.to_dict())) + "\n"
        Path(out).write_text(text) if out else sys.stdout.write(text)
    else:
        data = to_pgm(real.values, lattice_shape(real.grid))
        if not out:
            raise ValueError("PGM output needs --output PATH")
        Path(out).write_bytes(data)
    return 0


def figure1_fields(seed, size: int = 128, extent: float = 1.0, budget: float = DEFAULT_BUDGET, hs=FIGURE1_H):
    grid = square_grid(size, extent)
    out = {}
    for H in hs:
        model = make_penrose("fbm", 1.0, grid, H=H, sigma2=1.0, max_nodes=len(grid))
        out[H] = simulate_field(model, grid, derive_seed(seed, "figure1", int(round(H * 1000))), budget)
    return out


def figure1_stationarity(n_seeds: int = 50, size: int = 128, extent: float = 1.0, budget: float = DEFAULT_BUDGET,
                         hs=FIGURE1_H, seed=0) -> Check:
    """Left-half minus right-half mean across seeds; passes when |mean| <= 3 standard errors for every H."""
    grid = square_grid(size, extent)
    left = grid[:, 0] < extent / 2
    right = grid[:, 0] > extent / 2
    rows, ok, worst = {}, True, -math.inf
    for H in hs:
        model = make_penrose("fbm", 1.0, grid, H=H, sigma2=1.0, max_nodes=len(grid))
        choice = model.window_for(grid, budget)
        intensity = model.window_intensity(choice.window)
        diffs = []
        for j in range(n_seeds):
            cfg = sample_poisson(intensity, choice.window, derive_seed(seed, "stationarity", int(round(H * 1000)), j))
            v = field_values(model, grid, cfg)
            diffs.append(v[left].mean() - v[right].mean())
        diffs = np.asarray(diffs)
        se = float(diffs.std(ddof=1) / math.sqrt(n_seeds))
        z = float(abs(diffs.mean()) / se) if se > 0 else 0.0
        rows[str(H)] = {"mean_diff": float(diffs.mean()), "se": se, "z": z}
        ok &= z <= 3.0
        worst = max(worst, z)
    return Check("stationarity left vs right", bool(ok), worst, 3.0, {"n_seeds": n_seeds, "per_H": rows})


def roughness(values, shape) -> float:
    """Mean absolute difference between horizontal and vertical neighbours."""
    v = np.asarray(values, float).reshape(shape)
    return float(np.concatenate([np.abs(np.diff(v, axis=0)).ravel(), np.abs(np.diff(v, axis=1)).ravel()]).mean())


def run_figure1(seed, size: int = 128, extent: float = 1.0, outdir=None, stationarity_seeds: int = 50):
    """Rasters for each H plus the smoothness and stationarity checks -> (checks, fields, files).

    Work is ordered by H so each covariance factor is built once and reused.
    """
    shape = (size, size)
    fields, rough, files, stat = {}, {}, [], []
    for H in FIGURE1_H:
        real = figure1_fields(seed, size, extent, hs=(H,))[H]
        fields[H] = real
        rough[H] = roughness(real.values, shape)
        if outdir is not None:
            path = Path(outdir) / f"penrose_H{H:.1f}.pgm"
            path.write_bytes(to_pgm(real.values, shape))
            (Path(outdir) / f"penrose_H{H:.1f}.csv").write_text(field_csv(real))
            files.append(str(path))
        if stationarity_seeds > 0:
            stat.append(figure1_stationarity(stationarity_seeds, size, extent, hs=(H,), seed=seed))
    r = [rough[H] for H in FIGURE1_H]
    checks = [Check("smoothness ordering across H", all(a > b for a, b in zip(r, r[1:])),
                    float(np.min(-np.diff(r))), 0.0, {"roughness": {str(k): v for k, v in rough.items()}})]
    if stat:
        per_h = {k: v for c in stat for k, v in c.details["per_H"].items()}
        checks.append(Check("stationarity left vs right", all(c.passed for c in stat),
                            max(c.statistic for c in stat), 3.0, {"n_seeds": stationarity_seeds, "per_H": per_h}))
    return checks, fields, files


def cmd_figure1(args) -> int:
    t0 = time.perf_counter()
    seed = args.seed if args.seed is not None else default_seed()
    Path(args.out).mkdir(parents=True, exist_ok=True)
    checks, _, files = run_figure1(seed, args.size, args.extent, args.out, args.stationarity_seeds)
    return emit(run_report(sys.argv, checks, t0, extra={"files": files, "seed": seed, "size": args.size}),
                args.report)


def cmd_metrics_audit(args) -> int:
    t0 = time.perf_counter()
    seed = args.seed if args.seed is not None else default_seed()
    chk = metrics_audit(args.trials, seed, args.n)
    return emit(run_report(sys.argv, [chk], t0), args.report)


def _quantile_thresholds(model, point, probs=(0.25, 0.5, 0.75)):
    """Thresholds x with P[g < x] = p at one point, by bisection on fdd_cdf (deduplicated)."""
    out = []
    for p in probs:
        lo, hi = 0.0, max(model.sup_value(), 1.0)
        while fdd_cdf(model, FddQuery.make([point], [hi])).value < p:
            hi *= 2
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if mid > 0 and fdd_cdf(model, FddQuery.make([point], [mid])).value >= p:
                hi = mid
            else:
                lo = mid
        out.append(hi)
        # at a jump of the CDF the point just below is a distinct, informative threshold
        if lo > 0 and fdd_cdf(model, FddQuery.make([point], [hi])).value - fdd_cdf(model, FddQuery.make([point], [lo])).value > 0.01:
            out.append(lo)
    return sorted(set(out))[:3]


def cmd_fdd_check(args) -> int:
    t0 = time.perf_counter()
    cfg, digest = read_config(args.config)
    sec = dict(cfg.get("fdd_check", {}))
    _no_extra(sec, {"queries", "n"}, "fdd_check")
    model = model_from_config(cfg["model"])
    seed = args.seed if args.seed is not None else default_seed()
    n = args.n or int(sec.get("n", 100_000))
    if "queries" in sec:
        queries = []
        for q in sec["queries"]:
            _no_extra(q, {"points", "thresholds"}, "query")
            queries.append(FddQuery.make(q["points"], q["thresholds"]))
    else:
        # one-point quartile queries plus a two-point query at the medians
        if hasattr(model, "points"):
            p0, p1 = model.points[0], model.points[min(1, len(model.points) - 1)]
        else:
            p0 = np.zeros(model.dim)
            p1 = p0 + np.eye(model.dim)[0]
        xs = _quantile_thresholds(model, p0)
        queries = [FddQuery.make([p0], [x]) for x in xs]
        queries.append(FddQuery.make([p0, p1], [xs[1], _quantile_thresholds(model, p1, (0.5,))[0]]))
    chk = fdd_check(model, queries, n, seed, quad_from_args(args))
    return emit(run_report(sys.argv, [chk], t0, digest, {"config": cfg}), args.report)


def cmd_maxid_check(args) -> int:
    t0 = time.perf_counter()
    cfg, digest = read_config(args.config)
    sec = dict(cfg.get("maxid_check", {}))
    _no_extra(sec, {"point", "n", "parts"}, "maxid_check")
    model = model_from_config(cfg["model"])
    seed = args.seed if args.seed is not None else default_seed()
    point = sec.get("point", model.points[0].tolist() if hasattr(model, "points") else [0.0] * model.dim)
    chk = maxid_check(model, [point], args.n or int(sec.get("n", 10_000)), seed, int(sec.get("parts", args.parts)))
    return emit(run_report(sys.argv, [chk], t0, digest, {"config": cfg}), args.report)


def cmd_classify(args) -> int:
    t0 = time.perf_counter()
    cfg, digest = read_config(args.config)
    sec = dict(cfg.get("classify", {}))
    _no_extra(sec, {"psi", "radii", "samples", "divergence_ratio", "expected"}, "classify")
    model = model_from_config(cfg["model"])
    seed = args.seed if args.seed is not None else default_seed()
    radii = tuple(float(r) for r in (args.radii.split(",") if args.radii else sec.get("radii", [2.0 ** j for j in range(1, 8)])))
    conf = FlowClassConfig(args.psi or sec.get("psi", "min1_sq"), radii, args.samples or int(sec.get("samples", 200)),
                           args.ratio or float(sec.get("divergence_ratio", 4.0)), seed)
    rep = classify(model, conf)
    curves_path = args.curves or None
    if curves_path:
        Path(curves_path).write_text(rep.curves_csv())
    expected = args.expected or sec.get("expected")
    checks = []
    if expected:
        checks.append(Check("verdict", rep.verdict == expected, rep.shell_ratio, float("nan"),
                            {"verdict": rep.verdict, "expected": expected}))
    extra = {**rep.to_dict(), "curves_csv_path": curves_path, "config": cfg}
    return emit(run_report(sys.argv, checks, t0, digest, extra), args.report)


# ---- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="idfields", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="model config file (JSON or TOML)")
        sp.add_argument("--seed", type=int, default=None, help="seed (default: $IDFIELDS_SEED or 0)")
        sp.add_argument("--report", default=None, help="also write the JSON report here")
        sp.add_argument("--quadrature", choices=("adaptive", "mc"), default="adaptive")
        sp.add_argument("--mc-samples", type=int, default=200_000)
        sp.add_argument("--tolerance", type=float, default=1e-8)

    s = sub.add_parser("simulate", help="simulate one field on a grid")
    common(s)
    s.add_argument("--grid", default=None, help="linspace:a:b:n, square:size:extent or a JSON point list")
    s.add_argument("--error-budget", type=float, default=None)
    s.add_argument("--out", choices=("csv", "pgm", "json"), default="csv")
    s.add_argument("--output", default=None, help="output path (stdout for csv/json when omitted)")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("figure1", help="three Penrose fBm rasters, H = 0.1, 0.5, 0.9")
    common(f, config=False)
    f.add_argument("--size", type=int, default=128)
    f.add_argument("--extent", type=float, default=1.0)
    f.add_argument("--out", default="figure1")
    f.add_argument("--stationarity-seeds", type=int, default=50, help="seeds for the left/right mean check (0 skips)")
    f.set_defaults(func=cmd_figure1)

    m = sub.add_parser("metrics-audit", help="randomized gamma and P-metric inequality suites")
    common(m, config=False)
    m.add_argument("--trials", type=int, default=1000)
    m.add_argument("--n", type=int, default=100_000, help="replicates per trial")
    m.set_defaults(func=cmd_metrics_audit)

    d = sub.add_parser("fdd-check", help="empirical vs exact finite-dimensional CDF")
    common(d)
    d.add_argument("--n", type=int, default=None)
    d.set_defaults(func=cmd_fdd_check)

    x = sub.add_parser("maxid-check", help="field at mu vs max of independent fields at mu/n")
    common(x)
    x.add_argument("--n", type=int, default=None)
    x.add_argument("--parts", type=int, default=4)
    x.set_defaults(func=cmd_maxid_check)

    c = sub.add_parser("classify", help="conservative/dissipative verdict from growth curves")
    common(c)
    c.add_argument("--psi", choices=sorted(PSI_REGISTRY), default=None)
    c.add_argument("--radii", default=None, help="comma-separated increasing radii")
    c.add_argument("--samples", type=int, default=None)
    c.add_argument("--ratio", type=float, default=None, help="divergence ratio (> 1)")
    c.add_argument("--expected", choices=("conservative", "dissipative", "undecided"), default=None)
    c.add_argument("--curves", default=None, help="write growth curves CSV here")
    c.set_defaults(func=cmd_classify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "error_budget", None) is not None and not args.error_budget > 0:
        print("error: error budget must be > 0", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if getattr(args, "report", None):
            rep = run_report(sys.argv if argv is None else ["idfields", *argv], [], t0)
            rep.update({"pass": False, "error": str(exc)})
            Path(args.report).write_text(json.dumps(rep, indent=2) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
