"""Empirical conservative/dissipative classification through the integral test.

For atoms omega sampled from mu restricted to a model core, the growth curve
S_R(omega) = int_{[-R, R]^d} psi(|f_t(omega)|) dt is evaluated on a list of
radii.  Conservative flows make S_R diverge, dissipative ones make it
converge.  At finite R the decision rests on how the ensemble mean curve
grows over the last radii:

    shell = (S_m - S_{m-b}) / (S_{m-b} - S_{m-2b})

with b = 2 (radii doubling, so each shell is a factor 4 in R).  A diverging
integral keeps shells growing (shell >= 1.25); a converging one has shells
shrinking (shell <= 0.8).  The per-omega fraction with S_m / S_1 >= q is
reported alongside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import DEFAULT_BUDGET, FieldRealization, simulate_config
from .integrator import field_values
from .point_process import PointConfig
from .quad import DEFAULT_QUAD
from .rng import normalize_seed, stream
from .spectral.base import SpectralModel

PSI_REGISTRY: dict = {}

SHELL_CONSERVATIVE = 1.25
SHELL_DISSIPATIVE = 0.8
MAX_UNDECIDED = 0.10
LABEL_CHUNK = 1024  # atoms per growth-curve batch


def register_psi(name: str, func, check_positive: bool = True):
    """Register psi; it must be positive on (0, inf) and vanish at 0."""
    if check_positive:
        x = np.concatenate([np.geomspace(1e-2, 1e8, 101), [0.0]])
        y = np.asarray(func(x), float)
        if not (np.all(y[:-1] > 0) and np.all(np.isfinite(y))):
            raise ValueError(f"psi {name!r} must be finite and > 0 on (0, inf)")
        if y[-1] != 0:
            raise ValueError(f"psi {name!r} must vanish at 0")
    PSI_REGISTRY[name] = func
    return func


def _min1_sq(x):
    return np.minimum(1.0, np.asarray(x, float) ** 2)


def _exp_inv(x):
    x = np.abs(np.asarray(x, float))
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


register_psi("min1_sq", _min1_sq)
register_psi("exp_inv", _exp_inv)


@dataclass(frozen=True)
class FlowClassConfig:
    psi: str = "min1_sq"
    radii: tuple = tuple(float(2 ** j) for j in range(1, 8))
    samples_per_radius: int = 200
    divergence_ratio: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.psi not in PSI_REGISTRY:
            raise ValueError(f"unknown psi {self.psi!r}; registered: {sorted(PSI_REGISTRY)}")
        r = np.asarray(self.radii, float)
        if r.ndim != 1 or len(r) < 3 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ValueError("radii must be an increasing list of at least 3 positive values")
        if self.samples_per_radius < 1:
            raise ValueError("samples_per_radius must be >= 1")
        if not self.divergence_ratio > 1:
            raise ValueError("divergence_ratio must be > 1")

    @property
    def psi_func(self):
        return PSI_REGISTRY[self.psi]


@dataclass(frozen=True, eq=False)
class FlowClassReport:
    verdict: str
    radii: np.ndarray
    growth_curve: np.ndarray
    diverging_fraction: float
    shell_ratio: float
    mean_ratio: float
    labels: np.ndarray
    psi: str
    psi_integral: float
    core_mass: float
    model: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "model": self.model,
            "psi": self.psi,
            "psi_integral": self.psi_integral,
            "radii": self.radii.tolist(),
            "verdict": self.verdict,
            "diverging_fraction": self.diverging_fraction,
            "shell_ratio": self.shell_ratio,
            "mean_ratio": self.mean_ratio,
            "n_samples": int(self.growth_curve.shape[0]),
            "core_mass": self.core_mass,
        }

    def curves_csv(self) -> str:
        head = "omega," + ",".join(f"R={r:g}" for r in self.radii)
        rows = [f"{i}," + ",".join(f"{v:.10g}" for v in row) for i, row in enumerate(self.growth_curve)]
        return "\n".join([head] + rows) + "\n"


def check_psi(model: SpectralModel, config: FlowClassConfig, quad=DEFAULT_QUAD) -> float:
    """int psi(|f_0|) dmu; error "psi not admissible" when it is not finite."""
    psi = config.psi_func
    origin = np.zeros((1, model.dim))
    try:
        est = model.integrate(lambda v: psi(np.abs(v[..., 0])), origin, quad)
    except Exception as exc:  # quadrature failure means divergence at this budget
        raise ValueError(f"psi not admissible for {model.kind}: {exc}") from None
    if not np.isfinite(est.value) or est.value > 1e12:
        raise ValueError(f"psi not admissible for {model.kind}: integral of psi(|f_0|) is {est.value}")
    return float(est.value)


def _shell(curve: np.ndarray, b: int) -> np.ndarray:
    """Shell ratio along the last axis; 0/0 counts as 0 (a saturated curve)."""
    c = np.atleast_2d(curve)
    top = c[:, -1] - c[:, -1 - b]
    bot = c[:, -1 - b] - c[:, -1 - 2 * b]
    scale = np.maximum(np.abs(c[:, -1]), 1e-300)
    top = np.where(top <= 1e-12 * scale, 0.0, top)
    bot = np.where(bot <= 1e-12 * scale, 0.0, bot)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(bot > 0, top / np.where(bot > 0, bot, 1.0), np.where(top > 0, np.inf, 0.0))
    return r


def _block(radii) -> int:
    return 2 if len(radii) >= 5 else 1


def _label(curves: np.ndarray, radii, q: float):
    """Per-curve labels C / D / U (undecided) and the growth ratio S_m / S_1."""
    shell = _shell(curves, _block(radii))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(curves[:, 0] > 0, curves[:, -1] / np.where(curves[:, 0] > 0, curves[:, 0], 1.0),
                         np.where(curves[:, -1] > 0, np.inf, 1.0))
    lab = np.full(len(curves), "U")
    lab[(shell >= SHELL_CONSERVATIVE) & (ratio >= q)] = "C"
    lab[shell <= SHELL_DISSIPATIVE] = "D"
    return lab, ratio


def classify(model: SpectralModel, config: FlowClassConfig = FlowClassConfig()) -> FlowClassReport:
    if not model.stationary:
        raise ValueError(f"model kind {model.kind!r} has no flow (not stationary)")
    psi_int = check_psi(model, config)
    rng = stream(config.seed, "flowclass")
    radii = np.asarray(config.radii, float)
    locs, marks, core_mass = model.sample_core(config.samples_per_radius, rng)
    curves = model.growth_curves(locs, marks, radii, config.psi_func)
    # the curves are integrals of a nonnegative function over nested boxes
    curves = np.maximum.accumulate(curves, axis=1)
    labels, ratio = _label(curves, radii, config.divergence_ratio)
    mean = curves.mean(0)
    shell = float(_shell(mean, _block(radii))[0])
    mean_ratio = float(mean[-1] / mean[0]) if mean[0] > 0 else (math.inf if mean[-1] > 0 else 1.0)
    if shell >= SHELL_CONSERVATIVE and mean_ratio >= config.divergence_ratio:
        verdict = "conservative"
    elif shell <= SHELL_DISSIPATIVE:
        verdict = "dissipative"
    else:
        verdict = "undecided"
    return FlowClassReport(verdict, radii, curves, float(np.mean(ratio >= config.divergence_ratio)), shell,
                           mean_ratio, labels, config.psi, psi_int, float(core_mass), model.describe())


def label_atoms(model: SpectralModel, config: PointConfig, flow: FlowClassConfig) -> np.ndarray:
    """Conservative flag per atom, by the same growth-curve rule centred at each atom's anchor."""
    if len(config) == 0:
        return np.zeros(0, bool)
    radii = np.asarray(flow.radii, float)
    parts = []
    for lo in range(0, len(config), LABEL_CHUNK):
        sub = config.subset(np.arange(lo, min(lo + LABEL_CHUNK, len(config))))
        centers = model.anchors(sub.locations, sub.marks)
        parts.append(model.growth_curves(sub.locations, sub.marks, radii, flow.psi_func, centers))
    curves = np.concatenate(parts)
    curves = np.maximum.accumulate(curves, axis=1)
    lab, ratio = _label(curves, radii, flow.divergence_ratio)
    und = float(np.mean(lab == "U"))
    if und > MAX_UNDECIDED:
        raise ValueError(f"{und:.0%} of atoms are undecided (limit {MAX_UNDECIDED:.0%}); use larger radii")
    # the few undecided atoms go by the growth ratio alone
    return np.where(lab == "U", ratio >= flow.divergence_ratio, lab == "C")


def cd_split_simulate(model: SpectralModel, flow: FlowClassConfig, grid, seed=None,
                      budget: float = DEFAULT_BUDGET) -> tuple[FieldRealization, FieldRealization]:
    """Fields generated by the conservative and dissipative atoms of one configuration.

    The full field is recovered pointwise: max of the two for max-oriented
    models, min for min-oriented ones (the sup of the max form either way).
    """
    seed = normalize_seed(seed)
    pts = model.index_points(grid)
    config, choice = simulate_config(model, pts, seed, budget)
    cons = label_atoms(model, config, flow)
    out = []
    for part in (config.subset(cons), config.subset(~cons)):
        vals = field_values(model, pts, part)
        if model.orientation == "min":
            # an empty part contributes +inf to a min; keep values finite for the record
            vals = np.where(np.isfinite(vals), vals, np.finfo(float).max)
        out.append(FieldRealization(pts, vals, model.describe(), seed, choice.window,
                                    {"threshold": choice.threshold, "error_bound": choice.error_bound,
                                     "exact": choice.exact, "atoms": len(part)}))
    return out[0], out[1]
