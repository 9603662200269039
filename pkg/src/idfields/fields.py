"""Simulation of whole fields and of one-point margins."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrator import field_values, max_integral_batch
from .point_process import PointConfig, sample_poisson, sample_poisson_batch
from .rng import derive_seed, normalize_seed
from .spectral.base import SpectralModel, WindowChoice

DEFAULT_BUDGET = 1e-3
BATCH_ATOMS = 4_000_000


@dataclass(frozen=True, eq=False)
class FieldRealization:
    grid: np.ndarray
    values: np.ndarray
    model_config: dict
    seed: int
    window: object
    truncation: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "model": self.model_config,
            "seed": self.seed,
            "window": self.window.describe(),
            "truncation": self.truncation,
            "grid": np.asarray(self.grid).tolist(),
            "values": np.asarray(self.values).tolist(),
        }


def _truncation(choice: WindowChoice) -> dict:
    return {"threshold": choice.threshold, "error_bound": choice.error_bound, "exact": choice.exact}


def simulate_config(model: SpectralModel, grid, seed, budget: float = DEFAULT_BUDGET):
    """(PointConfig, WindowChoice) for one field on ``grid``."""
    pts = model.index_points(grid)
    choice = model.window_for(pts, budget)
    config = sample_poisson(model.window_intensity(choice.window), choice.window, seed)
    return config, choice


def realize(model: SpectralModel, grid, config: PointConfig, choice: WindowChoice, config_echo=None) -> FieldRealization:
    pts = model.index_points(grid)
    vals = field_values(model, pts, config)
    return FieldRealization(pts, vals, config_echo or model.describe(), config.seed, choice.window, _truncation(choice))


def simulate_field(model: SpectralModel, grid, seed=None, budget: float = DEFAULT_BUDGET,
                   config_echo=None) -> FieldRealization:
    seed = normalize_seed(seed)
    config, choice = simulate_config(model, grid, seed, budget)
    return realize(model, grid, config, choice, config_echo)


def simulate_margin(model: SpectralModel, points, n_rep: int, seed=None, budget: float = DEFAULT_BUDGET,
                    raw: bool = False) -> np.ndarray:
    """``n_rep`` independent replicates of the field at ``points``, shape (n_rep, n_points).

    Replicates are drawn in batches; batch j uses the child seed
    derive_seed(seed, "margin", j).  ``raw`` returns the max-integral before
    the min-orientation transform.
    """
    seed = normalize_seed(seed)
    pts = model.index_points(points)
    choice = model.window_for(pts, budget)
    intensity = model.window_intensity(choice.window)
    mass = intensity.mass(choice.window)
    per = max(1, int(BATCH_ATOMS / max(mass * max(choice.window.mark.ncols, 1) ** 0.5, 1.0)))
    out = np.empty((n_rep, len(pts)))
    j = 0
    for start in range(0, n_rep, per):
        m = min(per, n_rep - start)
        batch = sample_poisson_batch(intensity, choice.window, derive_seed(seed, "margin", j), m)
        out[start:start + m] = max_integral_batch(model, pts, batch)
        j += 1
    return out if raw else model.field_transform(out)
