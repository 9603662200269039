"""Build models from plain dict configs (parsed from JSON or TOML)."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from ..gaussian import MAX_NODES, square_grid
from .boolean import make_boolean
from .cells import frechet_table, make_cells, make_frechet_lift, make_iid
from .lines import make_poisson_line, make_poisson_line_maxstable
from .moving import make_moving_maxima
from .penrose import make_penrose
from .storms import GrainSet, StormProfile, _no_extra

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KINDS = ("iid", "moving_maxima", "poisson_line", "poisson_line_maxstable", "penrose",
         "boolean_set", "frechet_lift", "cells")


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        return tomllib.loads(text)
    return json.loads(text)


def grid_from_spec(spec) -> np.ndarray:
    """Index grid from an explicit list or one of
    {"linspace": [start, stop, num]} or {"square": [size, extent]}."""
    if isinstance(spec, dict):
        _no_extra(spec, {"linspace", "square"}, "grid")
        if len(spec) != 1:
            raise ValueError("grid spec needs exactly one of 'linspace' or 'square'")
        if "linspace" in spec:
            a, b, n = spec["linspace"]
            return np.linspace(float(a), float(b), int(n))[:, None]
        size, extent = spec["square"]
        return square_grid(int(size), float(extent))
    g = np.asarray(spec, float)
    return g[:, None] if g.ndim == 1 else g


def model_from_config(cfg: dict):
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    lam = float(cfg.get("lambda", 1.0))
    if kind == "moving_maxima":
        _no_extra(cfg, {"lambda", "d", "storm"}, kind)
        d = int(cfg.get("d", 1))
        return make_moving_maxima(StormProfile.from_dict(cfg.get("storm", {})), lam, d)
    if kind == "poisson_line":
        _no_extra(cfg, {"lambda", "storm"}, kind)
        return make_poisson_line(StormProfile.from_dict(cfg.get("storm", {})), lam)
    if kind == "poisson_line_maxstable":
        _no_extra(cfg, {"lambda", "alpha", "storm"}, kind)
        return make_poisson_line_maxstable(StormProfile.from_dict(cfg.get("storm", {})), lam,
                                           float(cfg.get("alpha", 1.0)))
    if kind == "boolean_set":
        _no_extra(cfg, {"lambda", "d", "grain"}, kind)
        d = int(cfg.get("d", 2))
        return make_boolean(GrainSet.from_dict(cfg["grain"], d), lam, d)
    if kind == "iid":
        _no_extra(cfg, {"cdf", "frechet", "index_set"}, kind)
        if ("cdf" in cfg) == ("frechet" in cfg):
            raise ValueError("iid config needs exactly one of 'cdf' or 'frechet'")
        if "cdf" in cfg:
            _no_extra(cfg["cdf"], {"x", "F"}, "cdf")
            x, F = cfg["cdf"]["x"], cfg["cdf"]["F"]
        else:
            _no_extra(cfg["frechet"], {"alpha", "sigma"}, "frechet")
            x, F = frechet_table(float(cfg["frechet"].get("alpha", 1.0)), float(cfg["frechet"].get("sigma", 1.0)))
        return make_iid(x, F, grid_from_spec(cfg["index_set"]))
    if kind == "frechet_lift":
        _no_extra(cfg, {"alpha", "g", "base_masses", "index_set"}, kind)
        idx = cfg.get("index_set")
        return make_frechet_lift(cfg["g"], float(cfg.get("alpha", 1.0)), cfg.get("base_masses"),
                                 None if idx is None else grid_from_spec(idx))
    if kind == "cells":
        _no_extra(cfg, {"masses", "values", "index_set"}, kind)
        idx = cfg.get("index_set")
        return make_cells(cfg["masses"], cfg["values"], None if idx is None else grid_from_spec(idx))
    _no_extra(cfg, {"lambda", "storm", "k", "H", "sigma2", "grid", "max_nodes"}, kind)
    return make_penrose(cfg.get("storm", "brownian"), lam, grid_from_spec(cfg["grid"]), int(cfg.get("k", 1)),
                        float(cfg.get("H", 0.5)), float(cfg.get("sigma2", 1.0)),
                        int(cfg.get("max_nodes", MAX_NODES)))
