"""Flat dotted-key experiment configuration.

Config files are plain text, one ``key = value`` per line, ``#`` comments.
Keys are dotted paths; values are parsed as int, then float, then string.
Lists are comma separated.  Example::

    lattice.scale = 1.7724538509055159
    lattice.ratio = 2
    tower.depth = 4
    bundle.N = 2
    truncation.rtol = 1e-12
    quadrature.grid = 16
    sampling.n_samples = 2000
    sampling.master_seed = 20260810
    forms.presets = k10,k11,mix
    output.dir = runs
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fock import BundleParams
from .lattice import Tower, make_matrix_tower, make_product_tower
from .quotient import TruncationPolicy

__all__ = ["ExperimentConfig", "parse_flat_config", "load_config", "default_config_text"]

DEFAULT_SCALE = math.sqrt(math.pi)


@dataclass
class ExperimentConfig:
    """Resolved parameters of one experiment run."""

    scale: float = DEFAULT_SCALE
    ratio: int = 2
    depth: int = 4
    matrices: list = field(default_factory=list)  # explicit tower steps, optional
    N: int = 2
    trunc_rtol: float = 1e-12
    trunc_max_radius: float = 60.0
    grid: int = 16
    budget: int = 100_000_000
    n_samples: int = 2000
    master_seed: int = 20260810
    forms: list = field(default_factory=lambda: ["k10", "k11", "mix"])
    out_dir: str = "runs"
    dump_zeros: bool = False

    def tower(self) -> Tower:
        if self.matrices:
            g1 = complex(self.scale)
            g2 = complex(0.0, self.scale)
            return make_matrix_tower(g1, g2, self.matrices)
        return make_product_tower(self.scale, self.ratio, self.depth)

    def bundle(self, tower: Tower) -> BundleParams:
        return BundleParams(N=self.N, d0=tower.d0)

    def truncation(self) -> TruncationPolicy:
        return TruncationPolicy(rtol=self.trunc_rtol, max_radius=self.trunc_max_radius)

    def as_dict(self) -> dict:
        return asdict(self)


def parse_flat_config(text: str) -> dict:
    """Parse ``key = value`` lines into a flat dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    return value


def _parse_matrices(value: str) -> list:
    mats = []
    for chunk in value.split(";"):
        nums = [int(x) for x in chunk.split(",")]
        if len(nums) != 4:
            raise ConfigError(f"matrix chunk {chunk!r} must have 4 integers")
        mats.append(np.array(nums, dtype=int).reshape(2, 2))
    return mats


_KEY_MAP = {
    "lattice.scale": "scale",
    "lattice.ratio": "ratio",
    "tower.depth": "depth",
    "bundle.N": "N",
    "truncation.rtol": "trunc_rtol",
    "truncation.max_radius": "trunc_max_radius",
    "quadrature.grid": "grid",
    "quadrature.budget": "budget",
    "sampling.n_samples": "n_samples",
    "sampling.master_seed": "master_seed",
    "output.dir": "out_dir",
    "output.dump_zeros": "dump_zeros",
}


def load_config(path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Load a config file (optional) and apply CLI overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        text = Path(path).read_text()
        flat = parse_flat_config(text)
        for key, raw in flat.items():
            if key == "tower.matrices":
                cfg.matrices = _parse_matrices(raw)
            elif key == "forms.presets":
                cfg.forms = [s.strip() for s in raw.split(",") if s.strip()]
            elif key in _KEY_MAP:
                setattr(cfg, _KEY_MAP[key], _coerce(raw))
            else:
                raise ConfigError(f"unknown config key {key!r}")
    for attr, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, attr, value)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.depth < 1:
        raise ConfigError("tower.depth must be >= 1")
    if cfg.scale <= 0 or cfg.grid < 8 or cfg.n_samples < 1 or cfg.budget < 1:
        raise ConfigError("numeric config fields must be positive (grid >= 8)")
    if not 0 < cfg.trunc_rtol < 1:
        raise ConfigError("truncation.rtol must lie in (0, 1)")
    tower = cfg.tower()  # raises QuantizationError on bad scale
    if (cfg.N * tower.d0) % 2 != 0:
        raise ConfigError(f"N*d0 = {cfg.N * tower.d0} must be even")


def default_config_text() -> str:
    cfg = ExperimentConfig()
    return (
        f"lattice.scale = {cfg.scale!r}\n"
        f"lattice.ratio = {cfg.ratio}\n"
        f"tower.depth = {cfg.depth}\n"
        f"bundle.N = {cfg.N}\n"
        f"truncation.rtol = {cfg.trunc_rtol!r}\n"
        f"truncation.max_radius = {cfg.trunc_max_radius!r}\n"
        f"quadrature.grid = {cfg.grid}\n"
        f"quadrature.budget = {cfg.budget}\n"
        f"sampling.n_samples = {cfg.n_samples}\n"
        f"sampling.master_seed = {cfg.master_seed}\n"
        f"forms.presets = {','.join(cfg.forms)}\n"
        f"output.dir = {cfg.out_dir}\n"
    )
