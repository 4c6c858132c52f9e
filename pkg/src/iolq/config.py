"""Flat key=value experiment configuration with bracket-list matrix literals.

Example::

    preset = f16
    q = [[1.0]]
    r = [[1.0]]
    probing_seed = 7
    horizon = 5.0

Unknown keys are rejected so that typos never silently fall back to defaults.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field, fields

import numpy as np


class ConfigError(Exception):
    """Malformed, inconsistent, or unknown configuration input."""


@dataclass
class ExperimentConfig:
    """Fully validated settings for one pipeline run."""

    # plant
    preset: str | None = "f16"
    a: list | None = None
    b: list | None = None
    c: list | None = None
    x0: list | None = None
    x0_seed: int = 0
    # filter
    m_mat: list | None = None
    # weights
    q: list = field(default_factory=lambda: [[1.0]])
    r: list = field(default_factory=lambda: [[1.0]])
    # probing
    probing_seed: int = 7
    probing_count: int = 100
    amp_base: float = 20.0
    amp_range: list = field(default_factory=lambda: [0.0, 20.0])
    freq_range: list = field(default_factory=lambda: [-500.0, 500.0])
    phase_range: list = field(default_factory=lambda: [0.0, 6.283185307179586])
    # integration / collection
    dt: float = 1e-4
    sample_dt: float = 0.01
    horizon: float = 5.0
    # learning
    schedule_offset: float = 1.0
    escape_scale: float = 5.0
    escape_growth: float = 2.0
    p0_scale: float = 1.0
    delta: float = 1e-4
    max_iter: int = 2000
    rank_rcond: float = 1e-8
    allow_rank_deficient: bool = False
    # oracle
    theta_y_seed: int = 0
    # evaluation
    eval_horizon: float = 28.0
    eval_x0_seed: int = 11

    def __post_init__(self):
        if self.preset is None and (self.a is None or self.b is None
                                    or self.c is None):
            raise ConfigError("either preset or explicit (a, b, c) is required")
        if self.preset is not None and self.preset != "f16":
            raise ConfigError(f"unknown preset {self.preset!r}")
        for name in ("dt", "sample_dt", "horizon", "eval_horizon", "delta",
                     "schedule_offset", "escape_scale", "escape_growth",
                     "p0_scale", "rank_rcond"):
            if float(getattr(self, name)) <= 0 and name != "delta":
                raise ConfigError(f"{name} must be positive")
        if self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        if self.max_iter < 1 or self.probing_count < 0:
            raise ConfigError("max_iter must be >= 1 and probing_count >= 0")


_BOOLS = {"true": True, "false": False, "yes": True, "no": False,
          "on": True, "off": False}
_STRING_KEYS = {"preset"}


def _parse_value(key, raw):
    raw = raw.strip()
    if key in _STRING_KEYS:
        return None if raw.lower() in ("none", "") else raw
    low = raw.lower()
    if low in _BOOLS:
        return _BOOLS[low]
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"cannot parse value for {key!r}: {raw!r}") from exc


def parse_config(text):
    """Parse flat key=value text into an :class:`ExperimentConfig`."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    """Read and parse a configuration file."""
    with open(path) as fh:
        return parse_config(fh.read())


def build_instances(cfg, seed_override=None):
    """Materialize (plant, filter bank, weights, probing) from a config."""
    from .plant import (LtiPlant, ProbingSignal, WeightSpec, F16_M, f16_plant,
                        make_probing, random_unit_vector)
    from .realization import build_filter

    if cfg.preset == "f16":
        x0 = None if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
        plant = f16_plant(x0=x0, x0_seed=cfg.x0_seed)
        m_mat = F16_M if cfg.m_mat is None else np.asarray(cfg.m_mat, float)
    else:
        a = np.asarray(cfg.a, dtype=float)
        b = np.atleast_2d(np.asarray(cfg.b, dtype=float))
        c = np.atleast_2d(np.asarray(cfg.c, dtype=float))
        if cfg.x0 is not None:
            x0 = np.asarray(cfg.x0, dtype=float)
        else:
            x0 = random_unit_vector(a.shape[0], cfg.x0_seed)
        plant = LtiPlant(a, b, c, x0)
        if cfg.m_mat is None:
            raise ConfigError("m_mat is required for explicit plants")
        m_mat = np.asarray(cfg.m_mat, dtype=float)
    fb = build_filter(plant.n, plant.m, plant.p, m_mat)
    weights = WeightSpec(np.asarray(cfg.q, float), np.asarray(cfg.r, float))
    seed = cfg.probing_seed if seed_override is None else seed_override
    if cfg.probing_count == 0:
        probing = ProbingSignal(amps=np.empty(0), freqs=np.empty(0),
                                phases=np.empty(0), seed=seed)
    else:
        probing = make_probing(
            seed,
            count=cfg.probing_count,
            amp_base=cfg.amp_base,
            amp_range=tuple(cfg.amp_range),
            freq_range=tuple(cfg.freq_range),
            phase_range=tuple(cfg.phase_range),
        )
    return plant, fb, weights, probing
