"""Plain ``key = value`` experiment configuration.

Example::

    # canonical disk
    polygon = disk.txt
    mode = OPTIMIZE
    N = 1
    r = 0.25
    p = 2
    K = 5

Relative paths are resolved against the directory of the config file. Keys left out
take the defaults in ``DEFAULTS``; ``eps`` defaults to 1e-3 * diam^2 and ``target_h``
to sqrt(eps) / 3.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .geometry import Polygon, load_polygon
from .optimizer import DescentConfig


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


class Mode(str, Enum):
    OPTIMIZE = "OPTIMIZE"
    DISTANCE_FIELD = "DISTANCE_FIELD"
    GRADIENT_CHECK = "GRADIENT_CHECK"
    EPSILON_SWEEP = "EPSILON_SWEEP"


@dataclass(frozen=True)
class ExperimentConfig:
    polygon: Path
    mode: Mode
    N: int
    r: float
    p: float
    eps: float
    target_h: float
    descent: DescentConfig
    K: int = 5
    out: Path = Path("out")
    eps_sweep: tuple[float, ...] = ()
    centers: tuple[tuple[float, float], ...] | None = None
    workers: int = 1

    def load_polygon(self) -> Polygon:
        return load_polygon(self.polygon)

    def with_overrides(self, mode: str | None = None, seed: int | None = None,
                       out: str | Path | None = None) -> "ExperimentConfig":
        cfg = self
        if mode is not None:
            cfg = replace(cfg, mode=_mode(mode, "mode"))
        if seed is not None:
            cfg = replace(cfg, descent=replace(cfg.descent, seed=int(seed)))
        if out is not None:
            cfg = replace(cfg, out=Path(out))
        return cfg

    def resolved(self) -> dict:
        """Flat record of every setting, for the manifest."""
        d = asdict(self)
        d["polygon"] = str(self.polygon)
        d["out"] = str(self.out)
        d["mode"] = self.mode.value
        d["eps_sweep"] = list(self.eps_sweep)
        d["centers"] = None if self.centers is None else [list(c) for c in self.centers]
        return d


# key -> (parser, default); None marks a required key
DEFAULTS: dict[str, object] = {
    "polygon": None,
    "mode": "OPTIMIZE",
    "N": 1,
    "r": None,
    "p": 2.0,
    "eps": "auto",
    "target_h": "auto",
    "K": 5,
    "out": "out",
    "eps_sweep": "auto",
    "centers": "none",
    "workers": 1,
    "alpha0": "auto",
    "c": 1e-4,
    "beta": 0.5,
    "max_iter": 200,
    "step_tol": "auto",
    "max_trials": 30,
    "seed": 0,
    "tol": 1e-10,
    "M": 64,
    "delta": "auto",
}


def _mode(text: str, key: str) -> Mode:
    try:
        return Mode(text.strip().upper())
    except ValueError:
        raise ConfigError(f"{key}: unknown mode {text!r}, expected one of {[m.value for m in Mode]}")


def _number(raw: dict, key: str, kind=float):
    text = str(raw[key])
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind.__name__}")


def _optional(raw: dict, key: str):
    return None if str(raw[key]).lower() == "auto" else _number(raw, key)


def _centers(text: str) -> tuple[tuple[float, float], ...] | None:
    if text.strip().lower() == "none":
        return None
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = chunk.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError(f"centers: expected 'x y; x y; ...', got {chunk!r}")
        out.append((float(parts[0]), float(parts[1])))
    return tuple(out)


def read_pairs(path: Path) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    raw = {k: v for k, v in DEFAULTS.items()}
    raw.update(read_pairs(path))
    for key, value in raw.items():
        if value is None:
            raise ConfigError(f"{key}: required key is missing")

    poly_path = Path(str(raw["polygon"]))
    if not poly_path.is_absolute():
        poly_path = path.parent / poly_path
    if not poly_path.is_file():
        raise ConfigError(f"polygon: file not found: {poly_path}")
    try:
        poly = load_polygon(poly_path)
    except ValueError as e:
        raise ConfigError(f"polygon: {e}")

    N = _number(raw, "N", int)
    r = _number(raw, "r")
    p = _number(raw, "p")
    K = _number(raw, "K", int)
    workers = _number(raw, "workers", int)
    if N < 1:
        raise ConfigError("N: must be >= 1")
    if not r > 0:
        raise ConfigError("r: must be positive")
    if p < 1:
        raise ConfigError("p: must be >= 1")
    if K < 1:
        raise ConfigError("K: must be >= 1")
    if workers < 1:
        raise ConfigError("workers: must be >= 1")

    diam = poly.diameter
    eps = 1e-3 * diam ** 2 if raw["eps"] == "auto" else _number(raw, "eps")
    if not eps > 0:
        raise ConfigError("eps: must be positive")
    if raw["eps_sweep"] == "auto":
        sweep = (4 * eps, eps, eps / 4)
    else:
        try:
            sweep = tuple(float(s) for s in str(raw["eps_sweep"]).replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"eps_sweep: cannot read {raw['eps_sweep']!r}")
        if len(sweep) < 2 or any(not e > 0 for e in sweep):
            raise ConfigError("eps_sweep: need at least two positive values")
    mode = _mode(str(raw["mode"]), "mode")
    smallest = min(sweep) if mode is Mode.EPSILON_SWEEP else eps
    target_h = math.sqrt(smallest) / 3 if raw["target_h"] == "auto" else _number(raw, "target_h")
    if not target_h > 0:
        raise ConfigError("target_h: must be positive")

    centers = _centers(str(raw["centers"]))
    if centers is not None and len(centers) != N:
        raise ConfigError(f"centers: {len(centers)} given for N = {N}")

    try:
        descent = DescentConfig(p=p, eps=eps, target_h=target_h, alpha0=_optional(raw, "alpha0"),
                                c=_number(raw, "c"), beta=_number(raw, "beta"),
                                max_iter=_number(raw, "max_iter", int),
                                step_tol=_optional(raw, "step_tol"),
                                max_trials=_number(raw, "max_trials", int),
                                seed=_number(raw, "seed", int), tol=_number(raw, "tol"),
                                M=_number(raw, "M", int), delta=_optional(raw, "delta"))
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"descent settings: {e}")

    out = Path(str(raw["out"]))
    if not out.is_absolute():
        out = path.parent / out
    return ExperimentConfig(poly_path, mode, N, r, p, eps, target_h, descent, K, out,
                            tuple(sorted(sweep, reverse=True)), centers, workers)


def placement_centers(cfg: ExperimentConfig) -> np.ndarray | None:
    return None if cfg.centers is None else np.array(cfg.centers, dtype=float)
