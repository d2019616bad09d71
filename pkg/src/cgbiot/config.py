"""Run configuration: flat ``key = value`` files plus command-line overrides."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from .assembly import BiotCoefficients


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    k: int = 2
    r: int = 2
    levels: int = 1
    n0: int = 4
    tau0: float = 0.05
    t_start: float = 1.0
    t_end: float = 2.0
    rho: float = 1.0
    alpha: float = 0.9
    c0: float = 0.01
    E: float = 100.0
    nu: float = 0.35
    K11: float = 1.0
    K22: float = 1.0
    solver: str = "lu"
    M: int = 100
    time_quad: int = 5
    initial_data: str = "ritz"
    displacement_mode: str = "diagonal"
    out: str = ""
    format: str = "md"
    threads: int = 1

    def __post_init__(self):
        env = os.environ.get("BIOT_THREADS")
        if env and self.threads == 1:
            self.threads = int(env)
        self.validate()

    def validate(self):
        if self.k < 1 or self.r < 1:
            raise ConfigError(f"need k >= 1 and r >= 1, got k={self.k}, r={self.r}")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.n0 < 1 or self.tau0 <= 0 or self.t_end <= self.t_start:
            raise ConfigError("invalid mesh or time interval")
        n_slabs = (self.t_end - self.t_start) / self.tau0
        if abs(n_slabs - round(n_slabs)) > 1e-9 * max(1.0, n_slabs):
            raise ConfigError("tau0 must divide the time interval")
        if self.solver not in ("lu", "gmres"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.initial_data not in ("ritz", "nodal"):
            raise ConfigError(f"unknown initial-data mode {self.initial_data!r}")
        if self.format not in ("md", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.M < 1 or self.time_quad < 1:
            raise ConfigError("M and time_quad must be >= 1")
        try:
            self.coefficients()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def coefficients(self) -> BiotCoefficients:
        return BiotCoefficients.from_young_poisson(
            self.E, self.nu, rho=self.rho, alpha=self.alpha, c0=self.c0,
            K=np.diag([self.K11, self.K22]),
        )

    def level_sizes(self, level: int) -> tuple[int, float]:
        """``(cells per side, tau)`` on refinement ``level``."""
        return self.n0 * 2**level, self.tau0 / 2**level

    def n_slabs(self, level: int) -> int:
        return round((self.t_end - self.t_start) / self.level_sizes(level)[1])

    def as_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"int": int, "float": float, "str": str}


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or key not in _TYPES:
            raise ConfigError(f"line {lineno}: cannot parse {raw!r}")
        try:
            out[key] = _CASTS[_TYPES[key]](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return out


def load_config(path: str | None = None, **overrides) -> RunConfig:
    values = {}
    if path:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
