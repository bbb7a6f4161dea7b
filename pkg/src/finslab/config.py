"""Run configuration: ``key = value`` config files with CLI overrides.

Unknown keys, malformed norm specs and exponents <= 1 are rejected with the
offending line number.  Defaults: seed=42, rtol=1e-8, grad_tol=1e-7.
"""

from __future__ import annotations

import dataclasses

from .norms import NormError, parse_norm


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class RunConfig:
    norm: str = "euclidean"
    dim: int = 2
    domain: str = "disk"
    p_list: tuple = (10.0, 20.0, 50.0, 100.0, 200.0, 400.0, 800.0)
    radius: float = 1.0
    rtol: float = 1e-8
    grad_tol: float = 1e-7
    quad_tol: float = 1e-10
    mesh_h: float = 1.0 / 32.0
    seed: int = 42
    out: str = "out"
    model: str = "best"
    threads: int = 1
    budget: int = 64
    max_iters: int = 20000

    def validate(self):
        try:
            parse_norm(self.norm, dim=self.dim)
        except NormError as exc:
            raise ConfigError(str(exc)) from exc
        if self.dim < 2:
            raise ConfigError("dim must be >= 2")
        if not self.p_list:
            raise ConfigError("p_list must not be empty")
        if any(p <= 1 for p in self.p_list):
            raise ConfigError("every p must be > 1")
        if list(self.p_list) != sorted(self.p_list):
            raise ConfigError("p_list must be increasing")
        for name in ("radius", "rtol", "grad_tol", "quad_tol", "mesh_h"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.model not in ("best", "logp", "p", "plogp"):
            raise ConfigError(f"unknown extrapolation model {self.model!r}")
        if self.threads < 1 or self.max_iters < 1 or self.budget < 1:
            raise ConfigError("threads, budget and max_iters must be >= 1")
        return self

    def norm_model(self, dual_mode="analytic"):
        return parse_norm(self.norm, dim=self.dim, dual_mode=dual_mode)


_FIELD_TYPES = {
    "norm": str, "dim": int, "domain": str, "p_list": "plist",
    "radius": float, "rtol": float, "grad_tol": float, "quad_tol": float,
    "mesh_h": float, "seed": int, "out": str, "model": str,
    "threads": int, "budget": int, "max_iters": int,
}


def _parse_p_list(text, where):
    out = []
    for tok in text.replace(" ", "").split(","):
        if not tok:
            continue
        try:
            out.append(float(tok))
        except ValueError as exc:
            raise ConfigError(f"{where}: bad p value {tok!r}") from exc
    return tuple(out)


def parse_config(text, overrides=None):
    """Parse ``key = value`` lines (# comments) into a validated RunConfig."""
    values = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            if kind == "plist":
                values[key] = _parse_p_list(val, f"line {line_no}")
            else:
                values[key] = kind(val)
        except (ValueError, ConfigError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {line_no}: bad value for {key}: {val!r}") from exc
    if overrides:
        for key, val in overrides.items():
            if val is not None:
                values[key] = val
    cfg = RunConfig(**values)
    return cfg.validate()


def load_config(path=None, overrides=None):
    text = ""
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        return parse_config(text, overrides)
    except ConfigError as exc:
        where = f"{path}: " if path else ""
        raise ConfigError(f"{where}{exc}") from exc
