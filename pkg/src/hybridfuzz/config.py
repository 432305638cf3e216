"""Engine configuration and its key=value text form."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Optional

MODES = ("FULL", "LOB", "NQ-NS", "NS", "AllS", "FuzzOnly")
TREE_MODES = ("FULL", "NS", "AllS", "NQ-NS")


class ConfigError(ValueError):
    pass


@dataclass
class EngineConfig:
    mode: str = "FULL"
    lam: float = 0.1
    delta_log10: float = -150.0
    # None selects gamma_large or gamma_small from the program's modelled size
    gamma: Optional[float] = None
    gamma_small: float = 80.0
    gamma_large: float = 300.0
    large_program_lines: int = 10_000
    k_dim: int = 10
    period: float = 5.0
    sample_poly: int = 300
    sample_box: int = 150
    per_seed_budget: float = 2.0
    solve_seconds: float = 0.05
    budget: float = 60.0
    max_execs: Optional[int] = None
    seed: int = 0
    lockstep: bool = True
    bitmap_size: int = 1 << 16
    depth_bound: int = 15_000
    step_budget: int = 1_000_000
    poll: float = 0.01

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lambda must lie in [0, 1]")
        if not self.delta_log10 <= 0.0:
            raise ConfigError("delta must lie in (0, 1]")
        for name in ("gamma", "gamma_small", "gamma_large"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"{name} must be nonnegative")
        for name in ("k_dim", "sample_poly", "sample_box", "depth_bound", "step_budget"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("period", "per_seed_budget", "solve_seconds", "budget", "poll"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.bitmap_size < 1 or self.bitmap_size & (self.bitmap_size - 1):
            raise ConfigError("bitmap_size must be a power of two")
        if self.max_execs is not None and self.max_execs < 1:
            raise ConfigError("max_execs must be positive")

    @property
    def delta(self) -> float:
        return 10.0 ** self.delta_log10

    @property
    def log_delta(self) -> float:
        return self.delta_log10 * math.log(10.0)

    def gamma_for(self, total_lines: int) -> float:
        if self.gamma is not None:
            return self.gamma
        return self.gamma_large if total_lines >= self.large_program_lines else self.gamma_small

    def replace(self, **changes) -> "EngineConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    # text form ---------------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                text = "none"
            elif isinstance(v, bool):
                text = "true" if v else "false"
            elif isinstance(v, str):
                text = f'"{v}"'
            else:
                text = repr(v)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "EngineConfig":
        values = parse_config_text(text)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "EngineConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs: Dict[str, Any] = {}
        for key, raw in values.items():
            key = ALIASES.get(key, key)
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw)
        return cls(**kwargs)


ALIASES = {"lambda": "lam", "lambda_": "lam", "k": "k_dim"}

_TYPES = {
    "mode": str,
    "lam": float, "delta_log10": float, "gamma": float, "gamma_small": float, "gamma_large": float,
    "large_program_lines": int, "k_dim": int, "period": float, "sample_poly": int, "sample_box": int,
    "per_seed_budget": float, "solve_seconds": float, "budget": float, "max_execs": int, "seed": int,
    "lockstep": bool, "bitmap_size": int, "depth_bound": int, "step_budget": int, "poll": float,
}


def _coerce(key: str, raw: Any) -> Any:
    typ = _TYPES[key]
    if raw is None:
        return None
    if isinstance(raw, str):
        s = raw.strip()
        if s.lower() in ("none", "null", "auto"):
            if key in ("gamma", "max_execs"):
                return None
            raise ConfigError(f"{key} cannot be none")
        if typ is bool:
            if s.lower() in ("true", "yes", "1", "on"):
                return True
            if s.lower() in ("false", "no", "0", "off"):
                return False
            raise ConfigError(f"{key} expects a boolean, got {raw!r}")
        if typ is str:
            return s.strip('"').strip("'")
        try:
            if typ is int:
                return int(s.replace("_", ""), 0)
            return float(s)
        except ValueError as e:
            raise ConfigError(f"{key}: {e}") from None
    if typ is float and isinstance(raw, int) and not isinstance(raw, bool):
        return float(raw)
    return raw


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: Dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key] = value
    return out


def parse_duration(text: str) -> float:
    """'30s', '2m', '1.5h' or a bare number of seconds."""
    s = str(text).strip().lower()
    scale = 1.0
    for suffix, mult in (("ms", 1e-3), ("s", 1.0), ("m", 60.0), ("h", 3600.0)):
        if s.endswith(suffix):
            s, scale = s[: -len(suffix)], mult
            break
    try:
        value = float(s) * scale
    except ValueError:
        raise ConfigError(f"bad duration {text!r}") from None
    if value <= 0:
        raise ConfigError("duration must be positive")
    return value
