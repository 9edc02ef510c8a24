"""Run configuration: accuracy targets, regime, tuning preset and seeds."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Optional

from .errors import ConfigError

PRACTICAL_PRESETS = ("gaussian-fig1", "regression-fig2", "logistic-fig4")
PRESETS = ("theoretical", *PRACTICAL_PRESETS)
REGIMES = ("auto", "strong", "convex")


@dataclass(frozen=True)
class RunConfig:
    """Everything except the model that determines a run.

    ``max_cost`` caps the total number of chain steps; ``None`` means no cap.
    ``reference_correction`` moves the Gaussian approximation of Z_0 to the
    geometric midpoint of its guaranteed bracket (off by default).
    """

    eps: float = 0.1
    mu: float = 0.1
    mu_tilde: Optional[float] = None
    regime: str = "auto"
    a3: bool = False
    preset: str = "theoretical"
    stride: int = 1
    seed: int = 0
    workers: Optional[int] = None
    max_cost: Optional[int] = None
    reference_correction: bool = False

    def __post_init__(self):
        for name in ("eps", "mu"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0.0 < v < 1.0):
                raise ConfigError(f"{name} must lie in (0, 1), got {v!r}")
        if self.mu_tilde is not None and not (0.0 < self.mu_tilde < 1.0):
            raise ConfigError(f"mu_tilde must lie in (0, 1), got {self.mu_tilde!r}")
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; expected one of {PRESETS}")
        if not (isinstance(self.stride, int) and self.stride >= 1):
            raise ConfigError(f"stride must be a positive integer, got {self.stride!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.workers is not None and not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}")
        if self.max_cost is not None and self.max_cost < 1:
            raise ConfigError("max_cost must be positive")

    @property
    def eta(self) -> float:
        return self.eps * math.sqrt(self.mu) / 8.0

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def config_digest(run: RunConfig, model: dict | None = None) -> str:
    """Short, stable hash of the run and model settings (workers excluded)."""
    payload = run.to_dict()
    payload.pop("workers", None)
    blob = json.dumps({"run": payload, "model": model or {}}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
