"""Built-in target models and their reference oracles.

``build_model(spec)`` takes a plain mapping (the ``[model]`` table of a run
config) and returns a :class:`Model`: the centered potential, a JSON-friendly
description, and a callable giving the reference log evidence when one exists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import datasets, oracle
from .errors import ConfigError, OracleUnavailableError
from .potential import (
    PotentialSpec,
    gaussian_potential,
    linear_regression_potential,
    logcosh_potential,
    logistic_regression_potential,
    pseudo_huber_potential,
)

RADIATA_NOISE_PRECISION = 1e-5
RADIATA_PRIOR_MEAN = (3000.0, 185.0)
RADIATA_PRIOR_SCALE = (0.06, 6.0)
PIMA_PRIOR_PRECISION = 0.01


@dataclass
class Model:
    potential: PotentialSpec
    info: dict
    reference: Optional[Callable[[], float]] = field(default=None, repr=False)

    def reference_log_evidence(self) -> float:
        """Reference value on the scale of ``EstimateResult.log_evidence``."""
        if self.reference is None:
            raise OracleUnavailableError(f"no oracle available for model {self.info.get('name')!r}")
        return self.reference()


def _quadrature_reference(p: PotentialSpec, radius: float, points: int):
    def ref():
        return oracle.quadrature_log_Z(p, radius, points) + p.log_z_offset
    return ref


def _gaussian(spec) -> Model:
    if "precision" in spec:
        Q = np.asarray(spec["precision"], dtype=float)
    else:
        d = int(spec.get("dim", 10))
        diag = spec.get("diag")
        if diag is None:
            diag = [2.0] + [1.0] * (d - 1)
        Q = np.diag(np.asarray(diag, dtype=float))
    p = gaussian_potential(Q)
    return Model(p, {"name": "gaussian", "precision": Q.tolist()},
                 lambda: oracle.gaussian_log_evidence(Q))


def _smooth_reference(p, spec):
    if p.dim > 3:
        return None
    radius = float(spec.get("radius", 12.0 if p.m > 0 else 60.0))
    points = int(spec.get("points", {1: 4001, 2: 801, 3: 161}[p.dim]))
    return _quadrature_reference(p, radius, points)


def _logcosh(spec) -> Model:
    d = int(spec.get("dim", 1))
    p = logcosh_potential(d)
    return Model(p, {"name": "logcosh", "dim": d}, _smooth_reference(p, spec))


def _pseudo_huber(spec) -> Model:
    d = int(spec.get("dim", 1))
    alpha = float(spec.get("alpha", 1.0))
    p = pseudo_huber_potential(d, alpha)
    return Model(p, {"name": "pseudo_huber", "dim": d, "alpha": alpha}, _smooth_reference(p, spec))


def _load(spec, default_loader, fmt_by_model):
    variant = str(spec.get("variant", "M1"))
    if variant not in fmt_by_model:
        raise ConfigError(f"unknown model variant {variant!r}; expected one of {sorted(fmt_by_model)}")
    path = spec.get("data")
    if path is None:
        return variant, default_loader(variant)
    return variant, datasets.load_dataset(path, fmt_by_model[variant])


def _radiata(spec) -> Model:
    variant, data = _load(spec, datasets.radiata,
                          {"M1": datasets.RADIATA_M1, "M2": datasets.RADIATA_M2})
    lam = float(spec.get("noise_precision", RADIATA_NOISE_PRECISION))
    mean = np.asarray(spec.get("prior_mean", RADIATA_PRIOR_MEAN), dtype=float)
    P0 = lam * np.diag(np.asarray(spec.get("prior_scale", RADIATA_PRIOR_SCALE), dtype=float))
    p = linear_regression_potential(data, mean, P0, lam, name=f"radiata-{variant}")
    info = {"name": "radiata", "variant": variant, "noise_precision": lam,
            "prior_mean": mean.tolist(), "prior_precision": np.diag(P0).tolist(),
            "data": spec.get("data")}
    return Model(p, info, lambda: oracle.conjugate_linear_log_evidence(data, mean, P0, lam))


def _pima(spec) -> Model:
    variant, data = _load(spec, datasets.pima, {"M1": datasets.PIMA_M1, "M2": datasets.PIMA_M2})
    tau = float(spec.get("prior_precision", PIMA_PRIOR_PRECISION))
    p = logistic_regression_potential(data, tau, name=f"pima-{variant}")
    info = {"name": "pima", "variant": variant, "prior_precision": tau, "data": spec.get("data")}
    ref = _quadrature_reference(p, 12.0 / math.sqrt(tau), 161) if p.dim <= 3 else None
    return Model(p, info, ref)


BUILTINS: dict[str, Callable[[dict], Model]] = {
    "gaussian": _gaussian,
    "logcosh": _logcosh,
    "pseudo_huber": _pseudo_huber,
    "radiata": _radiata,
    "pima": _pima,
}


def build_model(spec) -> Model:
    """Instantiate a built-in model from a mapping with at least a ``name`` key."""
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    if name not in BUILTINS:
        raise ConfigError(f"unknown model {name!r}; expected one of {sorted(BUILTINS)}")
    return BUILTINS[name](dict(spec))
