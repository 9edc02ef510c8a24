"""Log-space assembly of the annealed estimate of log Z.

Each phase contributes ``log((1/n) sum_k exp(a_i |X_k|^2))`` computed along
its chain; the reference Gaussian contributes

    (d/2) (log(2 pi sigma2_0) - log(1 + sigma2_0 m)).

``estimate`` runs one full pipeline, ``median_estimate`` the median of an
odd number of low-confidence replicates.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import RunConfig, config_digest
from .errors import BudgetExceededError, ClosedFormGaussian, ConfigError, ValidationError
from .potential import PotentialSpec
from .sampler import RngStream, default_workers, run_phases
from .schedule import PhaseParams, Schedule, build_schedule


class LogMeanAccumulator:
    """Streaming ``log(mean(exp(e_k)))`` that never overflows for finite exponents."""

    __slots__ = ("max_exponent", "scaled_sum", "count")

    def __init__(self):
        self.max_exponent = -math.inf
        self.scaled_sum = 0.0
        self.count = 0

    def add(self, e: float) -> None:
        e = float(e)
        if not math.isfinite(e):
            raise ValidationError(f"non-finite exponent {e!r}")
        if e > self.max_exponent:
            self.scaled_sum = self.scaled_sum * math.exp(self.max_exponent - e) + 1.0
            self.max_exponent = e
        else:
            self.scaled_sum += math.exp(e - self.max_exponent)
        self.count += 1

    def extend(self, exponents: Iterable[float]) -> None:
        arr = np.asarray(list(exponents) if not isinstance(exponents, np.ndarray) else exponents,
                         dtype=float).ravel()
        if arr.size == 0:
            return
        if not np.all(np.isfinite(arr)):
            raise ValidationError("non-finite exponent")
        mx = float(arr.max())
        if mx > self.max_exponent:
            self.scaled_sum *= math.exp(self.max_exponent - mx) if self.count else 0.0
            self.max_exponent = mx
        self.scaled_sum += float(np.exp(arr - self.max_exponent).sum())
        self.count += arr.size

    def value(self) -> float:
        if self.count == 0:
            raise ValidationError("log-mean of an empty stream is undefined")
        return self.max_exponent + math.log(self.scaled_sum / self.count)


def phase_log_ratio(phase: PhaseParams, observations) -> float:
    """log of the empirical mean of exp(a |x|^2) over the retained states."""
    return _log_ratio(phase.a, observations, math.inf)


def truncated_phase_log_ratio(phase: PhaseParams, D: float, observations) -> float:
    """Final convex phase: exponent ``a * min(|x|^2, D^2)``."""
    if D <= 0:
        raise ValidationError("truncation radius must be positive")
    return _log_ratio(phase.a, observations, D * D)


def _log_ratio(a, observations, cap) -> float:
    X = np.asarray(observations, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise ValidationError("no observations")
    acc = LogMeanAccumulator()
    acc.extend(a * np.minimum(np.einsum("ij,ij->i", X, X), cap))
    return acc.value()


def reference_log_volume(sigma2_0: float, m: float, d: int) -> float:
    return 0.5 * d * (math.log(2.0 * math.pi * sigma2_0) - math.log1p(sigma2_0 * m))


def reference_correction(schedule: Schedule) -> float:
    """Half the log-width of the bracket on Z_0.

    Z_0 lies between the Gaussian volumes with curvatures ``1/sigma2_0 + L``
    and ``1/sigma2_0 + m``; subtracting this moves the estimate to the
    geometric midpoint.  The width never exceeds ``log(1 + eps/3)``.
    """
    s0 = schedule.sigma2_0
    return 0.25 * schedule.dim * (math.log1p(s0 * schedule.L) - math.log1p(s0 * schedule.m))


def assemble_log_Z(sigma2_0: float, m: float, d: int, log_ratios: Sequence[float],
                   include_reference: bool = True) -> float:
    """Reference Gaussian volume plus the sum of the per-phase log ratios."""
    total = math.fsum(log_ratios)
    return total + (reference_log_volume(sigma2_0, m, d) if include_reference else 0.0)


@dataclass
class EstimateResult:
    log_z_hat: float
    per_phase_log_ratios: list[float]
    realized_cost: int
    seed: int
    wall_time: float
    log_z_offset: float = 0.0
    config_digest: str = ""
    closed_form: bool = False
    replicate: int = 0
    replicate_values: Optional[list[float]] = None
    replicate_seeds: Optional[list[int]] = None
    schedule: Optional[Schedule] = field(default=None, repr=False)

    @property
    def log_evidence(self) -> float:
        """log Z of the uncentered model (adds back the centering constant)."""
        return self.log_z_hat + self.log_z_offset

    def z_hat(self) -> float:
        """Linear-scale estimate; raises OverflowError rather than returning inf."""
        if self.log_z_hat > 709.0:
            raise OverflowError(f"Z = exp({self.log_z_hat:.3f}) overflows float64")
        return math.exp(self.log_z_hat)

    def to_dict(self) -> dict:
        out = {
            "log_z_hat": self.log_z_hat,
            "log_evidence": self.log_evidence,
            "per_phase_log_ratios": self.per_phase_log_ratios,
            "cost": self.realized_cost,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "wall_time": self.wall_time,
            "closed_form": self.closed_form,
        }
        if self.replicate_values is not None:
            out["replicate_values"] = self.replicate_values
            out["replicate_seeds"] = self.replicate_seeds
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    CSV_FIELDS = ("seed", "log_z_hat", "log_evidence", "cost", "M", "config_digest", "wall_time")

    def csv_row(self) -> dict:
        return {"seed": self.seed, "log_z_hat": repr(self.log_z_hat),
                "log_evidence": repr(self.log_evidence), "cost": self.realized_cost,
                "M": len(self.per_phase_log_ratios), "config_digest": self.config_digest,
                "wall_time": f"{self.wall_time:.3f}"}

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        if header:
            w.writeheader()
        w.writerow(self.csv_row())
        return buf.getvalue()


def _closed_form(p: PotentialSpec, exc: ClosedFormGaussian, seed, digest, t0) -> EstimateResult:
    return EstimateResult(exc.log_z, [], 0, seed, time.perf_counter() - t0,
                          log_z_offset=p.log_z_offset, config_digest=digest, closed_form=True)


def estimate(p: PotentialSpec, cfg: RunConfig, seed: Optional[int] = None, *,
             replicate: int = 0, schedule: Optional[Schedule] = None,
             backend: Optional[str] = None, model_info: Optional[dict] = None) -> EstimateResult:
    """Run every phase once and combine them into log Z_hat.

    ``seed`` defaults to ``cfg.seed``.  Raises BudgetExceededError before any
    sampling when the schedule's cost exceeds ``cfg.max_cost``.
    """
    t0 = time.perf_counter()
    seed = cfg.seed if seed is None else int(seed)
    digest = config_digest(cfg.replace(seed=seed), model_info)
    if schedule is None:
        try:
            schedule = build_schedule(p, cfg)
        except ClosedFormGaussian as exc:
            return _closed_form(p, exc, seed, digest, t0)
    if cfg.max_cost is not None and schedule.cost > cfg.max_cost:
        raise BudgetExceededError(schedule.cost, cfg.max_cost)
    p.check_centered(tol=1e-6 * max(1.0, p.L))
    streams = [RngStream(seed, ph.index, replicate) for ph in schedule.phases]
    caps = [math.inf] * schedule.M
    if schedule.truncation is not None:
        caps[-1] = schedule.truncation.D ** 2
    reports = run_phases(p, schedule.phases, streams, caps=caps, workers=cfg.workers,
                         backend=backend)
    ratios = [r.log_mean for r in reports]
    log_z = assemble_log_Z(schedule.sigma2_0, schedule.m, schedule.dim, ratios)
    if cfg.reference_correction:
        log_z -= reference_correction(schedule)
    cost = sum(r.steps for r in reports)
    return EstimateResult(log_z, ratios, cost, seed, time.perf_counter() - t0,
                          log_z_offset=p.log_z_offset, config_digest=digest,
                          replicate=replicate, schedule=schedule)


def replicate_count(mu_tilde: float) -> int:
    """2 * ceil(4 log(1/mu_tilde)) + 1."""
    if not 0.0 < mu_tilde < 1.0:
        raise ConfigError(f"mu_tilde must lie in (0, 1), got {mu_tilde!r}")
    return 2 * math.ceil(4.0 * math.log(1.0 / mu_tilde)) + 1


def run_replicates(p: PotentialSpec, cfg: RunConfig, seeds: Sequence[int], *,
                   backend: Optional[str] = None, model_info: Optional[dict] = None,
                   replicate_ids: Optional[Sequence[int]] = None,
                   schedule: Optional[Schedule] = None) -> list[EstimateResult]:
    """Independent pipelines, one per seed, sharing one schedule."""
    ids = list(range(len(seeds))) if replicate_ids is None else list(replicate_ids)
    if schedule is None:
        try:
            schedule = build_schedule(p, cfg)
        except ClosedFormGaussian:
            schedule = None
    workers = cfg.workers or default_workers()
    inner = cfg.replace(workers=1) if workers > 1 else cfg

    def one(j):
        return estimate(p, inner, seeds[j], replicate=ids[j], schedule=schedule,
                        backend=backend, model_info=model_info)

    if workers == 1 or len(seeds) == 1:
        return [one(j) for j in range(len(seeds))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(seeds))))


def median_estimate(p: PotentialSpec, cfg: RunConfig, mu_tilde: Optional[float] = None,
                    seed: Optional[int] = None, *, seeds: Optional[Sequence[int]] = None,
                    backend: Optional[str] = None, model_info: Optional[dict] = None,
                    schedule: Optional[Schedule] = None) -> EstimateResult:
    """Median of ``2 ceil(4 log(1/mu_tilde)) + 1`` replicates run with mu = 1/4.

    Replicate ``r`` uses seed ``seeds[r]`` (default ``seed + r``).  The
    returned result is the median replicate with every replicate value and
    seed attached.  A prebuilt ``schedule`` overrides the one implied by
    ``cfg`` with mu = 1/4.
    """
    mu_tilde = cfg.mu_tilde if mu_tilde is None else mu_tilde
    if mu_tilde is None:
        raise ConfigError("mu_tilde is required for the median estimate")
    R = replicate_count(mu_tilde)
    base = cfg.seed if seed is None else int(seed)
    if seeds is None:
        seeds = [(base + r) % 2**64 for r in range(R)]
    elif len(seeds) != R:
        raise ConfigError(f"expected {R} replicate seeds, got {len(seeds)}")
    inner = cfg.replace(mu=0.25, mu_tilde=None)
    results = run_replicates(p, inner, seeds, backend=backend, model_info=model_info,
                             replicate_ids=[0] * R, schedule=schedule)
    values = [r.log_z_hat for r in results]
    order = np.argsort(values, kind="stable")
    chosen = results[int(order[R // 2])]
    chosen.replicate_values = values
    chosen.replicate_seeds = [int(s) for s in seeds]
    chosen.config_digest = config_digest(cfg.replace(seed=base), model_info)
    return chosen
