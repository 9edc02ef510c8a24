"""Per-phase error bounds and empirical replicate summaries.

``mse_bound`` evaluates the closed-form squared-bias and variance bounds for
the estimator of one phase ratio; ``replicate_report`` runs independent
pipelines and tabulates the spread of each phase's estimate.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig
from .errors import BoundConditionError, ConfigError
from .estimator import run_replicates
from .potential import PotentialSpec
from .schedule import PhaseParams, Schedule, build_schedule


@dataclass(frozen=True)
class MseBound:
    phase: int
    C0: float
    C1: float
    C2: float
    A0: float
    A1: float
    B0: Optional[float]
    B1: Optional[float]
    bias2: float
    variance: float

    @property
    def mse(self) -> float:
        return self.bias2 + self.variance

    @staticmethod
    def _log10(v):
        return -math.inf if v == 0 else math.log10(v)

    @property
    def log10_bias2(self) -> float:
        return self._log10(self.bias2)

    @property
    def log10_variance(self) -> float:
        return self._log10(self.variance)

    @property
    def log10_mse(self) -> float:
        return self._log10(self.mse)


def check_bound_conditions(phase: PhaseParams, d: int, rtol: float = 1e-12) -> None:
    """Step size and annealing increment must lie in the region where the bounds hold."""
    slack = 1.0 + rtol
    if phase.gamma > slack / (phase.m_i + phase.L_i):
        raise BoundConditionError(
            f"phase {phase.index}: gamma={phase.gamma:.6g} > 1/(m_i+L_i)={1 / (phase.m_i + phase.L_i):.6g}")
    amax = min(phase.m_i / (4.0 * (d + 4)), 0.5 / phase.sigma2)
    if not 0.0 <= phase.a <= amax * slack:
        raise BoundConditionError(
            f"phase {phase.index}: a={phase.a:.6g} outside [0, min(m_i/(4(d+4)), 1/(2 sigma^2))]"
            f" = [0, {amax:.6g}]")


def mse_bound(phase: PhaseParams, d: int, use_hessian_lipschitz: bool = False,
              L_tilde: Optional[float] = None, check: bool = True) -> MseBound:
    """Bias and variance bounds for the phase-``i`` ratio estimator.

    The squared bias is bounded by

        4 a^2 (C2 + C0 C1) [4d/(n m_i kappa gamma) exp(-N kappa gamma / 2) + 2/kappa R]

    with ``R = A0 gamma + A1 gamma^2``, or ``R = B0 gamma^2 + B1 gamma^3`` when the
    Hessian is Lipschitz; the variance by

        32 a^2 C0 C1 / (kappa^2 n gamma) (1 + 2/(kappa n gamma)).

    Raises BoundConditionError when ``gamma`` or ``a`` is out of range.
    """
    if check:
        check_bound_conditions(phase, d)
    a, g, n, N = phase.a, phase.gamma, phase.n, phase.burn_in
    mi, Li, k = phase.m_i, phase.L_i, phase.kappa_i
    if k - 8 * a <= 0:
        raise BoundConditionError(f"phase {phase.index}: kappa_i <= 8 a_i")
    C0 = math.exp(4 * a * (d + 2) / (k - 8 * a))
    C1 = 2 * d * (1 - 8 * a * g) / (k - 8 * a)
    C2 = 4 * d / mi
    A0 = 2 * Li**2 * d / k
    A1 = 2 * d * Li**2 + d * Li**4 * (1 / k + 1 / (mi + Li)) * (1 / mi + 1 / (6 * (mi + Li)))
    B0 = B1 = None
    if use_hessian_lipschitz:
        if L_tilde is None:
            raise ConfigError("Hessian Lipschitz bound requested without L_tilde")
        B0 = d * (2 * Li**2 + (d * L_tilde**2 / 3 + 4 * Li**4 / (3 * mi)) / k)
        B1 = d * Li**4 * (1 / k + 1 / (6 * (mi + Li)) + 1 / mi)
        disc = B0 * g**2 + B1 * g**3
    else:
        disc = A0 * g + A1 * g**2
    decay = 4 * d / (n * mi * k * g) * math.exp(-N * k * g / 2)
    bias2 = 4 * a**2 * (C2 + C0 * C1) * (decay + 2 / k * disc)
    var = 32 * a**2 * C0 * C1 / (k**2 * n * g) * (1 + 2 / (k * n * g))
    return MseBound(phase.index, C0, C1, C2, A0, A1, B0, B1, bias2, var)


def mse_report(sched: Schedule, p: Optional[PotentialSpec] = None,
               use_hessian_lipschitz: bool = False,
               check: bool = True) -> list[Optional[MseBound]]:
    """Bounds for every phase; ``None`` for a truncated final phase, whose test
    function is not of the exp(a |x|^2) form the bounds cover."""
    lt = None
    if use_hessian_lipschitz:
        if p is None or p.hessian_lipschitz is None:
            raise ConfigError("Hessian Lipschitz bound needs a potential declaring L_tilde")
        lt = p.hessian_lipschitz
    return [None if (ph.is_final and sched.truncation is not None)
            else mse_bound(ph, sched.dim, use_hessian_lipschitz, lt, check=check)
            for ph in sched.phases]


def cost_actual(sched: Schedule) -> int:
    """Total number of chain steps, burn-in included."""
    return int(sum(ph.n + ph.burn_in for ph in sched.phases))


@dataclass(frozen=True)
class ReplicateRow:
    phase: int
    mean: float
    std: float
    log_mean: float
    log_std: float
    bias_bound: float
    var_bound: float
    mse_bound: float


def replicate_report(p: PotentialSpec, cfg: RunConfig, R: int, seed: Optional[int] = None,
                     seeds: Optional[Sequence[int]] = None, backend: Optional[str] = None,
                     with_bounds: bool = True,
                     schedule: Optional[Schedule] = None) -> list[ReplicateRow]:
    """Mean and standard deviation (ddof=1) over ``R`` pipelines of each phase's ratio.

    Seeds default to ``seed, seed+1, ...``; duplicates are rejected because
    identical seeds reproduce identical chains.  A prebuilt ``schedule``
    overrides the one implied by ``cfg``.
    """
    if R < 2:
        raise ConfigError("replicate_report needs R >= 2")
    base = cfg.seed if seed is None else int(seed)
    seeds = [(base + r) % 2**64 for r in range(R)] if seeds is None else list(seeds)
    if len(seeds) != R:
        raise ConfigError(f"expected {R} seeds, got {len(seeds)}")
    if len(set(seeds)) != R:
        raise ConfigError("replicate seeds must be distinct")
    sched = build_schedule(p, cfg) if schedule is None else schedule
    results = run_replicates(p, cfg, seeds, backend=backend, schedule=sched)
    L = np.array([r.per_phase_log_ratios for r in results])
    # the ratios themselves can overflow; report them where finite
    with np.errstate(over="ignore"):
        V = np.exp(L)
    bounds = [None] * sched.M
    if with_bounds:
        for i, ph in enumerate(sched.phases):
            if ph.is_final and sched.truncation is not None:
                continue
            try:
                bounds[i] = mse_bound(ph, sched.dim)
            except BoundConditionError:
                pass  # practical presets may leave the region the bounds cover
    rows = []
    for i in range(sched.M):
        b = bounds[i]
        rows.append(ReplicateRow(
            phase=i, mean=float(V[:, i].mean()), std=float(V[:, i].std(ddof=1)),
            log_mean=float(L[:, i].mean()), log_std=float(L[:, i].std(ddof=1)),
            bias_bound=math.nan if b is None else b.bias2,
            var_bound=math.nan if b is None else b.variance,
            mse_bound=math.nan if b is None else b.mse,
        ))
    return rows


REPORT_FIELDS = ("phase", "bias_bound", "var_bound", "mse_bound", "empirical_mean", "empirical_std")


def report_csv(rows: Sequence[ReplicateRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in rows:
        w.writerow([r.phase, repr(r.bias_bound), repr(r.var_bound), repr(r.mse_bound),
                    repr(r.mean), repr(r.std)])
    return buf.getvalue()


def bounds_csv(bounds: Sequence[MseBound]) -> str:
    buf = io.StringIO()
    fields = ["phase", "C0", "C1", "C2", "A0", "A1", "B0", "B1", "bias2", "variance",
              "log10_bias2", "log10_variance", "log10_mse"]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for b in bounds:
        if b is None:
            continue
        row = asdict(b)
        row.update(log10_bias2=b.log10_bias2, log10_variance=b.log10_variance,
                   log10_mse=b.log10_mse)
        w.writerow(row)
    return buf.getvalue()
