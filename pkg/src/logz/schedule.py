"""Annealing schedule: Gaussian variances, dyadic chunks and ULA tuning.

The variances start at

    sigma2_0 = 2 log(1 + eps/3) / (d (L - m))

and grow through the recurrence ``next_variance_strong`` (``m > 0``) or
``next_variance_convex`` until they exceed ``(2d+7)/m`` or the squared
truncation radius ``D^2``.  Each phase then receives a step size, a sample
size and a burn-in, either from the explicit tuning formulas that guarantee
``P(|Z_hat/Z - 1| > eps) <= mu`` or from one of the practical presets used
in the numerical experiments.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

from .config import PRACTICAL_PRESETS, RunConfig
from .errors import ClosedFormGaussian, ConfigError, ValidationError
from .potential import PotentialSpec

FINAL_CHUNK = -1
_MAX_PHASES = 10_000_000


class _Unbounded:
    """Sentinel for sigma^2 = +infinity (the target itself)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"


UNBOUNDED = _Unbounded()


@dataclass(frozen=True)
class PhaseParams:
    index: int
    sigma2: float
    a: float
    m_i: float
    L_i: float
    kappa_i: float
    gamma: float
    n: int
    burn_in: int
    chunk: int

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def is_final(self) -> bool:
        return self.chunk == FINAL_CHUNK

    @property
    def cost(self) -> int:
        return self.n + self.burn_in


@dataclass(frozen=True)
class Truncation:
    tau: float
    D: float


@dataclass(frozen=True)
class Schedule:
    phases: tuple[PhaseParams, ...]
    chunks: tuple[tuple[int, ...], ...]
    K: int
    eta: float
    eps: float
    mu: float
    regime: str
    dim: int
    m: float
    L: float
    sigma2_0: float
    threshold: float
    preset: str
    stride: int
    a3: bool
    truncation: Optional[Truncation] = None

    @property
    def M(self) -> int:
        return len(self.phases)

    @property
    def cost(self) -> int:
        return sum(ph.cost for ph in self.phases)

    def chunk_size(self, k: int) -> int:
        return len(self.chunks[k]) if 0 <= k < len(self.chunks) else 0

    def rows(self) -> list[dict]:
        return [
            {"i": ph.index, "k": ph.chunk, "sigma2": ph.sigma2, "a": ph.a, "m_i": ph.m_i,
             "L_i": ph.L_i, "kappa_i": ph.kappa_i, "gamma": ph.gamma, "n": ph.n, "N": ph.burn_in}
            for ph in self.phases
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["i", "k", "sigma2", "a", "m_i", "L_i",
                                                 "kappa_i", "gamma", "n", "N"],
                                lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        meta = {
            "regime": self.regime, "eps": self.eps, "mu": self.mu, "eta": self.eta,
            "dim": self.dim, "m": self.m, "L": self.L, "sigma2_0": self.sigma2_0,
            "threshold": self.threshold, "M": self.M, "K": self.K, "preset": self.preset,
            "stride": self.stride, "a3": self.a3, "cost": self.cost,
            "truncation": None if self.truncation is None else asdict(self.truncation),
            "phases": self.rows(),
        }
        return json.dumps(meta, indent=2)


# --------------------------------------------------------------------------
# variance recurrences

def initial_variance(eps: float, d: int, m: float, L: float) -> float:
    """sigma2_0 = 2 log(1 + eps/3) / (d (L - m)).

    Raises :class:`ClosedFormGaussian` when ``L <= m``.
    """
    if L <= m:
        raise ClosedFormGaussian(0.5 * d * math.log(2 * math.pi / m))
    return 2.0 * math.log1p(eps / 3.0) / (d * (L - m))


def chunk_index(t: float, sigma2_0: float) -> int:
    """k with 2^k sigma2_0 <= t < 2^(k+1) sigma2_0, compared exactly via ldexp."""
    k = math.floor(math.log2(t / sigma2_0))
    while math.ldexp(sigma2_0, k) > t:
        k -= 1
    while math.ldexp(sigma2_0, k + 1) <= t:
        k += 1
    return k


def _check_domain(t, sigma2_0):
    if not t >= sigma2_0:
        raise ValidationError(f"variance {t!r} lies below sigma2_0={sigma2_0!r}")


def next_variance_strong(t: float, sigma2_0: float, d: int, m: float):
    """Strongly convex recurrence; UNBOUNDED once ``t >= (2d+7)/m``."""
    _check_domain(t, sigma2_0)
    if m > 0 and t >= (2 * d + 7) / m:
        return UNBOUNDED
    k = chunk_index(t, sigma2_0)
    return 1.0 / (1.0 / t - (m + 1.0 / math.ldexp(sigma2_0, k + 1)) / (2.0 * (d + 4)))


def next_variance_convex(t: float, sigma2_0: float, d: int, D2: float):
    """Convex recurrence; UNBOUNDED once ``t >= D^2``."""
    _check_domain(t, sigma2_0)
    if t >= D2:
        return UNBOUNDED
    k = chunk_index(t, sigma2_0)
    return 1.0 / (1.0 / t - 1.0 / (2.0 * (d + 4) * math.ldexp(sigma2_0, k + 1)))


def truncation_radius(eps: float, d: int, rho1: float, rho2: float) -> tuple[float, float]:
    """(tau, D) with tau = sqrt(16 log(6/eps) / d), D = (d (tau + 1) + rho2) / rho1."""
    if rho1 <= 0:
        raise ValidationError("rho1 must be positive")
    tau = math.sqrt(16.0 * math.log(6.0 / eps) / d)
    return tau, (d * (tau + 1.0) + rho2) / rho1


# --------------------------------------------------------------------------
# tuning

def resolve_regime(p: PotentialSpec, cfg: RunConfig) -> str:
    regime = cfg.regime
    if regime == "auto":
        regime = "strong" if p.m > 0 else "convex"
    if regime == "strong" and p.m <= 0:
        raise ConfigError("regime 'strong' needs m > 0")
    if regime == "convex" and p.growth is None:
        raise ConfigError("regime 'convex' needs growth constants (rho1, rho2)")
    return regime


def theoretical_tuning(*, regime: str, a3: bool, final: bool, eta: float, K: int, d: int,
                       m_i: float, L_i: float, kappa_i: float, sigma2: float,
                       l_tilde: float = 0.0) -> tuple[float, int, int]:
    """(gamma, n, N) taking the step, burn-in and length inequalities at equality.

    ``gamma`` is additionally capped at ``1/(m_i + L_i)``; ``n`` and ``N`` are
    rounded up.
    """
    sigma = math.sqrt(sigma2)
    if regime == "strong":
        if final:
            if a3:
                gamma = (math.sqrt(3 / 7) * eta * kappa_i / (4 * math.sqrt(m_i))
                         / math.sqrt(d * l_tilde**2 + 10 * L_i**4 / m_i))
            else:
                gamma = eta**2 * m_i / (40 * L_i**2)
            gamma = min(gamma, 1.0 / (m_i + L_i))
            kg = kappa_i * gamma
            return gamma, math.ceil(19 / (kg * eta**2)), math.ceil(1 / kg)
        if a3:
            gamma = (math.sqrt(3 / 7) * eta * kappa_i * math.sqrt(m_i) * sigma2 / (8 * K * d)
                     / math.sqrt(d * l_tilde**2 + 10 * L_i**4 / m_i))
        else:
            gamma = eta**2 * kappa_i**2 * sigma2**2 * m_i / (2285 * K**2 * d**2 * L_i**2)
        gamma = min(gamma, 1.0 / (m_i + L_i))
        kg = kappa_i * gamma
        n = math.ceil(196 * K / eta**2 * math.sqrt(m_i) / (kappa_i * sigma) / kg)
        N = math.ceil(2 / kg * math.log(5 * K * d**2))
        return gamma, n, N
    if final:
        if a3:
            gamma = (math.sqrt(3 / (8 * math.e)) * eta * kappa_i * sigma / math.sqrt(d)
                     / math.sqrt(d * l_tilde**2 + 10 * L_i**4 * sigma2))
        else:
            gamma = eta**2 * kappa_i / (26 * d * L_i**2)
        gamma = min(gamma, 1.0 / (m_i + L_i))
        kg = kappa_i * gamma
        return gamma, math.ceil(29 / (eta**2 * kg)), max(0, math.ceil(2 / kg * math.log(d)))
    if a3:
        gamma = (math.sqrt(3 / 7) * eta / (sigma * 8 * K * d)
                 / math.sqrt(d * l_tilde**2 + 10 * L_i**4 * sigma2))
    else:
        gamma = eta**2 / (L_i**2 * sigma2 * 462 * K**2 * d**2)
    gamma = min(gamma, 1.0 / (m_i + L_i))
    kg = kappa_i * gamma
    n = math.ceil(453 * K / eta**2 / kg)
    N = max(0, math.ceil(2 / kg * math.log(K * d**2)))
    return gamma, n, N


def practical_tuning(preset: str, *, index: int, d: int, m_i: float, L_i: float,
                     kappa_i: float, sigma2: float) -> tuple[float, int, int]:
    """(gamma, n, N) for the presets of the numerical experiments."""
    if preset == "gaussian-fig1":
        return 1e-2 / (m_i + L_i), 100_000, 10_000
    if preset == "regression-fig2":
        gamma = 1e-2 * kappa_i * sigma2 * m_i / (d * L_i**2)
        kg = kappa_i * gamma
        n = math.ceil(1e4 * math.sqrt(m_i) / (kappa_i**2 * math.sqrt(sigma2) * gamma))
        return gamma, n, math.ceil(1e3 / kg)
    if preset == "logistic-fig4":
        if index <= 30:
            return 1e-2 / (m_i + L_i), 1_000_000, 10_000
        return 1e-1 / (m_i + L_i), 100_000, 10_000
    raise ConfigError(f"unknown practical preset {preset!r}; expected one of {PRACTICAL_PRESETS}")


@dataclass
class _Draft:
    sigma2: list[float]
    chunk_of: list[int]
    chunks: tuple[tuple[int, ...], ...]
    K: int
    d: int
    m: float
    L: float
    eta: float
    regime: str


def _phase_constants(sigma2: float, m: float, L: float) -> tuple[float, float, float]:
    m_i = m + 1.0 / sigma2
    L_i = L + 1.0 / sigma2
    return m_i, L_i, 2.0 * m_i * L_i / (m_i + L_i)


def tune_phase_theoretical(draft: _Draft, i: int, p: PotentialSpec, cfg: RunConfig):
    m_i, L_i, kappa_i = _phase_constants(draft.sigma2[i], draft.m, draft.L)
    if cfg.a3 and p.hessian_lipschitz is None:
        raise ConfigError("a3 requested but the potential declares no Hessian Lipschitz constant")
    return theoretical_tuning(
        regime=draft.regime, a3=cfg.a3, final=(i == len(draft.sigma2) - 1), eta=draft.eta,
        K=draft.K, d=draft.d, m_i=m_i, L_i=L_i, kappa_i=kappa_i, sigma2=draft.sigma2[i],
        l_tilde=p.hessian_lipschitz or 0.0,
    )


def tune_phase_practical(draft: _Draft, i: int, preset: str):
    m_i, L_i, kappa_i = _phase_constants(draft.sigma2[i], draft.m, draft.L)
    return practical_tuning(preset, index=i, d=draft.d, m_i=m_i, L_i=L_i,
                            kappa_i=kappa_i, sigma2=draft.sigma2[i])


def variance_sequence(sigma2_0: float, d: int, *, m: float = 0.0, D2: Optional[float] = None,
                      stride: int = 1) -> list[float]:
    """sigma2_0 < ... < sigma2_{M-1}: iterate the recurrence ``stride`` times per
    phase until the stopping threshold is crossed."""
    if D2 is None:
        threshold = (2 * d + 7) / m

        def step(t):
            return next_variance_strong(t, sigma2_0, d, m)
    else:
        threshold = D2

        def step(t):
            return next_variance_convex(t, sigma2_0, d, D2)

    seq = [sigma2_0]
    while seq[-1] < threshold:
        t = seq[-1]
        for _ in range(stride):
            t = step(t)
            if t >= threshold:
                break
        seq.append(t)
        if len(seq) > _MAX_PHASES:
            raise ConfigError("annealing schedule exceeds 10^7 phases")
    return seq


def build_schedule(p: PotentialSpec, cfg: RunConfig) -> Schedule:
    """Variances, chunks and per-phase (gamma, n, N) for potential ``p``.

    Raises
    ------
    ClosedFormGaussian
        If ``m == L``; the exact log Z travels with the exception.
    ConfigError
        If the regime is incompatible with the declared constants.
    """
    d = p.dim
    if p.is_gaussian:
        raise ClosedFormGaussian(0.5 * d * math.log(2 * math.pi / p.m))
    regime = resolve_regime(p, cfg)
    m = p.m if regime == "strong" else 0.0
    sigma2_0 = initial_variance(cfg.eps, d, m, p.L)
    truncation = None
    if regime == "strong":
        threshold = (2 * d + 7) / m
        sigma2 = variance_sequence(sigma2_0, d, m=m, stride=cfg.stride)
    else:
        tau, D = truncation_radius(cfg.eps, d, *p.growth)
        truncation = Truncation(tau, D)
        threshold = D * D
        sigma2 = variance_sequence(sigma2_0, d, D2=threshold, stride=cfg.stride)
    M = len(sigma2)

    chunk_of = [chunk_index(s, sigma2_0) for s in sigma2[:-1]] + [FINAL_CHUNK]
    members: dict[int, list[int]] = {}
    for i, k in enumerate(chunk_of[:-1]):
        members.setdefault(k, []).append(i)
    K = 0
    while K in members:
        K += 1
    if members and max(members) >= K:
        # A chunk was skipped: count every band up to the last occupied one so
        # the per-chunk error budgets still sum to at most eta.
        K = max(members) + 1
    chunks = tuple(tuple(members.get(k, ())) for k in range(K))

    draft = _Draft(sigma2=sigma2, chunk_of=chunk_of, chunks=chunks, K=K, d=d, m=m,
                   L=p.L, eta=cfg.eta, regime=regime)
    phases = []
    for i in range(M):
        if i < M - 1:
            a = 0.5 * (1.0 / sigma2[i] - 1.0 / sigma2[i + 1])
        else:
            a = 0.5 / sigma2[i]
        m_i, L_i, kappa_i = _phase_constants(sigma2[i], m, p.L)
        if cfg.preset == "theoretical":
            gamma, n, N = tune_phase_theoretical(draft, i, p, cfg)
        else:
            gamma, n, N = tune_phase_practical(draft, i, cfg.preset)
        phases.append(PhaseParams(index=i, sigma2=sigma2[i], a=a, m_i=m_i, L_i=L_i,
                                  kappa_i=kappa_i, gamma=gamma, n=int(n), burn_in=int(N),
                                  chunk=chunk_of[i]))
    return Schedule(
        phases=tuple(phases), chunks=chunks, K=K, eta=cfg.eta, eps=cfg.eps, mu=cfg.mu,
        regime=regime, dim=d, m=m, L=p.L, sigma2_0=sigma2_0, threshold=threshold,
        preset=cfg.preset, stride=cfg.stride, a3=cfg.a3, truncation=truncation,
    )


# --------------------------------------------------------------------------
# cost bounds

def cost_bound_constant(p: PotentialSpec, cfg: RunConfig) -> float:
    """The integer C bounding the chunk count in the cost bounds."""
    d, eps = p.dim, cfg.eps
    if resolve_regime(p, cfg) == "strong":
        arg = d * (d + 3.5) * (p.L / p.m - 1.0) / math.log1p(eps / 3)
    else:
        rho1, rho2 = p.growth
        tau = 4.0 / math.sqrt(d) * math.sqrt(math.log(6.0 / eps))
        R = d * (tau + 1) + rho2
        arg = d * p.L * R**2 / (2 * rho1**2 * math.log1p(eps / 3))
    return math.ceil(math.log(arg) / math.log(2))


def cost_bound(p: PotentialSpec, cfg: RunConfig) -> float:
    """Closed-form upper bound on sum_i (N_i + n_i) for the given regime and tuning."""
    d, eps, mu = p.dim, cfg.eps, cfg.mu
    C = cost_bound_constant(p, cfg)
    regime = resolve_regime(p, cfg)
    if cfg.a3 and p.hessian_lipschitz is None:
        raise ConfigError("a3 requested but the potential declares no Hessian Lipschitz constant")
    lt = p.hessian_lipschitz or 0.0
    if regime == "strong":
        m, L = p.m, p.L
        lead = 6272 * C / (eps**2 * mu) + math.log(5 * C * d**2)
        ratio = (m + L) / (2 * m)
        if not cfg.a3:
            return lead * (1088 * C) ** 2 * d**2 * (d + 4) / (eps**2 * mu) * ratio**3 * (C + 3)
        return (lead * math.sqrt(7 / 3) * 512 * C * d**1.5 / (eps * math.sqrt(mu))
                * (d + 4) * (C + 3) * (lt * 2**1.5 / m**1.5 + math.sqrt(10) * ratio**2))
    L = p.L
    rho1, rho2 = p.growth
    tau = 4.0 / math.sqrt(d) * math.sqrt(math.log(6.0 / eps))
    R = d * (tau + 1) + rho2
    lead = 17728 * C / (eps**2 * mu) + math.log(C * d**2)
    if not cfg.a3:
        return (lead * (487 * C) ** 2 * d**2 * (d + 4) / (eps**2 * mu)
                * (C + 6 * L * R**2 / rho1**2 + 8 * L**2 * R**4 / (3 * rho1**4)))
    inner = (8 * L**2 * R**4 / (3 * rho1**4)
             + math.sqrt(d) * lt * R**3 / (math.sqrt(10) * rho1**3)
             * max(5 * rho1 / R, (5 / 9 + rho1**2 / (R**2 * L)) ** 2)
             + 6 * L * R**2 / rho1**2 + C)
    return 2474 * lead * (C + 1) * d * (d + 4) / (eps * math.sqrt(mu)) * inner
