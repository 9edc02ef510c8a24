"""Unadjusted Langevin chains for the annealing phases.

Phase ``i`` targets ``exp(-U(x) - |x|^2 / (2 sigma_i^2))``; every chain starts
at the origin and performs

    x <- x - gamma * grad U_i(x) + sqrt(2 gamma) * W.

Noise comes from a Philox stream keyed by ``(seed, replicate, phase)`` so
phases and replicates can run in any order, on any number of workers, and
still reproduce bit for bit.  Noise is drawn in blocks; the draws do not
depend on the block size.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import _backend
from .errors import DivergenceError, ValidationError
from .potential import PotentialSpec
from .schedule import PhaseParams

DEFAULT_BLOCK = 8192


@dataclass(frozen=True)
class RngStream:
    """Independent Gaussian stream for one (seed, phase, replicate) triple."""

    master_seed: int
    phase: int
    replicate: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError("master_seed must fit in 64 unsigned bits")
        if not (0 <= self.phase < 2**32 and 0 <= self.replicate < 2**32):
            raise ValidationError("phase and replicate must fit in 32 unsigned bits")

    @property
    def key(self) -> np.ndarray:
        return np.array([self.master_seed, (self.replicate << 32) | self.phase], dtype=np.uint64)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key))


@dataclass
class ChainState:
    position: np.ndarray
    step_count: int = 0

    @classmethod
    def origin(cls, dim: int) -> "ChainState":
        return cls(np.zeros(dim), 0)


@dataclass(frozen=True)
class ChainReport:
    phase: int
    steps: int
    observed: int
    final_norm: float
    log_mean: float


def ula_step(state: ChainState, grad_at_state, gamma: float, noise, phase: int = -1) -> ChainState:
    """One Euler step of the Langevin diffusion."""
    with np.errstate(over="ignore", invalid="ignore"):
        x = state.position - gamma * np.asarray(grad_at_state) + math.sqrt(2.0 * gamma) * np.asarray(noise)
    if not np.all(np.isfinite(x)):
        raise DivergenceError(phase, state.step_count + 1)
    return ChainState(x, state.step_count + 1)


def tilted_gradient(p: PotentialSpec, sigma2: float) -> Callable[[np.ndarray], np.ndarray]:
    inv = 1.0 / sigma2

    def grad(x):
        return p.gradient(x) + inv * x

    return grad


def run_chain(p: PotentialSpec, phase: PhaseParams, stream: RngStream,
              observer: Callable[[np.ndarray], None], trace_path=None,
              block: int = DEFAULT_BLOCK) -> ChainReport:
    """Step-by-step chain calling ``observer(x)`` on each of the ``n`` retained states.

    Slow but fully general; ``trace_path`` appends every state (burn-in
    included) as little-endian float64 rows.
    """
    grad = tilted_gradient(p, phase.sigma2)
    rng = stream.generator()
    state = ChainState.origin(p.dim)
    total = phase.burn_in + phase.n
    observed = 0
    fh = open(trace_path, "wb") if trace_path is not None else None
    try:
        done = 0
        while done < total:
            b = min(block, total - done)
            noise = rng.standard_normal((b, p.dim))
            for j in range(b):
                state = ula_step(state, grad(state.position), phase.gamma, noise[j], phase.index)
                if fh is not None:
                    fh.write(state.position.astype("<f8").tobytes())
                if state.step_count > phase.burn_in:
                    observer(state.position)
                    observed += 1
            done += b
    finally:
        if fh is not None:
            fh.close()
    return ChainReport(phase.index, state.step_count, observed,
                       float(np.linalg.norm(state.position)), math.nan)


# --------------------------------------------------------------------------
# fast paths: each chain only reports log mean exp(a * min(|x|^2, cap))

def _log_value(acc) -> float:
    mx, sc, cnt = acc
    if cnt == 0:
        raise ValidationError("no retained states: n must be positive")
    return float(mx + math.log(sc / cnt))


def _kernel_args(p: PotentialSpec, mod):
    k = p.kernel
    kind = mod.KIND_CODES[k.kind]
    d = p.dim
    mat = np.ascontiguousarray(k.matrix if k.matrix is not None else np.zeros((1, d)), dtype=float)
    vec = np.ascontiguousarray(k.vector if k.vector is not None else np.zeros(d), dtype=float)
    shift = np.ascontiguousarray(k.shift, dtype=float)
    return kind, mat, vec, shift, float(k.scalar)


def _run_one_compiled(p, phase, stream, cap, block, mod) -> ChainReport:
    kind, mat, vec, shift, scal = _kernel_args(p, mod)
    rng = stream.generator()
    x = np.zeros(p.dim)
    acc = np.zeros(3)
    total = phase.burn_in + phase.n
    inv = 1.0 / phase.sigma2
    done = 0
    while done < total:
        b = min(block, total - done)
        noise = rng.standard_normal((b, p.dim))
        bad = mod.advance(kind, mat, vec, shift, scal, x, phase.gamma, inv, noise,
                          done, phase.burn_in, phase.a, cap, acc)
        if bad >= 0:
            raise DivergenceError(phase.index, done + bad + 1)
        done += b
    return ChainReport(phase.index, total, int(acc[2]), float(np.linalg.norm(x)), _log_value(acc))


def _run_batch_python(p, phases, streams, caps, block) -> list[ChainReport]:
    P, d = len(phases), p.dim
    gens = [s.generator() for s in streams]
    total = np.array([ph.burn_in + ph.n for ph in phases], dtype=np.int64)
    gamma = np.array([ph.gamma for ph in phases])
    inv = np.array([1.0 / ph.sigma2 for ph in phases])
    n_burn = np.array([ph.burn_in for ph in phases], dtype=np.int64)
    a = np.array([ph.a for ph in phases])
    cap = np.asarray(caps, dtype=float)
    X = np.zeros((P, d))
    acc = np.zeros((P, 3))
    done = np.zeros(P, dtype=np.int64)
    if p.kernel is not None:
        kind, mat, vec, shift, scal = _kernel_args(p, _backend.fallback)

        def gradient(Y):
            return _backend.fallback._kernel_gradient(kind, mat, vec, shift, scal, Y)
    else:
        gradient = p.gradient
    while True:
        active = np.flatnonzero(done < total)
        if active.size == 0:
            break
        b = int(min(block, np.min(total[active] - done[active])))
        noise = np.stack([gens[i].standard_normal((b, d)) for i in active])
        Xa = X[active]
        acc_a = acc[active]
        bad = _backend.fallback.advance_batch(gradient, Xa, gamma[active], inv[active], noise,
                                              done[active], n_burn[active], a[active],
                                              cap[active], acc_a)
        X[active] = Xa
        acc[active] = acc_a
        if np.any(bad >= 0):
            j = int(np.flatnonzero(bad >= 0)[0])
            raise DivergenceError(phases[active[j]].index, int(done[active[j]] + bad[j] + 1))
        done[active] += b
    return [ChainReport(ph.index, int(total[i]), int(acc[i, 2]), float(np.linalg.norm(X[i])),
                        _log_value(acc[i])) for i, ph in enumerate(phases)]


def default_workers() -> int:
    env = os.environ.get("LOGZ_WORKERS")
    if env:
        try:
            w = int(env)
            if w >= 1:
                return w
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_phases(p: PotentialSpec, phases: Sequence[PhaseParams], streams: Sequence[RngStream],
               caps: Optional[Sequence[float]] = None, workers: Optional[int] = None,
               block: int = DEFAULT_BLOCK, backend: Optional[str] = None) -> list[ChainReport]:
    """Run one chain per phase and return reports in phase order.

    ``caps[i]`` truncates the squared norm inside the exponent (``inf`` for
    none).  With the compiled backend and a closed-form kernel, chains are
    spread over a thread pool (the kernel releases the GIL); otherwise all
    chains advance together in one vectorized batch.
    """
    if len(phases) != len(streams):
        raise ValidationError("one stream per phase is required")
    caps = [math.inf] * len(phases) if caps is None else list(caps)
    backend = backend or _backend.NAME
    if backend == "compiled" and _backend.compiled is None:
        raise ValidationError("compiled backend is not available")
    if backend == "compiled" and p.kernel is not None:
        mod = _backend.compiled
        workers = workers or default_workers()
        jobs = list(zip(phases, streams, caps))
        if workers == 1 or len(jobs) == 1:
            return [_run_one_compiled(p, ph, s, c, block, mod) for ph, s, c in jobs]
        # longest chains first keeps the pool busy until the end
        order = sorted(range(len(jobs)), key=lambda i: -(jobs[i][0].n + jobs[i][0].burn_in))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {i: pool.submit(_run_one_compiled, p, *jobs[i], block, mod) for i in order}
            return [futs[i].result() for i in range(len(jobs))]
    return _run_batch_python(p, list(phases), list(streams), caps, block)


def mala_log_acceptance(p: PotentialSpec, x, y, gamma: float, sigma2: float = math.inf) -> float:
    """log of the Metropolis-Hastings ratio for moving x -> y under the Langevin proposal."""
    inv = 0.0 if math.isinf(sigma2) else 1.0 / sigma2
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gx = np.asarray(p.gradient(x)) + inv * x
    gy = np.asarray(p.gradient(y)) + inv * y
    ux = float(p.energy(x)) + 0.5 * inv * float(x @ x)
    uy = float(p.energy(y)) + 0.5 * inv * float(y @ y)
    fwd = y - x + gamma * gx
    bwd = x - y + gamma * gy
    return min(0.0, ux - uy + float(fwd @ fwd - bwd @ bwd) / (4.0 * gamma))


def mala_step(state: ChainState, p: PotentialSpec, gamma: float, rng: np.random.Generator,
              sigma2: float = math.inf, phase: int = -1) -> tuple[ChainState, bool]:
    """Metropolis-adjusted Langevin step on ``U + |x|^2/(2 sigma2)``.

    Returns the new state and whether the proposal was accepted.
    """
    inv = 0.0 if math.isinf(sigma2) else 1.0 / sigma2
    x = state.position
    gx = np.asarray(p.gradient(x)) + inv * x
    y = x - gamma * gx + math.sqrt(2.0 * gamma) * rng.standard_normal(p.dim)
    if not np.all(np.isfinite(y)):
        raise DivergenceError(phase, state.step_count + 1)
    accept = math.log(rng.random()) < mala_log_acceptance(p, x, y, gamma, sigma2)
    return ChainState(y if accept else x.copy(), state.step_count + 1), bool(accept)
