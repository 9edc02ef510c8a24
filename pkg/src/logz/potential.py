"""Target potentials U with the regularity metadata the schedules need.

A :class:`PotentialSpec` bundles ``U`` and ``grad U`` with the constants
``m`` (strong convexity), ``L`` (gradient Lipschitz), optionally the Hessian
Lipschitz constant and linear-growth constants ``(rho1, rho2)``.  The sampler
expects the mode at the origin with ``U(0) = 0``; :func:`center_at_mode`
produces that form from an arbitrary convex potential.

Built-in families carry a :class:`KernelSpec`, a closed-form description of the
gradient that the compiled ULA core can evaluate without calling back into
Python.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import OptimizationError, ValidationError

Array = np.ndarray

#: Global bound on |d^3/dt^3 log(1 + e^t)|, reached where sigmoid(t) = 1/2 +- 1/sqrt(12).
LOGISTIC_THIRD_DERIVATIVE_BOUND = 1.0 / (6.0 * math.sqrt(3.0))
#: Global bound on |d^3/dt^3 log cosh t| = |2 tanh(t) sech(t)^2|.
LOGCOSH_THIRD_DERIVATIVE_BOUND = 4.0 / (3.0 * math.sqrt(3.0))
#: Operator norm bound of the third derivative of sqrt(1 + |x|^2), any dimension.
PSEUDO_HUBER_THIRD_DERIVATIVE_BOUND = 1.5 / 1.25**2.5

KERNEL_KINDS = ("quadratic", "logistic", "logcosh", "pseudo_huber")


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Closed-form potential family evaluated at ``y = x + shift``.

    ``quadratic``     U(y) = y'Hy/2 - b'y                 (matrix=H, vector=b)
    ``logistic``      U(y) = sum log(1+e^{Xy}) - r'Xy + tau|y|^2/2
                                                         (matrix=X, vector=r, scalar=tau)
    ``logcosh``       U(y) = |y|^2/2 + sum log cosh y_j
    ``pseudo_huber``  U(y) = alpha (sqrt(1 + |y|^2) - 1)   (scalar=alpha)

    Energies omit additive constants.  All methods broadcast over leading axes.
    """

    kind: str
    shift: Array
    matrix: Optional[Array] = None
    vector: Optional[Array] = None
    scalar: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValidationError(f"unknown kernel kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return self.shift.shape[0]

    def translated(self, delta: Array) -> "KernelSpec":
        return dataclasses.replace(self, shift=self.shift + np.asarray(delta, dtype=float))

    def energy(self, x):
        y = np.asarray(x, dtype=float) + self.shift
        if self.kind == "quadratic":
            return 0.5 * np.einsum("...i,ij,...j->...", y, self.matrix, y) - y @ self.vector
        if self.kind == "logistic":
            t = y @ self.matrix.T
            return (
                np.logaddexp(0.0, t).sum(axis=-1)
                - t @ self.vector
                + 0.5 * self.scalar * np.sum(y * y, axis=-1)
            )
        if self.kind == "logcosh":
            ay = np.abs(y)
            logcosh = ay + np.log1p(np.exp(-2.0 * ay)) - math.log(2.0)
            return 0.5 * np.sum(y * y, axis=-1) + logcosh.sum(axis=-1)
        return self.scalar * (np.sqrt(1.0 + np.sum(y * y, axis=-1)) - 1.0)

    def gradient(self, x):
        y = np.asarray(x, dtype=float) + self.shift
        if self.kind == "quadratic":
            return y @ self.matrix - self.vector
        if self.kind == "logistic":
            t = y @ self.matrix.T
            return (_sigmoid(t) - self.vector) @ self.matrix + self.scalar * y
        if self.kind == "logcosh":
            return y + np.tanh(y)
        r = np.sqrt(1.0 + np.sum(y * y, axis=-1, keepdims=True))
        return self.scalar * y / r

    def hessian(self, x) -> Array:
        """Hessian at a single point ``x`` of shape (d,)."""
        y = np.asarray(x, dtype=float) + self.shift
        d = y.shape[0]
        if self.kind == "quadratic":
            return np.array(self.matrix, dtype=float)
        if self.kind == "logistic":
            s = _sigmoid(self.matrix @ y)
            w = s * (1.0 - s)
            return (self.matrix.T * w) @ self.matrix + self.scalar * np.eye(d)
        if self.kind == "logcosh":
            return np.diag(1.0 + 1.0 / np.cosh(y) ** 2)
        r2 = 1.0 + y @ y
        return self.scalar * (np.eye(d) * r2 - np.outer(y, y)) / r2**1.5


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Potential U on R^d together with its regularity constants.

    ``energy`` and ``gradient`` must accept arrays of shape (..., d).  The
    log normalizing constant of the *uncentered* model is
    ``log Z(U) + log_z_offset``; ``shift`` records where the origin sits in
    the original coordinates.
    """

    dim: int
    energy: Callable[[Array], Array]
    gradient: Callable[[Array], Array]
    m: float
    L: float
    hessian_lipschitz: Optional[float] = None
    growth: Optional[tuple[float, float]] = None
    hessian: Optional[Callable[[Array], Array]] = None
    kernel: Optional[KernelSpec] = None
    shift: Array = field(default_factory=lambda: np.zeros(0))
    log_z_offset: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dim must be a positive integer")
        if self.L <= 0:
            raise ValidationError("L must be positive")
        if self.m < 0:
            raise ValidationError("m must be nonnegative")
        if self.m > self.L * (1.0 + 1e-12):
            raise ValidationError(f"m={self.m} exceeds L={self.L}")
        if self.growth is not None and self.growth[0] <= 0:
            raise ValidationError("growth constant rho1 must be positive")
        if self.shift.shape != (self.dim,):
            object.__setattr__(self, "shift", np.zeros(self.dim))

    @property
    def is_gaussian(self) -> bool:
        """True when m == L, i.e. U(x) = m|x|^2/2 once centered."""
        return math.isclose(self.m, self.L, rel_tol=1e-12)

    def gradient_norm_at_origin(self) -> float:
        return float(np.linalg.norm(self.gradient(np.zeros(self.dim))))

    def check_centered(self, tol: float = 1e-6) -> None:
        u0 = float(self.energy(np.zeros(self.dim)))
        g0 = self.gradient_norm_at_origin()
        if abs(u0) > tol or g0 > tol:
            raise ValidationError(
                f"potential {self.name!r} is not centered: U(0)={u0:.3e}, |grad U(0)|={g0:.3e}"
            )

    def spot_check(self, n_pairs: int = 100, radius: float = 10.0, seed: int = 0,
                   slack: float = 1e-9) -> None:
        """Check the secant inequalities for m and L (and growth) on random pairs.

        Advisory only: passing does not prove the constants are valid.
        """
        rng = np.random.default_rng(seed)
        x = _uniform_ball(rng, n_pairs, self.dim, radius)
        y = _uniform_ball(rng, n_pairs, self.dim, radius)
        dg = self.gradient(x) - self.gradient(y)
        dx = x - y
        nx2 = np.sum(dx * dx, axis=1)
        inner = np.sum(dg * dx, axis=1)
        lip = np.linalg.norm(dg, axis=1)
        scale = np.maximum(1.0, self.L * nx2)
        if np.any(inner < self.m * nx2 - slack * scale):
            raise ValidationError(f"{self.name}: strong convexity constant m={self.m} violated")
        if np.any(lip > self.L * np.sqrt(nx2) + slack * np.maximum(1.0, lip)):
            raise ValidationError(f"{self.name}: gradient Lipschitz constant L={self.L} violated")
        if self.growth is not None:
            rho1, rho2 = self.growth
            u = self.energy(x)
            if np.any(u < rho1 * np.linalg.norm(x, axis=1) - rho2 - slack * np.maximum(1.0, np.abs(u))):
                raise ValidationError(f"{self.name}: linear growth ({rho1}, {rho2}) violated")


def _uniform_ball(rng, n, d, radius):
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    return g * r[:, None]


def growth_from_strong_convexity(m: float, dim: int) -> tuple[float, float]:
    """Linear-growth constants implied by U(x) >= m|x|^2/2 (centered U).

    m r^2/2 >= rho1 r - rho1^2/(2m) for all r; rho1 = sqrt(2 m d) makes rho2 = d.
    """
    rho1 = math.sqrt(2.0 * m * dim)
    return rho1, rho1 * rho1 / (2.0 * m)


def potential_from_kernel(kernel: KernelSpec, m: float, L: float, *, constant: float = 0.0,
                          hessian_lipschitz=None, growth=None, name="custom") -> PotentialSpec:
    """Wrap a kernel (plus an additive energy constant) as a PotentialSpec."""
    return PotentialSpec(
        dim=kernel.dim,
        energy=lambda x: kernel.energy(x) + constant,
        gradient=kernel.gradient,
        hessian=kernel.hessian,
        m=m,
        L=L,
        hessian_lipschitz=hessian_lipschitz,
        growth=growth,
        kernel=kernel,
        name=name,
    )


def center_at_mode(raw: PotentialSpec, tol: float = 1e-8, max_iter: int = 100_000,
                   x0: Optional[Array] = None) -> PotentialSpec:
    """Shift ``raw`` so that its minimizer is the origin and ``U(0) = 0``.

    Damped Newton when a Hessian is available, otherwise gradient descent with
    Armijo backtracking starting from step 1/L.  The returned potential is
    ``x -> U(x + x*) - U(x*)`` and its ``log_z_offset`` absorbs ``-U(x*)``.

    Raises
    ------
    OptimizationError
        If ``|grad U| <= tol`` is not reached within ``max_iter`` iterations.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    d = raw.dim
    x = np.zeros(d) if x0 is None else np.array(x0, dtype=float)
    fx = float(raw.energy(x))
    g = np.asarray(raw.gradient(x), dtype=float)
    gn = float(np.linalg.norm(g))
    best_x, best_gn = x.copy(), gn
    it = 0
    while gn > tol:
        if it >= max_iter:
            raise OptimizationError(
                f"mode search stopped after {max_iter} iterations with |grad U|={best_gn:.3e}",
                best_x, best_gn,
            )
        it += 1
        direction = -g / raw.L
        if raw.hessian is not None:
            try:
                step = np.linalg.solve(raw.hessian(x), g)
                if g @ step > 0:
                    direction = -step
            except np.linalg.LinAlgError:
                pass
        t = 1.0
        slope = float(g @ direction)
        while True:
            x_new = x + t * direction
            f_new = float(raw.energy(x_new))
            # Below ~1e-13 relative the Armijo test is pure rounding noise.
            if f_new <= fx + 1e-4 * t * slope or t < 1e-12 or abs(f_new - fx) <= 1e-13 * max(1.0, abs(fx)):
                break
            t *= 0.5
        x, fx = x_new, f_new
        g = np.asarray(raw.gradient(x), dtype=float)
        gn = float(np.linalg.norm(g))
        if gn < best_gn:
            best_x, best_gn = x.copy(), gn
    if not np.any(x) and fx == 0.0:
        return raw
    shift = x.copy()
    u_star = float(raw.energy(shift))
    raw_energy, raw_grad, raw_hess = raw.energy, raw.gradient, raw.hessian
    return dataclasses.replace(
        raw,
        energy=lambda z: raw_energy(np.asarray(z) + shift) - u_star,
        gradient=lambda z: raw_grad(np.asarray(z) + shift),
        hessian=None if raw_hess is None else (lambda z: raw_hess(np.asarray(z) + shift)),
        kernel=None if raw.kernel is None else raw.kernel.translated(shift),
        shift=raw.shift + shift,
        log_z_offset=raw.log_z_offset - u_star,
    )


def _check_spd(Q: Array, what: str) -> Array:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValidationError(f"{what} must be a square matrix")
    if not np.allclose(Q, Q.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise ValidationError(f"{what} must be symmetric")
    ev = np.linalg.eigvalsh(Q)
    if ev[0] <= 0:
        raise ValidationError(f"{what} is not positive definite (min eigenvalue {ev[0]:.3e})")
    return ev


def gaussian_potential(Q) -> PotentialSpec:
    """U(x) = x'Qx/2 with m, L the extreme eigenvalues of Q."""
    Q = np.array(Q, dtype=float)
    ev = _check_spd(Q, "precision matrix Q")
    d = Q.shape[0]
    kernel = KernelSpec("quadratic", np.zeros(d), matrix=0.5 * (Q + Q.T), vector=np.zeros(d))
    m, L = float(ev[0]), float(ev[-1])
    return potential_from_kernel(
        kernel, m, L, hessian_lipschitz=0.0,
        growth=growth_from_strong_convexity(m, d), name=f"gaussian-d{d}",
    )


def linear_regression_potential(data, prior_mean, prior_precision, noise_precision: float,
                                name: str = "linear-regression") -> PotentialSpec:
    """Centered negative log posterior of a Gaussian linear model.

    The likelihood is ``N(y; X theta, I/noise_precision)`` and the prior is
    ``N(prior_mean, prior_precision^{-1})``.  A singular prior precision is
    treated as an improper flat prior (no normalizing term).
    """
    X = np.asarray(data.covariates, dtype=float)
    y = np.asarray(data.responses, dtype=float)
    mu0 = np.asarray(prior_mean, dtype=float)
    P0 = np.atleast_2d(np.asarray(prior_precision, dtype=float))
    lam = float(noise_precision)
    if lam <= 0:
        raise ValidationError("noise precision must be positive")
    p, d = X.shape
    if mu0.shape != (d,) or P0.shape != (d, d) or y.shape != (p,):
        raise ValidationError("inconsistent dimensions between data and prior")
    H = lam * X.T @ X + P0
    H = 0.5 * (H + H.T)
    try:
        ev = _check_spd(H, "posterior precision")
    except ValidationError as exc:
        raise ValidationError(f"singular design: {exc}") from exc
    b = lam * X.T @ y + P0 @ mu0
    sign, logdet0 = np.linalg.slogdet(P0)
    prior_norm = 0.5 * logdet0 - 0.5 * d * math.log(2 * math.pi) if sign > 0 else 0.0
    constant = (
        0.5 * lam * y @ y + 0.5 * mu0 @ P0 @ mu0
        - 0.5 * p * math.log(lam / (2 * math.pi)) - prior_norm
    )
    kernel = KernelSpec("quadratic", np.zeros(d), matrix=H, vector=b)
    m, L = float(ev[0]), float(ev[-1])
    raw = potential_from_kernel(kernel, m, L, constant=constant, hessian_lipschitz=0.0,
                                growth=growth_from_strong_convexity(m, d), name=name)
    return center_at_mode(raw)


def logistic_regression_potential(data, prior_precision_scalar: float,
                                  name: str = "logistic-regression") -> PotentialSpec:
    """Centered negative log posterior of Bayesian logistic regression.

    Prior ``N(0, I/tau)``.  ``m = tau``, ``L = lambda_max(X'X)/4 + tau`` and the
    Hessian Lipschitz constant is ``sum_i |X_i|^3 / (6 sqrt 3)``.
    """
    X = np.asarray(data.covariates, dtype=float)
    y = np.asarray(data.responses, dtype=float)
    tau = float(prior_precision_scalar)
    if tau <= 0:
        raise ValidationError("prior precision must be positive")
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValidationError("inconsistent dimensions between responses and covariates")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("logistic responses must be 0 or 1")
    p, d = X.shape
    lam_max = float(np.linalg.eigvalsh(X.T @ X)[-1]) if p else 0.0
    row_norms = np.linalg.norm(X, axis=1)
    l_tilde = float(np.sum(row_norms**3)) * LOGISTIC_THIRD_DERIVATIVE_BOUND
    constant = 0.5 * d * math.log(2 * math.pi / tau)
    kernel = KernelSpec("logistic", np.zeros(d), matrix=X, vector=y, scalar=tau)
    raw = potential_from_kernel(kernel, tau, lam_max / 4.0 + tau, constant=constant,
                                hessian_lipschitz=l_tilde,
                                growth=growth_from_strong_convexity(tau, d), name=name)
    return center_at_mode(raw)


def logcosh_potential(dim: int = 1) -> PotentialSpec:
    """U(x) = |x|^2/2 + sum_j log cosh x_j; m = 1, L = 2."""
    kernel = KernelSpec("logcosh", np.zeros(dim))
    return potential_from_kernel(
        kernel, 1.0, 2.0, hessian_lipschitz=LOGCOSH_THIRD_DERIVATIVE_BOUND,
        growth=growth_from_strong_convexity(1.0, dim), name=f"logcosh-d{dim}",
    )


def pseudo_huber_potential(dim: int = 1, alpha: float = 1.0) -> PotentialSpec:
    """U(x) = alpha (sqrt(1 + |x|^2) - 1): convex, not strongly convex.

    L = alpha and U(x) >= alpha |x| - alpha.
    """
    kernel = KernelSpec("pseudo_huber", np.zeros(dim), scalar=float(alpha))
    return potential_from_kernel(
        kernel, 0.0, float(alpha),
        hessian_lipschitz=alpha * PSEUDO_HUBER_THIRD_DERIVATIVE_BOUND,
        growth=(float(alpha), float(alpha)), name=f"pseudo-huber-d{dim}",
    )
