"""Reference values of log Z used to check the estimator.

Closed forms for Gaussian targets and the conjugate linear model, and a
tensor-grid Simpson rule (log-space) for targets in at most three dimensions.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaincc, gammaln, logsumexp

from .errors import OracleUnavailableError, ValidationError
from .potential import PotentialSpec


def _cholesky(Q, what):
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T, rtol=1e-10, atol=1e-14):
        raise ValidationError(f"{what} must be a symmetric square matrix")
    try:
        return np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise ValidationError(f"{what} is not positive definite") from None


def gaussian_log_evidence(Q) -> float:
    """log of the integral of exp(-x'Qx/2): (d/2) log 2 pi - log det(Q)/2."""
    C = _cholesky(Q, "precision matrix")
    d = C.shape[0]
    return 0.5 * d * math.log(2.0 * math.pi) - float(np.sum(np.log(np.diag(C))))


def conjugate_linear_log_evidence(data, prior_mean, prior_precision, noise_precision: float) -> float:
    """Exact log marginal likelihood of y ~ N(X theta, I/lambda), theta ~ N(mu0, P0^{-1})."""
    X = np.atleast_2d(np.asarray(data.covariates, dtype=float))
    y = np.asarray(data.responses, dtype=float)
    mu0 = np.asarray(prior_mean, dtype=float)
    P0 = np.atleast_2d(np.asarray(prior_precision, dtype=float))
    lam = float(noise_precision)
    p = y.shape[0]
    if p == 0:
        return 0.0
    C0 = _cholesky(P0, "prior precision")
    H = lam * X.T @ X + P0
    CH = _cholesky(H, "posterior precision")
    b = lam * X.T @ y + P0 @ mu0
    # completing the square: quadratic form at the posterior mean
    w = np.linalg.solve(CH, b)
    quad = lam * y @ y + mu0 @ P0 @ mu0 - w @ w
    return float(
        0.5 * p * math.log(lam / (2.0 * math.pi))
        + np.sum(np.log(np.diag(C0))) - np.sum(np.log(np.diag(CH)))
        - 0.5 * quad
    )


def _simpson_log_weights(n: int, h: float) -> np.ndarray:
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return np.log(w * h / 3.0)


def envelope_tail_log_mass(p: PotentialSpec, radius: float) -> float:
    """log of an upper bound on the mass of exp(-U) outside the cube [-radius, radius]^d,
    relative to a lower bound on Z.

    Uses exp(-m|x|^2/2) for m > 0 and exp(-rho1 |x| + rho2) otherwise; the
    outside of the cube lies outside the ball of the same radius.
    """
    d = p.dim
    if p.m > 0:
        tail = math.log(max(gammaincc(d / 2.0, p.m * radius**2 / 2.0), 1e-300))
        tail += 0.5 * d * math.log(2 * math.pi / p.m)
        lower = 0.5 * d * math.log(2 * math.pi / p.L)
        return tail - lower
    if p.growth is None:
        raise ValidationError("quadrature tail check needs m > 0 or growth constants")
    rho1, rho2 = p.growth
    # integral over |x| > r of exp(-rho1 |x| + rho2) in d dimensions
    log_area = math.log(2.0) + 0.5 * d * math.log(math.pi) - gammaln(d / 2.0)
    tail = (rho2 + log_area - d * math.log(rho1) + gammaln(d)
            + math.log(max(gammaincc(d, rho1 * radius), 1e-300)))
    lower = 0.5 * d * math.log(2 * math.pi / p.L)
    return tail - lower


def quadrature_log_Z(p: PotentialSpec, radius: float, points_per_dim: int,
                     tail_tol: float = 1e-12) -> float:
    """log of the Simpson tensor-grid integral of exp(-U) over [-radius, radius]^d.

    Raises OracleUnavailableError for d > 3 and ValidationError when the
    envelope bound on the neglected tail exceeds ``tail_tol``.
    """
    d = p.dim
    if d > 3:
        raise OracleUnavailableError(f"tensor quadrature supports d <= 3, got d={d}")
    if radius <= 0 or points_per_dim < 3:
        raise ValidationError("radius must be positive and points_per_dim at least 3")
    if envelope_tail_log_mass(p, radius) > math.log(tail_tol):
        raise ValidationError(f"radius {radius} leaves tail mass above {tail_tol:g}")
    n = points_per_dim if points_per_dim % 2 == 1 else points_per_dim + 1
    grid = np.linspace(-radius, radius, n)
    lw = _simpson_log_weights(n, grid[1] - grid[0])
    mesh = np.stack(np.meshgrid(*([grid] * d), indexing="ij"), axis=-1).reshape(-1, d)
    log_w = sum(np.meshgrid(*([lw] * d), indexing="ij")).reshape(-1)
    vals = -np.asarray(p.energy(mesh), dtype=float)
    return float(logsumexp(vals + log_w))
