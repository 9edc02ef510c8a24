"""Pure-numpy ULA kernels, used when the compiled core is unavailable.

``advance`` mirrors the compiled routine step for step.  ``advance_batch``
moves many independent chains at once, one vectorized update per step, which
is how the fallback stays usable: the phases of a run are independent and
share the potential, so a whole run advances together.
"""
from __future__ import annotations

import math

import numpy as np

KIND_CODES = {"quadratic": 0, "logistic": 1, "logcosh": 2, "pseudo_huber": 3}


def _kernel_gradient(kind, mat, vec, shift, scal, x):
    y = x + shift
    if kind == 0:
        return y @ mat.T - vec
    if kind == 1:
        t = y @ mat.T
        return (0.5 * (1.0 + np.tanh(0.5 * t)) - vec) @ mat + scal * y
    if kind == 2:
        return y + np.tanh(y)
    r = np.sqrt(1.0 + np.sum(y * y, axis=-1, keepdims=True))
    return scal * y / r


def _fold(acc, e):
    """Streaming log-sum-exp update of ``acc = (max, scaled sum, count)``."""
    mx, sc, cnt = acc
    if e > mx:
        sc = sc * math.exp(mx - e) + 1.0
        mx = e
    else:
        sc += math.exp(e - mx)
    acc[0], acc[1], acc[2] = mx, sc, cnt + 1.0


def advance(kind, mat, vec, shift, scal, x, gamma, inv_s2, noise, step0, n_burn, a, cap, acc):
    """Same contract as the compiled ``advance``; updates ``x`` and ``acc`` in place."""
    sq = math.sqrt(2.0 * gamma)
    for j in range(noise.shape[0]):
        g = _kernel_gradient(kind, mat, vec, shift, scal, x) + inv_s2 * x
        x -= gamma * g
        x += sq * noise[j]
        r2 = float(x @ x)
        if not math.isfinite(r2):
            return j
        if step0 + j >= n_burn:
            _fold(acc, a * min(r2, cap))
    return -1


def advance_batch(gradient, X, gamma, inv_s2, noise, step0, n_burn, a, cap, acc):
    """Advance P chains by ``noise.shape[1]`` steps.

    ``X`` is (P, d), ``noise`` is (P, B, d); ``gamma``, ``inv_s2``, ``step0``,
    ``n_burn``, ``a`` and ``cap`` are length-P arrays and ``acc`` is (P, 3).
    ``gradient`` evaluates grad U row-wise on a (P, d) array.  Returns a
    length-P integer array holding -1 or the offset of the first non-finite
    state; a diverged chain is frozen from that step on.
    """
    P, B, _ = noise.shape
    sq = np.sqrt(2.0 * gamma)[:, None]
    gam = gamma[:, None]
    tilt = inv_s2[:, None]
    bad = np.full(P, -1, dtype=np.int64)
    live = np.ones(P, dtype=bool)
    for j in range(B):
        g = gradient(X) + tilt * X
        X_new = X - gam * g + sq * noise[:, j, :]
        r2 = np.einsum("ij,ij->i", X_new, X_new)
        blown = live & ~np.isfinite(r2)
        if blown.any():
            bad[blown] = j
            live &= ~blown
        X[live] = X_new[live]
        obs = live & (step0 + j >= n_burn)
        if obs.any():
            e = a[obs] * np.minimum(r2[obs], cap[obs])
            mx, sc = acc[obs, 0], acc[obs, 1]
            up = e > mx
            sc = np.where(up, sc * np.exp(np.minimum(mx - e, 0.0)) + 1.0,
                          sc + np.exp(np.minimum(e - mx, 0.0)))
            acc[obs, 0] = np.maximum(mx, e)
            acc[obs, 1] = sc
            acc[obs, 2] += 1.0
    return bad
