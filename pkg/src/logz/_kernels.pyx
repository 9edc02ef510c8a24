# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ULA inner loop.

``advance`` pushes one chain through a block of pre-drawn Gaussian noise,
evaluating the gradient of a closed-form kernel (see ``KernelSpec``) plus the
quadratic tilt ``x / sigma^2``, and folds ``a * min(|x|^2, cap)`` of every
post-burn-in state into a streaming log-sum-exp accumulator.
"""
from libc.math cimport sqrt, exp, tanh, isfinite, fmin

import numpy as np

DEF QUADRATIC = 0
DEF LOGISTIC = 1
DEF LOGCOSH = 2
DEF PSEUDO_HUBER = 3

KIND_CODES = {"quadratic": QUADRATIC, "logistic": LOGISTIC,
              "logcosh": LOGCOSH, "pseudo_huber": PSEUDO_HUBER}


cdef inline void _gradient(int kind, const double* mat, const double* vec,
                           const double* shift, double scal, const double* x,
                           double inv_s2, Py_ssize_t d, Py_ssize_t p, double* y,
                           double* t, double* g) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s, r
    for i in range(d):
        y[i] = x[i] + shift[i]
    if kind == QUADRATIC:
        for i in range(d):
            s = -vec[i]
            for j in range(d):
                s += mat[i * d + j] * y[j]
            g[i] = s
    elif kind == LOGISTIC:
        for i in range(d):
            g[i] = scal * y[i]
        for j in range(p):
            s = 0.0
            for i in range(d):
                s += mat[j * d + i] * y[i]
            t[j] = 0.5 * (1.0 + tanh(0.5 * s)) - vec[j]
        for j in range(p):
            s = t[j]
            for i in range(d):
                g[i] += s * mat[j * d + i]
    elif kind == LOGCOSH:
        for i in range(d):
            g[i] = y[i] + tanh(y[i])
    else:
        r = 1.0
        for i in range(d):
            r += y[i] * y[i]
        r = scal / sqrt(r)
        for i in range(d):
            g[i] = r * y[i]
    for i in range(d):
        g[i] += inv_s2 * x[i]


def advance(int kind, const double[:, ::1] mat, const double[::1] vec,
            const double[::1] shift, double scal, double[::1] x, double gamma,
            double inv_s2, const double[:, ::1] noise, long long step0,
            long long n_burn, double a, double cap, double[::1] acc):
    """Run ``noise.shape[0]`` ULA steps in place on ``x``.

    ``acc`` holds ``(max exponent, scaled sum, count)`` and is updated for each
    state whose step index (``step0 + j``) is at least ``n_burn``.  Returns -1,
    or the offset of the first step that produced a non-finite state.
    """
    cdef Py_ssize_t d = x.shape[0]
    cdef Py_ssize_t n = noise.shape[0]
    cdef Py_ssize_t p = mat.shape[0]
    if noise.shape[1] != d or shift.shape[0] != d:
        raise ValueError("dimension mismatch between state, shift and noise")
    if kind == LOGISTIC:
        if mat.shape[1] != d or vec.shape[0] != p:
            raise ValueError("logistic design does not match the state dimension")
    elif kind == QUADRATIC:
        if mat.shape[0] != d or mat.shape[1] != d or vec.shape[0] != d:
            raise ValueError("quadratic kernel does not match the state dimension")
    cdef double[::1] ybuf = np.empty(d)
    cdef double[::1] gbuf = np.empty(d)
    cdef double[::1] tbuf = np.empty(max(p, 1))
    cdef double* y = &ybuf[0]
    cdef double* g = &gbuf[0]
    cdef double* t = &tbuf[0]
    cdef double* xp = &x[0]
    cdef const double* mp = &mat[0, 0]
    cdef const double* vp = &vec[0]
    cdef const double* sp = &shift[0]
    cdef const double* wp = &noise[0, 0] if n > 0 else NULL
    cdef double sq = sqrt(2.0 * gamma)
    cdef double mx = acc[0], sc = acc[1], cnt = acc[2]
    cdef double r2, e
    cdef Py_ssize_t j, i
    cdef long long bad = -1
    with nogil:
        for j in range(n):
            _gradient(kind, mp, vp, sp, scal, xp, inv_s2, d, p, y, t, g)
            r2 = 0.0
            for i in range(d):
                xp[i] = xp[i] - gamma * g[i] + sq * wp[j * d + i]
                r2 += xp[i] * xp[i]
            if not isfinite(r2):
                bad = j
                break
            if step0 + j >= n_burn:
                e = a * fmin(r2, cap)
                if e > mx:
                    sc = sc * exp(mx - e) + 1.0
                    mx = e
                else:
                    sc += exp(e - mx)
                cnt += 1.0
    acc[0] = mx
    acc[1] = sc
    acc[2] = cnt
    return bad
