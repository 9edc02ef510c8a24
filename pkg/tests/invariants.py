"""Independent re-statement of the schedule invariants and tuning inequalities.

Written from the mathematical statements, not from ``logz.schedule``, so the
two implementations check each other.
"""
import math

RTOL = 1e-9


def leq(x, y, rtol=RTOL):
    return x <= y * (1 + rtol) + 1e-300


def tuning_violations(sched, p):
    """List every violated tuning inequality of the theoretical preset."""
    out = []
    d, K, eta = sched.dim, sched.K, sched.eta
    lt = p.hessian_lipschitz or 0.0
    for ph in sched.phases:
        g, n, N = ph.gamma, ph.n, ph.burn_in
        mi, Li, k, s2 = ph.m_i, ph.L_i, ph.kappa_i, ph.sigma2
        s = math.sqrt(s2)
        if not leq(g, 1 / (mi + Li)):
            out.append((ph.index, "gamma <= 1/(m_i+L_i)"))
        kg = k * g
        if sched.regime == "strong":
            if not ph.is_final:
                cap = (math.sqrt(3 / 7) * eta * k * math.sqrt(mi) * s2 / (8 * K * d)
                       / math.sqrt(d * lt**2 + 10 * Li**4 / mi)) if sched.a3 else \
                    eta**2 * k**2 * s2**2 * mi / (2285 * K**2 * d**2 * Li**2)
                checks = [(g, cap, "step"),
                          (196 * K / eta**2 * math.sqrt(mi) / (k * s) / kg, n, "samples"),
                          (2 / kg * math.log(5 * K * d * d), N, "burn-in")]
            else:
                cap = (math.sqrt(3 / 7) * eta * k / math.sqrt(mi) / 4
                       / math.sqrt(d * lt**2 + 10 * Li**4 / mi)) if sched.a3 else \
                    eta**2 * mi / (40 * Li**2)
                checks = [(g, cap, "final step"), (19 / (kg * eta**2), n, "final samples"),
                          (1 / kg, N, "final burn-in")]
        else:
            if not ph.is_final:
                cap = (math.sqrt(3 / 7) * eta / (s * 8 * K * d)
                       / math.sqrt(d * lt**2 + 10 * Li**4 * s2)) if sched.a3 else \
                    eta**2 / (Li**2 * s2 * 462 * K**2 * d**2)
                checks = [(g, cap, "step"), (453 * K / (eta**2 * kg), n, "samples"),
                          (2 / kg * math.log(K * d * d), N, "burn-in")]
            else:
                cap = (math.sqrt(3 / (8 * math.e)) * eta * k * s / math.sqrt(d)
                       / math.sqrt(d * lt**2 + 10 * Li**4 * s2)) if sched.a3 else \
                    eta**2 * k / (26 * d * Li**2)
                checks = [(g, cap, "final step"), (29 / (eta**2 * kg), n, "final samples"),
                          (2 / kg * math.log(d), N, "final burn-in")]
        for lo, hi, name in checks:
            if not leq(lo, hi):
                out.append((ph.index, f"{name}: {lo!r} > {hi!r}"))
    return out


def schedule_violations(sched, p):
    """List every violated structural invariant of a schedule."""
    out = []
    d, s0 = sched.dim, sched.sigma2_0
    ph = sched.phases
    M = len(ph)
    m = sched.m
    for i in range(M - 1):
        if not ph[i + 1].sigma2 > ph[i].sigma2:
            out.append((i, "variances not increasing"))
        if not ph[i + 1].sigma2 / ph[i].sigma2 >= (4 * d + 16) / (4 * d + 15) * (1 - RTOL):
            out.append((i, "growth ratio below (4d+16)/(4d+15)"))
        if not math.isclose(ph[i].a, 0.5 * (1 / ph[i].sigma2 - 1 / ph[i + 1].sigma2), rel_tol=1e-12):
            out.append((i, "a_i not the half-difference of inverse variances"))
        if sched.stride == 1 and not leq(ph[i].a, ph[i].m_i / (4 * (d + 4))):
            out.append((i, "a_i > m_i/(4(d+4))"))
        lo, hi = s0 * 2.0**ph[i].chunk, s0 * 2.0**(ph[i].chunk + 1)
        if not (lo <= ph[i].sigma2 < hi):
            out.append((i, "chunk band mismatch"))
    if not math.isclose(ph[-1].a, 0.5 / ph[-1].sigma2, rel_tol=1e-12):
        out.append((M - 1, "final a != 1/(2 sigma^2)"))
    for p_ in ph:
        if not math.isclose(p_.m_i, m + 1 / p_.sigma2, rel_tol=1e-12):
            out.append((p_.index, "m_i"))
        if not math.isclose(p_.L_i, sched.L + 1 / p_.sigma2, rel_tol=1e-12):
            out.append((p_.index, "L_i"))
        if not math.isclose(p_.kappa_i, 2 * p_.m_i * p_.L_i / (p_.m_i + p_.L_i), rel_tol=1e-12):
            out.append((p_.index, "kappa_i"))
    # chunk identity and count
    for k, members in enumerate(sched.chunks):
        for i in members:
            if not leq(2.0**(k + 1) * s0 * ph[i].a * len(members), 1.0):
                out.append((i, "2^(k+1) sigma2_0 a_i |I_k| > 1"))
    if sum(len(c) for c in sched.chunks) != M - 1:
        out.append((-1, "chunks do not partition the non-final phases"))
    if sched.regime == "strong":
        T = (2 * d + 7) / m
        if not (ph[-1].sigma2 >= T and (M == 1 or ph[-2].sigma2 < T)):
            out.append((M - 1, "stopping rule (2d+7)/m"))
        if not sched.K <= math.ceil(math.log2(T / s0)):
            out.append((-1, "K above the log2 bound"))
        for p_ in ph[:-1]:
            if not leq(p_.kappa_i * p_.sigma2, 4 * d + 16):
                out.append((p_.index, "kappa_i sigma_i^2 > 4d+16"))
    else:
        D2 = sched.truncation.D ** 2
        if not (ph[-1].sigma2 >= D2 and (M == 1 or ph[-2].sigma2 < D2)):
            out.append((M - 1, "stopping rule D^2"))
        if sched.stride == 1 and not leq(ph[-1].sigma2, 10 / 9 * D2):
            out.append((M - 1, "final variance above (10/9) D^2"))
        for p_ in ph:
            ks = p_.kappa_i * p_.sigma2
            if not (1 - RTOL <= ks <= 2 * (1 + RTOL)):
                out.append((p_.index, "kappa_i sigma_i^2 outside [1, 2]"))
    return out


def shorten(sched, n, burn_in):
    """Same schedule with every chain cut to ``burn_in + n`` steps."""
    import dataclasses

    return dataclasses.replace(sched, phases=tuple(
        dataclasses.replace(ph, n=n, burn_in=burn_in) for ph in sched.phases))
