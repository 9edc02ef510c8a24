"""Compiled versus numpy ULA kernels.

Runs the same chains through both backends, checks that they agree, and
reports nanoseconds per chain step.

    python benchmarks/bench_kernels.py [--steps 200000] [--chains 4]
"""
import argparse
import time

import numpy as np

from logz import _backend
from logz.models import build_model
from logz.sampler import RngStream, run_phases
from logz.schedule import PhaseParams

MODELS = {
    "gaussian d=10": {"name": "gaussian", "dim": 10},
    "logcosh d=3": {"name": "logcosh", "dim": 3},
    "pseudo_huber d=2": {"name": "pseudo_huber", "dim": 2},
    "radiata d=2": {"name": "radiata"},
    "pima d=5": {"name": "pima"},
}


def phases_for(p, steps, chains):
    gamma = 0.5 / (p.m + p.L + 2.0)
    return [PhaseParams(index=i, sigma2=1.0 + i, a=0.01, m_i=p.m + 1.0, L_i=p.L + 1.0,
                        kappa_i=1.0, gamma=gamma, n=steps - steps // 10, burn_in=steps // 10,
                        chunk=0) for i in range(chains)]


def timed(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--chains", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _backend.compiled is None:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    total = args.steps * args.chains
    print(f"{'model':<18} {'compiled ns/step':>17} {'python ns/step':>15} {'speedup':>8} {'max |diff|':>11}")
    for label, spec in MODELS.items():
        p = build_model(spec).potential
        phases = phases_for(p, args.steps, args.chains)
        streams = [RngStream(0, i) for i in range(args.chains)]
        tc, rc = timed(lambda: run_phases(p, phases, streams, backend="compiled", workers=1), args.repeat)
        tp, rp = timed(lambda: run_phases(p, phases, streams, backend="python"), args.repeat)
        diff = max(abs(a.log_mean - b.log_mean) for a, b in zip(rc, rp))
        print(f"{label:<18} {1e9 * tc / total:>17.1f} {1e9 * tp / total:>15.1f} "
              f"{tp / tc:>8.2f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
