"""Compare the compiled and numpy Monte Carlo steppers.

    python3 benchmarks/bench_mc_kernel.py [--reps 20] [--dx 0.02] [--dt 1e-4]

Both backends consume the same random stream, so the benchmark also checks
that their outputs agree bit for bit.
"""
import argparse
import time

import numpy as np

from she_moments.mc import MCConfig, RhoSpec, available_backends, sample_points


def bench(cfg, backend, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = sample_points(cfg, [(cfg.t_end, 0.0)], backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--dx", type=float, default=0.02)
    ap.add_argument("--dt", type=float, default=1e-4)
    ap.add_argument("--t-end", type=float, default=0.5)
    ap.add_argument("--half-width", type=float, default=4.0)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()

    results = {}
    for rho in (RhoSpec(lam=1.0), RhoSpec(lam=1.0, varsigma=0.5)):
        cfg = MCConfig(a.half_width, a.dx, a.dt, a.t_end, a.reps, 12345, rho=rho, buffer_sigmas=5.5)
        updates = (cfg.n_nodes - 2) * cfg.step_of(cfg.t_end) * cfg.replications
        label = "pam" if rho.varsigma == 0 else "quasi-linear"
        for backend in available_backends():
            sec, out = bench(cfg, backend, a.repeat)
            results[(label, backend)] = out
            print(f"{label:13s} {backend:9s} {sec:8.3f} s  {updates / sec / 1e6:7.1f} M node-updates/s")
        if len(available_backends()) == 2:
            same = np.array_equal(results[(label, "compiled")], results[(label, "python")])
            print(f"{label:13s} bit-identical: {same}")


if __name__ == "__main__":
    main()
