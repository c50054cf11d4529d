"""Benchmark the compiled theta-scheme core against the numpy fallback.

Usage: python benchmarks/bench_theta_scheme.py [--sizes 200,500,1000]
"""

import argparse
import os
import time

import numpy as np

import porophase as pp


def run_case(N, steps, backend):
    par = pp.ModelParams(a=0.5, b=1.0, p=0.24, alpha=100.0,
                         k1=1e-3, k2=1e-3, k3=1e-3)
    grid = pp.build_grid(0.0, 1.0, N)
    tau = 0.9 * pp.max_stable_tau(1.0, grid.h, par.k2).tau_max
    cfg = pp.ThetaSchemeConfig(theta=1.0, tau=tau, T=steps * tau,
                               steady_tol=0.0, monitor_stride=max(1, steps // 50))
    init = (lambda x: -0.141 - 0.01 * np.sin(np.pi * x),
            lambda x: -0.13 + 0.005 * np.cos(np.pi * x) - 0.005)
    os.environ["POROPHASE_BACKEND"] = backend
    try:
        t0 = time.perf_counter()
        res = pp.run_evolution(grid, cfg, par, (pp.f1_table(par), pp.f2_table(par)),
                               init, (-0.141, -0.13))
        dt = time.perf_counter() - t0
    finally:
        os.environ.pop("POROPHASE_BACKEND", None)
    return res, dt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="200,500,1000")
    ap.add_argument("--steps", type=int, default=20000)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    have_compiled = pp.backend_name() == "compiled"
    print(f"compiled core available: {have_compiled}")
    print(f"{'N':>6} {'backend':>9} {'steps/s':>12} {'us/step':>9} {'speedup':>8}")
    for N in sizes:
        base_rate = None
        results = {}
        for backend in (["python", "compiled"] if have_compiled else ["python"]):
            steps = args.steps if backend == "compiled" else max(200, args.steps // 20)
            res, dt = run_case(N, steps, backend)
            rate = res.n_steps / dt
            results[backend] = res
            speed = f"{rate / base_rate:6.1f}x" if base_rate else "      -"
            if base_rate is None:
                base_rate = rate
            print(f"{N:>6} {backend:>9} {rate:>12.0f} {1e6 / rate:>9.1f} {speed:>8}")
        if have_compiled:
            a = results["python"].state
            steps_a = results["python"].n_steps
            b, _ = run_case(N, steps_a, "compiled")
            gap = max(np.abs(a.eps.values - b.state.eps.values).max(),
                      np.abs(a.m.values - b.state.m.values).max())
            print(f"{'':>6} agreement after {steps_a} steps: max |diff| = {gap:.2e}")


if __name__ == "__main__":
    main()
