"""Compare the compiled and numpy kernels on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from mqsprep import kernels, stateprep
from mqsprep.qmc import constant_series, w_theta_for_sum


def _circuit_arrays(circuit):
    return circuit._flat


def workloads():
    rng = np.random.default_rng(7)
    out = {}

    # QSP products: degree-64 sequence on 4096 points
    ph = rng.uniform(-np.pi, np.pi, 65)
    word = np.zeros(64, dtype=np.int64)
    X = np.ascontiguousarray(rng.uniform(0, np.pi, (4096, 1)))
    out["qsp_products d=64 x4096"] = ("qsp", (ph, word, X))

    # bivariate products: degree 10 on a 101 x 101 grid
    ph2 = rng.uniform(-np.pi, np.pi, 11)
    w2 = rng.integers(0, 2, 10).astype(np.int64)
    X2 = np.ascontiguousarray(rng.uniform(-np.pi, np.pi, (101 * 101, 2)))
    out["mqsp_products d=10 x10201"] = ("qsp", (ph2, w2, X2))

    # statevector: amplified Gaussian preparation, degree 16, n = 10
    _, plan = stateprep.prepare_single_variable(lambda x: np.exp(-x**2 / 0.125), 10, 16)
    out["apply gaussian prep n=10"] = ("apply", (plan.circuit, plan.circuit.layout.dim, 1))

    # statevector batch: W_theta, D=2, n=4, 64 columns
    w = w_theta_for_sum(constant_series(0.3), (4, 4))
    out["apply W_theta batch=64"] = ("apply", (w, w.layout.dim, 64))
    return out


def run(repeat: int = 5) -> list[tuple[str, float, float]]:
    fast_apply, fast_qsp = kernels.get_backend("cython")
    slow_apply, slow_qsp = kernels.get_backend("python")
    rows = []
    for name, (kind, args) in workloads().items():
        if kind == "qsp":
            t_c = min(timeit.repeat(lambda: fast_qsp(*args), number=1, repeat=repeat))
            t_p = min(timeit.repeat(lambda: slow_qsp(*args), number=1, repeat=repeat))
        else:
            circ, dim, batch = args
            bitpos, cmask, cval, mats = _circuit_arrays(circ)
            state = np.zeros((dim, batch), dtype=complex)
            state[0] = 1.0

            def go(fn):
                s = state.copy()
                fn(s, bitpos, cmask, cval, mats)

            t_c = min(timeit.repeat(lambda: go(fast_apply), number=1, repeat=repeat))
            t_p = min(timeit.repeat(lambda: go(slow_apply), number=1, repeat=repeat))
        rows.append((name, t_c, t_p))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'workload':32s} {'cython [ms]':>12s} {'python [ms]':>12s} {'speedup':>8s}")
    for name, t_c, t_p in run(args.repeat):
        print(f"{name:32s} {1e3 * t_c:12.3f} {1e3 * t_p:12.3f} {t_p / t_c:8.1f}x")


if __name__ == "__main__":
    main()
