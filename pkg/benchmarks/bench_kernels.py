"""Time the compiled kernels against the numpy reference implementations.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Reports the best-of-``repeat`` wall time for each kernel on the inputs the
scenarios actually produce (two-level and two-spin, dt = 1e-3).
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from ffscaling import _backend, _pure
from ffscaling.ffscale import MagnificationProtocol, sample_states, scaling_map
from ffscaling.qcore import standard_diagonal_basis
from ffscaling.scenarios import (
    TwoLevelScenario,
    run_two_level,
    two_level_exact,
    two_level_hamiltonian,
    two_spin_exact,
    two_spin_hamiltonian,
)


def rk4_case(dim: int, n_steps: int = 20000, dt: float = 1e-3):
    h = two_level_hamiltonian() if dim == 2 else two_spin_hamiltonian()
    hs = np.ascontiguousarray(h.sample(np.arange(2 * n_steps + 1) * (dt / 2)))
    psi0 = (two_level_exact if dim == 2 else two_spin_exact)(0.0)
    return hs, np.ascontiguousarray(psi0, dtype=complex), dt


def sweep_case(dim: int, n: int = 20001):
    h = two_level_hamiltonian() if dim == 2 else two_spin_hamiltonian()
    exact = two_level_exact if dim == 2 else two_spin_exact
    t_end = 9.99 if dim == 4 else 9.9  # stop short of the nodes so the sweep runs through
    ts = np.linspace(0.0, t_end, n)
    smap = scaling_map(MagnificationProtocol())
    lam, alpha = smap(ts), smap.derivative(ts)
    psil = sample_states(exact, lam)
    apsi = alpha[:, None] * np.einsum("kij,kj->ki", h.sample(lam), psil)
    basis = standard_diagonal_basis(dim)
    history = np.zeros((1, basis.size))
    args = (np.ascontiguousarray(apsi), np.ascontiguousarray(h.sample(ts)), np.ascontiguousarray(psil),
            np.ascontiguousarray(basis.diagonals), history, 1, n, 1e-12, 50, 1e-6, np.pi / 2)
    return args


def best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    kernels = {"pure": _pure}
    if "compiled" in _backend.KERNELS:
        kernels["compiled"] = _backend.get("compiled")
    else:
        print("compiled extension not available; timing the pure kernels only")

    print(f"{'kernel':<28}{'backend':<10}{'time [ms]':>12}{'speed-up':>10}")
    for dim in (2, 4):
        cases = {
            f"rk4_sampled (N={dim})": ("rk4_sampled", rk4_case(dim)),
            f"reality_sweep (N={dim})": ("reality_sweep", sweep_case(dim)),
        }
        for label, (name, case) in cases.items():
            times = {b: best(lambda k=k: getattr(k, name)(*case), args.repeat) for b, k in kernels.items()}
            for b, t in times.items():
                speed = times["pure"] / t
                print(f"{label:<28}{b:<10}{1e3 * t:>12.2f}{speed:>9.1f}x")

    start = timeit.default_timer()
    run_two_level(TwoLevelScenario())
    print(f"\nend-to-end two-level scenario ({_backend.BACKEND} backend): "
          f"{timeit.default_timer() - start:.2f} s")
    start = timeit.default_timer()
    run_two_level(TwoLevelScenario(), backend="pure")
    print(f"end-to-end two-level scenario (pure backend): {timeit.default_timer() - start:.2f} s")


if __name__ == "__main__":
    main()
