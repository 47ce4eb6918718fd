"""The compiled kernels must reproduce the numpy reference kernels."""

import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_hermitian, random_state
from ffscaling import _backend, _pure
from ffscaling.dynamics import TimeGrid
from ffscaling.ffscale import MagnificationProtocol, sample_states, scaling_map, solve_phase_condition
from ffscaling.qcore import standard_diagonal_basis
from ffscaling.scenarios import two_spin_exact, two_spin_hamiltonian

compiled = pytest.mark.skipif("compiled" not in _backend.KERNELS, reason="extension not built")


@compiled
def test_rk4_agrees(rng):
    ext = _backend.get("compiled")
    hs = np.array([random_hermitian(rng, 4) for _ in range(201)])
    psi0 = random_state(rng, 4)
    a = _pure.rk4_sampled(hs, psi0, 1e-2)
    b = ext.rk4_sampled(hs, psi0, 1e-2)
    np.testing.assert_allclose(b, a, atol=1e-13)


def _sweep_inputs(n=400):
    w = np.pi / 40
    smap = scaling_map(MagnificationProtocol())
    ts = np.linspace(0, 9.9, n)
    lam, alpha = smap(ts), smap.derivative(ts)
    h = two_spin_hamiltonian(w)
    psil = sample_states(lambda t: two_spin_exact(t, w), lam)
    apsi = alpha[:, None] * np.einsum("kij,kj->ki", h.sample(lam), psil)
    return apsi, h.sample(ts), psil, standard_diagonal_basis(4).diagonals


@compiled
def test_reality_sweep_agrees():
    ext = _backend.get("compiled")
    apsi, bs, psil, xdiag = _sweep_inputs()
    args = (apsi, bs, psil, xdiag, np.zeros((1, 3)), 1, len(bs), 1e-12, 50, 1e-6, np.pi / 2)
    pa, ra, sa, ka = _pure.reality_sweep(*args)
    pb, rb, sb, kb = ext.reality_sweep(*args)
    assert (sa, ka) == (sb, kb) == (_pure.STATUS_OK, len(bs))
    np.testing.assert_allclose(pb, pa, atol=1e-12)
    assert np.max(rb) < 1e-12


@compiled
def test_sweep_stops_at_node():
    ext = _backend.get("compiled")
    apsi, bs, psil, xdiag = _sweep_inputs()
    psil = psil.copy()
    psil[50, 0] = 0.0
    args = (apsi, bs, psil, xdiag, np.zeros((1, 3)), 1, len(bs), 1e-12, 50, 1e-6, np.pi / 2)
    for kernel in (_pure, ext):
        _, _, status, k = kernel.reality_sweep(*args)
        assert (status, k) == (_pure.STATUS_NODE, 50)


@compiled
@pytest.mark.parametrize("name", ["pure", "compiled"])
def test_solver_backends_agree(name):
    grid = TimeGrid(0.0, 10.0, 1e-2)
    args = (two_spin_hamiltonian(), two_spin_exact, scaling_map(MagnificationProtocol()),
            standard_diagonal_basis(4), grid)
    ref = solve_phase_condition(*args, backend="pure")
    other = solve_phase_condition(*args, backend=name)
    np.testing.assert_allclose(other.phases, ref.phases, atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_pure_fallback_selected_by_environment():
    env = dict(os.environ, FFSCALING_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import ffscaling; print(ffscaling.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "pure"
