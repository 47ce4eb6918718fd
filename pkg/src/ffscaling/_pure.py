"""Pure numpy implementations of the hot kernels.

These define the reference behaviour; ``_ext.pyx`` mirrors them loop for loop.
"""

import numpy as np

from .solver import NewtonResult, newton_solve, predictor

STATUS_OK = 0
STATUS_FAILED = 1
STATUS_NODE = 2
STATUS_JUMP = 3


def rk4_sampled(hs, psi0, dt):
    """Classical RK4 for i dpsi/dt = H psi with H pre-sampled at half steps.

    ``hs[2j]``, ``hs[2j+1]``, ``hs[2j+2]`` are H at the start, midpoint and
    end of step j. Returns the states at the n+1 grid points.
    """
    hs = np.asarray(hs, dtype=complex)
    n = (hs.shape[0] - 1) // 2
    out = np.empty((n + 1, hs.shape[1]), dtype=complex)
    y = np.array(psi0, dtype=complex)
    out[0] = y
    half = 0.5 * dt
    for j in range(n):
        h0, hm, h1 = hs[2 * j], hs[2 * j + 1], hs[2 * j + 2]
        k1 = -1j * (h0 @ y)
        k2 = -1j * (hm @ (y + half * k1))
        k3 = -1j * (hm @ (y + half * k2))
        k4 = -1j * (h1 @ (y + dt * k3))
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[j + 1] = y
    return out


def reality_residual(phi, apsi, b, psil, xdiag):
    """Weighted imaginary parts |psi_s| Im V(s) and their phase Jacobian.

    ``apsi`` is alpha H(Lambda) psi(Lambda), ``b`` is H(t), ``psil`` is
    psi(Lambda); the phase-velocity term is real and drops out.
    """
    u = np.exp(-1j * (phi @ xdiag))
    y = u * psil
    by = b @ y
    mag = np.abs(psil)
    safe = np.where(mag > 0, mag, 1.0)
    base = np.imag(psil.conj() * apsi - y.conj() * by)
    r = np.where(mag > 0, base / safe, 0.0)
    # d/dphi_a of conj(y) * (B y) with dy/dphi_a = -i x_a y
    term = y.conj() * by
    jac = np.empty((psil.size, xdiag.shape[0]))
    for a, xa in enumerate(xdiag):
        d = 1j * xa * term - 1j * y.conj() * (b @ (xa * y))
        jac[:, a] = np.where(mag > 0, -np.imag(d) / safe, 0.0)
    return r, jac


def reality_sweep(apsi, bs, psil, xdiag, history, start, stop, tol, max_iter, node_eps, jump):
    """Newton continuation of the reality condition over samples [start, stop).

    ``history`` holds 1 to 3 previous solutions (newest last); each sample is
    seeded by their quadratic extrapolation. Returns ``(phases, residuals,
    status, index)``: the sweep halts at the first sample that is nodal, fails
    to converge or jumps branch, leaving ``index`` pointing at it
    (``index == stop`` when the sweep completed).
    """
    m = xdiag.shape[0]
    phases = np.zeros((stop - start, m))
    residuals = np.zeros(stop - start)
    hist = [np.array(row, dtype=float) for row in np.atleast_2d(history)[-3:]]
    for k in range(start, stop):
        if np.min(np.abs(psil[k])) < node_eps:
            return phases, residuals, STATUS_NODE, k
        res: NewtonResult = newton_solve(
            lambda p: reality_residual(p, apsi[k], bs[k], psil[k], xdiag), predictor(hist), tol, max_iter
        )
        if not res.converged:
            return phases, residuals, STATUS_FAILED, k
        if np.max(np.abs(res.x - hist[-1])) > jump:
            return phases, residuals, STATUS_JUMP, k
        hist = (hist + [res.x])[-3:]
        phases[k - start] = res.x
        residuals[k - start] = res.residual
    return phases, residuals, STATUS_OK, stop
