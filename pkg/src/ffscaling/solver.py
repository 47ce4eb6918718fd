"""Newton iteration with branch continuation.

Both the reality-condition solver and the adiabatic-frame condition solver
go through :func:`newton_solve`; the sweep helpers add continuation on top.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
BRANCH_JUMP = np.pi / 2

# Offsets tried around the continuation seed when plain Newton stalls
# (folds and double roots have a vanishing Jacobian at the seed).
RESTART_OFFSETS = (1e-6, 1e-4, 1e-3, 1e-2, 1e-1)


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: float
    converged: bool
    iterations: int


def lstsq_step(jac: np.ndarray, r: np.ndarray) -> np.ndarray:
    if jac.shape == (1, 1):
        d = jac[0, 0]
        return np.array([-r[0] / d]) if d != 0.0 else np.zeros(1)
    return np.linalg.lstsq(jac, -r, rcond=1e-13)[0]


def newton_solve(
    fun: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    x0,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> NewtonResult:
    """Gauss-Newton on a consistent (possibly overdetermined) system.

    ``fun(x)`` returns ``(residual, jacobian)``. Once the max-norm residual is
    below ``tol`` one extra polishing step is taken and kept if it does not
    make things worse.
    """
    x = np.array(x0, dtype=float)
    r, jac = fun(x)
    res = float(np.max(np.abs(r)))
    it = 0
    while res > tol and it < max_iter:
        step = lstsq_step(jac, r)
        if not np.all(np.isfinite(step)):
            break
        x = x + step
        r, jac = fun(x)
        res = float(np.max(np.abs(r)))
        it += 1
        if np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(x)):
            break
    if res <= tol:
        step = lstsq_step(jac, r)
        if np.all(np.isfinite(step)):
            rp, _ = fun(x + step)
            resp = float(np.max(np.abs(rp)))
            if resp <= res:
                x, res = x + step, resp
    return NewtonResult(x, res, res <= tol, it)


def restart_solve(
    fun, seed, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER, max_dist: float = np.inf
) -> NewtonResult:
    """Newton from ``seed``; on failure retry from perturbed seeds.

    A root farther than ``max_dist`` (max-norm) from the seed counts as a
    failure too: near a double root the plain Newton step overshoots into a
    distant periodic copy. Among converged restarts the root nearest the
    seed wins.
    """
    seed = np.asarray(seed, dtype=float)
    first = newton_solve(fun, seed, tol, max_iter)
    if first.converged and np.max(np.abs(first.x - seed), initial=0.0) <= max_dist:
        return first
    best = None
    for offset in RESTART_OFFSETS:
        for axis in range(seed.size):
            for sign in (1.0, -1.0):
                trial = seed.copy()
                trial[axis] += sign * offset
                res = newton_solve(fun, trial, tol, max_iter)
                if res.converged:
                    dist = np.max(np.abs(res.x - seed))
                    if best is None or dist < best[0]:
                        best = (dist, res)
        if best is not None and best[0] <= max_dist:
            return best[1]
    return best[1] if best is not None else first


def predictor(history):
    """Quadratic extrapolation from up to three previous solutions (last row newest)."""
    h = np.asarray(history, dtype=float)
    if len(h) >= 3:
        return 3.0 * h[-1] - 3.0 * h[-2] + h[-3]
    if len(h) == 2:
        return 2.0 * h[-1] - h[-2]
    return h[-1].copy()


def extrapolate(history: list[np.ndarray], order: int = 3) -> np.ndarray:
    """Polynomial extrapolation one uniform step past the last entry."""
    k = min(order, len(history) - 1)
    if k <= 0:
        return np.array(history[-1], dtype=float)
    pts = np.array(history[-(k + 1):], dtype=float)
    # Lagrange weights for the point one step beyond equally spaced nodes.
    nodes = np.arange(k + 1)
    target = k + 1
    weights = np.array([
        np.prod([(target - nodes[m]) / (nodes[j] - nodes[m]) for m in range(k + 1) if m != j])
        for j in range(k + 1)
    ])
    return weights @ pts


def fill_by_interpolation(values: np.ndarray, mask: np.ndarray, reach: int = 2) -> np.ndarray:
    """Replace masked rows by cubic interpolation from unmasked neighbours.

    Uses up to ``reach`` clean samples on each side; rows without clean
    neighbours on both sides are left untouched.
    """
    values = values.copy()
    idx = np.flatnonzero(mask)
    clean = np.flatnonzero(~mask)
    for i in idx:
        left = clean[clean < i][-reach:]
        right = clean[clean > i][:reach]
        if len(left) == 0 or len(right) == 0:
            continue
        nodes = np.concatenate([left, right]).astype(float)
        deg = len(nodes) - 1
        for col in range(values.shape[1]):
            coef = np.polyfit(nodes - i, values[nodes.astype(int), col], deg)
            values[i, col] = coef[-1]
    return values
