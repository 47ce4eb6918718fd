"""Counterdiabatic driving, Lewis-Riesenfeld invariants and the fast-forward
conditions written in the adiabatic frame.

Eigenvector derivatives are taken by central differences of a phase-aligned
eigenbasis, so any Hermitian ``H_ad(t)`` can be used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import TimeDependentOperator, TimeGrid
from .errors import (
    BranchLossError,
    DegenerateSpectrumError,
    InfeasibleError,
    InvalidDimensionError,
    VanishingFieldError,
)
from .ffscale import (
    NODE_EPS,
    V_CAP,
    AccelerationPotential,
    PhaseTrajectory,
    ScalingMap,
    finite_difference,
)
from .qcore import (
    DiagonalObservableBasis,
    SpectralDecomposition,
    align_vectors,
    decompose_many,
    spectral_decompose,
)
from .solver import (
    BRANCH_JUMP,
    NEWTON_MAX_ITER,
    NEWTON_TOL,
    extrapolate,
    fill_by_interpolation,
    predictor,
    restart_solve,
)

DEFAULT_DT_FD = 1e-3
MIN_GAP = 1e-8
FIELD_EPS = 1e-9


# -- adiabatic frames --------------------------------------------------------


@dataclass(frozen=True)
class AdiabaticModel:
    """A Hamiltonian ``H_ad(t)`` together with its instantaneous eigenframe.

    Parameters
    ----------
    h_ad
        The adiabatic Hamiltonian.
    dt_fd
        Step of the central differences used for ``d|n>/dt``.
    min_gap
        Smallest admissible level spacing.
    """

    h_ad: TimeDependentOperator
    dt_fd: float = DEFAULT_DT_FD
    min_gap: float = MIN_GAP

    @property
    def dim(self) -> int:
        return self.h_ad.dim

    def _check_gaps(self, times, energies):
        gaps = np.diff(energies, axis=-1).min(axis=-1)
        bad = np.flatnonzero(gaps < self.min_gap)
        if bad.size:
            k = bad[0]
            raise DegenerateSpectrumError(float(np.atleast_1d(times)[k]), float(gaps[k]))

    def decomposition_at(self, t: float) -> SpectralDecomposition:
        dec = spectral_decompose(self.h_ad(t), t)
        self._check_gaps([t], dec.energies[None])
        return dec

    def frames(self, times) -> tuple[np.ndarray, np.ndarray]:
        """Energies ``(K, N)`` and continuous eigenvectors ``(K, N, N)`` along ``times``."""
        times = np.asarray(times, dtype=float)
        energies, vectors = decompose_many(self.h_ad.sample(times))
        self._check_gaps(times, energies)
        return energies, vectors

    def frame_derivatives(self, times, dt_fd: Optional[float] = None):
        """Energies, eigenvectors and ``d|n>/dt`` at ``times``.

        The derivative of each column uses eigenvectors at ``t +- dt_fd``
        rephased against the one at ``t``.
        """
        h = self.dt_fd if dt_fd is None else dt_fd
        times = np.asarray(times, dtype=float)
        energies, vectors = self.frames(times)
        e_p, v_p = decompose_many(self.h_ad.sample(times + h))
        e_m, v_m = decompose_many(self.h_ad.sample(times - h))
        self._check_gaps(times + h, e_p)
        self._check_gaps(times - h, e_m)
        v_p = align_vectors(v_p, vectors)
        v_m = align_vectors(v_m, vectors)
        return energies, vectors, (v_p - v_m) / (2.0 * h)

    def cd_samples(self, times, dt_fd: Optional[float] = None) -> np.ndarray:
        """Counterdiabatic term ``i sum_n (1 - |n><n|) |dn><n|`` at each time."""
        _, vec, dvec = self.frame_derivatives(times, dt_fd)
        return _cd_from_frames(vec, dvec)

    def transitionless(self, dt_fd: Optional[float] = None) -> TimeDependentOperator:
        """``H_ad + H_cd`` as a time-dependent operator."""

        def batch(ts):
            ts = np.asarray(ts, dtype=float)
            return self.h_ad.sample(ts, check=False) + self.cd_samples(ts, dt_fd)

        return TimeDependentOperator(self.dim, lambda t: batch([t])[0], batch, f"{self.h_ad.name}+cd")


def _cd_from_frames(vec: np.ndarray, dvec: np.ndarray, only: Optional[int] = None) -> np.ndarray:
    vec = np.asarray(vec)
    n_dim = vec.shape[-1]
    out = np.zeros(vec.shape[:-2] + (n_dim, n_dim), dtype=complex)
    eye = np.eye(n_dim)
    cols = range(n_dim) if only is None else [only]
    for n in cols:
        v = vec[..., :, n]
        dv = dvec[..., :, n]
        proj = eye - v[..., :, None] * v.conj()[..., None, :]
        moved = np.einsum("...ij,...j->...i", proj, dv)
        term = 1j * moved[..., :, None] * v.conj()[..., None, :]
        out += term if only is None else term + np.swapaxes(term, -1, -2).conj()
    if only is None:
        out = 0.5 * (out + np.swapaxes(out, -1, -2).conj())
    return out


def counterdiabatic_term(model: AdiabaticModel, t: float, dt_fd: Optional[float] = None) -> np.ndarray:
    """``H_cd(t) = i sum_{m != n} |m><m|dn><n|`` (Hermitian, zero diagonal in the eigenbasis)."""
    return model.cd_samples([t], dt_fd)[0]


def deformed_cd(model: AdiabaticModel, n: int, t: float, dt_fd: Optional[float] = None) -> np.ndarray:
    """State-specific term ``i (1 - |n><n|)|dn><n| + h.c.``.

    It agrees with :func:`counterdiabatic_term` on ``|n(t)>``; the free
    n-independent part is set to zero.
    """
    if not 0 <= n < model.dim:
        raise IndexError(f"state index {n} out of range")
    _, vec, dvec = model.frame_derivatives([t], dt_fd)
    return _cd_from_frames(vec, dvec, only=n)[0]


def cd_two_level(h: Callable[[float], Sequence[float]], t: float, dt_fd: float = DEFAULT_DT_FD) -> np.ndarray:
    """Counterdiabatic field ``h x dh/dt / |h|^2`` of ``H = h . sigma / 2``."""
    hv = np.asarray(h(t), dtype=float)
    mag = float(np.linalg.norm(hv))
    if mag < FIELD_EPS:
        raise VanishingFieldError(t, mag)
    dh = (np.asarray(h(t + dt_fd), dtype=float) - np.asarray(h(t - dt_fd), dtype=float)) / (2 * dt_fd)
    return np.cross(hv, dh) / mag**2


# -- fast-forward conditions in the adiabatic frame ---------------------------


@dataclass(frozen=True)
class FFConditionSolution:
    """Phases and potential obtained from the adiabatic-frame conditions.

    ``w = phidot - v`` are the auxiliary unknowns of the off-diagonal
    equations; ``residuals`` is the max-norm of those equations per sample.
    """

    grid: TimeGrid
    phases: np.ndarray
    derivatives: np.ndarray
    w: np.ndarray
    v0: np.ndarray
    v: np.ndarray
    singular: np.ndarray
    basis: DiagonalObservableBasis
    target_state_index: int
    residuals: np.ndarray = field(repr=False, default=None)

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    @property
    def values(self) -> np.ndarray:
        return np.clip(self.basis.compose(self.v0, self.v), -V_CAP, V_CAP)

    def phase_trajectory(self) -> PhaseTrajectory:
        return PhaseTrajectory(self.grid, self.phases, self.derivatives, self.basis, self.residuals, self.singular)

    def potential(self) -> AccelerationPotential:
        sing = np.repeat(self.singular[:, None], self.basis.dim, axis=1)
        return AccelerationPotential(self.grid, self.values, self.v0, self.v, sing, self.basis)


def ff_conditions_solve(
    model: AdiabaticModel,
    n: int,
    smap: ScalingMap,
    basis: DiagonalObservableBasis,
    grid: TimeGrid,
    *,
    h: Optional[TimeDependentOperator] = None,
    eps_node: float = NODE_EPS,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> FFConditionSolution:
    """Solve for phases and potential keeping ``U|n(Lambda)>`` an exact solution.

    With ``H = H_ad + H_cd`` (numerical unless ``h`` is given) and
    ``w_a = phidot_a - v_a`` the requirement ``(H + V)|n~> = H_FF|n~>``
    splits into the off-diagonal equations, for every m != n,

        <m~|H|n~> - sum_a w_a <m|X_a|n> - i alpha <m|dn/dLambda> = 0,

    which fix (phi, w), and the diagonal one fixing v0. Samples where
    ``|n(Lambda)>`` has a vanishing component make ``w`` undetermined; they
    are filled from neighbours and flagged singular.

    The branch is followed by predictor-corrector continuation on a coarse
    subsequence of the grid; all remaining samples are then refined by a
    batched Gauss-Newton iteration seeded from it, with sequential
    continuation as the fallback for samples that do not converge.
    """
    if basis.dim != model.dim:
        raise InvalidDimensionError("basis and model dimensions differ")
    if not 0 <= n < model.dim:
        raise IndexError(f"state index {n} out of range")
    ts = grid.points
    lam = np.asarray(smap(ts), dtype=float)
    alpha = np.asarray(smap.derivative(ts), dtype=float)
    energies, vec, dvec = model.frame_derivatives(lam)
    hop = model.transitionless() if h is None else h
    hs = hop.sample(ts, check=False)
    system = _CondadSystem(vec, dvec, n, hs, alpha, basis)
    m_size = basis.size
    size = len(ts)

    nodal = np.min(np.abs(system.nvec), axis=1) < eps_node
    sol = np.zeros((size, 2 * m_size))
    residuals = np.zeros(size)

    # Continuation along a coarse subsequence fixes the branch ...
    stride = max(1, size // COARSE_SAMPLES)
    coarse = np.arange(0, size, stride)
    coarse = coarse[~nodal[coarse]]
    done = np.zeros(size, dtype=bool)
    _continue(system, coarse, sol, residuals, done, ts, tol, max_iter)

    # ... then every sample is refined by a batched Newton from interpolated seeds.
    rest = np.flatnonzero(~nodal & ~done)
    if rest.size:
        seeds = np.column_stack([np.interp(ts[rest], ts[coarse], sol[coarse, j]) for j in range(2 * m_size)])
        x, res, ok = _batched_newton(system, rest, seeds, tol, max_iter)
        sol[rest], residuals[rest] = x, res
        done[rest] = ok
        _continue(system, np.flatnonzero(~nodal & ~done), sol, residuals, done, ts, tol, max_iter)

    if nodal.any():
        for k in np.flatnonzero(nodal):
            if k > 0:
                sol[k] = extrapolate(list(sol[max(0, k - 4):k]))
        sol = fill_by_interpolation(sol, nodal)
    jumps = np.max(np.abs(np.diff(sol[:, :m_size], axis=0)), axis=1) if size > 1 else np.zeros(0)
    if jumps.size and jumps.max() > BRANCH_JUMP:
        k = int(np.argmax(jumps)) + 1
        raise BranchLossError(float(ts[k]), float(jumps.max()))

    phases, w = sol[:, :m_size], sol[:, m_size:]
    derivs = finite_difference(phases, grid.dt)
    v = derivs - w
    u = np.exp(-1j * basis.generator(phases))
    nt = u * system.nvec
    expect_h = np.einsum("ki,kij,kj->k", nt.conj(), hs, nt).real
    xnn = np.einsum("ai,ki->ka", basis.diagonals, np.abs(system.nvec) ** 2)
    v0 = model.dim * (alpha * energies[:, n] + np.sum(w * xnn, axis=1) - expect_h)
    return FFConditionSolution(grid, phases, derivs, w, v0, v, nodal, basis, n, residuals)


COARSE_SAMPLES = 512


class _CondadSystem:
    """Off-diagonal adiabatic-frame equations, vectorised over samples.

    Unknowns per sample are ``x = (phi, w)``; the residual stacks the real and
    imaginary parts of the N-1 complex equations.
    """

    def __init__(self, vec, dvec, n, hs, alpha, basis):
        others = [m for m in range(vec.shape[-1]) if m != n]
        self.nvec = vec[:, :, n]
        self.mvec = vec[:, :, others]
        self.xd = basis.diagonals
        self.m = basis.size
        self.hs = hs
        self.alpha = alpha
        # <m|X_a|n> and <m|dn>: unchanged by the diagonal transformation
        self.xmn = np.einsum("kim,ai,ki->kma", self.mvec.conj(), self.xd, self.nvec)
        self.mdn = np.einsum("kim,ki->km", self.mvec.conj(), dvec[:, :, n])

    def __call__(self, idx, x):
        phi, w = x[:, : self.m], x[:, self.m:]
        u = np.exp(-1j * (phi @ self.xd))
        nt = u * self.nvec[idx]
        mt = u[:, :, None] * self.mvec[idx]
        hs = self.hs[idx]
        hn = np.einsum("kij,kj->ki", hs, nt)
        z = (
            np.einsum("kim,ki->km", mt.conj(), hn)
            - np.einsum("kma,ka->km", self.xmn[idx], w)
            - 1j * self.alpha[idx, None] * self.mdn[idx]
        )
        # d<m~|H|n~>/dphi_a = i <m~|[X_a, H]|n~>
        xhn = np.einsum("ai,ki->kai", self.xd, hn)
        hxn = np.einsum("kij,aj,kj->kai", hs, self.xd, nt)
        dphi = 1j * np.einsum("kim,kai->kma", mt.conj(), xhn - hxn)
        jz = np.concatenate([dphi, -self.xmn[idx]], axis=2)
        r = np.concatenate([z.real, z.imag], axis=1)
        jac = np.concatenate([jz.real, jz.imag], axis=1)
        return r, jac

    def single(self, k):
        def fun(x):
            r, jac = self(np.array([k]), np.asarray(x, dtype=float)[None, :])
            return r[0], jac[0]

        return fun


def _continue(system, order, sol, residuals, done, ts, tol, max_iter):
    """Sequential continuation over the sample indices ``order`` (ascending)."""
    accepted = []
    for k in order:
        prior = accepted[-3:] or list(np.flatnonzero(done[:k])[-3:])
        seed = predictor(sol[prior]) if prior else np.zeros(sol.shape[1])
        res = restart_solve(system.single(k), seed, tol, max_iter)
        if not res.converged:
            raise InfeasibleError(float(ts[k]), res.residual)
        if prior:
            jump = float(np.max(np.abs(res.x[: system.m] - sol[prior[-1], : system.m])))
            if jump > BRANCH_JUMP:
                raise BranchLossError(float(ts[k]), jump)
        sol[k], residuals[k], done[k] = res.x, res.residual, True
        accepted.append(k)


def _batched_newton(system, idx, x0, tol, max_iter):
    """Gauss-Newton on many independent samples at once (pseudo-inverse steps)."""
    x = np.array(x0, dtype=float)
    r, jac = system(idx, x)
    res = np.max(np.abs(r), axis=1)
    active = res > tol
    for _ in range(max_iter):
        if not active.any():
            break
        a = np.flatnonzero(active)
        step = -np.einsum("kij,kj->ki", np.linalg.pinv(jac[a], rcond=1e-13), r[a])
        x[a] += step
        r[a], jac[a] = system(idx[a], x[a])
        res[a] = np.max(np.abs(r[a]), axis=1)
        active[a] = (res[a] > tol) & np.all(np.isfinite(step), axis=1)
    ok = res <= tol
    # one polishing step, kept where it does not hurt
    a = np.flatnonzero(ok)
    if a.size:
        trial = x[a] - np.einsum("kij,kj->ki", np.linalg.pinv(jac[a], rcond=1e-13), r[a])
        rt, _ = system(idx[a], trial)
        rest = np.max(np.abs(rt), axis=1)
        better = rest <= res[a]
        x[a[better]] = trial[better]
        res[a[better]] = rest[better]
    return x, res, ok


# -- Lewis-Riesenfeld invariants ---------------------------------------------


@dataclass(frozen=True)
class LRInvariant:
    """``F(t) = sum_n lambda_n |n(t)><n(t)|`` for the transitionless Hamiltonian.

    Eigenvalues are listed in ascending order of the adiabatic energies.
    """

    eigenvalues: np.ndarray
    model: AdiabaticModel

    def basis_at(self, t: float) -> np.ndarray:
        return self.model.decomposition_at(t).vectors

    def values(self, times) -> np.ndarray:
        _, vec = self.model.frames(times)
        return np.einsum("kin,n,kjn->kij", vec, self.eigenvalues, vec.conj())

    def value_at(self, t: float) -> np.ndarray:
        return self.values([t])[0]

    def hamiltonian(self) -> TimeDependentOperator:
        return self.model.transitionless()

    def dynamical_residual(self, times, dt_fd: Optional[float] = None) -> float:
        """max_t ||i dF/dt - [H, F]|| with central-difference dF/dt."""
        h = self.model.dt_fd if dt_fd is None else dt_fd
        times = np.asarray(times, dtype=float)
        df = (self.values(times + h) - self.values(times - h)) / (2 * h)
        f = self.values(times)
        hs = self.hamiltonian().sample(times, check=False)
        r = 1j * df - (hs @ f - f @ hs)
        return float(np.max(np.linalg.norm(r, axis=(1, 2))))


def lr_build(eigenvalues, model: AdiabaticModel) -> LRInvariant:
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.shape != (model.dim,):
        raise InvalidDimensionError(f"need {model.dim} eigenvalues, got shape {lam.shape}")
    if not np.all(np.isfinite(lam)):
        raise ValueError("eigenvalues must be finite")
    model.decomposition_at(0.0)
    return LRInvariant(lam, model)


def lr_ff_residuals(
    inv: LRInvariant,
    smap: ScalingMap,
    phases: PhaseTrajectory,
    potential: AccelerationPotential,
    h: TimeDependentOperator,
) -> np.ndarray:
    """Per-sample ``||i dF_FF/dt - [H + diag V, F_FF]||`` with ``F_FF = U F(Lambda) U^dag``."""
    ts = phases.times
    lam = np.asarray(smap(ts), dtype=float)
    u = phases.unitary_diagonals()
    f = u[:, :, None] * inv.values(lam) * u.conj()[:, None, :]
    df = np.gradient(f, phases.grid.dt, axis=0, edge_order=2)
    drive = h.sample(ts, check=False) + potential.operator().sample(ts, check=False)
    r = 1j * df - (drive @ f - f @ drive)
    return np.linalg.norm(r, axis=(1, 2))


def lr_ff_check(
    inv: LRInvariant,
    smap: ScalingMap,
    phases: PhaseTrajectory,
    potential: AccelerationPotential,
    h: TimeDependentOperator,
    *,
    exclude: int = 2,
) -> float:
    """Largest invariant residual, skipping ``exclude`` samples around singular ones."""
    res = lr_ff_residuals(inv, smap, phases, potential, h)
    mask = potential.singular_rows.copy()
    for k in np.flatnonzero(potential.singular_rows):
        mask[max(0, k - exclude):k + exclude + 1] = True
    return float(np.max(res[~mask])) if np.any(~mask) else 0.0
