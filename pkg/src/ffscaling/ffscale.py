"""Fast-forward scaling: time reparametrisation, transformed Hamiltonian,
phase (reality) conditions and the diagonal acceleration potential.

Conventions
-----------
The scaled state is ``psi_FF(t) = U(t) psi(Lambda(t))`` with
``U = exp(-i sum_a phi_a X_a)`` and ``Lambda(t) = int_0^t alpha``.
``H_FF = sum_a phidot_a X_a + alpha U H(Lambda) U^dag`` drives it exactly.
The acceleration potential is the real diagonal ``V`` with
``(H + diag V) psi_FF = H_FF psi_FF``, written ``V = v0/N + sum_a v_a X_a``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import _backend
from .dynamics import TimeDependentOperator, TimeGrid
from .errors import (
    BranchLossError,
    InfeasibleError,
    InvalidDimensionError,
    InvalidProtocolError,
)
from .qcore import DiagonalObservableBasis
from .solver import (
    BRANCH_JUMP,
    NEWTON_MAX_ITER,
    NEWTON_TOL,
    extrapolate,
    fill_by_interpolation,
    newton_solve,
    predictor,
    restart_solve,
)

NODE_EPS = 1e-6
V_CAP = 1e6
# RK4 is stable on the imaginary axis up to |z| = 2*sqrt(2); samples whose
# potential exceeds STIFFNESS / dt are driven with H_FF instead.
STIFFNESS = 2.5


# -- protocols ---------------------------------------------------------------


@dataclass(frozen=True)
class MagnificationProtocol:
    """Cosine ramp alpha(t) = a + (1 - a) cos(2 pi t / t0) on [0, t0], 1 afterwards."""

    alpha_bar: float = 2.0
    t0: float = 10.0

    def __post_init__(self):
        if not self.alpha_bar >= 1.0:
            raise InvalidProtocolError(f"alpha_bar must be >= 1, got {self.alpha_bar}")
        if not self.t0 > 0:
            raise InvalidProtocolError(f"t0 must be positive, got {self.t0}")

    def alpha(self, t):
        t = np.asarray(t, dtype=float)
        ramp = self.alpha_bar + (1.0 - self.alpha_bar) * np.cos(2 * np.pi * t / self.t0)
        out = np.where(t <= self.t0, ramp, 1.0)
        return float(out) if out.ndim == 0 else out

    def scaled_time(self, t):
        t = np.asarray(t, dtype=float)
        k = 2 * np.pi / self.t0
        ramp = self.alpha_bar * t + (1.0 - self.alpha_bar) * np.sin(k * t) / k
        after = self.alpha_bar * self.t0 + t - self.t0
        out = np.where(t <= self.t0, ramp, after)
        return float(out) if out.ndim == 0 else out


def magnification(t, p: MagnificationProtocol):
    """alpha(t) for the cosine protocol ``p``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("magnification is defined for t >= 0")
    return p.alpha(t)


class Antiderivative:
    """Running integral of ``f`` from ``t_start`` by composite Simpson per grid step.

    Evaluation between grid points integrates the partial step with one more
    Simpson panel, so any t in [t_start, t_end] is accepted.
    """

    def __init__(self, f: Callable, grid: TimeGrid):
        self.f = f
        self.grid = grid
        pts = grid.points
        mids = pts[:-1] + 0.5 * grid.dt
        fp = np.asarray(f(pts), dtype=float)
        fm = np.asarray(f(mids), dtype=float)
        self._fp, self._fm = fp, fm
        steps = grid.dt / 6.0 * (fp[:-1] + 4.0 * fm + fp[1:])
        self.nodes = np.concatenate([[0.0], np.cumsum(steps)])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        g = self.grid
        if np.any(t < g.t_start - 1e-12) or np.any(t > g.t_end + 1e-9 * max(1.0, abs(g.t_end))):
            raise ValueError(f"t outside [{g.t_start}, {g.t_end}]")
        k = np.clip(np.floor((t - g.t_start) / g.dt).astype(int), 0, g.n_steps)
        base = g.t_start + k * g.dt
        h = t - base
        fa = self._fp[k]
        fb = np.asarray(self.f(t), dtype=float)
        fm = np.asarray(self.f(base + 0.5 * h), dtype=float)
        out = self.nodes[k] + h / 6.0 * (fa + 4.0 * fm + fb)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ScalingMap:
    """t -> Lambda(t) together with its derivative alpha(t)."""

    lam: Callable
    alpha: Callable
    protocol: Optional[MagnificationProtocol] = None

    def __call__(self, t):
        return self.lam(t)

    def derivative(self, t):
        return self.alpha(t)

    @classmethod
    def from_rate(cls, alpha: Callable, grid: TimeGrid) -> "ScalingMap":
        """Build Lambda by quadrature of a user-supplied magnification ``alpha``."""
        probe = np.asarray(alpha(grid.refined(2).points), dtype=float)
        if np.any(~np.isfinite(probe)) or np.min(probe) < 1.0 - 1e-12:
            bad = grid.refined(2).points[np.argmin(probe)]
            raise InvalidProtocolError(f"alpha drops below 1 (min {np.min(probe):.6g} at t={bad:.6g})")
        return cls(Antiderivative(alpha, grid), alpha)


def scaling_map(p: MagnificationProtocol) -> ScalingMap:
    """Closed-form scaling map of the cosine protocol."""
    return ScalingMap(p.scaled_time, p.alpha, p)


def identity_map() -> ScalingMap:
    def one(t):
        out = np.ones_like(np.asarray(t, dtype=float))
        return float(out) if out.ndim == 0 else out

    return ScalingMap(lambda t: t, one)


# -- phases ------------------------------------------------------------------


def sample_states(reference: Callable, times: np.ndarray) -> np.ndarray:
    """Evaluate a state-valued callable on an array of times, shape ``(K, N)``."""
    times = np.asarray(times, dtype=float)
    try:
        out = np.asarray(reference(times), dtype=complex)
        if out.ndim == 2 and out.shape[0] == len(times):
            return out
    except (TypeError, ValueError):
        pass
    return np.array([np.asarray(reference(float(t)), dtype=complex) for t in times])


@dataclass(frozen=True)
class PhaseTrajectory:
    """Phases phi_a and their time derivatives on a sample grid."""

    grid: TimeGrid
    phases: np.ndarray
    derivatives: np.ndarray
    basis: DiagonalObservableBasis
    residuals: Optional[np.ndarray] = None
    node_mask: Optional[np.ndarray] = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        k = self.grid.index(t)
        return self.phases[k], self.derivatives[k]

    def unitary_diagonals(self) -> np.ndarray:
        return np.exp(-1j * self.basis.generator(self.phases))

    def max_jump(self) -> float:
        if len(self.phases) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.phases, axis=0)), initial=0.0))

    @classmethod
    def constant(cls, grid: TimeGrid, basis: DiagonalObservableBasis, value=None) -> "PhaseTrajectory":
        k = len(grid)
        val = np.zeros(basis.size) if value is None else np.asarray(value, dtype=float)
        return cls(grid, np.tile(val, (k, 1)), np.zeros((k, basis.size)), basis)


def _reality_fun(apsi, b, psil, xdiag):
    from ._pure import reality_residual

    return lambda p: reality_residual(p, apsi, b, psil, xdiag)


def solve_phase_condition(
    h: TimeDependentOperator,
    reference: Callable,
    smap: ScalingMap,
    basis: DiagonalObservableBasis,
    grid: TimeGrid,
    *,
    eps_node: float = NODE_EPS,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    backend: Optional[str] = None,
) -> PhaseTrajectory:
    """Continue the branch of phases making the acceleration potential real.

    At each sample the N conditions ``|psi_s| Im V(s) = 0`` (one of them
    implied by Hermiticity) are solved for the N-1 phases by Gauss-Newton,
    seeded with the previous sample. The first sample starts from zero, so
    the root nearest zero is taken. Samples where the reference state has a
    node are filled from neighbours and marked in ``node_mask``.

    Raises
    ------
    InfeasibleError
        Newton (with restarts) finds no real solution at some sample.
    BranchLossError
        The branch jumps by more than pi/2 between adjacent samples.
    """
    if h.dim != basis.dim:
        raise InvalidDimensionError(f"H is {h.dim}-dimensional, basis is {basis.dim}-dimensional")
    kernel = _backend.get(backend)
    ts = grid.points
    lam = np.asarray(smap(ts), dtype=float)
    alpha = np.asarray(smap.derivative(ts), dtype=float)
    psil = sample_states(reference, lam)
    if psil.shape[1] != basis.dim:
        raise InvalidDimensionError("reference state dimension does not match the basis")
    apsi = alpha[:, None] * np.einsum("kij,kj->ki", h.sample(lam), psil)
    bs = h.sample(ts)
    xdiag = basis.diagonals
    n_samples, m = len(ts), basis.size

    phases = np.zeros((n_samples, m))
    residuals = np.zeros(n_samples)
    nodes = np.zeros(n_samples, dtype=bool)
    x = np.zeros(m)
    k = 0
    while k < n_samples:
        history = phases[max(0, k - 3):k] if k > 0 else x[None, :]
        ph, rs, status, idx = kernel.reality_sweep(
            apsi, bs, psil, xdiag, history, k, n_samples, tol, max_iter, eps_node, BRANCH_JUMP
        )
        phases[k:idx] = ph[: idx - k]
        residuals[k:idx] = rs[: idx - k]
        if status == _backend.STATUS_OK:
            break
        k = idx
        prev = phases[k - 1] if k > 0 else x
        fun = _reality_fun(apsi[k], bs[k], psil[k], xdiag)
        if status == _backend.STATUS_NODE:
            nodes[k] = True
            pred = extrapolate(list(phases[max(0, k - 4):k])) if k > 0 else x
            res = newton_solve(fun, pred, tol, max_iter)
            keep = res.converged and np.max(np.abs(res.x - pred)) <= 1e-3
            phases[k] = res.x if keep else pred
            residuals[k] = res.residual if keep else float(np.max(np.abs(fun(pred)[0])))
        else:
            seed = predictor(phases[max(0, k - 3):k]) if k > 0 else x
            res = restart_solve(fun, seed, tol, max_iter, BRANCH_JUMP)
            if not res.converged:
                raise InfeasibleError(float(ts[k]), res.residual)
            jump = float(np.max(np.abs(res.x - prev)))
            if k > 0 and jump > BRANCH_JUMP:
                raise BranchLossError(float(ts[k]), jump)
            phases[k] = res.x
            residuals[k] = res.residual
        x = phases[k]
        k += 1

    if nodes.any():
        phases = fill_by_interpolation(phases, nodes)
        for k in np.flatnonzero(nodes):
            residuals[k] = float(np.max(np.abs(_reality_fun(apsi[k], bs[k], psil[k], xdiag)(phases[k])[0])))
    jumps = np.max(np.abs(np.diff(phases, axis=0)), axis=1) if n_samples > 1 else np.zeros(0)
    if jumps.size and jumps.max() > BRANCH_JUMP:
        k = int(np.argmax(jumps)) + 1
        raise BranchLossError(float(ts[k]), float(jumps.max()))
    derivs = finite_difference(phases, grid.dt)
    return PhaseTrajectory(grid, phases, derivs, basis, residuals, nodes)


def finite_difference(values: np.ndarray, dt: float) -> np.ndarray:
    """Central differences inside, second-order one-sided at the ends."""
    values = np.asarray(values, dtype=float)
    if len(values) < 3:
        return np.gradient(values, dt, axis=0)
    return np.gradient(values, dt, axis=0, edge_order=2)


# -- transformed Hamiltonian -------------------------------------------------


def ff_hamiltonian_samples(h: TimeDependentOperator, smap: ScalingMap, phases: PhaseTrajectory) -> np.ndarray:
    ts = phases.times
    lam = np.asarray(smap(ts), dtype=float)
    alpha = np.asarray(smap.derivative(ts), dtype=float)
    u = phases.unitary_diagonals()
    hl = h.sample(lam)
    out = alpha[:, None, None] * (u[:, :, None] * hl * u.conj()[:, None, :])
    diag = phases.basis.generator(phases.derivatives)
    idx = np.arange(h.dim)
    out[:, idx, idx] += diag
    return out


def ff_hamiltonian(h: TimeDependentOperator, smap: ScalingMap, phases: PhaseTrajectory) -> TimeDependentOperator:
    """``t -> sum_a phidot_a X_a + alpha U H(Lambda) U^dag`` on the phase grid.

    Evaluating off the phase grid raises :class:`OutOfDomainError`.
    """
    samples = ff_hamiltonian_samples(h, smap, phases)
    grid = phases.grid
    return TimeDependentOperator(
        h.dim,
        lambda t: samples[grid.index(t)],
        lambda ts: samples[grid.indices(ts)],
        f"FF[{h.name}]",
    )


def analytic_ff_states(reference: Callable, smap: ScalingMap, phases: PhaseTrajectory) -> np.ndarray:
    """U(t) psi(Lambda(t)) at every phase sample."""
    lam = np.asarray(smap(phases.times), dtype=float)
    return phases.unitary_diagonals() * sample_states(reference, lam)


# -- potential ---------------------------------------------------------------


class ResidualPotential(NamedTuple):
    values: np.ndarray
    singular: np.ndarray


def _residual_values(psi, hff, hv, eps_node, cap):
    num = np.einsum("...ij,...j->...i", hff - hv, psi)
    mag = np.abs(psi)
    singular = mag < eps_node
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = num / psi
    sign = np.where(np.isfinite(raw.real), np.sign(raw.real), np.sign((num * psi.conj()).real))
    sign = np.where(sign == 0, 1.0, sign)
    clamped = np.where(np.isfinite(raw.real), np.clip(raw.real, -cap, cap), sign * cap)
    values = np.where(singular, clamped + 0j, raw)
    return values, singular


def residual_potential(psi_ff, h_ff, h, *, eps_node: float = NODE_EPS, cap: float = V_CAP) -> ResidualPotential:
    """``V(s) = <s|(H_FF - H)|psi_FF> / <s|psi_FF>`` componentwise.

    Components whose amplitude is below ``eps_node`` are flagged and their
    (real) value clamped to ``[-cap, cap]``.
    """
    psi = np.asarray(psi_ff, dtype=complex)
    values, singular = _residual_values(psi, np.asarray(h_ff, complex), np.asarray(h, complex), eps_node, cap)
    return ResidualPotential(values, singular)


@dataclass(frozen=True)
class AccelerationPotential:
    """Real diagonal potential V(s, t) = v0/N + sum_a v_a X_a(s) on a sample grid."""

    grid: TimeGrid
    values: np.ndarray
    v0: np.ndarray
    v: np.ndarray
    singular: np.ndarray
    basis: DiagonalObservableBasis
    imag_residual: Optional[np.ndarray] = None
    dropped_v0: Optional[np.ndarray] = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    @property
    def singular_rows(self) -> np.ndarray:
        return self.singular.any(axis=1)

    def with_v(self, v) -> "AccelerationPotential":
        """Copy with the v_a replaced (v0 kept); used for negative controls."""
        v = np.broadcast_to(np.asarray(v, dtype=float), self.v.shape).copy()
        return dataclasses.replace(self, v=v, values=self.basis.compose(self.v0, v))

    def operator(self) -> TimeDependentOperator:
        diag = self.values
        grid = self.grid

        def one(t):
            return np.diag(diag[grid.index(t)]).astype(complex)

        def many(ts):
            d = diag[grid.indices(ts)]
            out = np.zeros(d.shape + (d.shape[-1],), dtype=complex)
            idx = np.arange(d.shape[-1])
            out[:, idx, idx] = d
            return out

        return TimeDependentOperator(self.basis.dim, one, many, "V")


def synthesize_potential(
    phases: PhaseTrajectory,
    h: TimeDependentOperator,
    reference: Callable,
    smap: ScalingMap,
    *,
    eps_node: float = NODE_EPS,
    cap: float = V_CAP,
) -> AccelerationPotential:
    """Acceleration potential on the phase grid, v0 retained.

    Singular samples (reference node) carry clamped values and are flagged.
    """
    psi = analytic_ff_states(reference, smap, phases)
    hff = ff_hamiltonian_samples(h, smap, phases)
    hv = h.sample(phases.times)
    values, singular = _residual_values(psi, hff, hv, eps_node, cap)
    imag = np.where(singular, 0.0, values.imag)
    real = values.real
    v0, v = phases.basis.decompose(real)
    return AccelerationPotential(phases.grid, real, v0, v, singular, phases.basis, imag)


def gauge_eliminate(pot: AccelerationPotential) -> AccelerationPotential:
    """Drop the identity part v0; the removed series is kept in ``dropped_v0``."""
    n = pot.basis.dim
    return dataclasses.replace(
        pot,
        values=pot.values - pot.v0[:, None] / n,
        v0=np.zeros_like(pot.v0),
        dropped_v0=pot.v0.copy() if pot.dropped_v0 is None else pot.dropped_v0 + pot.v0,
    )


# -- singularities -----------------------------------------------------------


@dataclass(frozen=True)
class SingularEvent:
    time: float
    component: int
    left_sign: int
    right_sign: int
    t_first: float
    t_last: float
    samples: int
    interior: bool = True

    @property
    def label(self) -> str:
        return str(self.component)

    def as_dict(self, dim: Optional[int] = None) -> dict:
        d = dataclasses.asdict(self)
        d["kind"] = "singularity" if self.interior else "endpoint-node"
        if dim == 2:
            d["sigma"] = 1 if self.component == 0 else -1
        return d


def node_mask(reference: Callable, smap: ScalingMap, grid: TimeGrid, eps_node: float = NODE_EPS) -> np.ndarray:
    lam = np.asarray(smap(grid.points), dtype=float)
    return np.abs(sample_states(reference, lam)) < eps_node


def detect_singularity(
    reference: Callable,
    smap: ScalingMap,
    grid: TimeGrid,
    *,
    potential: Optional[AccelerationPotential] = None,
    eps_node: float = NODE_EPS,
    include_endpoints: bool = False,
) -> list[SingularEvent]:
    """Runs of samples where some |<s|psi(Lambda(t))>| < eps_node.

    One event per contiguous run and component. Side signs are the signs of
    ``potential`` on the nearest clean samples to the left and right (0 when
    no potential is given or a side is missing). Runs touching the first or
    last sample are endpoint nodes and are only reported with
    ``include_endpoints``.
    """
    lam = np.asarray(smap(grid.points), dtype=float)
    mags = np.abs(sample_states(reference, lam))
    mask = mags < eps_node
    ts = grid.points
    events = []
    last = len(ts) - 1
    for comp in range(mask.shape[1]):
        col = mask[:, comp]
        if not col.any():
            continue
        padded = np.concatenate([[False], col, [False]]).astype(int)
        starts = np.flatnonzero(np.diff(padded) == 1)
        ends = np.flatnonzero(np.diff(padded) == -1) - 1
        for a, b in zip(starts, ends):
            interior = bool(a > 0 and b < last)
            if not interior and not include_endpoints:
                continue
            centre = a + int(np.argmin(mags[a:b + 1, comp]))
            left = right = 0
            if potential is not None:
                vals = potential.values[:, comp]
                if a > 0:
                    left = int(np.sign(vals[a - 1]))
                if b < last:
                    right = int(np.sign(vals[b + 1]))
            events.append(
                SingularEvent(float(ts[centre]), comp, left, right, float(ts[a]), float(ts[b]), int(b - a + 1), interior)
            )
    events.sort(key=lambda e: (e.time, e.component))
    return events


# -- driven evolution --------------------------------------------------------


def regularization_window(pot: AccelerationPotential, step: float, stiffness: float = STIFFNESS) -> np.ndarray:
    """Samples where H + diag(V) is not usable by fixed-step RK4.

    Singular samples plus those with ``step * max|V| > stiffness``.
    """
    return pot.singular_rows | (step * np.max(np.abs(pot.values), axis=1) > stiffness)


def driven_hamiltonian(
    h: TimeDependentOperator,
    pot: AccelerationPotential,
    hff: TimeDependentOperator,
    step: float,
    stiffness: float = STIFFNESS,
) -> tuple[TimeDependentOperator, np.ndarray]:
    """``H + diag(V)`` sampled on the potential grid, with H_FF inside the window.

    H_FF and H + diag(V) act identically on psi_FF, so the substitution only
    removes the representation singularity. Returns the operator and the
    boolean window mask.
    """
    ts = pot.times
    samples = h.sample(ts) + pot.operator().sample(ts, check=False)
    window = regularization_window(pot, step, stiffness)
    if window.any():
        samples[window] = hff.sample(ts[window], check=False)
    grid = pot.grid
    op = TimeDependentOperator(
        h.dim,
        lambda t: samples[grid.index(t)],
        lambda q: samples[grid.indices(q)],
        f"{h.name}+V",
    )
    return op, window


def equivalence_residual(psi_ff, hff_samples, h_samples, values) -> np.ndarray:
    """||(H + diag V) psi_FF - H_FF psi_FF|| per sample."""
    lhs = np.einsum("kij,kj->ki", h_samples, psi_ff) + values * psi_ff
    rhs = np.einsum("kij,kj->ki", hff_samples, psi_ff)
    return np.linalg.norm(lhs - rhs, axis=1)
