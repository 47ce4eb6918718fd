"""Fixed-step integration of the time-dependent Schrodinger equation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _backend
from .errors import ContractViolation, IntegrationQualityError, InvalidDimensionError, OutOfDomainError
from .qcore import hermiticity_error

DEFAULT_DT = 1e-3
NORM_DRIFT_GATE = 1e-7
STATE_NORM_TOL = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t_start, t_end] whose span is an integer number of steps."""

    t_start: float
    t_end: float
    dt: float

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        ratio = (self.t_end - self.t_start) / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"span {self.t_end - self.t_start} is not a multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_steps + 1)

    def __len__(self) -> int:
        return self.n_steps + 1

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_start, self.t_end, self.dt / factor)

    def index(self, t: float, tol: float = 1e-9) -> int:
        """Index of the grid point equal to ``t``; raises if ``t`` is off-grid."""
        k = int(round((t - self.t_start) / self.dt))
        if k < 0 or k > self.n_steps:
            raise OutOfDomainError(f"t={t} outside [{self.t_start}, {self.t_end}]")
        tk = self.t_start + k * self.dt
        if abs(t - tk) > tol * max(1.0, abs(t)):
            raise OutOfDomainError(f"t={t} is not on the grid (nearest {tk})")
        return k

    def indices(self, ts, tol: float = 1e-9) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        ks = np.rint((ts - self.t_start) / self.dt).astype(int)
        if np.any(ks < 0) or np.any(ks > self.n_steps):
            raise OutOfDomainError(f"times outside [{self.t_start}, {self.t_end}]")
        off = np.abs(ts - (self.t_start + ks * self.dt))
        if np.any(off > tol * np.maximum(1.0, np.abs(ts))):
            raise OutOfDomainError("times are not on the grid")
        return ks


@dataclass(frozen=True)
class TimeDependentOperator:
    """A map t -> N x N Hermitian matrix.

    ``func`` evaluates one time. ``batch`` (optional) evaluates an array of
    times at once and is used by :meth:`sample` when present.
    """

    dim: int
    func: Callable[[float], np.ndarray]
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.func(float(t)), dtype=complex)

    def sample(self, times, *, check: bool = True) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.batch is not None:
            hs = np.asarray(self.batch(times), dtype=complex)
        else:
            hs = np.array([self.func(float(t)) for t in times], dtype=complex)
        if hs.shape != (len(times), self.dim, self.dim):
            raise InvalidDimensionError(f"operator {self.name!r} returned shape {hs.shape}")
        if check:
            err = hermiticity_error(hs)
            if err > 1e-10:
                raise ContractViolation(f"operator {self.name!r} not Hermitian ({err:.3e})")
        return hs

    def __add__(self, other: "TimeDependentOperator") -> "TimeDependentOperator":
        if other.dim != self.dim:
            raise InvalidDimensionError("dimension mismatch")

        def batch(ts):
            return self.sample(ts, check=False) + other.sample(ts, check=False)

        return TimeDependentOperator(
            self.dim, lambda t: self(t) + other(t), batch, f"{self.name}+{other.name}"
        )

    @classmethod
    def constant(cls, matrix, name: str = "const") -> "TimeDependentOperator":
        m = np.array(matrix, dtype=complex)
        return cls(m.shape[0], lambda t: m, lambda ts: np.broadcast_to(m, (len(ts),) + m.shape), name)


def as_state(psi, tol: float = STATE_NORM_TOL) -> np.ndarray:
    """Validate a unit-norm state vector and return it as a complex array."""
    psi = np.array(psi, dtype=complex).reshape(-1)
    norm2 = float(np.vdot(psi, psi).real)
    if abs(norm2 - 1.0) > tol:
        raise ContractViolation(f"state norm^2 = {norm2!r} differs from 1")
    return psi


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray
    norm_drift: float
    backend: str = field(default="", compare=False)

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    def at(self, t: float) -> np.ndarray:
        return self.states[self.grid.index(t)]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2


def evolve(
    h: TimeDependentOperator,
    psi0,
    grid: TimeGrid,
    *,
    drift_gate: float = NORM_DRIFT_GATE,
    backend: Optional[str] = None,
) -> Trajectory:
    """Integrate i dpsi/dt = H(t) psi with classical RK4 on ``grid``.

    H is sampled at every half step. The state is never renormalised; the
    largest deviation of ||psi||^2 from 1 is reported as ``norm_drift`` and
    an :class:`IntegrationQualityError` is raised above ``drift_gate``.
    """
    psi0 = as_state(psi0)
    if h.dim != psi0.size:
        raise InvalidDimensionError(f"H is {h.dim}-dimensional, psi0 has {psi0.size} entries")
    hs = h.sample(grid.refined(2).points)
    kernel = _backend.get(backend)
    states = kernel.rk4_sampled(hs, psi0, grid.dt)
    drift = float(np.max(np.abs(np.sum(np.abs(states) ** 2, axis=1) - 1.0)))
    if drift > drift_gate:
        raise IntegrationQualityError(drift, drift_gate)
    return Trajectory(grid, states, drift, backend or _backend.BACKEND)


def fidelity(psi, chi) -> float:
    """|<chi|psi>|^2."""
    psi = np.asarray(psi, dtype=complex)
    chi = np.asarray(chi, dtype=complex)
    if psi.shape != chi.shape:
        raise InvalidDimensionError(f"shape mismatch {psi.shape} vs {chi.shape}")
    return float(min(1.0, abs(np.vdot(chi, psi)) ** 2))


_LABELS = {"+": 0, "up": 0, "-": 1, "down": 1}


def population(psi, index) -> float:
    """|<index|psi>|^2; ``index`` is an integer or one of '+', '-', 'up', 'down'."""
    psi = np.asarray(psi, dtype=complex)
    if isinstance(index, str):
        try:
            index = _LABELS[index]
        except KeyError:
            raise ValueError(f"unknown basis label {index!r}") from None
    if not 0 <= index < psi.size:
        raise IndexError(f"basis index {index} out of range for dimension {psi.size}")
    return float(abs(psi[index]) ** 2)
