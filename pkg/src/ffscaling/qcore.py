"""Small dense linear algebra for spin systems.

Pauli matrices, tensor products, diagonal traceless observable bases and a
Hermitian eigendecomposition with a deterministic eigenvector phase.
All energies are dimensionless (hbar = 1, field scale h0 = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import ContractViolation, InvalidBasisError, InvalidDimensionError

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
DEGENERACY_GAP = 1e-10

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(axis: str) -> np.ndarray:
    """Return the 2x2 Pauli matrix for ``axis`` in {"x", "y", "z"}."""
    try:
        return _PAULI[axis.lower()].copy()
    except (KeyError, AttributeError):
        raise ValueError(f"unknown Pauli axis {axis!r}") from None


def kron(a: np.ndarray, b: np.ndarray, *more: np.ndarray) -> np.ndarray:
    """Kronecker product, left factor acting on the first (most significant) spin."""
    return reduce(np.kron, (a, b) + more).astype(complex)


def embed(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Place a single-spin operator on ``site`` of an ``n_sites`` chain."""
    factors = [np.eye(2, dtype=complex)] * n_sites
    factors[site] = op
    return reduce(np.kron, factors)


def hermiticity_error(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - np.swapaxes(m, -1, -2).conj()), initial=0.0))


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_error(m) <= tol


def is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(m)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))) <= tol


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


@dataclass(frozen=True, eq=False)
class DiagonalObservableBasis:
    """N-1 commuting traceless diagonal observables X_a.

    Only the diagonals are stored, as a real array of shape ``(N-1, N)``.
    Together with the identity they span all real diagonal matrices, so any
    diagonal potential decomposes uniquely as ``v0/N * I + sum_a v_a X_a``.
    """

    diagonals: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        d = np.array(self.diagonals, dtype=float, copy=True)
        if d.ndim != 2 or d.shape[1] < 2 or d.shape[0] != d.shape[1] - 1:
            raise InvalidBasisError(f"expected (N-1, N) diagonals, got shape {d.shape}")
        if np.max(np.abs(d.sum(axis=1))) > HERMITIAN_TOL:
            raise InvalidBasisError("basis operators must be traceless")
        design = np.column_stack([np.ones(d.shape[1]), d.T])
        if np.linalg.matrix_rank(design) != d.shape[1]:
            raise InvalidBasisError("basis is not independent of the identity")
        d.setflags(write=False)
        object.__setattr__(self, "diagonals", d)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"X{a + 1}" for a in range(d.shape[0])))

    def __eq__(self, other):
        if not isinstance(other, DiagonalObservableBasis):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.diagonals, other.diagonals)

    def __hash__(self):
        return hash((self.labels, self.diagonals.tobytes()))

    @property
    def dim(self) -> int:
        return self.diagonals.shape[1]

    @property
    def size(self) -> int:
        return self.diagonals.shape[0]

    @property
    def operators(self) -> list[np.ndarray]:
        return [np.diag(x).astype(complex) for x in self.diagonals]

    def design_matrix(self) -> np.ndarray:
        """Columns ``[1/N, X_1, ..., X_{N-1}]`` evaluated on the diagonal."""
        n = self.dim
        return np.column_stack([np.full(n, 1.0 / n), self.diagonals.T])

    def generator(self, phases) -> np.ndarray:
        """Diagonal of ``sum_a phases[a] X_a``; broadcasts over leading axes."""
        return np.asarray(phases, dtype=float) @ self.diagonals

    def decompose(self, values) -> tuple[np.ndarray, np.ndarray]:
        """Split diagonal values V(sigma) into (v0, v_a).

        ``values`` has shape ``(..., N)``; returns ``v0`` of shape ``(...)`` and
        ``v`` of shape ``(..., N-1)``.
        """
        values = np.asarray(values, dtype=float)
        coef = np.linalg.solve(self.design_matrix(), values.reshape(-1, self.dim).T).T
        coef = coef.reshape(values.shape[:-1] + (self.dim,))
        return coef[..., 0], coef[..., 1:]

    def compose(self, v0, v) -> np.ndarray:
        return np.asarray(v0, dtype=float)[..., None] / self.dim + self.generator(v)


def cartan_basis(n: int) -> DiagonalObservableBasis:
    """Diagonal generalized Gell-Mann matrices normalised to tr(X_a X_b) = delta_ab / 2."""
    if n < 2:
        raise InvalidDimensionError(f"need N >= 2, got {n}")
    rows = []
    for level in range(1, n):
        row = np.zeros(n)
        row[:level] = 1.0
        row[level] = -level
        rows.append(row / np.sqrt(2.0 * level * (level + 1)))
    return DiagonalObservableBasis(np.array(rows))


def two_spin_basis() -> DiagonalObservableBasis:
    """{sz(1), sz(2), sz(1) sz(2)} in the |uu>, |ud>, |du>, |dd> ordering."""
    z = np.array([1.0, -1.0])
    one = np.ones(2)
    return DiagonalObservableBasis(
        np.array([np.kron(z, one), np.kron(one, z), np.kron(z, z)]),
        labels=("sz1", "sz2", "sz1sz2"),
    )


def standard_diagonal_basis(n: int) -> DiagonalObservableBasis:
    """Default basis: sz/2 for a qubit, the Pauli-z products for two spins, Cartan otherwise."""
    if n < 2:
        raise InvalidDimensionError(f"need N >= 2, got {n}")
    if n == 4:
        return two_spin_basis()
    return cartan_basis(n)


def diagonal_phase_unitary(phases: Sequence[float], basis: DiagonalObservableBasis) -> np.ndarray:
    """``exp(-i sum_a phases[a] X_a)`` evaluated entrywise on the diagonal."""
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (basis.size,):
        raise InvalidDimensionError(f"expected {basis.size} phases, got shape {phases.shape}")
    if not np.all(np.isfinite(phases)):
        raise ContractViolation("phases must be finite")
    return np.diag(np.exp(-1j * basis.generator(phases)))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a Hermitian matrix, energies ascending.

    ``vectors[:, n]`` is the n-th eigenvector.
    """

    energies: np.ndarray
    vectors: np.ndarray
    time: float = 0.0
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def min_gap(self) -> float:
        return float(np.min(np.diff(self.energies))) if self.dim > 1 else np.inf

    def state(self, n: int) -> np.ndarray:
        return self.vectors[:, n].copy()

    def projector(self, n: int) -> np.ndarray:
        v = self.vectors[:, n]
        return np.outer(v, v.conj())

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.energies) @ self.vectors.conj().T

    def aligned_to(self, reference: "SpectralDecomposition") -> "SpectralDecomposition":
        """Rephase every eigenvector to maximise Re<ref_n|n>."""
        return SpectralDecomposition(
            self.energies,
            align_vectors(self.vectors, reference.vectors),
            self.time,
            self.degenerate,
        )


def fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column real and positive.

    Works on ``(..., N, M)`` stacks of column vectors.
    """
    vectors = np.asarray(vectors, dtype=complex)
    idx = np.argmax(np.abs(vectors), axis=-2)
    pivot = np.take_along_axis(vectors, idx[..., None, :], axis=-2)
    return vectors * (np.abs(pivot) / pivot)


def align_vectors(vectors: np.ndarray, reference: np.ndarray) -> np.ndarray:
    overlap = np.sum(reference.conj() * vectors, axis=-2, keepdims=True)
    mag = np.abs(overlap)
    phase = np.where(mag > 0, mag / np.where(mag > 0, overlap, 1.0), 1.0)
    return vectors * phase


def spectral_decompose(h: np.ndarray, t: float = 0.0, *, tol: float = 1e-10) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix with the largest-component phase convention."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidDimensionError(f"expected a square matrix, got shape {h.shape}")
    err = hermiticity_error(h)
    if err > tol:
        raise ContractViolation(f"matrix is not Hermitian (max |H - H^dag| = {err:.3e})")
    h = 0.5 * (h + h.conj().T)
    energies, vectors = np.linalg.eigh(h)
    gaps = np.diff(energies)
    degenerate = bool(gaps.size and gaps.min() < DEGENERACY_GAP)
    return SpectralDecomposition(energies, fix_phase(vectors), float(t), degenerate)


def decompose_many(hs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched eigendecomposition along a path with continuous eigenvector phases.

    Returns ``(energies, vectors)`` with shapes ``(K, N)`` and ``(K, N, N)``.
    The first sample follows the largest-component convention, each later
    sample is rephased against its predecessor.
    """
    hs = np.asarray(hs, dtype=complex)
    err = hermiticity_error(hs)
    if err > 1e-10:
        raise ContractViolation(f"path contains a non-Hermitian matrix ({err:.3e})")
    energies, vectors = np.linalg.eigh(0.5 * (hs + np.swapaxes(hs, -1, -2).conj()))
    vectors = fix_phase(vectors)
    if len(vectors) > 1:
        # c_k = c_{k-1} * conj(o_k)/|o_k| makes every <n_{k-1}|n_k> real positive
        overlap = np.sum(vectors[:-1].conj() * vectors[1:], axis=-2)
        mag = np.abs(overlap)
        step = np.where(mag > 0, overlap.conj() / np.where(mag > 0, mag, 1.0), 1.0)
        corr = np.cumprod(step, axis=0)
        corr /= np.abs(corr)
        vectors[1:] *= corr[:, None, :]
    return energies, vectors
