"""Hermitian operators, density matrices and entropy functionals.

All logarithms are natural (nats). Every type here is immutable after
construction: the backing arrays are flagged read-only.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import entr

from src.core.errors import (
    DimensionMismatchError,
    HermiticityError,
    InvalidStateError,
    NumericalBackendError,
    PreconditionViolation,
)

logger = logging.getLogger(__name__)

# Hermiticity check, relative to max(1, largest entry magnitude)
HERMITICITY_TOL = 1e-10
# Negative eigenvalues down to -CLAMP_TOL are clamped to zero
EIGENVALUE_CLAMP_TOL = 1e-10
TRACE_TOL = 1e-10
# 0 * ln 0 = 0 below this eigenvalue
ENTROPY_CUTOFF = 1e-14
# Relative entropy support test: sigma kernel and rho mass on it
KERNEL_TOL = 1e-12
SUPPORT_MASS_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-9

ArrayLike = Union[np.ndarray, list]


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A d x d complex self-adjoint matrix.

    The stored entries are exactly symmetrized, (A + A^dagger) / 2.

    Attributes:
        entries: Read-only complex array of shape (dim, dim)
    """
    entries: np.ndarray

    def __init__(self, entries: ArrayLike, tol: float = HERMITICITY_TOL):
        """Validate and symmetrize a matrix.

        Args:
            entries: Square complex (or real) matrix
            tol: Hermiticity tolerance, relative to max(1, max |entry|)

        Raises:
            HermiticityError: If the matrix is not square or not self-adjoint
        """
        a = np.asarray(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise HermiticityError(f"Expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise HermiticityError("Matrix contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(a))))
        asymmetry = float(np.max(np.abs(a - a.conj().T)))
        if asymmetry > tol * scale:
            raise HermiticityError(
                f"Matrix is not Hermitian: max |A - A^dagger| = {asymmetry:.3e}"
            )
        object.__setattr__(self, "entries", _freeze((a + a.conj().T) / 2))

    @property
    def dim(self) -> int:
        """Hilbert-space dimension d."""
        return self.entries.shape[0]

    @classmethod
    def from_parts(cls, real: ArrayLike, imag: Optional[ArrayLike] = None,
                   tol: float = HERMITICITY_TOL) -> "HermitianOperator":
        """Build an operator from separate real and imaginary arrays."""
        real = np.asarray(real, dtype=float)
        imag = np.zeros_like(real) if imag is None else np.asarray(imag, dtype=float)
        if real.shape != imag.shape:
            raise HermiticityError(
                f"Real and imaginary parts differ in shape: {real.shape} vs {imag.shape}"
            )
        return cls(real + 1j * imag, tol=tol)

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim))

    def scaled(self, factor: float) -> "HermitianOperator":
        return HermitianOperator(self.entries * factor)

    def __repr__(self) -> str:
        return f"HermitianOperator(dim={self.dim})"


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-decomposition A = U diag(w) U^dagger of a Hermitian matrix.

    Attributes:
        eigenvalues: Real eigenvalues in ascending order
        eigenvectors: Orthonormal eigenvectors as columns
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self, values: Optional[np.ndarray] = None) -> np.ndarray:
        """Return U diag(values) U^dagger (defaults to the eigenvalues)."""
        w = self.eigenvalues if values is None else values
        u = self.eigenvectors
        return (u * w) @ u.conj().T


def spectral_decomposition(matrix: Union[HermitianOperator, np.ndarray]) -> SpectralDecomposition:
    """Diagonalize a Hermitian matrix and verify the result.

    Args:
        matrix: HermitianOperator or Hermitian array

    Returns:
        SpectralDecomposition with ascending eigenvalues

    Raises:
        NumericalBackendError: If the eigensolver fails or the
            reconstruction check does not pass
    """
    a = matrix.entries if isinstance(matrix, HermitianOperator) else np.asarray(matrix)
    try:
        w, u = np.linalg.eigh(a)
    except np.linalg.LinAlgError as e:
        raise NumericalBackendError(f"Eigendecomposition did not converge: {e}") from e

    decomposition = SpectralDecomposition(eigenvalues=w, eigenvectors=u)
    norm = np.linalg.norm(a)
    error = np.linalg.norm(a - decomposition.reconstruct())
    if not error <= RECONSTRUCTION_TOL * (1.0 + norm):
        raise NumericalBackendError(f"Eigendecomposition reconstruction error {error:.3e}")
    return decomposition


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A positive semidefinite, unit-trace operator.

    Eigenvalues down to -1e-10 are clamped to zero and the trace is then
    renormalized exactly.

    Attributes:
        entries: Read-only complex array of shape (dim, dim)
    """
    entries: np.ndarray

    def __init__(self, entries: ArrayLike, tol: float = HERMITICITY_TOL):
        """Validate a density matrix.

        Args:
            entries: Square complex matrix
            tol: Hermiticity tolerance

        Raises:
            HermiticityError: If the matrix is not self-adjoint
            InvalidStateError: If it has a negative eigenvalue below
                -1e-10 or a trace away from 1
        """
        hermitian = HermitianOperator(entries, tol=tol)
        a = np.array(hermitian.entries)
        trace = float(np.real(np.trace(a)))
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"Trace must be 1, got {trace!r}")

        decomposition = spectral_decomposition(a)
        w = decomposition.eigenvalues
        if w[0] < -EIGENVALUE_CLAMP_TOL:
            raise InvalidStateError(f"Negative eigenvalue {w[0]:.3e}")

        if w[0] < 0:
            clamped = np.clip(w, 0.0, None)
            total = float(np.sum(clamped))
            w = clamped / total
            a = decomposition.reconstruct(w)
        else:
            total = float(np.real(np.trace(a)))
            w = w / total
            a = a / total

        object.__setattr__(self, "entries", _freeze((a + a.conj().T) / 2))
        object.__setattr__(
            self, "_spectrum", SpectralDecomposition(w, decomposition.eigenvectors)
        )

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def spectrum(self) -> SpectralDecomposition:
        """Eigen-decomposition of the (clamped, renormalized) state."""
        return self._spectrum

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._spectrum.eigenvalues

    @cached_property
    def rank(self) -> int:
        return int(np.sum(self.eigenvalues > ENTROPY_CUTOFF))

    def as_operator(self) -> HermitianOperator:
        return HermitianOperator(self.entries)

    @classmethod
    def from_unnormalized(cls, entries: ArrayLike) -> "DensityMatrix":
        """Divide a positive semidefinite matrix by its trace first."""
        a = np.asarray(entries, dtype=complex)
        trace = float(np.real(np.trace(a)))
        if trace <= 0:
            raise InvalidStateError(f"Cannot normalize matrix with trace {trace!r}")
        return cls(a / trace)

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim}, rank={self.rank})"


# Pauli matrices
PAULI_X = HermitianOperator([[0, 1], [1, 0]])
PAULI_Y = HermitianOperator([[0, -1j], [1j, 0]])
PAULI_Z = HermitianOperator([[1, 0], [0, -1]])


def _require_same_dim(*items) -> int:
    dims = {item.dim for item in items}
    if len(dims) != 1:
        raise DimensionMismatchError(f"Dimension mismatch: {sorted(dims)}")
    return dims.pop()


def maximally_mixed(dim: int) -> DensityMatrix:
    """Return I/d."""
    return DensityMatrix(np.eye(dim) / dim)


def pure_state(vector: ArrayLike) -> DensityMatrix:
    """Return |psi><psi| for a (not necessarily normalized) vector."""
    psi = np.asarray(vector, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise InvalidStateError("Zero vector has no pure state")
    psi = psi / norm
    return DensityMatrix(np.outer(psi, psi.conj()))


def matrix_exp_shifted(hamiltonian: HermitianOperator) -> Tuple[HermitianOperator, float]:
    """Evaluate exp(-H) with the smallest eigenvalue shifted out.

    Returns G = exp(-H + sI) with s = min eigenvalue of H, so the largest
    eigenvalue of G is exactly 1 and exp(-H) = e^{-s} G.

    Args:
        hamiltonian: Hermitian operator H

    Returns:
        Tuple of (G, s)

    Raises:
        NumericalBackendError: If the eigendecomposition fails
    """
    decomposition = spectral_decomposition(hamiltonian)
    h = decomposition.eigenvalues
    shift = float(h[0])
    g = decomposition.reconstruct(np.exp(shift - h))
    return HermitianOperator(g), shift


def matrix_log(operator: Union[HermitianOperator, "DensityMatrix"]) -> HermitianOperator:
    """Spectral logarithm on the support of a positive semidefinite operator.

    Eigenvalues below 1e-12 are treated as kernel and map to 0.

    Raises:
        PreconditionViolation: If an eigenvalue is below -1e-10
    """
    decomposition = spectral_decomposition(operator.entries)
    w = decomposition.eigenvalues
    if w[0] < -EIGENVALUE_CLAMP_TOL:
        raise PreconditionViolation(f"Logarithm needs a positive operator, min eigenvalue {w[0]:.3e}")
    support = w >= KERNEL_TOL
    logs = np.zeros_like(w)
    logs[support] = np.log(w[support])
    return HermitianOperator(decomposition.reconstruct(logs))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S(rho) = -tr(rho ln rho) in nats, with 0 ln 0 = 0.

    Eigenvalues below 1e-14 contribute nothing. The result is clipped to
    [0, ln d].
    """
    p = rho.eigenvalues
    p = p[p >= ENTROPY_CUTOFF]
    value = float(-np.sum(p * np.log(p)))
    return min(max(0.0, value), math.log(rho.dim))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """D(rho || sigma) = tr(rho ln rho) - tr(rho ln sigma) in nats.

    Returns math.inf when rho puts more than 1e-10 of its weight on the
    kernel of sigma (sigma eigenvalues below 1e-12).

    Raises:
        DimensionMismatchError: If the states have different dimensions
    """
    _require_same_dim(rho, sigma)
    q = sigma.eigenvalues
    v = sigma.spectrum.eigenvectors
    # <v_b| rho |v_b> for every sigma eigenvector
    weights = np.real(np.sum(v.conj() * (rho.entries @ v), axis=0))
    kernel = q < KERNEL_TOL
    if np.sum(weights[kernel]) > SUPPORT_MASS_TOL:
        return math.inf

    support = ~kernel
    cross = float(np.sum(weights[support] * np.log(q[support])))
    value = -von_neumann_entropy(rho) - cross
    return max(0.0, value)


def _canonical_pair(a: DensityMatrix, b: DensityMatrix) -> Tuple[DensityMatrix, DensityMatrix]:
    # Fixed operand order makes the distance exactly symmetric
    if a.entries.tobytes() <= b.entries.tobytes():
        return a, b
    return b, a


def trace_norm_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """||rho - sigma||_1 as the sum of absolute eigenvalues, in [0, 2].

    Raises:
        DimensionMismatchError: If the states have different dimensions
    """
    _require_same_dim(rho, sigma)
    first, second = _canonical_pair(rho, sigma)
    try:
        mu = np.linalg.eigvalsh(first.entries - second.entries)
    except np.linalg.LinAlgError as e:
        raise NumericalBackendError(f"Eigendecomposition did not converge: {e}") from e
    return min(float(np.sum(np.abs(mu))), 2.0)


def trace_norm(matrix: Union[HermitianOperator, np.ndarray]) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    a = matrix.entries if isinstance(matrix, HermitianOperator) else np.asarray(matrix)
    return float(np.sum(np.abs(np.linalg.eigvalsh(a))))


def lambda_max(hamiltonian: HermitianOperator) -> float:
    """Largest eigenvalue of a Hermitian operator."""
    try:
        return float(np.linalg.eigvalsh(hamiltonian.entries)[-1])
    except np.linalg.LinAlgError as e:
        raise NumericalBackendError(f"Eigendecomposition did not converge: {e}") from e


def operator_norm(operator: HermitianOperator) -> float:
    """Operator norm of a Hermitian operator, max |eigenvalue|."""
    w = np.linalg.eigvalsh(operator.entries)
    return float(max(abs(w[0]), abs(w[-1])))


def expectation(rho: DensityMatrix, operator: HermitianOperator) -> float:
    """tr(rho A) for Hermitian A (real part)."""
    _require_same_dim(rho, operator)
    return float(np.real(np.sum(rho.entries * operator.entries.T)))


def binary_entropy(p: float) -> float:
    """h2(p) = -p ln p - (1-p) ln(1-p), with h2(0) = h2(1) = 0."""
    p = min(max(float(p), 0.0), 1.0)
    return float(entr(p) + entr(1.0 - p))


def mix(states, weights) -> DensityMatrix:
    """Convex combination sum_i w_i rho_i of density matrices."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or not math.isclose(float(np.sum(weights)), 1.0, abs_tol=1e-12):
        raise PreconditionViolation("Mixture weights must be nonnegative and sum to 1")
    _require_same_dim(*states)
    total = sum(w * s.entries for w, s in zip(weights, states))
    return DensityMatrix.from_unnormalized(total)


def random_unit_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector in C^d (normalized complex Gaussian)."""
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def random_density_matrix(dim: int, rng: np.random.Generator,
                          rank: Optional[int] = None) -> DensityMatrix:
    """Ginibre-ensemble state G G^dagger / tr(G G^dagger).

    Args:
        dim: Dimension d
        rng: Random generator
        rank: Number of Ginibre columns (default d, full rank almost surely)
    """
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    return DensityMatrix.from_unnormalized(g @ g.conj().T)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> HermitianOperator:
    """GUE-like random Hermitian matrix."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianOperator(scale * (g + g.conj().T) / 2)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases
