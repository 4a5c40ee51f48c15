"""Dense complex matrix primitives.

Units: hbar = 1 everywhere, so ``expi_step(A, dt)`` is exp(-i A dt).
"""
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, NotHermitianError

HERMITIAN_RTOL = 1e-10

IDENTITY2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class HermitianEig:
    """Ascending eigenvalues and column eigenvectors of a Hermitian matrix."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self):
        return len(self.values)


def as_matrix(A):
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteError("matrix has non-finite entries")
    return A


def dagger(A):
    return np.conj(np.swapaxes(A, -1, -2))


def operator_norm(A):
    """Largest singular value of ``A``."""
    A = as_matrix(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[0])


def hermitian_defect(A):
    return operator_norm(A - A.conj().T)


def check_hermitian(A, rtol=HERMITIAN_RTOL):
    """Return the symmetrized ``A`` or raise if it is not Hermitian within ``rtol*||A||``."""
    A = as_matrix(A)
    diff = A - A.conj().T
    # Frobenius fast path: ||X||_2 <= ||X||_F and ||A||_2 >= ||A||_F / sqrt(d)
    if np.linalg.norm(diff) <= rtol * max(np.linalg.norm(A) / np.sqrt(A.shape[0] or 1), 1.0):
        return 0.5 * (A + A.conj().T)
    scale = operator_norm(A)
    defect = operator_norm(diff)
    if defect > rtol * max(scale, 1.0):
        raise NotHermitianError(
            f"matrix is not Hermitian: ||A - A^dag|| = {defect:.3e} (||A|| = {scale:.3e})"
        )
    return 0.5 * (A + A.conj().T)


def hermitian_eig(A, rtol=HERMITIAN_RTOL):
    A = check_hermitian(A, rtol)
    values, vectors = np.linalg.eigh(A)
    return HermitianEig(values, vectors)


def expi_step(A, dt, rtol=HERMITIAN_RTOL):
    """exp(-i A dt) for Hermitian ``A``, built from its eigendecomposition."""
    eig = hermitian_eig(A, rtol)
    V = eig.vectors
    return (V * np.exp(-1j * eig.values * dt)) @ V.conj().T


def expi_steps(As, dts):
    """Batched :func:`expi_step` over a stack of Hermitian matrices (no validation)."""
    As = 0.5 * (As + dagger(As))
    w, V = np.linalg.eigh(As)
    phases = np.exp(-1j * w * np.asarray(dts, dtype=float)[:, None])
    return (V * phases[:, None, :]) @ dagger(V)


def commutator(A, B):
    return A @ B - B @ A


def unitarity_defect(U):
    U = np.asarray(U)
    return operator_norm(U.conj().T @ U - np.eye(U.shape[0]))


def random_hermitian(d, rng, scale=1.0):
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (M + M.conj().T)


def random_unitary(d, rng):
    """Haar-random unitary via QR with phase correction."""
    Z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph
