"""Small dense complex linear algebra.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; everything here
is a pure function that returns fresh arrays.  The sizes in play are tiny
(at most ``k*M`` on a side, a few dozen), so clarity wins over BLAS tricks.
"""

from __future__ import annotations

import numpy as np

ComplexMatrix = np.ndarray

UNITARY_TOL = 1e-10
SKEW_TOL = 1e-8
HERMITIAN_TOL = 1e-8


def as_matrix(a) -> ComplexMatrix:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def adjoint(a: ComplexMatrix) -> ComplexMatrix:
    return np.conj(as_matrix(a)).T


def matmul(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def unitarity_error(u: ComplexMatrix) -> float:
    """``max |U^dag U - I|`` entrywise; also valid for tall isometries."""
    u = as_matrix(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


def is_unitary(u: ComplexMatrix, tol: float = UNITARY_TOL) -> bool:
    u = as_matrix(u)
    return u.shape[0] == u.shape[1] and unitarity_error(u) < tol


def _check_square(h: np.ndarray, what: str) -> None:
    if h.shape[0] != h.shape[1]:
        raise ValueError(f"{what} must be square, got shape {h.shape}")


def herm_eig(h: ComplexMatrix) -> tuple[np.ndarray, ComplexMatrix]:
    """Eigendecomposition ``h = V diag(w) V^dag`` of a Hermitian matrix.

    Eigenvalues come back ascending.  Raises ``ValueError`` when ``h`` is
    not Hermitian to within ``1e-8``.
    """
    h = as_matrix(h)
    _check_square(h, "Hermitian input")
    if np.max(np.abs(h - h.conj().T), initial=0.0) >= HERMITIAN_TOL:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(h)
    return w, v


def expm_skew(h: ComplexMatrix) -> ComplexMatrix:
    """Matrix exponential of a skew-Hermitian matrix.

    ``-i h`` is Hermitian, so ``h = V diag(i w) V^dag`` and
    ``exp(h) = V diag(exp(i w)) V^dag``.  The result is unitary up to the
    accuracy of the eigenvectors, with no scaling-and-squaring error.
    """
    h = as_matrix(h)
    _check_square(h, "skew-Hermitian input")
    if np.max(np.abs(h + h.conj().T), initial=0.0) >= SKEW_TOL:
        raise ValueError("matrix is not skew-Hermitian")
    if not np.any(h):
        return np.eye(h.shape[0], dtype=np.complex128)
    herm = -1j * h
    # symmetrise away rounding so eigh sees an exactly Hermitian matrix
    w, v = np.linalg.eigh(0.5 * (herm + herm.conj().T))
    return (v * np.exp(1j * w)) @ v.conj().T


def haar_random_unitary(dim: int, rng: np.random.Generator) -> ComplexMatrix:
    """Haar-distributed ``dim x dim`` unitary (QR with phase-fixed R diagonal)."""
    if dim < 1:
        raise ValueError("dim must be at least 1")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def polish_unitary(u: ComplexMatrix) -> ComplexMatrix:
    """Re-orthonormalise a nearly-unitary matrix.

    QR with the R diagonal rotated to be positive, so the polished matrix
    stays within rounding of the input when the input is already unitary.
    """
    u = as_matrix(u)
    q, r = np.linalg.qr(u)
    d = np.diag(r)
    return q * (d / np.abs(d))


def complete_isometry(w: ComplexMatrix) -> ComplexMatrix:
    """Extend a tall isometry ``w`` (``N x k``) to an ``N x N`` unitary.

    The first ``k`` columns of the result equal ``w`` exactly.
    """
    w = as_matrix(w)
    n, k = w.shape
    if k > n:
        raise ValueError("isometry must be tall")
    if unitarity_error(w) >= UNITARY_TOL:
        raise ValueError("columns are not orthonormal")
    if k == n:
        return w.copy()
    # orthogonal complement from the full QR of w
    q, _ = np.linalg.qr(w, mode="complete")
    rest = q[:, k:]
    rest = rest - w @ (w.conj().T @ rest)
    rest, _ = np.linalg.qr(rest)
    return np.hstack([w, rest])
