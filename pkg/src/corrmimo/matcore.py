"""Complex linear-algebra helpers and checkers for the matrix inequalities
used throughout the package.

Eigenvalues are always reported in non-increasing order,
``lambda_1 >= lambda_2 >= ... >= lambda_n``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "HermitianEigen",
    "SvdResult",
    "as_matrix",
    "hermitian_eig",
    "svd",
    "fix_phase",
    "poincare_check",
    "separation_holds",
    "block_det",
    "product_eig_bounds_hold",
    "sum_eig_bounds_hold",
    "trace_product_bound_holds",
    "random_unitary",
    "random_hermitian",
    "projector",
]

ORTHO_TOL = 1e-10


class HermitianEigen(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class SvdResult(NamedTuple):
    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray


def as_matrix(a, name="matrix") -> np.ndarray:
    """Return `a` as a finite 2-D complex array or raise ``ValueError``."""
    arr = np.asarray(a)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    arr = arr.astype(complex, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def fix_phase(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate each column so its first non-negligible entry is real positive."""
    v = np.array(vectors, dtype=complex, copy=True)
    for j in range(v.shape[1]):
        col = v[:, j]
        scale = np.max(np.abs(col)) if col.size else 0.0
        if scale == 0.0:
            continue
        idx = int(np.argmax(np.abs(col) > tol * scale))
        c = col[idx]
        v[:, j] = col * (np.conj(c) / abs(c))
    return v


def hermitian_eig(a) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix, eigenvalues non-increasing.

    The input is symmetrized before decomposition. Eigenvectors follow the
    convention of :func:`fix_phase`.

    Raises
    ------
    ValueError
        If `a` is not square, has non-finite entries, or is far from
        Hermitian.
    """
    a = as_matrix(a)
    n, m = a.shape
    if n != m:
        raise ValueError(f"hermitian_eig needs a square matrix, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-8 * scale:
        raise ValueError("matrix is not Hermitian")
    a = 0.5 * (a + a.conj().T)
    w, v = np.linalg.eigh(a)
    w = w[::-1].copy()
    v = fix_phase(v[:, ::-1])
    return HermitianEigen(w, v)


def svd(a) -> SvdResult:
    """Full SVD ``a = U diag(s) V^H`` with non-increasing singular values.

    Returns unitary `left` (rows x rows) and `right` (cols x cols); the
    singular value vector has length ``min(rows, cols)``.
    """
    a = as_matrix(a)
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    return SvdResult(u, s, vh.conj().T)


def poincare_check(a, w, tol: float = 1e-10) -> bool:
    """True iff ``lambda_k(W^H A W) <= lambda_k(A)`` for ``k = 1..r``.

    `w` must have orthonormal columns.
    """
    a = as_matrix(a, "A")
    w = as_matrix(w, "W")
    r = w.shape[1]
    if np.linalg.norm(w.conj().T @ w - np.eye(r)) > ORTHO_TOL * max(1, r):
        raise ValueError("W does not have orthonormal columns")
    lam_a = hermitian_eig(a).eigenvalues
    lam_b = hermitian_eig(w.conj().T @ a @ w).eigenvalues
    return separation_holds(lam_a, lam_b, tol)


def separation_holds(lam_a, lam_b, tol: float = 1e-10) -> bool:
    """Compare sorted spectra: ``lam_b[k] <= lam_a[k] + tol`` for every ``k < len(lam_b)``."""
    lam_a = np.sort(np.asarray(lam_a, dtype=float))[::-1]
    lam_b = np.sort(np.asarray(lam_b, dtype=float))[::-1]
    if lam_b.size > lam_a.size:
        raise ValueError("compressed spectrum longer than the original")
    return bool(np.all(lam_b <= lam_a[: lam_b.size] + tol))


def block_det(x, y, z, w, cond_limit: float = 1e12) -> complex:
    """Determinant of ``[[X, Y], [Z, W]]`` via the Schur complement of `W`.

    Computes ``det(X - Y W^{-1} Z) * det(W)``. Blocks need only be
    conformal (`X` p x p, `W` q x q).

    Raises
    ------
    ValueError
        If `W` is singular (condition number above `cond_limit`) or the
        blocks are not conformal.
    """
    x, y, z, w = (np.atleast_2d(np.asarray(b, dtype=complex)) for b in (x, y, z, w))
    p, q = x.shape[0], w.shape[0]
    if x.shape != (p, p) or w.shape != (q, q) or y.shape != (p, q) or z.shape != (q, p):
        raise ValueError("blocks are not conformal")
    if q and np.linalg.cond(w) > cond_limit:
        raise ValueError("W block is singular")
    if q == 0:
        return complex(np.linalg.det(x)) if p else 1.0 + 0j
    schur = x - y @ np.linalg.solve(w, z)
    det_schur = np.linalg.det(schur) if p else 1.0
    return complex(det_schur * np.linalg.det(w))


def _check_square_pair(a, b):
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError("A and B must be square and of equal size")
    return a, b


def product_eig_bounds_hold(a, b, tol: float = 1e-9) -> bool:
    """Check ``lambda_k(A) lambda_min(B) <= lambda_k(AB) <= lambda_k(A) lambda_max(B)``.

    Requires positive semidefinite `A` and `B` (raises ``ValueError``
    otherwise); the product `AB` is then similar to a Hermitian PSD matrix
    and has real eigenvalues.
    """
    a, b = _check_square_pair(a, b)
    la = hermitian_eig(a).eigenvalues
    lb = hermitian_eig(b).eigenvalues
    scale = max(1.0, float(np.max(np.abs(la))) * float(np.max(np.abs(lb))))
    if la[-1] < -tol * scale or lb[-1] < -tol * scale:
        raise ValueError("A and B must be positive semidefinite")
    lab = np.sort(np.linalg.eigvals(a @ b).real)[::-1]
    lo = la * lb[-1]
    hi = la * lb[0]
    return bool(np.all(lab >= lo - tol * scale) and np.all(lab <= hi + tol * scale))


def sum_eig_bounds_hold(a, b, tol: float = 1e-9) -> bool:
    """Weyl bounds ``lambda_k(A) + lambda_min(B) <= lambda_k(A+B) <= lambda_k(A) + lambda_max(B)``."""
    a, b = _check_square_pair(a, b)
    la = hermitian_eig(a).eigenvalues
    lb = hermitian_eig(b).eigenvalues
    lab = hermitian_eig(a + b).eigenvalues
    scale = max(1.0, float(np.max(np.abs(la))), float(np.max(np.abs(lb))))
    return bool(
        np.all(lab >= la + lb[-1] - tol * scale) and np.all(lab <= la + lb[0] + tol * scale)
    )


def trace_product_bound_holds(a, b, tol: float = 1e-9) -> bool:
    """Check ``sum_k lambda_k(AB) <= sum_k lambda_k(A) lambda_k(B)`` for Hermitian A, B."""
    a, b = _check_square_pair(a, b)
    la = hermitian_eig(a).eigenvalues
    lb = hermitian_eig(b).eigenvalues
    lhs = float(np.trace(a @ b).real)
    rhs = float(np.dot(la, lb))
    scale = max(1.0, float(np.sum(np.abs(la) * np.abs(lb))))
    return lhs <= rhs + tol * scale


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(n: int, rng: np.random.Generator, psd: bool = False) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    if psd:
        return z @ z.conj().T
    return 0.5 * (z + z.conj().T)


def projector(vectors: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the span of orthonormal `vectors`."""
    return vectors @ vectors.conj().T
