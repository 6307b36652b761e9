"""Small dense complex linear algebra.

Matrices and vectors are plain complex ``numpy`` arrays. The eigensolver is
a cyclic complex Jacobi iteration, which is accurate to round-off for the
2x2 and 4x4 Hermitian matrices used throughout the package.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import NotHermitian, NotOrthonormal

HERMITIAN_TOL = 1e-10
ORTHONORMAL_TOL = 1e-10

_MAX_SWEEPS = 64


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a square complex array, rejecting NaN/Inf."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=complex)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise ValueError(f"expected a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(m))


def max_abs_diff(a, b) -> float:
    """Max-entry absolute difference, the equality metric used everywhere."""
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def hermiticity_residual(m) -> float:
    m = np.asarray(m)
    return max_abs_diff(m, dagger(m))


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_residual(m) <= tol


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product with ``a`` as the left (particle-1) factor."""
    return np.kron(as_matrix(a), as_matrix(b))


def outer(v, w=None) -> np.ndarray:
    """``|v><w|``; ``w`` defaults to ``v``."""
    v = as_vector(v)
    w = v if w is None else as_vector(w)
    return np.outer(v, np.conj(w))


def _jacobi_unitary(a: np.ndarray, p: int, q: int) -> np.ndarray:
    """Unitary that zeroes ``a[p, q]`` of the Hermitian ``a`` under ``U^H a U``."""
    apq = a[p, q]
    mag = abs(apq)
    # phase puts the (p, q) entry on the positive real axis
    phase = apq / mag
    theta = 0.5 * np.arctan2(2.0 * mag, (a[q, q] - a[p, p]).real)
    c, s = np.cos(theta), np.sin(theta)
    u = np.eye(a.shape[0], dtype=complex)
    u[p, p] = c
    u[q, q] = c
    u[p, q] = s * phase
    u[q, p] = -s * np.conj(phase)
    return u


def hermitian_eig(m, tol: float = HERMITIAN_TOL) -> list[tuple[float, np.ndarray]]:
    """Eigen-decompose a Hermitian matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    m : array_like
        Square complex matrix, Hermitian to within ``tol``.
    tol : float
        Hermiticity tolerance (max-entry ``|m - m^H|``).

    Returns
    -------
    list of (eigenvalue, eigenvector)
        Sorted by descending eigenvalue. Eigenvectors are orthonormal.

    Raises
    ------
    NotHermitian
        If the input fails the Hermiticity check.
    """
    a = as_matrix(m)
    resid = hermiticity_residual(a)
    if resid > tol:
        raise NotHermitian(f"matrix is not Hermitian (residual {resid:.3e} > {tol:.1e})")
    a = 0.5 * (a + dagger(a))
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(float(np.max(np.abs(a))), 1.0)
    for _ in range(_MAX_SWEEPS):
        off = np.abs(a - np.diag(np.diag(a)))
        if float(np.max(off)) <= 1e-16 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= 1e-300:
                    continue
                u = _jacobi_unitary(a, p, q)
                a = dagger(u) @ a @ u
                a[p, q] = 0.0
                a[q, p] = 0.0
                v = v @ u
    evals = np.real(np.diag(a))
    order = np.argsort(-evals, kind="stable")
    return [(float(evals[i]), v[:, i].copy()) for i in order]


def check_orthonormal(vectors: Sequence, tol: float = ORTHONORMAL_TOL) -> float:
    """Return ``max |<v_i|v_j> - delta_ij|``; raise NotOrthonormal above ``tol``."""
    vs = np.array([as_vector(v) for v in vectors])
    gram = np.conj(vs) @ vs.T
    resid = max_abs_diff(gram, np.eye(len(vs)))
    if resid > tol:
        raise NotOrthonormal(f"vectors are not orthonormal (residual {resid:.3e})")
    return resid


def projector_onto(vectors: Sequence) -> np.ndarray:
    """Orthogonal projector ``sum_i |v_i><v_i|`` onto the span of orthonormal ``vectors``."""
    if len(vectors) == 0:
        raise ValueError("need at least one vector")
    check_orthonormal(vectors)
    return sum(outer(v) for v in vectors)


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (g + dagger(g))


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state ``G G^H / tr`` with ``G`` a ``dim x rank`` Ginibre matrix."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real
