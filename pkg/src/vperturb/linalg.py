"""Small dense matrix kernels.

Matrices are plain :class:`numpy.ndarray` objects. The factorizations accept
a single matrix or a stack of matrices (leading batch axes), which is what
the Monte Carlo harness feeds them: thousands of 16x8 problems at once.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, RankDeficient, Singular

__all__ = [
    "QrFactors",
    "as_real_matrix",
    "as_complex_matrix",
    "qr_decompose",
    "qr_decompose_lapack",
    "lower_from_r_inverse",
    "upper_triangular_inverse",
    "pseudo_inverse",
    "singular_values",
    "frobenius_norm_sq",
]

RANK_TOL = 1e-12
PIVOT_TOL = 1e-14


class QrFactors(NamedTuple):
    q: np.ndarray
    r: np.ndarray


def _check_matrix(m, dtype, name):
    a = np.asarray(m, dtype=dtype)
    if a.ndim < 2:
        raise ValueError(f"{name} must be at least 2-D, got shape {a.shape}")
    if a.shape[-1] < 1 or a.shape[-2] < 1:
        raise ValueError(f"{name} must have rows >= 1 and cols >= 1")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_real_matrix(m) -> np.ndarray:
    """Validate and return ``m`` as a float64 array (shape and finiteness)."""
    return _check_matrix(m, np.float64, "real matrix")


def as_complex_matrix(m) -> np.ndarray:
    return _check_matrix(m, np.complex128, "complex matrix")


def qr_decompose(m) -> QrFactors:
    """Thin Householder QR with a nonnegative diagonal on ``R``.

    Parameters
    ----------
    m : array_like, shape (..., rows, cols)
        Real matrix (or stack) with ``rows >= cols``.

    Returns
    -------
    QrFactors
        ``q`` of shape (..., rows, cols) with orthonormal columns and ``r``
        of shape (..., cols, cols), upper triangular.

    Raises
    ------
    RankDeficient
        If any diagonal entry of ``r`` is at or below 1e-12 in magnitude.
    """
    a = as_real_matrix(m)
    rows, cols = a.shape[-2:]
    if rows < cols:
        raise ValueError(f"qr_decompose needs rows >= cols, got {rows}x{cols}")
    batch = a.shape[:-2]
    r = a.reshape((-1, rows, cols)).copy()
    nb = r.shape[0]
    q = np.broadcast_to(np.eye(rows), (nb, rows, rows)).copy()

    for k in range(cols):
        x = r[:, k:, k]
        normx = np.sqrt(np.einsum("bi,bi->b", x, x))
        sign = np.where(x[:, 0] >= 0.0, 1.0, -1.0)
        v = x.copy()
        v[:, 0] += sign * normx
        vnorm = np.sqrt(np.einsum("bi,bi->b", v, v))
        live = vnorm > 0.0
        v[live] /= vnorm[live, None]
        v[~live] = 0.0
        # R <- (I - 2vv^T) R ; Q <- Q (I - 2vv^T)
        r[:, k:, :] -= 2.0 * v[:, :, None] * np.einsum("bi,bij->bj", v, r[:, k:, :])[:, None, :]
        q[:, :, k:] -= 2.0 * np.einsum("bij,bj->bi", q[:, :, k:], v)[:, :, None] * v[:, None, :]

    r = np.triu(r[:, :cols, :])
    q = q[:, :, :cols]
    d = np.diagonal(r, axis1=1, axis2=2)
    flip = np.where(d < 0.0, -1.0, 1.0)
    r *= flip[:, :, None]
    q *= flip[:, None, :]
    if np.any(np.abs(np.diagonal(r, axis1=1, axis2=2)) <= RANK_TOL):
        raise RankDeficient("R has a diagonal entry <= 1e-12")
    return QrFactors(q.reshape(batch + (rows, cols)), r.reshape(batch + (cols, cols)))


def qr_decompose_lapack(m) -> QrFactors:
    """Same contract as :func:`qr_decompose`, backed by LAPACK's Householder QR.

    Several times faster on large stacks; the Monte Carlo harness uses it.
    """
    a = as_real_matrix(m)
    q, r = np.linalg.qr(a)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    flip = np.where(d < 0.0, -1.0, 1.0)
    r = r * flip[..., :, None]
    q = q * flip[..., None, :]
    if np.any(np.abs(np.diagonal(r, axis1=-2, axis2=-1)) <= RANK_TOL):
        raise RankDeficient("R has a diagonal entry <= 1e-12")
    return QrFactors(q, r)


def upper_triangular_inverse(r) -> np.ndarray:
    """Inverse of an upper-triangular matrix (or stack) by back substitution."""
    r = as_real_matrix(r)
    n = r.shape[-1]
    if r.shape[-2] != n:
        raise ValueError("upper_triangular_inverse needs a square matrix")
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    if np.any(np.abs(diag) <= RANK_TOL):
        raise RankDeficient("triangular factor has a diagonal entry <= 1e-12")
    x = np.zeros_like(r)
    eye = np.eye(n)
    for i in range(n - 1, -1, -1):
        acc = eye[i] - np.einsum("...j,...jk->...k", r[..., i, i + 1:], x[..., i + 1:, :])
        x[..., i, :] = acc / diag[..., i, None]
    return x


def lower_from_r_inverse(r) -> np.ndarray:
    """Return ``L = (R^-1)^T``, the lower-triangular search metric matrix."""
    return np.swapaxes(upper_triangular_inverse(r), -1, -2)


def pseudo_inverse(m, regularization: float = 0.0) -> np.ndarray:
    """Compute ``M^T (M M^T + alpha I)^-1``.

    With ``regularization == 0`` the matrix must be square and invertible and
    the plain inverse is returned (LU with partial pivoting on ``M`` itself,
    avoiding the squared condition number of the Gram matrix).

    Raises
    ------
    Singular
        If an LU pivot falls below 1e-14 relative to the largest entry.
    """
    a = as_real_matrix(m)
    if a.ndim != 2:
        raise ValueError("pseudo_inverse takes a single matrix")
    if regularization < 0:
        raise ValueError("regularization must be nonnegative")
    rows, cols = a.shape
    if regularization == 0.0:
        if rows != cols:
            raise Singular("unregularized pseudo_inverse needs a square matrix")
        return _lu_solve(a, np.eye(rows))
    gram = a @ a.T + regularization * np.eye(rows)
    # (MM^T + aI)^-1 is symmetric, so M^T G^-1 = (G^-1 M)^T
    return _lu_solve(gram, a).T


def _lu_solve(a, b):
    scale = max(np.abs(a).max(), np.finfo(float).tiny)
    with warnings.catch_warnings():
        # an exactly singular pivot is reported below as Singular
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL * scale:
        raise Singular("pivot below 1e-14 in Gram solve")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def _round_robin(n):
    """Pairings of ``0..n-1`` (``n`` even) covering every pair once over ``n - 1`` rounds."""
    idx = list(range(n))
    rounds = []
    for _ in range(n - 1):
        rounds.append((np.array(idx[: n // 2]), np.array(idx[n // 2:][::-1])))
        idx = [idx[0], idx[-1]] + idx[1:-1]
    return rounds


def singular_values(m, max_sweeps: int = 100) -> np.ndarray:
    """Singular values in descending order via one-sided Jacobi rotations.

    Columns of a working copy are rotated pairwise until mutually orthogonal;
    the column norms are then the singular values. Each round rotates
    ``n/2`` disjoint column pairs at once (round-robin ordering).
    """
    a = as_real_matrix(m)
    if a.ndim != 2:
        raise ValueError("singular_values takes a single matrix")
    u = a.T.copy() if a.shape[1] > a.shape[0] else a.copy()
    # work at unit scale so the column inner products neither under- nor overflow
    scale = float(np.max(np.abs(u)))
    if scale == 0.0:
        return np.zeros(min(a.shape))
    u /= scale
    if u.shape[1] % 2:
        u = np.concatenate([u, np.zeros((u.shape[0], 1))], axis=1)
    n = u.shape[1]
    eps = np.finfo(float).eps
    rounds = _round_robin(n) if n > 1 else []
    # columns this small only carry rounding noise; rotating them never settles
    negligible = (eps * np.linalg.norm(u)) ** 2
    for _ in range(max_sweeps):
        off = 0.0
        for i, j in rounds:
            ui, uj = u[:, i], u[:, j]
            alpha = np.einsum("ij,ij->j", ui, ui)
            beta = np.einsum("ij,ij->j", uj, uj)
            gamma = np.einsum("ij,ij->j", ui, uj)
            norm = np.sqrt(alpha * beta)
            act = (gamma != 0.0) & (np.abs(gamma) > eps * norm) & (alpha > negligible) & (beta > negligible)
            if not np.any(act):
                continue
            off = max(off, float(np.max(np.abs(gamma[act]) / norm[act])))
            g = np.where(act, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * g)
            t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t = np.where(act, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            u[:, i] = c * ui - s * uj
            u[:, j] = s * ui + c * uj
        if off <= eps:
            break
    else:
        raise ConvergenceFailure(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
    sv = scale * np.sort(np.sqrt(np.einsum("ij,ij->j", u, u)))[::-1]
    return sv[: min(a.shape)]


def frobenius_norm_sq(m) -> float:
    a = np.asarray(m)
    return float(np.sum(np.abs(a) ** 2))
