"""Dense linear-algebra kernels shared by the TRCA and transfer code.

All routines work in float64 and are pure functions of their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np
from numpy import ndarray
import scipy.linalg as sLA

RIDGE = 1e-9
SYMMETRY_TOL = 1e-8
PSD_TOL = 1e-6


class DegenerateError(ValueError):
    """Raised when an input has zero variance where a direction is needed."""


class DegenerateCorrelationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class EigenPair:
    eigenvalue: float
    eigenvector: ndarray


@dataclass(frozen=True)
class CcaPair:
    weight_a: ndarray
    weight_b: ndarray
    correlation: float


def _as_matrix(x, name: str) -> ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def _sign_fix(v: ndarray) -> ndarray:
    # largest-magnitude coefficient positive; first index wins on ties
    if v[np.argmax(np.abs(v))] < 0:
        return -v
    return v


def cross_covariance(a, b) -> ndarray:
    """Row-centred cross-covariance ``(A_c B_c^T) / (n - 1)``.

    Parameters
    ----------
    a : array of shape (r_a, n)
    b : array of shape (r_b, n)

    Returns
    -------
    ndarray of shape (r_a, r_b)
    """
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"sample counts differ: {a.shape[1]} vs {b.shape[1]}")
    n = a.shape[1]
    if n < 2:
        raise ValueError("need at least 2 samples for a covariance")
    ac = a - a.mean(axis=1, keepdims=True)
    bc = b - b.mean(axis=1, keepdims=True)
    return ac @ bc.T / (n - 1)


def pearson_corr(x, y) -> float:
    """Pearson correlation of two equal-length vectors.

    Raises :class:`DegenerateError` when either input is constant.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least 2 samples for a correlation")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(xc @ xc)
    sy = np.sqrt(yc @ yc)
    # relative threshold: a "constant" row of large values leaves rounding noise
    if sx <= 1e-14 * max(1.0, np.abs(x).max()) * np.sqrt(x.size):
        raise DegenerateError("x has zero variance")
    if sy <= 1e-14 * max(1.0, np.abs(y).max()) * np.sqrt(y.size):
        raise DegenerateError("y has zero variance")
    r = float(xc @ yc / (sx * sy))
    return min(1.0, max(-1.0, r))


def safe_corr(x, y) -> float:
    """:func:`pearson_corr` that maps degenerate inputs to 0 with a warning."""
    try:
        return pearson_corr(x, y)
    except DegenerateError as exc:
        warnings.warn(f"degenerate correlation treated as 0: {exc}",
                      DegenerateCorrelationWarning, stacklevel=2)
        return 0.0


def _ridged_cholesky(c: ndarray, name: str, min_eig: float | None = None) -> ndarray:
    """Cholesky factor of ``c``, ridged by ``1e-9 * trace / n`` only when near-singular."""
    dim = c.shape[0]
    tr = np.trace(c)
    if not tr > 0:
        raise DegenerateError(f"{name} has zero total variance")
    eps = RIDGE * tr / dim
    if min_eig is None:
        min_eig = sLA.eigvalsh(c)[0]
    if min_eig > 1e3 * eps:
        return sLA.cholesky(c, lower=True)
    return sLA.cholesky(c + eps * np.eye(dim), lower=True)


def solve_rayleigh(S, Q) -> EigenPair:
    """Top generalized eigenpair of ``S w = lambda Q w``.

    The problem is reduced with a Cholesky factor of ``Q`` and solved as a
    standard symmetric problem. A near-singular ``Q`` (smallest eigenvalue
    below ``1e-6 * trace(Q) / n``) is ridged with ``eps = 1e-9 * trace(Q) / n``.
    The returned eigenvector has unit ``Q``-norm and its largest-magnitude
    coefficient is positive.
    """
    S = _as_matrix(S, "S")
    Q = _as_matrix(Q, "Q")
    n = S.shape[0]
    if S.shape != (n, n) or Q.shape != (n, n):
        raise ValueError(f"S and Q must be square and equal-sized, got {S.shape}, {Q.shape}")
    scale = max(1.0, np.abs(S).max())
    if np.abs(S - S.T).max() > SYMMETRY_TOL * scale:
        raise ValueError("S is not symmetric")
    S = (S + S.T) / 2
    Q = (Q + Q.T) / 2
    tr = np.trace(Q)
    if not tr > 0:
        raise DegenerateError("Q has zero trace")
    min_eig = sLA.eigvalsh(Q)[0]
    if n > 1 and min_eig < -PSD_TOL * tr / n:
        raise ValueError("Q is not positive semidefinite")

    L = _ridged_cholesky(Q, "Q", min_eig)
    # C = L^-1 S L^-T
    tmp = sLA.solve_triangular(L, S, lower=True)
    C = sLA.solve_triangular(L, tmp.T, lower=True)
    C = (C + C.T) / 2
    vals, vecs = sLA.eigh(C)
    w = sLA.solve_triangular(L.T, vecs[:, -1], lower=False)
    return EigenPair(eigenvalue=float(vals[-1]), eigenvector=_sign_fix(w))


def cca_first_pair(a, b) -> CcaPair:
    """First canonical pair between two row-views sharing a sample axis.

    Each view's auto-covariance is ridged (``1e-9 * trace / dim``) and
    whitened through its Cholesky factor; the leading singular pair of the
    whitened cross-covariance gives the weights. ``correlation`` is the
    Pearson correlation of the two projections and is never negative.
    """
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"sample counts differ: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[1] < 2:
        raise ValueError("need at least 2 samples")
    La = _ridged_cholesky(cross_covariance(a, a), "view a")
    Lb = _ridged_cholesky(cross_covariance(b, b), "view b")
    Cab = cross_covariance(a, b)
    K = sLA.solve_triangular(La, Cab, lower=True)
    K = sLA.solve_triangular(Lb, K.T, lower=True).T
    U, _, Vt = sLA.svd(K, full_matrices=False)
    wa = sLA.solve_triangular(La.T, U[:, 0], lower=False)
    wb = sLA.solve_triangular(Lb.T, Vt[0], lower=False)

    if np.abs(wa).max() > 0 and wa[np.argmax(np.abs(wa))] < 0:
        wa, wb = -wa, -wb
    r = safe_corr(wa @ a, wb @ b)
    if r < 0:
        wb = -wb
        r = -r
    return CcaPair(weight_a=wa, weight_b=wb, correlation=r)


def corr_rows(x, y) -> ndarray:
    """Pearson correlation of every row of ``x`` with the vector ``y``.

    Rows (or ``y``) with zero variance give 0.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[1] != y.size:
        raise ValueError(f"length mismatch: {x.shape[1]} vs {y.size}")
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean()
    sx = np.sqrt(np.einsum("ij,ij->i", xc, xc))
    sy = np.sqrt(yc @ yc)
    num = xc @ yc
    den = sx * sy
    out = np.zeros(x.shape[0])
    ok = den > 0
    out[ok] = np.clip(num[ok] / den[ok], -1.0, 1.0)
    return out
