"""Small dense linear algebra for latent-normal covariance matrices.

Matrices here are tiny (the package documents N <= 6), so the Cholesky
factorization is written out explicitly: the EM iterations need the raw
pivots to reject collapsing covariance updates, which the LAPACK wrapper
does not expose.
"""
import math

import numpy as np

from .exceptions import DimensionMismatch, NotPositiveDefinite

PD_FLOOR = 1e-10
MAX_DIM = 6

_LOG_2PI = math.log(2.0 * math.pi)


def as_vector(x, name="x"):
    """Return ``x`` as a finite 1-D float array."""
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def symmetrize(m, name="matrix"):
    """Return a symmetric copy of ``m`` built by mirroring its lower triangle."""
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    lower = np.tril(a)
    return lower + np.tril(a, -1).T


def cholesky(m, pd_floor=PD_FLOOR):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If any pivot (the diagonal value before the square root) falls
        below ``pd_floor``.
    """
    a = symmetrize(m)
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot >= pd_floor:
            raise NotPositiveDefinite(
                f"pivot {j} equals {pivot:.3g}, below the floor {pd_floor:g}"
            )
        L[j, j] = math.sqrt(pivot)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def is_positive_definite(m, pd_floor=PD_FLOOR):
    try:
        cholesky(m, pd_floor)
    except NotPositiveDefinite:
        return False
    return True


def _forward(L, b):
    n = L.shape[0]
    y = np.zeros(np.shape(b), dtype=float)
    for i in range(n):
        y[i] = (b[i] - L[i, :i] @ y[:i]) / L[i, i]
    return y


def _backward(L, y):
    n = L.shape[0]
    x = np.zeros(np.shape(y), dtype=float)
    for i in reversed(range(n)):
        x[i] = (y[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x


def solve_spd(m, b):
    """Solve ``m @ x = b`` for symmetric positive definite ``m``."""
    L = cholesky(m)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != L.shape[0]:
        raise DimensionMismatch(f"rhs has length {b.shape[0]}, matrix is {L.shape[0]}x{L.shape[0]}")
    return _backward(L, _forward(L, b))


def logdet(m):
    """Log-determinant of a symmetric positive definite matrix."""
    L = cholesky(m)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def mvn_logpdf(x, mu, sigma):
    """Log density of N(mu, sigma) at ``x``.

    ``x`` may be a single point of shape (N,) or a stack of points (..., N);
    the result has the matching leading shape.
    """
    mu = as_vector(mu, "mu")
    L = cholesky(sigma)
    n = mu.shape[0]
    if L.shape[0] != n:
        raise DimensionMismatch(f"mu has length {n}, sigma is {L.shape[0]}x{L.shape[0]}")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise DimensionMismatch(f"x has trailing dimension {x.shape[-1]}, expected {n}")
    diff = (x - mu).reshape(-1, n).T
    z = _forward(L, diff)
    quad = np.sum(z * z, axis=0)
    half_logdet = float(np.sum(np.log(np.diag(L))))
    out = -0.5 * n * _LOG_2PI - half_logdet - 0.5 * quad
    if x.ndim == 1:
        return float(out[0])
    return out.reshape(x.shape[:-1])
