"""Poisson-lognormal (PL) and geometric-logitnormal (GL) innovation laws.

Both families share a latent normal vector eta ~ N(mu, Sigma):

* PL: R_s | eta ~ Poisson(exp(eta_s)), independently over s.
* GL: R_s | eta ~ Geometric(pi_s) on {0, 1, 2, ...} with
  pi_s = exp(eta_s) / (1 + exp(eta_s)), i.e. P(R_s = r) = pi_s (1 - pi_s)**r.

Probabilities are integrated over eta with a :class:`~minar.quadrature.QuadRule`
built for the same (mu, Sigma).
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import DimensionMismatch, FamilyMismatch
from .linalg import PD_FLOOR, as_vector, cholesky, symmetrize
from .quadrature import integrate

FAMILIES = ("pl", "gl")
MU_BOUND = 20.0
SIGMA_DIAG_MAX = 25.0


def check_family(family):
    f = str(family).strip().lower()
    if f not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
    return f


@dataclass(frozen=True)
class MixtureParams:
    """Latent-normal parameters of an innovation law."""

    family: str
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        family = check_family(self.family)
        mu = as_vector(self.mu, "mu")
        sigma = symmetrize(self.sigma, "sigma")
        if sigma.shape[0] != mu.shape[0]:
            raise DimensionMismatch(
                f"mu has length {mu.shape[0]} but sigma is {sigma.shape[0]}x{sigma.shape[0]}"
            )
        if np.any(np.abs(mu) > MU_BOUND):
            raise ValueError(f"|mu| must not exceed {MU_BOUND}")
        d = np.diag(sigma)
        if np.any(d < PD_FLOOR) or np.any(d > SIGMA_DIAG_MAX):
            raise ValueError(f"sigma diagonal must lie in [{PD_FLOOR:g}, {SIGMA_DIAG_MAX:g}]")
        cholesky(sigma)
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self):
        return self.mu.shape[0]


def log_kernel(family, r, eta):
    """Conditional log-probability log P(R_s = r | eta_s), broadcasting."""
    r = np.asarray(r, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if family == "pl":
        return r * eta - np.exp(eta) - gammaln(r + 1.0)
    if family == "gl":
        # log pi + r log(1 - pi) = eta - (r + 1) * softplus(eta)
        return eta - (r + 1.0) * np.logaddexp(0.0, eta)
    raise ValueError(f"unknown family {family!r}")


def _check_counts(r, dim):
    r = np.asarray(r)
    if r.ndim == 0:
        r = r.reshape(1)
    if r.shape != (dim,):
        raise DimensionMismatch(f"count vector has shape {r.shape}, expected ({dim},)")
    if np.any(r < 0) or np.any(r != np.floor(r)):
        raise ValueError("counts must be non-negative integers")
    return r.astype(np.int64)


def _check_rule(params, rule):
    if rule.dim != params.dim:
        raise DimensionMismatch(f"rule has dimension {rule.dim}, parameters {params.dim}")
    if not (np.allclose(rule.mu, params.mu, rtol=0, atol=1e-12)
            and np.allclose(rule.sigma, params.sigma, rtol=0, atol=1e-12)):
        raise ValueError("quadrature rule was not built for these (mu, sigma)")


def _log_pmf(family, r, params, rule):
    if params.family != family:
        raise FamilyMismatch(f"expected {family.upper()} parameters, got {params.family.upper()}")
    r = _check_counts(r, params.dim)
    _check_rule(params, rule)
    return integrate(rule, lambda eta: log_kernel(family, r, eta).sum(axis=1))


def pl_log_pmf(r, params, rule):
    """log P(R = r) for the multivariate Poisson-lognormal law."""
    return _log_pmf("pl", r, params, rule)


def gl_log_pmf(r, params, rule):
    """log P(R = r) for the multivariate geometric-logitnormal law."""
    return _log_pmf("gl", r, params, rule)


def log_pmf(r, params, rule):
    return _log_pmf(params.family, r, params, rule)


def log_pmf_table(params, rule, r_max):
    """Joint log-PMF on the grid {0..r_max}**N as an N-dimensional array."""
    n = params.dim
    r_max = int(r_max)
    grid = np.arange(r_max + 1)
    # per-component kernels, shape (N, r_max + 1, Q)
    k = np.stack([log_kernel(params.family, grid[:, None], rule.nodes[None, :, s])
                  for s in range(n)])
    out = np.empty((r_max + 1,) * n)
    # loop over all but the last coordinate, vectorize the last
    for idx in np.ndindex(*out.shape[:-1]):
        base = rule.log_weights + sum(k[s, idx[s]] for s in range(n - 1))
        terms = base[None, :] + k[n - 1]
        top = terms.max(axis=1, keepdims=True)
        out[idx] = (top + np.log(np.exp(terms - top).sum(axis=1, keepdims=True)))[:, 0]
    return out


@dataclass(frozen=True)
class InnovationMoments:
    mean: np.ndarray
    cov: np.ndarray
    corr: np.ndarray


def _moments(params, sign):
    mu = params.mu
    s = params.sigma
    d = np.diag(s)
    mean = np.exp(sign * mu + 0.5 * d)
    # E[R_i R_j] - E[R_i] E[R_j] for i != j
    cov = np.outer(mean, mean) * np.expm1(s)
    if sign > 0:
        var = mean + mean ** 2 * np.expm1(d)
    else:
        var = mean + mean ** 2 * (2.0 * np.exp(d) - 1.0)
    np.fill_diagonal(cov, var)
    sd = np.sqrt(var)
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return InnovationMoments(mean=mean, cov=cov, corr=corr)


def pl_moments(params):
    """Closed-form mean, covariance and correlation of a PL vector."""
    if params.family != "pl":
        raise FamilyMismatch("pl_moments needs PL parameters")
    return _moments(params, +1.0)


def gl_moments(params):
    """Closed-form mean, covariance and correlation of a GL vector.

    With support {0, 1, ...}, E[R_s | eta] = exp(-eta_s), which gives the
    negative sign on mu throughout (including the cross-covariances).
    """
    if params.family != "gl":
        raise FamilyMismatch("gl_moments needs GL parameters")
    return _moments(params, -1.0)


def innovation_moments(params):
    return pl_moments(params) if params.family == "pl" else gl_moments(params)


def _pmf_derivatives(family, r, params, rule):
    """Derivatives of P_r from the shifted-count recursions.

    ``d_sigma[s, t]`` is the partial derivative with respect to the single
    entry sigma_st (sigma_ts held fixed); moving both symmetric entries
    together changes P_r at twice that rate when s != t.
    """
    r = _check_counts(r, params.dim)
    n = params.dim
    e = np.eye(n, dtype=np.int64)

    cache = {}

    def P(v):
        key = tuple(int(x) for x in v)
        if key not in cache:
            cache[key] = np.exp(_log_pmf(family, np.array(key), params, rule))
        return cache[key]

    p_r = P(r)
    d_mu = np.empty(n)
    for s in range(n):
        up = (r[s] + 1) * P(r + e[s])
        d_mu[s] = r[s] * p_r - up if family == "pl" else up - r[s] * p_r

    # the printed sigma recursions coincide for both families
    d_sigma = np.empty((n, n))
    for s in range(n):
        for t in range(s, n):
            rs, rt = r[s], r[t]
            if s != t:
                val = 0.5 * (rs * rt * p_r
                             - rs * (rt + 1) * P(r + e[t])
                             - rt * (rs + 1) * P(r + e[s])
                             + (rs + 1) * (rt + 1) * P(r + e[s] + e[t]))
            else:
                val = 0.5 * (rs * rs * p_r
                             - (rs + 1) * (2 * rs + 1) * P(r + e[s])
                             + (rs + 1) * (rs + 2) * P(r + 2 * e[s]))
            d_sigma[s, t] = d_sigma[t, s] = val
    return d_mu, d_sigma


def pl_pmf_derivatives(r, params, rule):
    """(dP_r/dmu, dP_r/dsigma) for the PL law, on the probability scale."""
    if params.family != "pl":
        raise FamilyMismatch("pl_pmf_derivatives needs PL parameters")
    return _pmf_derivatives("pl", r, params, rule)


def gl_pmf_derivatives(r, params, rule):
    """(dP_r/dmu, dP_r/dsigma) for the GL law, on the probability scale."""
    if params.family != "gl":
        raise FamilyMismatch("gl_pmf_derivatives needs GL parameters")
    return _pmf_derivatives("gl", r, params, rule)


def sample_latent_counts(family, eta, rng):
    """Draw counts given latent vectors ``eta`` (any shape)."""
    if family == "pl":
        return rng.poisson(np.exp(eta))
    p = 1.0 / (1.0 + np.exp(-eta))
    # numpy's geometric counts trials (support 1, 2, ...)
    return rng.geometric(p) - 1


def sample(params, n, seed=None):
    """Draw ``n`` i.i.d. innovation vectors; returns an (n, N) int64 array.

    ``seed`` may be an int, a SeedSequence or a ``numpy.random.Generator``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    eta = rng.multivariate_normal(params.mu, params.sigma, size=n, method="cholesky")
    return np.asarray(sample_latent_counts(params.family, eta, rng), dtype=np.int64)
