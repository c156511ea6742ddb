"""Gauss-Hermite rules for expectations under a multivariate normal law.

A :class:`QuadRule` carries tensor-product nodes already mapped into the
latent space (log-rate space for the Poisson family, logit space for the
geometric family) together with normalized log-weights, so that

    E[g(eta)] ~= sum_q exp(log_weights[q]) * g(nodes[q]),   eta ~ N(mu, Sigma).
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import logsumexp

from .exceptions import NodeBudgetExceeded
from .linalg import as_vector, cholesky, mvn_logpdf, symmetrize

NODE_BUDGET = 200_000
DEFAULT_FIT_NODES = 15
DEFAULT_ORACLE_NODES = 30
MAX_NODES_PER_DIM = 64


def hermite_nodes(m):
    """Physicists' Gauss-Hermite rule for the weight exp(-x**2).

    Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix of
    the Hermite recurrence; weights are sqrt(pi) times the squared first
    components of the normalized eigenvectors (Golub-Welsch).

    Returns
    -------
    abscissae, weights : ndarray of shape (m,)
    """
    m = int(m)
    if not 1 <= m <= MAX_NODES_PER_DIM:
        raise ValueError(f"node count must lie in [1, {MAX_NODES_PER_DIM}], got {m}")
    if m == 1:
        return np.zeros(1), np.array([math.sqrt(math.pi)])
    off = np.sqrt(np.arange(1, m) / 2.0)
    x, v = eigh_tridiagonal(np.zeros(m), off)
    w = math.sqrt(math.pi) * v[0, :] ** 2
    # the Jacobi matrix is symmetric about zero; enforce it exactly
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return x, w


def _log_hermite_weights(m):
    """Log of the probabilist-normalized weights w_i / sqrt(pi)."""
    if m == 1:
        return np.zeros(1)
    off = np.sqrt(np.arange(1, m) / 2.0)
    _, v = eigh_tridiagonal(np.zeros(m), off)
    with np.errstate(divide="ignore"):
        lw = 2.0 * np.log(np.abs(v[0, :]))
    rev = lw[::-1]
    # far-tail weights can underflow on one side only; keep the finite mirror
    lw = np.where(np.isfinite(lw) & np.isfinite(rev), 0.5 * (lw + rev), np.maximum(lw, rev))
    return lw - logsumexp(lw)


@dataclass(frozen=True)
class QuadRule:
    """Tensor-product Gauss-Hermite rule for N(mu, sigma).

    Attributes
    ----------
    mu, sigma : the normal law the rule integrates against
    nodes_per_dim : m
    std_nodes : (m**N, N) standard-normal abscissae sqrt(2) * x
    nodes : (m**N, N) latent-space points mu + L @ std_node
    log_weights : (m**N,) normalized log-weights
    """

    mu: np.ndarray
    sigma: np.ndarray
    nodes_per_dim: int
    std_nodes: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    log_weights: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.mu.shape[0]

    @property
    def size(self):
        return self.log_weights.shape[0]

    def expect(self, values):
        """Weighted sum of ``values`` evaluated at the nodes (leading axis)."""
        w = np.exp(self.log_weights)
        return np.tensordot(w, np.asarray(values, dtype=float), axes=(0, 0))


def standard_rule(dim, m):
    """Standard-normal tensor rule: (points of shape (m**dim, dim), log-weights)."""
    dim = int(dim)
    m = int(m)
    if m ** dim > NODE_BUDGET:
        raise NodeBudgetExceeded(
            f"{m}**{dim} = {m ** dim} nodes exceeds the budget of {NODE_BUDGET}"
        )
    x, _ = hermite_nodes(m)
    z1 = math.sqrt(2.0) * x
    lw1 = _log_hermite_weights(m)
    grids = np.array(list(itertools.product(range(m), repeat=dim)), dtype=int)
    pts = z1[grids]
    lw = lw1[grids].sum(axis=1)
    return pts, lw


def build_rule(mu, sigma, m=DEFAULT_FIT_NODES):
    """Gauss-Hermite rule for expectations under N(mu, sigma).

    The rule is exact for polynomials in eta of per-coordinate degree up to
    2m - 1.

    Raises
    ------
    NodeBudgetExceeded
        If m**N exceeds :data:`NODE_BUDGET`.
    NotPositiveDefinite
        If ``sigma`` fails the Cholesky check.
    """
    mu = as_vector(mu, "mu")
    sigma = symmetrize(sigma, "sigma")
    L = cholesky(sigma)
    pts, lw = standard_rule(mu.shape[0], m)
    nodes = mu + pts @ L.T
    for a in (mu, sigma, pts, nodes, lw):
        a.setflags(write=False)
    return QuadRule(mu=mu, sigma=sigma, nodes_per_dim=int(m), std_nodes=pts,
                    nodes=nodes, log_weights=lw)


def reweight(rule, mu, sigma):
    """Keep ``rule``'s nodes but target N(mu, sigma) by importance weighting.

    Each log-weight gains log phi(node; mu, sigma) - log phi(node; rule.mu,
    rule.sigma). The reweighted rule is what a quadrature held fixed at the
    old law assigns to a new latent law.
    """
    mu = as_vector(mu, "mu")
    sigma = symmetrize(sigma, "sigma")
    lw = (rule.log_weights + mvn_logpdf(rule.nodes, mu, sigma)
          - mvn_logpdf(rule.nodes, rule.mu, rule.sigma))
    for a in (mu, sigma, lw):
        a.setflags(write=False)
    return QuadRule(mu=mu, sigma=sigma, nodes_per_dim=rule.nodes_per_dim,
                    std_nodes=rule.std_nodes, nodes=rule.nodes, log_weights=lw)


def integrate(rule, log_g):
    """Log of E[exp(log_g(eta))] under the rule, via log-sum-exp.

    ``log_g`` is called once with the full (Q, N) node array and must return
    Q values (finite or -inf). Returns -inf when every value is -inf.
    """
    vals = np.asarray(log_g(rule.nodes), dtype=float)
    if vals.ndim == 0:
        vals = np.full(rule.size, float(vals))
    terms = rule.log_weights + vals
    if np.all(terms == -np.inf):
        return -np.inf
    return float(logsumexp(terms))
