"""Conditional transition probabilities and the conditional log-likelihood.

Given the latent vector eta at a quadrature node, thinning counts and
innovation components are independent across coordinates, so

    f(x_t | x_{t-1}) = sum_q w_q prod_s sum_{k=0}^{m_s} Binom(k; x_{s,t-1}, alpha_s)
                                                  * g_s(x_{s,t} - k | eta_{q,s})

with m_s = min(x_{s,t}, x_{s,t-1}). This costs sum_s (m_s + 1) kernel terms
per node instead of prod_s (m_s + 1).
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import DimensionMismatch, OutOfSupport, SeriesTooShort
from .mixtures import log_kernel
from .process import check_series

MAX_COUNT = 100_000
_CHUNK_ELEMENTS = 2_000_000
_DENSE_LIMIT = 4_000_000
_SCALED_TINY = 1e-280


def binomial_log_pmf(x_prev, k, alpha):
    """log C(x_prev, k) + k log(alpha) + (x_prev - k) log(1 - alpha)."""
    x_prev = np.asarray(x_prev)
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k > x_prev):
        raise OutOfSupport("thinning count must lie in [0, x_prev]")
    return _log_binom(x_prev, k, alpha)


def _log_binom(n, k, alpha):
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    out = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    # xlogy-style guards keep alpha in {0, 1} usable for 0 * log(0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = out + np.where(k > 0, k * np.log(alpha), 0.0)
        out = out + np.where(n - k > 0, (n - k) * np.log1p(-alpha), 0.0)
    return out


@dataclass
class ComponentTable:
    """Per-coordinate sums over thinning counts, evaluated at every node.

    ``log_h[p, q]`` is log sum_k Binom(k) g(x_curr - k | eta_q) for the p-th
    distinct (x_prev, x_curr) pair; ``ez[p, q]`` is the conditional mean of
    the thinning count given eta_q. ``index[t]`` maps transitions to pairs.
    """

    index: np.ndarray
    log_h: np.ndarray
    ez: np.ndarray = None


def component_table(family, x_prev, x_curr, alpha, eta, want_ez=False):
    """Build the :class:`ComponentTable` of one coordinate.

    ``x_prev``/``x_curr`` are aligned count arrays, ``eta`` the node values of
    this coordinate. The sums over thinning counts are evaluated as one
    matrix product on rescaled probabilities; entries too small for that
    scaling are recomputed in the log domain.
    """
    pairs, index = np.unique(np.stack([x_prev, x_curr], axis=1), axis=0, return_inverse=True)
    index = index.reshape(-1)
    a = pairs[:, 0]
    b = pairs[:, 1]
    m = np.minimum(a, b)
    n_r = int(b.max()) + 1
    kern = log_kernel(family, np.arange(n_r)[:, None], eta[None, :])
    if len(pairs) * n_r > _DENSE_LIMIT:
        log_h, ez = _log_domain_sums(a, b, m, alpha, kern, want_ez)
        return ComponentTable(index=index, log_h=log_h, ez=ez)

    # row p of `band` holds Binom(k; a_p, alpha) at column r = b_p - k
    rows = np.repeat(np.arange(len(pairs)), m + 1)
    ks = np.concatenate([np.arange(mm + 1) for mm in m])
    cols = b[rows] - ks
    lb = _log_binom(a[rows], ks, alpha)
    row_max = np.full(len(pairs), -np.inf)
    np.maximum.at(row_max, rows, lb)
    band = np.zeros((len(pairs), n_r))
    band[rows, cols] = np.exp(lb - row_max[rows])
    col_max = kern.max(axis=0)
    g = np.exp(kern - col_max)
    h = band @ g
    with np.errstate(divide="ignore"):
        log_h = np.log(h) + row_max[:, None] + col_max[None, :]
    ez = None
    if want_ez:
        kband = np.zeros_like(band)
        kband[rows, cols] = ks * band[rows, cols]
        with np.errstate(invalid="ignore", divide="ignore"):
            ez = (kband @ g) / h
    bad = ~(h > _SCALED_TINY)
    if np.any(bad):
        p_bad = np.flatnonzero(bad.any(axis=1))
        lh, ez_fix = _log_domain_sums(a[p_bad], b[p_bad], m[p_bad], alpha, kern, want_ez)
        log_h[p_bad] = np.where(bad[p_bad], lh, log_h[p_bad])
        if want_ez:
            ez[p_bad] = np.where(bad[p_bad], ez_fix, ez[p_bad])
    return ComponentTable(index=index, log_h=log_h, ez=ez)


def _log_domain_sums(a, b, m, alpha, kern, want_ez):
    """Log-sum-exp evaluation of the thinning sums, chunked over pairs."""
    Q = kern.shape[1]
    log_h = np.empty((len(a), Q))
    ez = np.empty((len(a), Q)) if want_ez else None
    order = np.argsort(m, kind="stable")
    start = 0
    while start < len(order):
        width = int(m[order[start]]) + 1
        stop = start + 1
        while stop < len(order):
            w = int(m[order[stop]]) + 1
            if (stop - start + 1) * w * Q > _CHUNK_ELEMENTS:
                break
            width = w
            stop += 1
        sel = order[start:stop]
        ks = np.arange(width)
        valid = ks[None, :] <= m[sel, None]
        lb = np.where(valid, _log_binom(a[sel, None], np.minimum(ks[None, :], a[sel, None]), alpha),
                      -np.inf)
        r = np.clip(b[sel, None] - ks[None, :], 0, None)
        terms = lb[:, :, None] + kern[r]
        h = logsumexp(terms, axis=1)
        log_h[sel] = h
        if want_ez:
            with np.errstate(invalid="ignore"):
                post = np.exp(terms - h[:, None, :])
            post = np.where(valid[:, :, None], post, 0.0)
            ez[sel] = np.einsum("k,pkq->pq", ks.astype(float), post)
        start = stop
    return log_h, ez


def transition_tables(series, params, rule, want_ez=False):
    """Component tables for every coordinate of a validated series."""
    x = series
    if x.shape[1] != params.dim:
        raise DimensionMismatch(f"series has {x.shape[1]} columns, parameters have dimension {params.dim}")
    if rule.dim != params.dim:
        raise DimensionMismatch("quadrature rule dimension does not match parameters")
    if x.max(initial=0) > MAX_COUNT:
        raise ValueError(f"counts above {MAX_COUNT} are not supported")
    prev, curr = x[:-1], x[1:]
    return [component_table(params.family, prev[:, s], curr[:, s], params.alpha[s],
                            rule.nodes[:, s], want_ez)
            for s in range(params.dim)]


def log_joint_nodes(tables, rule):
    """(T-1, Q) matrix of log w_q + sum_s log h_s(t, q)."""
    out = np.broadcast_to(rule.log_weights, (tables[0].index.shape[0], rule.size)).copy()
    for tab in tables:
        out += tab.log_h[tab.index]
    return out


def row_logsumexp(a):
    """log-sum-exp along the last axis; rows that are all -inf give -inf."""
    mx = a.max(axis=-1)
    shift = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(a - shift[..., None]).sum(axis=-1)) + shift


def transition_log_pmfs(series, params, rule):
    """Per-transition log f(X_t | X_{t-1}) for t = 2..T, shape (T-1,)."""
    x = check_series(series, min_length=2)
    tables = transition_tables(x, params, rule)
    return row_logsumexp(log_joint_nodes(tables, rule))


def transition_log_pmf(x_prev, x_curr, params, rule):
    """log f(x_curr | x_prev) for a single transition."""
    x_prev = np.asarray(x_prev).reshape(-1)
    x_curr = np.asarray(x_curr).reshape(-1)
    if x_prev.shape != x_curr.shape or x_prev.shape[0] != params.dim:
        raise DimensionMismatch("count vectors must both have the model dimension")
    return float(transition_log_pmfs(np.stack([x_prev, x_curr]), params, rule)[0])


def log_likelihood(series, params, rule):
    """Conditional log-likelihood sum_{t=2}^T log f(X_t | X_{t-1}).

    The first observation is conditioned on (no marginal term).
    """
    x = np.asarray(series)
    if x.ndim >= 1 and x.shape[0] < 2:
        raise SeriesTooShort("log-likelihood needs at least two observations")
    return float(np.sum(transition_log_pmfs(series, params, rule)))
