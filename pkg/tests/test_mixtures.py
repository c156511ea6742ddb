import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from minar.exceptions import FamilyMismatch, NotPositiveDefinite
from minar.mixtures import (
    MixtureParams,
    gl_log_pmf,
    gl_moments,
    gl_pmf_derivatives,
    innovation_moments,
    log_kernel,
    log_pmf,
    log_pmf_table,
    pl_log_pmf,
    pl_moments,
    pl_pmf_derivatives,
    sample,
)
from minar.quadrature import build_rule

from conftest import C1, C2

TINY = 1e-10


def params_and_rule(family, mu, sigma, m=30):
    p = MixtureParams(family, mu, sigma)
    return p, build_rule(p.mu, p.sigma, m)


# log-PMFs ------------------------------------------------------------------

def test_pl_degenerate_is_poisson():
    p, rule = params_and_rule("pl", [0.0], [[TINY]])
    assert pl_log_pmf([0], p, rule) == pytest.approx(-1.0, abs=1e-8)
    assert pl_log_pmf([3], p, rule) == pytest.approx(stats.poisson.logpmf(3, 1.0), abs=1e-8)


def test_gl_degenerate_is_geometric_half():
    p, rule = params_and_rule("gl", [0.0], [[TINY]])
    assert gl_log_pmf([0], p, rule) == pytest.approx(math.log(0.5), abs=1e-8)
    assert gl_log_pmf([2], p, rule) == pytest.approx(math.log(0.125), abs=1e-8)


def _dense_1d(kernel, mu, var):
    sd = math.sqrt(var)
    f = lambda z: kernel(z) * stats.norm.pdf(z, mu, sd)
    val, _ = integrate.quad(f, mu - 14 * sd, mu + 14 * sd, epsabs=1e-14, epsrel=1e-12, limit=400)
    return val


def test_pl_matches_adaptive_integration():
    p, rule = params_and_rule("pl", [0.5], [[0.64]], 60)
    for r in (0, 1, 4):
        oracle = _dense_1d(lambda z: stats.poisson.pmf(r, math.exp(z)), 0.5, 0.64)
        assert math.exp(pl_log_pmf([r], p, rule)) == pytest.approx(oracle, rel=1e-9)


def test_gl_matches_adaptive_integration():
    p, rule = params_and_rule("gl", [0.5], [[0.64]], 60)
    for r in (0, 1, 5):
        def kern(z, r=r):
            pi = 1.0 / (1.0 + math.exp(-z))
            return pi * (1.0 - pi) ** r
        oracle = _dense_1d(kern, 0.5, 0.64)
        assert math.exp(gl_log_pmf([r], p, rule)) == pytest.approx(oracle, rel=1e-9)


@pytest.mark.parametrize("family", ["pl", "gl"])
@pytest.mark.parametrize("r", [(0, 0), (1, 3), (4, 2)])
def test_independent_components_factorize(family, r):
    p2, rule2 = params_and_rule(family, [0.0, 0.0], np.diag([0.25, 0.25]))
    p1, rule1 = params_and_rule(family, [0.0], [[0.25]])
    joint = log_pmf(list(r), p2, rule2)
    prod = log_pmf([r[0]], p1, rule1) + log_pmf([r[1]], p1, rule1)
    assert joint == pytest.approx(prod, abs=1e-9)


def test_log_pmf_strictly_negative():
    p, rule = params_and_rule("pl", [0.5] * 3, C1, 15)
    assert -np.inf < pl_log_pmf([1, 2, 0], p, rule) < 0


def test_family_mismatch():
    p, rule = params_and_rule("pl", [0.0], [[1.0]])
    with pytest.raises(FamilyMismatch):
        gl_log_pmf([0], p, rule)
    with pytest.raises(FamilyMismatch):
        gl_moments(p)
    with pytest.raises(FamilyMismatch):
        gl_pmf_derivatives([0], p, rule)


def test_rule_must_match_params():
    p, _ = params_and_rule("pl", [0.0], [[1.0]])
    other = build_rule([1.0], [[1.0]], 10)
    with pytest.raises(ValueError):
        pl_log_pmf([0], p, other)


def test_param_validation():
    with pytest.raises(NotPositiveDefinite):
        MixtureParams("pl", [0, 0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        MixtureParams("pl", [21.0], [[1.0]])
    with pytest.raises(ValueError):
        MixtureParams("gl", [0.0], [[26.0]])
    with pytest.raises(ValueError):
        MixtureParams("nb", [0.0], [[1.0]])
    with pytest.raises(ValueError):
        log_pmf([-1], MixtureParams("pl", [0.0], [[1.0]]), build_rule([0.0], [[1.0]], 5))


def test_gl_kernel_is_stable_in_tails():
    vals = log_kernel("gl", np.array([0.0, 5.0]), np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(vals))
    assert vals[1] == pytest.approx(-5.0 * 800.0, rel=1e-12)


# normalization and moments -------------------------------------------------

def _grid_params(n):
    out = []
    for fam in ("pl", "gl"):
        for mu in (0.5, 1.0):
            for c in (C1, C2):
                out.append((fam, [mu] * n, c[:n, :n]))
    return out


@pytest.mark.parametrize("family,mu,sigma", _grid_params(1) + _grid_params(2))
def test_normalization(family, mu, sigma):
    n = len(mu)
    p, rule = params_and_rule(family, mu, sigma, 30 if n == 1 else 20)
    mom = innovation_moments(p)
    r_max = int(np.max(mom.mean + 12 * np.sqrt(np.diag(mom.cov))))
    assert np.exp(log_pmf_table(p, rule, r_max)).sum() >= 0.999


@pytest.mark.parametrize("family,mu,sigma", _grid_params(1) + _grid_params(2)[::3])
def test_moments_match_truncated_sums(family, mu, sigma):
    # the lognormal-type tails need a long support for a 1e-3 match
    n = len(mu)
    p, rule = params_and_rule(family, mu, sigma, 40 if n == 1 else 30)
    mom = innovation_moments(p)
    r_max = 600 if n == 1 else 250
    table = np.exp(log_pmf_table(p, rule, r_max))
    grid = np.arange(r_max + 1, dtype=float)
    for s in range(n):
        marg = table.sum(axis=tuple(a for a in range(n) if a != s))
        assert (grid * marg).sum() == pytest.approx(mom.mean[s], rel=1e-3)
    if n == 2:
        cross = (np.outer(grid, grid) * table).sum() - mom.mean[0] * mom.mean[1]
        assert cross == pytest.approx(mom.cov[0, 1], rel=1e-2)


def test_pl_poisson_limit_moments():
    m = pl_moments(MixtureParams("pl", [0.0], [[TINY]]))
    assert m.mean[0] == pytest.approx(1.0, abs=1e-9)
    assert m.cov[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_gl_geometric_limit_moments():
    m = gl_moments(MixtureParams("gl", [0.0], [[TINY]]))
    assert m.mean[0] == pytest.approx(1.0, abs=1e-9)
    assert m.cov[0, 0] == pytest.approx(2.0, abs=1e-9)


def test_pl_c1_mean():
    m = pl_moments(MixtureParams("pl", [0.5] * 3, C1))
    np.testing.assert_allclose(m.mean, np.exp(0.82), rtol=1e-14)


@pytest.mark.parametrize("family", ["pl", "gl"])
def test_negative_covariance_sign(family):
    m = innovation_moments(MixtureParams(family, [0.5] * 3, C2))
    assert m.corr[0, 2] < 0 and m.cov[0, 2] < 0
    assert m.corr[0, 1] > 0


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 3))
def test_pl_overdispersion(mu, var):
    m = pl_moments(MixtureParams("pl", [mu], [[var]]))
    assert m.cov[0, 0] > m.mean[0]


@pytest.mark.parametrize("family", ["pl", "gl"])
def test_sampler_matches_moments(family):
    p = MixtureParams(family, [0.5] * 3, C1)
    draws = sample(p, 10 ** 6, seed=123)
    mom = innovation_moments(p)
    se = np.sqrt(np.diag(mom.cov) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - mom.mean) < 3 * se)


def test_sample_single_draw_and_determinism():
    p = MixtureParams("gl", [0.5, 0.5], C1[:2, :2])
    one = sample(p, 1, seed=7)
    assert one.shape == (1, 2) and one.dtype == np.int64 and np.all(one >= 0)
    np.testing.assert_array_equal(sample(p, 50, seed=9), sample(p, 50, seed=9))
    with pytest.raises(ValueError):
        sample(p, 0)


# derivative recursions -----------------------------------------------------

def test_pl_recursion_poisson_limit():
    p, rule = params_and_rule("pl", [0.0], [[TINY]])
    d_mu, _ = pl_pmf_derivatives([0], p, rule)
    assert d_mu[0] == pytest.approx(-math.exp(-1.0), abs=1e-8)


def test_gl_recursion_geometric_limit():
    p, rule = params_and_rule("gl", [0.0], [[TINY]])
    d_mu, _ = gl_pmf_derivatives([0], p, rule)
    assert d_mu[0] == pytest.approx(0.25, abs=1e-8)


def finite_difference(family, r, mu, sigma, m=30, h=1e-5):
    """Central differences of P_r; the sigma[s, t] entry alone is perturbed
    for s == t and both mirrored entries together for s != t."""
    mu = np.asarray(mu, float)
    sigma = np.asarray(sigma, float)
    n = len(mu)

    def P(mu_, sig_):
        p = MixtureParams(family, mu_, sig_)
        return math.exp(log_pmf(r, p, build_rule(p.mu, p.sigma, m)))

    d_mu = np.empty(n)
    for s in range(n):
        e = np.zeros(n)
        e[s] = h
        d_mu[s] = (P(mu + e, sigma) - P(mu - e, sigma)) / (2 * h)
    d_sig = np.empty((n, n))
    for s in range(n):
        for t in range(s, n):
            E = np.zeros((n, n))
            E[s, t] = E[t, s] = h
            d_sig[s, t] = d_sig[t, s] = (P(mu, sigma + E) - P(mu, sigma - E)) / (2 * h)
    return d_mu, d_sig


@pytest.mark.parametrize("family", ["pl", "gl"])
def test_recursion_matches_finite_differences_n2(family):
    mu = [0.5, 0.5]
    sigma = [[0.64, 0.32], [0.32, 0.64]]
    r = [1, 2]
    p, rule = params_and_rule(family, mu, sigma)
    fn = pl_pmf_derivatives if family == "pl" else gl_pmf_derivatives
    d_mu, d_sig = fn(r, p, rule)
    fd_mu, fd_sig = finite_difference(family, r, mu, sigma)
    np.testing.assert_allclose(d_mu, fd_mu, rtol=1e-4)
    # a symmetric perturbation moves both off-diagonal entries
    factor = np.where(np.eye(2, dtype=bool), 1.0, 2.0)
    np.testing.assert_allclose(factor * d_sig, fd_sig, rtol=1e-4)


@pytest.mark.parametrize("family", ["pl", "gl"])
def test_mu_derivatives_sum_to_zero(family):
    p, rule = params_and_rule(family, [0.3], [[0.5]])
    fn = pl_pmf_derivatives if family == "pl" else gl_pmf_derivatives
    total = sum(fn([r], p, rule)[0][0] for r in range(0, 80))
    assert abs(total) < 1e-5
