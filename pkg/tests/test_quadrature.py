import itertools
import math

import numpy as np
import pytest
import sympy
from numpy.polynomial.hermite import hermgauss

from minar.exceptions import NodeBudgetExceeded, NotPositiveDefinite
from minar.linalg import cholesky
from minar.quadrature import build_rule, hermite_nodes, integrate

from conftest import C1

SQRT_PI = math.sqrt(math.pi)


def test_one_point_rule():
    x, w = hermite_nodes(1)
    assert x.tolist() == [0.0]
    assert w[0] == pytest.approx(SQRT_PI, abs=1e-15)


def test_two_point_rule():
    x, w = hermite_nodes(2)
    np.testing.assert_allclose(x, [-1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-15)
    np.testing.assert_allclose(w, [SQRT_PI / 2] * 2, atol=1e-15)


def test_fourth_moment_m10():
    x, w = hermite_nodes(10)
    assert np.sum(w * x ** 4) == pytest.approx(0.75 * SQRT_PI, abs=1e-12)


@pytest.mark.parametrize("m", [3, 7, 20, 40, 64])
def test_weights_normalize_and_match_reference(m):
    x, w = hermite_nodes(m)
    assert abs(w.sum() - SQRT_PI) < 1e-12
    xr, wr = hermgauss(m)
    np.testing.assert_allclose(x, xr, atol=1e-11)
    np.testing.assert_allclose(w, wr, atol=1e-13)


@pytest.mark.parametrize("m", [4, 9])
def test_degree_exactness_1d(m):
    x, w = hermite_nodes(m)
    for k in range(2 * m):
        exact = 0.0 if k % 2 else math.gamma((k + 1) / 2)
        scale = math.gamma((k + 2) / 2)
        assert abs(np.sum(w * x ** k) - exact) <= 1e-12 * scale


def test_node_count_bounds():
    with pytest.raises(ValueError):
        hermite_nodes(0)
    with pytest.raises(ValueError):
        hermite_nodes(65)


def test_rule_weights_sum_to_one():
    rule = build_rule([0.5] * 3, C1, 15)
    assert abs(np.exp(rule.log_weights).sum() - 1.0) < 1e-10
    assert rule.nodes.shape == (15 ** 3, 3)


def test_unit_variance():
    rule = build_rule([0.0], [[1.0]], 20)
    assert rule.expect(rule.nodes[:, 0] ** 2) == pytest.approx(1.0, abs=1e-12)


def test_lognormal_mean_1d():
    rule = build_rule([0.0], [[1.0]], 20)
    assert rule.expect(np.exp(rule.nodes[:, 0])) == pytest.approx(math.exp(0.5), abs=1e-10)


def test_lognormal_mean_c1():
    rule = build_rule([0.5] * 3, C1, 15)
    assert rule.expect(np.exp(rule.nodes[:, 0])) == pytest.approx(math.exp(0.82), abs=1e-8)
    # Monte Carlo cross-check of the closed form
    draws = np.random.default_rng(11).multivariate_normal([0.5] * 3, C1, size=10 ** 6)
    v = np.exp(draws[:, 0])
    assert abs(v.mean() - math.exp(0.82)) < 4 * v.std() / 1000


def test_integrate_log_domain():
    rule = build_rule([0.5] * 3, C1, 15)
    assert integrate(rule, lambda eta: np.zeros(len(eta))) == pytest.approx(0.0, abs=1e-12)
    assert integrate(rule, lambda eta: np.full(len(eta), -3.25)) == pytest.approx(-3.25, abs=1e-12)
    assert integrate(rule, lambda eta: eta[:, 0]) == pytest.approx(0.82, abs=1e-8)
    assert integrate(rule, lambda eta: np.full(len(eta), -np.inf)) == -np.inf


def _gaussian_moment(mu, sigma, powers):
    """Closed-form moment from derivatives of the moment generating function."""
    n = len(mu)
    t = sympy.symbols(f"t0:{n}")
    tv = sympy.Matrix(t)
    mgf = sympy.exp((tv.T * sympy.Matrix(mu))[0] + ((tv.T * sympy.Matrix(sigma) * tv)[0]) / 2)
    expr = mgf
    for i, k in enumerate(powers):
        if k:
            expr = sympy.diff(expr, t[i], k)
    return float(expr.subs({s: 0 for s in t}))


@pytest.mark.parametrize("n,m,seed", [(1, 3, 0), (2, 3, 1), (3, 2, 2), (2, 4, 3)])
def test_polynomial_exactness_random_spd(n, m, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    sigma = a.T @ a + 0.3 * np.eye(n)
    sigma = np.round(sigma, 3)
    mu = np.round(rng.normal(size=n), 3)
    rule = build_rule(mu, sigma, m)
    rat_sigma = [[sympy.Rational(str(v)) for v in row] for row in sigma]
    rat_mu = [sympy.Rational(str(v)) for v in mu]
    for powers in itertools.product(range(2 * m), repeat=n):
        if sum(powers) > 2 * m - 1:
            continue
        est = rule.expect(np.prod(rule.nodes ** np.array(powers), axis=1))
        exact = _gaussian_moment(rat_mu, rat_sigma, powers)
        assert est == pytest.approx(exact, rel=1e-9, abs=1e-9)


def test_affine_consistency():
    std = build_rule([0.0] * 3, np.eye(3), 6)
    rule = build_rule([0.5] * 3, C1, 6)
    L = cholesky(C1)
    np.testing.assert_allclose(rule.nodes, np.array([0.5] * 3) + std.nodes @ L.T, atol=1e-14)
    np.testing.assert_array_equal(rule.log_weights, std.log_weights)


def test_refinement_stabilizes_lognormal_mass():
    mu = np.array([0.5, 1.0])
    sigma = C1[:2, :2]
    vals = []
    for m in (15, 20):
        rule = build_rule(mu, sigma, m)
        vals.append(integrate(rule, lambda e: -np.exp(e).sum(axis=1)))
    assert abs(vals[0] - vals[1]) < 1e-5


def test_node_budget():
    with pytest.raises(NodeBudgetExceeded):
        build_rule([0.0] * 3, np.eye(3), 64)
    with pytest.raises(NotPositiveDefinite):
        build_rule([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]], 5)


def test_rule_is_immutable():
    rule = build_rule([0.0], [[1.0]], 5)
    with pytest.raises(ValueError):
        rule.nodes[0, 0] = 1.0
