"""EM estimation of (alpha, mu, Sigma) with Gauss-Hermite E-steps.

The complete data at time t are the thinning counts Z_t and the latent
normal vector eta_t. The joint posterior of (Z_t, eta_t) is represented on
the quadrature grid built from the previous iterate: node masses are the
posterior node probabilities and, given a node, Z_{s,t} has a finite
discrete law per coordinate. The M-step is closed form:

    alpha_s = sum_t E[Z_{s,t}] / sum_t X_{s,t-1}
    mu      = mean_t E[eta_t]
    Sigma   = mean_t E[(eta_t - mu)(eta_t - mu)']
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSeries, NumericalUnderflow
from .likelihood import log_joint_nodes, row_logsumexp, transition_tables
from .linalg import is_positive_definite
from .mixtures import MU_BOUND, SIGMA_DIAG_MAX, check_family
from .process import ModelParams, check_series
from .quadrature import DEFAULT_FIT_NODES, build_rule, reweight

logger = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-4
SIGMA_FLOOR = 1e-6
INIT_ALPHA_RANGE = (0.05, 0.95)
INIT_SIGMA_FALLBACK = 0.25
INIT_SIGMA_MIN = 0.01


@dataclass
class EStepResult:
    """Posterior summaries for transitions t = 2..T (row t-2).

    Attributes
    ----------
    ez : (T-1, N) posterior means of the thinning counts
    eeta : (T-1, N) posterior means of the latent vector
    eeta_sq : (T-1, N, N) posterior means of eta eta'
    loglik : (T-1,) log posterior normalizers, i.e. log f(X_t | X_{t-1})
    """

    ez: np.ndarray
    eeta: np.ndarray
    eeta_sq: np.ndarray
    loglik: np.ndarray

    @property
    def total_loglik(self):
        return float(np.sum(self.loglik))

    def posterior_cov(self):
        return self.eeta_sq - np.einsum("ti,tj->tij", self.eeta, self.eeta)


def e_step(series, theta, rule):
    """Posterior expectations of (Z_t, eta_t) under ``theta``.

    ``rule`` must integrate against theta's latent normal law.
    """
    x = check_series(series, min_length=2)
    return _posterior(transition_tables(x, theta, rule, want_ez=True), rule)


def regularize_sigma(sigma, floor=SIGMA_FLOOR, cap=SIGMA_DIAG_MAX):
    """Symmetrize and keep a covariance update inside the parameter box.

    Diagonal entries are clipped into [floor, cap]; when clipping triggers,
    off-diagonal entries are rescaled so every correlation is preserved.
    Remaining near-singular matrices are shrunk toward their diagonal.
    """
    s = 0.5 * (sigma + sigma.T)
    d = np.diag(s).copy()
    d_new = np.clip(d, floor, cap)
    if np.any(d_new != d):
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(d > 0, np.sqrt(d_new / np.where(d > 0, d, 1.0)), 0.0)
        s = s * np.outer(scale, scale)
        np.fill_diagonal(s, d_new)
    shrink = 1.0
    while not is_positive_definite(s):
        shrink *= 0.9
        off = s - np.diag(np.diag(s))
        s = np.diag(np.diag(s)) + shrink * off
        if shrink < 1e-6:
            s = np.diag(np.diag(s))
            break
    return s


def m_step(estep, series, family):
    """Closed-form maximizer of the expected complete-data log-likelihood."""
    x = check_series(series, min_length=2)
    denom = x[:-1].sum(axis=0).astype(float)
    if np.any(denom <= 0):
        s = int(np.flatnonzero(denom <= 0)[0])
        raise DegenerateSeries(f"component {s} is zero at every lagged time point")
    alpha = np.clip(estep.ez.sum(axis=0) / denom, ALPHA_FLOOR, 1.0 - ALPHA_FLOOR)
    n = estep.eeta.shape[0]
    mu = estep.eeta.sum(axis=0) / n
    second = estep.eeta_sq.sum(axis=0) / n
    sigma = second - np.outer(mu, mu)
    mu = np.clip(mu, -MU_BOUND, MU_BOUND)
    sigma = regularize_sigma(sigma)
    return ModelParams.from_arrays(family, alpha, mu, sigma)


def _lag1_autocorr(col):
    c = col - col.mean()
    den = float(c @ c)
    if den <= 0:
        return float("nan")
    return float(c[1:] @ c[:-1]) / den


def initialize(series, family):
    """Method-of-moments starting value.

    alpha comes from the clamped lag-1 autocorrelations; the innovation mean
    and covariance follow from inverting the stationary moment relations,
    and (mu, Sigma) from inverting the closed-form innovation moments.
    Coordinates whose inversion leaves the valid region fall back to
    mu_s = +-log(max(mean_R, 0.1)), sigma_ss = 0.25 and zero covariances.
    """
    family = check_family(family)
    x = check_series(series, min_length=10).astype(float)
    if np.any(x.sum(axis=0) == 0):
        s = int(np.flatnonzero(x.sum(axis=0) == 0)[0])
        raise DegenerateSeries(f"component {s} is identically zero")
    n = x.shape[1]
    lo, hi = INIT_ALPHA_RANGE
    acf = np.array([_lag1_autocorr(x[:, s]) for s in range(n)])
    alpha = np.clip(np.nan_to_num(acf, nan=lo), lo, hi)
    xbar = x.mean(axis=0)
    S = np.cov(x, rowvar=False, bias=True).reshape(n, n)
    mean_r = (1.0 - alpha) * xbar
    cov_r = (1.0 - np.outer(alpha, alpha)) * S
    np.fill_diagonal(cov_r, (1.0 - alpha ** 2) * np.diag(S) - alpha * mean_r)

    sign = 1.0 if family == "pl" else -1.0
    mu = np.empty(n)
    sig = np.zeros((n, n))
    ok = np.zeros(n, dtype=bool)
    for s in range(n):
        m, v = mean_r[s], cov_r[s, s]
        if m > 0:
            ratio = (v - m) / m ** 2
            arg = 1.0 + ratio if family == "pl" else 0.5 * (1.0 + ratio)
            if arg > 1.0:
                d = math.log(arg)
                sig[s, s] = min(max(d, INIT_SIGMA_MIN), SIGMA_DIAG_MAX)
                mu[s] = sign * (math.log(m) - 0.5 * sig[s, s])
                ok[s] = True
        if not ok[s]:
            mu[s] = sign * math.log(max(m, 0.1))
            sig[s, s] = INIT_SIGMA_FALLBACK
    mean_latent = np.exp(sign * mu + 0.5 * np.diag(sig))
    for i in range(n):
        for j in range(i + 1, n):
            if ok[i] and ok[j]:
                arg = 1.0 + cov_r[i, j] / (mean_latent[i] * mean_latent[j])
                if arg > 0:
                    sig[i, j] = sig[j, i] = math.log(arg)
    if not is_positive_definite(sig):
        sig = regularize_sigma(sig)
    mu = np.clip(mu, -MU_BOUND, MU_BOUND)
    return ModelParams.from_arrays(family, alpha, mu, sig)


def information_criteria(loglik, k, n_obs):
    """(aic_standard, aic_paper, bic) for a log-likelihood with k parameters.

    aic_standard = -2 logL + 2k; aic_paper = -2 logL + k (the variant that
    reproduces the published crime-data comparison); bic = -2 logL + k log(n_obs).
    """
    if n_obs < 1:
        raise ValueError("n_obs must be positive")
    dev = -2.0 * float(loglik)
    return dev + 2.0 * k, dev + k, dev + k * math.log(n_obs)


@dataclass
class FitConfig:
    """Settings for :func:`fit`.

    ``accelerate`` switches on SQUAREM extrapolation (same fixed points as
    plain EM, far fewer E-steps). ``monitor_fixed_rule`` evaluates every
    plain M-step proposal under the quadrature rule of the iterate it came
    from, which costs one extra likelihood pass per iteration.
    """

    quad_nodes: int = DEFAULT_FIT_NODES
    tol: float = 1e-6
    max_iter: int = 500
    init: object = "moments"
    bic_uses_transitions: bool = False
    accelerate: bool = False
    monitor_fixed_rule: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        if not (self.init == "moments" or isinstance(self.init, ModelParams)):
            raise ValueError("init must be 'moments' or a ModelParams instance")


@dataclass
class FitReport:
    """Outcome of :func:`fit`.

    ``loglik_trace[k]`` is the log-likelihood of the k-th iterate under the
    rule built from that iterate. With ``monitor_fixed_rule``,
    ``fixed_rule_trace[k]`` is the log-likelihood of iterate k+1 under
    iterate k's rule, so ``fixed_rule_trace[k] - loglik_trace[k]`` is the
    ascent of one EM step at fixed quadrature.
    """

    theta_hat: ModelParams
    loglik: float
    loglik_trace: list
    iterations: int
    converged: bool
    aic_standard: float
    aic_paper: float
    bic: float
    n_obs: int
    quad_nodes: int
    e_steps: int = 0
    fixed_rule_trace: list = None

    def to_dict(self):
        d = self.theta_hat.to_dict()
        d.update(
            loglik=self.loglik,
            trace=list(self.loglik_trace),
            iterations=self.iterations,
            converged=self.converged,
            aic_standard=self.aic_standard,
            aic_paper=self.aic_paper,
            bic=self.bic,
            n_obs=self.n_obs,
            quad_nodes=self.quad_nodes,
        )
        return d


def fixed_rule_loglik(series, theta, rule):
    """Log-likelihood of ``theta`` using ``rule``'s nodes, reweighted to theta's law."""
    x = check_series(series, min_length=2)
    rr = reweight(rule, theta.mu, theta.sigma)
    return float(np.sum(row_logsumexp(log_joint_nodes(transition_tables(x, theta, rr), rr))))


def _evaluate(x, theta, m):
    rule = build_rule(theta.mu, theta.sigma, m)
    return rule, _posterior(transition_tables(x, theta, rule, want_ez=True), rule)


def _pack(theta):
    """Unconstrained coordinates: logit(alpha), mu, log-Cholesky of Sigma."""
    L = np.linalg.cholesky(theta.sigma)
    n = theta.dim
    il = np.tril_indices(n)
    Lc = L.copy()
    Lc[np.diag_indices(n)] = np.log(np.diag(L))
    a = theta.alpha
    return np.concatenate([np.log(a) - np.log1p(-a), theta.mu, Lc[il]])


def _unpack(vec, family, n):
    a = 1.0 / (1.0 + np.exp(-vec[:n]))
    mu = vec[n:2 * n]
    L = np.zeros((n, n))
    L[np.tril_indices(n)] = vec[2 * n:]
    L[np.diag_indices(n)] = np.exp(np.diag(L))
    a = np.clip(a, ALPHA_FLOOR, 1.0 - ALPHA_FLOOR)
    return ModelParams.from_arrays(family, a, mu, L @ L.T)


def fit(series, family, config=None, callback=None):
    """Run EM until the relative log-likelihood change drops below ``tol``.

    The quadrature rule is rebuilt from the current (mu, Sigma) at every
    E-step. The returned log-likelihood is the one evaluated at theta_hat.
    ``callback(iteration, theta, loglik)`` sees every iterate, including the
    intermediate ones of an accelerated cycle.
    """
    config = config or FitConfig()
    family = check_family(family)
    x = check_series(series, min_length=2)
    if isinstance(config.init, ModelParams):
        theta = config.init
        if theta.family != family or theta.dim != x.shape[1]:
            raise ValueError("initial parameters do not match the family or dimension")
    else:
        theta = initialize(x, family)
    if np.any(x[:-1].sum(axis=0) == 0):
        raise DegenerateSeries("a component is zero at every lagged time point")

    m = config.quad_nodes
    n_e = [0]
    fixed = [] if config.monitor_fixed_rule else None

    def evaluate(th):
        n_e[0] += 1
        rule, est = _evaluate(x, th, m)
        if callback is not None:
            callback(n_e[0] - 1, th, est.total_loglik)
        return rule, est

    def em_step(th, rule, est):
        new = m_step(est, x, family)
        if fixed is not None:
            fixed.append(fixed_rule_loglik(x, new, rule))
        return (new,) + evaluate(new)

    rule, est = evaluate(theta)
    trace = [est.total_loglik]
    squarem = _Squarem(family) if config.accelerate else None
    converged = False
    iterations = 0
    while iterations < config.max_iter:
        if config.accelerate:
            theta, rule, est = squarem.cycle(theta, rule, est, em_step, evaluate)
        else:
            theta, rule, est = em_step(theta, rule, est)
        iterations += 1
        ll = est.total_loglik
        prev = trace[-1]
        trace.append(ll)
        logger.debug("iteration %d: loglik %.6f", iterations, ll)
        if abs(ll - prev) / (abs(ll) + 1.0) < config.tol:
            converged = True
            break

    ll = trace[-1]
    n_obs = x.shape[0] - 1 if config.bic_uses_transitions else x.shape[0]
    aic_s, aic_p, bic = information_criteria(ll, theta.n_free_params, n_obs)
    return FitReport(theta_hat=theta, loglik=ll, loglik_trace=trace,
                     iterations=iterations, converged=converged, aic_standard=aic_s,
                     aic_paper=aic_p, bic=bic, n_obs=n_obs, quad_nodes=m,
                     e_steps=n_e[0], fixed_rule_trace=fixed)


class _Squarem:
    """SQUAREM (S3) cycles with an adaptive cap on the extrapolation length.

    A cycle takes two EM steps from theta0, extrapolates with length
    a = min(cap, |r| / |v|) >= 1 in unconstrained coordinates and finishes
    with one stabilizing EM step. The cap grows fourfold after a successful
    capped step; an invalid extrapolation, or one whose log-likelihood falls
    below theta0's, is replaced by the plain two-step point and shrinks the cap.
    """

    def __init__(self, family):
        self.family = family
        self.cap = 1.0

    def cycle(self, theta0, rule0, est0, em_step, evaluate):
        theta1, rule1, est1 = em_step(theta0, rule0, est0)
        theta2, rule2, est2 = em_step(theta1, rule1, est1)
        p0, p1, p2 = _pack(theta0), _pack(theta1), _pack(theta2)
        r = p1 - p0
        v = p2 - p1 - r
        nv = float(np.linalg.norm(v))
        a = 1.0 if nv == 0 else max(1.0, min(self.cap, float(np.linalg.norm(r)) / nv))
        best = (theta2, rule2, est2)
        if a > 1.0:
            try:
                cand = _unpack(p0 + 2.0 * a * r + a * a * v, self.family, theta0.dim)
                c_rule, c_est = evaluate(cand)
            except (ValueError, ArithmeticError):
                c_est = None
            if c_est is not None and c_est.total_loglik >= est0.total_loglik:
                best = (cand, c_rule, c_est)
                if a == self.cap:
                    self.cap *= 4.0
            else:
                self.cap = max(1.0, self.cap / 4.0)
        elif a == self.cap:
            self.cap *= 4.0
        return em_step(*best)


def _posterior(tables, rule):
    log_joint = log_joint_nodes(tables, rule)
    loglik = row_logsumexp(log_joint)
    if not np.all(np.isfinite(loglik)):
        bad = int(np.flatnonzero(~np.isfinite(loglik))[0]) + 2
        raise NumericalUnderflow(f"no posterior mass on the quadrature grid at t={bad}")
    post = np.exp(log_joint - loglik[:, None])
    ez = np.stack([np.sum(post * tab.ez[tab.index], axis=1) for tab in tables], axis=1)
    nodes = rule.nodes
    eeta = post @ nodes
    eeta_sq = np.einsum("tq,qi,qj->tij", post, nodes, nodes, optimize=True)
    return EStepResult(ez=ez, eeta=eeta, eeta_sq=eeta_sq, loglik=loglik)
