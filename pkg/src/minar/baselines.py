"""Independent univariate INAR(1) comparators fitted by conditional ML.

Each component follows X_t = alpha o X_{t-1} + R_t with R_t either
Poisson(lambda) or geometric(pi) on {0, 1, ...}. Components are fitted
separately; the total log-likelihood is the sum over components.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, gammaln, logit

from .em import information_criteria
from .exceptions import DegenerateSeries
from .likelihood import _log_binom, row_logsumexp
from .process import check_series

BASELINE_FAMILIES = ("poisson", "geometric")
OPT_TOL = 1e-8
_START_ALPHA = (0.05, 0.95)


def check_baseline_family(family):
    f = str(family).strip().lower()
    if f not in BASELINE_FAMILIES:
        raise ValueError(f"baseline family must be one of {BASELINE_FAMILIES}, got {family!r}")
    return f


@dataclass(frozen=True)
class UnivariateInarParams:
    """alpha and the innovation parameter (Poisson rate or geometric success probability)."""

    alpha: float
    innovation_param: float
    family: str = "poisson"

    def __post_init__(self):
        fam = check_baseline_family(self.family)
        object.__setattr__(self, "family", fam)
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        v = self.innovation_param
        if fam == "poisson" and not v > 0:
            raise ValueError("Poisson rate must be positive")
        if fam == "geometric" and not 0.0 < v < 1.0:
            raise ValueError("geometric success probability must lie in (0, 1)")


def _innovation_log_pmf(family, r, param):
    r = np.asarray(r, dtype=float)
    if family == "poisson":
        return r * math.log(param) - param - gammaln(r + 1.0)
    return math.log(param) + r * math.log1p(-param)


def _pair_log_pmfs(x_prev, x_curr, alpha, param, family):
    """Vectorized log f(x_curr | x_prev) over aligned count arrays."""
    x_prev = np.asarray(x_prev, dtype=np.int64)
    x_curr = np.asarray(x_curr, dtype=np.int64)
    m = np.minimum(x_prev, x_curr)
    ks = np.arange(int(m.max(initial=0)) + 1)
    valid = ks[None, :] <= m[:, None]
    kk = np.where(valid, ks[None, :], 0)
    terms = (_log_binom(x_prev[:, None], kk, alpha)
             + _innovation_log_pmf(family, x_curr[:, None] - kk, param))
    return row_logsumexp(np.where(valid, terms, -np.inf))


def inar1_transition_log_pmf(x_prev, x_curr, params, family=None):
    """log sum_k Binom(k; x_prev, alpha) g(x_curr - k)."""
    family = check_baseline_family(family or params.family)
    if x_prev < 0 or x_curr < 0:
        raise ValueError("counts must be non-negative")
    return float(_pair_log_pmfs([x_prev], [x_curr], params.alpha,
                                params.innovation_param, family)[0])


def component_loglik(series, params, family=None):
    """Conditional log-likelihood of one component series."""
    family = check_baseline_family(family or params.family)
    x = check_series(series)[:, 0]
    return float(np.sum(_pair_log_pmfs(x[:-1], x[1:], params.alpha,
                                       params.innovation_param, family)))


@dataclass
class BaselineFit:
    family: str
    params: list
    loglik: float
    aic_standard: float
    aic_paper: float
    bic: float
    n_obs: int
    converged: bool

    @property
    def k(self):
        return 2 * len(self.params)

    def to_dict(self):
        return {
            "family": self.family,
            "alpha": [p.alpha for p in self.params],
            "innovation_param": [p.innovation_param for p in self.params],
            "loglik": self.loglik,
            "aic_standard": self.aic_standard,
            "aic_paper": self.aic_paper,
            "bic": self.bic,
            "n_obs": self.n_obs,
            "converged": self.converged,
        }


def _fit_component(x, family):
    pairs, counts = np.unique(np.stack([x[:-1], x[1:]], axis=1), axis=0, return_counts=True)
    xp, xc = pairs[:, 0], pairs[:, 1]

    def to_params(z):
        a = float(np.clip(expit(z[0]), 1e-10, 1 - 1e-10))
        if family == "poisson":
            v = float(np.clip(math.exp(min(z[1], 700.0)), 1e-300, 1e300))
        else:
            v = float(np.clip(expit(z[1]), 1e-12, 1 - 1e-12))
        return a, v

    def nll(z):
        a, v = to_params(z)
        val = -float(np.dot(counts, _pair_log_pmfs(xp, xc, a, v, family)))
        return val if np.isfinite(val) else 1e300

    xf = x.astype(float)
    c = xf - xf.mean()
    den = float(c @ c)
    acf = float(c[1:] @ c[:-1]) / den if den > 0 else 0.0
    a0 = min(max(acf, _START_ALPHA[0]), _START_ALPHA[1])
    mean_r = max((1.0 - a0) * xf.mean(), 1e-3)
    z0 = [logit(a0), math.log(mean_r) if family == "poisson" else logit(1.0 / (1.0 + mean_r))]
    res = minimize(nll, z0, method="Nelder-Mead",
                   options={"xatol": OPT_TOL, "fatol": OPT_TOL, "maxiter": 4000})
    a, v = to_params(res.x)
    return UnivariateInarParams(a, v, family), -float(res.fun), bool(res.success)


def fit_baseline(series, family, bic_uses_transitions=False):
    """Per-component conditional ML fit; k = 2N in the information criteria."""
    family = check_baseline_family(family)
    x = check_series(series, min_length=3)
    params = []
    total = 0.0
    ok = True
    for s in range(x.shape[1]):
        col = x[:, s]
        if not np.any(col[:-1] > 0) or np.all(col == col[0]):
            raise DegenerateSeries(f"component {s} is constant; INAR(1) parameters are not identified")
        p, ll, conv = _fit_component(col, family)
        params.append(p)
        total += ll
        ok &= conv
    n_obs = x.shape[0] - 1 if bic_uses_transitions else x.shape[0]
    aic_s, aic_p, bic = information_criteria(total, 2 * x.shape[1], n_obs)
    return BaselineFit(family=family, params=params, loglik=total, aic_standard=aic_s,
                       aic_paper=aic_p, bic=bic, n_obs=n_obs, converged=ok)


def simulate_inar1(params, T, burn_in=500, seed=None):
    """Simulate one univariate INAR(1) series (used for recovery checks)."""
    rng = np.random.default_rng(seed)
    n = int(T) + int(burn_in)
    if params.family == "poisson":
        r = rng.poisson(params.innovation_param, size=n + 1)
    else:
        r = rng.geometric(params.innovation_param, size=n + 1) - 1
    out = np.empty(int(T), dtype=np.int64)
    x = int(r[0])
    for t in range(1, n + 1):
        x = int(rng.binomial(x, params.alpha)) + int(r[t])
        if t > burn_in:
            out[t - burn_in - 1] = x
    return out
