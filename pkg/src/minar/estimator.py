"""scikit-learn style front ends for the MINAR(1) fit and the univariate comparators."""
import numpy as np
from sklearn.base import BaseEstimator

from . import baselines
from .em import FitConfig, fit, information_criteria
from .likelihood import transition_log_pmfs
from .mixtures import FAMILIES, innovation_moments
from .process import ModelParams, process_moments, simulate
from .quadrature import DEFAULT_FIT_NODES, build_rule
from .validation import check_counts, check_family_name, check_fitted, check_positive_int


class MINAR(BaseEstimator):
    """MINAR(1) with PL or GL innovations fitted by EM.

    Parameters
    ----------
    family : {"pl", "gl"}
    quad_nodes : int
        Gauss-Hermite nodes per latent dimension.
    tol : float
        Relative log-likelihood change that stops EM.
    max_iter : int
    init : "moments" or ModelParams
    accelerate : bool
        Use SQUAREM extrapolation between EM steps.
    bic_uses_transitions : bool
        Use T - 1 instead of T as the BIC sample size.

    Attributes
    ----------
    params_ : ModelParams
    report_ : FitReport
    loglik_ : float
    n_iter_ : int
    converged_ : bool
    n_features_in_ : int

    Notes
    -----
    Rows of ``X`` are time points and columns are components; the model is
    conditional on the first row, so every scoring method needs T >= 2.
    """

    def __init__(self, family="pl", quad_nodes=DEFAULT_FIT_NODES, tol=1e-6, max_iter=500,
                 init="moments", accelerate=False, bic_uses_transitions=False):
        self.family = family
        self.quad_nodes = quad_nodes
        self.tol = tol
        self.max_iter = max_iter
        self.init = init
        self.accelerate = accelerate
        self.bic_uses_transitions = bic_uses_transitions

    def _config(self):
        return FitConfig(quad_nodes=check_positive_int(self.quad_nodes, "quad_nodes"),
                         tol=self.tol, max_iter=check_positive_int(self.max_iter, "max_iter"),
                         init=self.init, accelerate=bool(self.accelerate),
                         bic_uses_transitions=bool(self.bic_uses_transitions))

    def fit(self, X, y=None, callback=None):
        family = check_family_name(self.family, FAMILIES)
        x = check_counts(X, min_length=2)
        rep = fit(x, family, self._config(), callback=callback)
        self.report_ = rep
        self.params_ = rep.theta_hat
        self.loglik_ = rep.loglik
        self.n_iter_ = rep.iterations
        self.converged_ = rep.converged
        self.n_features_in_ = x.shape[1]
        return self

    def _rule(self):
        return build_rule(self.params_.mu, self.params_.sigma, self.quad_nodes)

    def _check(self, X):
        check_fitted(self)
        return check_counts(X, min_length=2, n_features=self.n_features_in_)

    def score_samples(self, X):
        """Per-transition log f(X_t | X_{t-1}), length T - 1."""
        x = self._check(X)
        return transition_log_pmfs(x, self.params_, self._rule())

    def score(self, X, y=None):
        """Total conditional log-likelihood of ``X``."""
        return float(np.sum(self.score_samples(X)))

    def predict(self, X):
        """One-step-ahead conditional means E[X_{t+1} | X_t] for every row of ``X``."""
        check_fitted(self)
        x = check_counts(X, min_length=1, n_features=self.n_features_in_)
        return self.params_.alpha * x + innovation_moments(self.params_.innovations).mean

    def information_criteria(self, X=None):
        """(aic_standard, aic_paper, bic); uses the training fit when X is None."""
        check_fitted(self)
        if X is None:
            r = self.report_
            if r is None:
                raise ValueError("no training fit is stored; pass X")
            return r.aic_standard, r.aic_paper, r.bic
        x = self._check(X)
        n_obs = x.shape[0] - 1 if self.bic_uses_transitions else x.shape[0]
        return information_criteria(self.score(x), self.params_.n_free_params, n_obs)

    def aic(self, X=None, variant="standard"):
        aic_s, aic_p, _ = self.information_criteria(X)
        if variant not in ("standard", "paper"):
            raise ValueError("variant must be 'standard' or 'paper'")
        return aic_s if variant == "standard" else aic_p

    def bic(self, X=None):
        return self.information_criteria(X)[2]

    def sample(self, T, seed=None, burn_in=500):
        check_fitted(self)
        return simulate(self.params_, T, burn_in=burn_in, seed=seed)

    def moments(self, max_lag=10):
        check_fitted(self)
        return process_moments(self.params_, max_lag=max_lag)

    @classmethod
    def from_params(cls, params: ModelParams, **kwargs):
        """An estimator that behaves as if it had been fitted to ``params``."""
        est = cls(family=params.family, **kwargs)
        est.params_ = params
        est.n_features_in_ = params.dim
        est.report_ = None
        return est


class IndependentINAR(BaseEstimator):
    """Independent univariate INAR(1) per component (Poisson or geometric innovations).

    Attributes
    ----------
    params_ : list of UnivariateInarParams
    result_ : BaselineFit
    loglik_ : float
    """

    def __init__(self, family="poisson", bic_uses_transitions=False):
        self.family = family
        self.bic_uses_transitions = bic_uses_transitions

    def fit(self, X, y=None):
        family = check_family_name(self.family, baselines.BASELINE_FAMILIES)
        x = check_counts(X, min_length=3)
        res = baselines.fit_baseline(x, family, bic_uses_transitions=self.bic_uses_transitions)
        self.result_ = res
        self.params_ = res.params
        self.loglik_ = res.loglik
        self.n_features_in_ = x.shape[1]
        return self

    def score_samples(self, X):
        check_fitted(self)
        x = check_counts(X, min_length=2, n_features=self.n_features_in_)
        out = np.zeros(x.shape[0] - 1)
        for s, p in enumerate(self.params_):
            out += baselines._pair_log_pmfs(x[:-1, s], x[1:, s], p.alpha, p.innovation_param, p.family)
        return out

    def score(self, X, y=None):
        return float(np.sum(self.score_samples(X)))

    def predict(self, X):
        check_fitted(self)
        x = check_counts(X, min_length=1, n_features=self.n_features_in_)
        a = np.array([p.alpha for p in self.params_])
        v = np.array([p.innovation_param for p in self.params_])
        mean_r = v if self.params_[0].family == "poisson" else (1.0 - v) / v
        return a * x + mean_r

    def aic(self, variant="standard"):
        check_fitted(self)
        if variant not in ("standard", "paper"):
            raise ValueError("variant must be 'standard' or 'paper'")
        r = self.result_
        return r.aic_standard if variant == "standard" else r.aic_paper

    def bic(self):
        check_fitted(self)
        return self.result_.bic
