"""The MINAR(1) process X_t = A o X_{t-1} + R_t: simulation and moments."""
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, SeriesTooShort
from .mixtures import MixtureParams, innovation_moments, sample_latent_counts
from .thinning import ThinningMatrix

DEFAULT_BURN_IN = 500
MAX_LAG = 50


@dataclass(frozen=True)
class ModelParams:
    """theta = (alpha, mu, Sigma) together with the innovation family."""

    A: ThinningMatrix
    innovations: MixtureParams

    def __post_init__(self):
        if self.A.dim != self.innovations.dim:
            raise DimensionMismatch(
                f"alpha has length {self.A.dim}, innovations have dimension {self.innovations.dim}"
            )

    @classmethod
    def from_arrays(cls, family, alpha, mu, sigma):
        return cls(ThinningMatrix(alpha), MixtureParams(family, mu, sigma))

    @property
    def family(self):
        return self.innovations.family

    @property
    def alpha(self):
        return self.A.alpha

    @property
    def mu(self):
        return self.innovations.mu

    @property
    def sigma(self):
        return self.innovations.sigma

    @property
    def dim(self):
        return self.A.dim

    @property
    def n_free_params(self):
        n = self.dim
        return 2 * n + n * (n + 1) // 2

    def to_dict(self):
        return {
            "family": self.family,
            "alpha": self.alpha.tolist(),
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls.from_arrays(d["family"], d["alpha"], d["mu"], d["sigma"])


def check_series(series, min_length=2):
    """Validate a T x N count matrix and return it as int64."""
    x = np.asarray(series)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionMismatch(f"series must be a T x N matrix, got shape {x.shape}")
    if x.shape[0] < min_length:
        raise SeriesTooShort(f"series has {x.shape[0]} rows, need at least {min_length}")
    if not np.all(np.isfinite(x)) or np.any(x != np.floor(x)):
        raise ValueError("series entries must be integers")
    if np.any(x < 0):
        raise ValueError("series entries must be non-negative")
    return x.astype(np.int64)


def simulate(params, T, burn_in=DEFAULT_BURN_IN, seed=None):
    """Simulate T observations of the process after ``burn_in`` discarded steps.

    X_0 is a single innovation draw; each later step thins the previous
    state componentwise and adds a fresh innovation.

    Returns
    -------
    ndarray of shape (T, N), dtype int64
    """
    T = int(T)
    burn_in = int(burn_in)
    if T < 1:
        raise ValueError("T must be at least 1")
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    rng = np.random.default_rng(seed)
    n_steps = burn_in + T + 1
    inn = params.innovations
    eta = rng.multivariate_normal(inn.mu, inn.sigma, size=n_steps, method="cholesky")
    R = np.asarray(sample_latent_counts(inn.family, eta, rng), dtype=np.int64)
    alpha = params.alpha
    out = np.empty((T, params.dim), dtype=np.int64)
    x = R[0]
    for t in range(1, n_steps):
        x = rng.binomial(x, alpha) + R[t]
        if t > burn_in:
            out[t - burn_in - 1] = x
    return out


@dataclass(frozen=True)
class Moments:
    """Mean, covariance and lagged covariances Gamma(h)[i, j] = Cov(X_{i,t+h}, X_{j,t})."""

    mean: np.ndarray
    cov: np.ndarray
    autocovariances: np.ndarray

    @property
    def max_lag(self):
        return self.autocovariances.shape[0] - 1

    def autocov(self, h):
        h = int(h)
        if not 0 <= h <= self.max_lag:
            raise ValueError(f"lag must lie in [0, {self.max_lag}]")
        return self.autocovariances[h]

    @property
    def corr(self):
        sd = np.sqrt(np.diag(self.cov))
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.cov / np.outer(sd, sd)


def process_moments(params, max_lag=MAX_LAG):
    """Stationary moments of the process from the innovation moments."""
    alpha = params.alpha
    inn = innovation_moments(params.innovations)
    mean = inn.mean / (1.0 - alpha)
    cov = inn.cov / (1.0 - np.outer(alpha, alpha))
    # thinning adds alpha_i * mu_R,i of binomial noise on the diagonal
    np.fill_diagonal(cov, (alpha * inn.mean + np.diag(inn.cov)) / (1.0 - alpha ** 2))
    lags = np.arange(max_lag + 1)
    decay = alpha[None, :] ** lags[:, None]
    gammas = decay[:, :, None] * cov[None, :, :]
    return Moments(mean=mean, cov=cov, autocovariances=gammas)


def empirical_moments(series, max_lag=1):
    """Sample analogue of :func:`process_moments` (1/T normalization)."""
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    T = x.shape[0]
    max_lag = int(max_lag)
    if T <= max_lag + 1:
        raise SeriesTooShort(f"need more than {max_lag + 1} observations, got {T}")
    mean = x.mean(axis=0)
    c = x - mean
    gammas = np.stack([c[h:].T @ c[:T - h] / T for h in range(max_lag + 1)])
    return Moments(mean=mean, cov=gammas[0], autocovariances=gammas)
