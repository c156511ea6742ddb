"""Binomial thinning and the diagonal thinning-operator matrix."""
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch
from .linalg import as_vector


@dataclass(frozen=True)
class ThinningMatrix:
    """Diagonal thinning operator with survival probabilities ``alpha``."""

    alpha: np.ndarray

    def __post_init__(self):
        a = as_vector(self.alpha, "alpha")
        if np.any(a <= 0.0) or np.any(a >= 1.0):
            raise ValueError("each alpha must lie strictly inside (0, 1)")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def dim(self):
        return self.alpha.shape[0]


def thin(alpha_s, x, rng):
    """alpha o x: the number of survivors among ``x`` Bernoulli(alpha) trials.

    Boundary probabilities 0 and 1 are accepted.
    """
    if not 0.0 <= alpha_s <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha_s}")
    if x < 0:
        raise ValueError("x must be non-negative")
    return int(rng.binomial(int(x), float(alpha_s)))


def thin_vector(A, x, rng):
    """Componentwise thinning A o x of a count vector."""
    alpha = A.alpha if isinstance(A, ThinningMatrix) else np.asarray(A, dtype=float)
    x = np.asarray(x)
    if x.shape != alpha.shape:
        raise DimensionMismatch(f"count vector has shape {x.shape}, operator has {alpha.shape}")
    if np.any(x < 0):
        raise ValueError("counts must be non-negative")
    return rng.binomial(x.astype(np.int64), alpha).astype(np.int64)
