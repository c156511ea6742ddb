"""Multivariate INAR(1) count time series with Poisson- or geometric-lognormal innovations."""
from .baselines import fit_baseline
from .em import FitConfig, FitReport, fit
from .estimator import MINAR, IndependentINAR
from .exceptions import ConfigError, DataError, MinarError
from .process import ModelParams, process_moments, simulate

__version__ = "0.1.0"

__all__ = ["MINAR", "IndependentINAR", "FitConfig", "FitReport", "fit", "fit_baseline",
           "ModelParams", "process_moments", "simulate", "MinarError", "DataError",
           "ConfigError", "__version__"]
