"""Wasserstein information matrices, Wasserstein priors and Bayesian inference tools."""

__version__ = "0.1.0"

from .dist import (
    BaseDensity,
    Exponential,
    LocationScale,
    NormalLinReg,
    Reparameterized,
    SkewNormal,
    SkewNormal3,
    model_from_json,
    owens_t,
    spec_from_json,
)
from .errors import CapabilityError, DomainError, InvalidStartError, ProprietyError, QuadratureError
from .infer import McmcConfig, log_posterior, make_log_posterior, mcmc_sample, mle_fit, summarize
from .prior import PriorSpec, check_propriety, make_prior, wasserstein_prior
from .wim import WimMatrix, wasserstein2_distance, wim, wim_closed_form, wim_generic, wim_reparam

__all__ = [
    "BaseDensity", "Exponential", "LocationScale", "NormalLinReg", "Reparameterized", "SkewNormal",
    "SkewNormal3", "model_from_json", "owens_t", "spec_from_json",
    "CapabilityError", "DomainError", "InvalidStartError", "ProprietyError", "QuadratureError",
    "McmcConfig", "log_posterior", "make_log_posterior", "mcmc_sample", "mle_fit", "summarize",
    "PriorSpec", "check_propriety", "make_prior", "wasserstein_prior",
    "WimMatrix", "wasserstein2_distance", "wim", "wim_closed_form", "wim_generic", "wim_reparam",
]
