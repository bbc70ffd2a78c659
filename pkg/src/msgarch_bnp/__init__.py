"""Bayesian nonparametric panel Markov-switching GARCH with Pitman-Yor clustering."""

from .gibbs import ChainState, PosteriorDraws, SamplerConfig, run_chain
from .model import (Hyperparameters, Panel, RegimeParams, complete_loglik, enumerate_loglik,
                    garch_variance_path, stationary_distribution)
from .pyp import prior_cluster_mean, prior_cluster_pmf

__version__ = "0.1.0"

__all__ = ["ChainState", "Hyperparameters", "Panel", "PosteriorDraws", "RegimeParams",
           "SamplerConfig", "complete_loglik", "enumerate_loglik", "garch_variance_path",
           "prior_cluster_mean", "prior_cluster_pmf", "run_chain", "stationary_distribution"]
