"""Finite-N ground truth: disorder sampling, exact enumeration, MCMC and estimators."""
from .disorder import DisorderSample, sample_disorder, sample_seeds
from .exact import GibbsEstimate, exact_gibbs, gibbs_log_weights
from .experiments import (
    ConcentrationResult,
    CltResult,
    OverlapMoments,
    clt_experiment,
    concentration_experiment,
    free_energies,
    jackknife,
    overlap_distribution,
    overlap_moments,
)
from .mcmc import integrated_autocorr, mcmc_gibbs

__all__ = [
    "CltResult",
    "ConcentrationResult",
    "DisorderSample",
    "GibbsEstimate",
    "OverlapMoments",
    "clt_experiment",
    "concentration_experiment",
    "exact_gibbs",
    "free_energies",
    "gibbs_log_weights",
    "integrated_autocorr",
    "jackknife",
    "mcmc_gibbs",
    "overlap_distribution",
    "overlap_moments",
    "sample_disorder",
    "sample_seeds",
]
