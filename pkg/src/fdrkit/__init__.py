"""Local false discovery rates, empirical nulls and related tools for
large-scale simultaneous testing."""

__version__ = "0.1.0"

from .density import BinnedHistogram, MixtureDensityFit, bin_zvalues, fit_density, fit_mixture_density
from .enrich import (EnrichmentResult, ExpressionMatrix, GeneSetCollection, enrich_collection,
                     enrich_test, set_stat)
from .errors import (ConfigError, DegenerateInputError, DomainError, ExperimentError,
                     ExtrapolationWarning, FdrkitError, FitError, InputError, NullFitError,
                     ParseError)
from .fdr import (FdrResult, analyze, bh_select, lehmann_link, local_fdr, posterior_odds,
                  power_report, prior_adjust, tail_fdr)
from .ingest import ZSample, binom_to_z, load_zvalues, p_to_z, save_zvalues, t_to_z
from .nullfit import (NullModel, analytic_null, dispersion_from_A, estimate_rms_correlation,
                      geometric_null, theoretical_null)
from .onegroup import (PriorMixture, convolve_prior, derivatives_at_zero, posterior_cumulants_zero,
                       posterior_prob_uninteresting, taylor_fdr, taylor_null)
from .selectci import bayes_intervals, fcr_intervals
from .sim import run_experiment, simulate_correlated, simulate_two_groups

__all__ = [
    "BinnedHistogram", "MixtureDensityFit", "bin_zvalues", "fit_density", "fit_mixture_density",
    "EnrichmentResult", "ExpressionMatrix", "GeneSetCollection", "enrich_collection",
    "enrich_test", "set_stat",
    "ConfigError", "DegenerateInputError", "DomainError", "ExperimentError",
    "ExtrapolationWarning", "FdrkitError", "FitError", "InputError", "NullFitError", "ParseError",
    "FdrResult", "analyze", "bh_select", "lehmann_link", "local_fdr", "posterior_odds",
    "power_report", "prior_adjust", "tail_fdr",
    "ZSample", "binom_to_z", "load_zvalues", "p_to_z", "save_zvalues", "t_to_z",
    "NullModel", "analytic_null", "dispersion_from_A", "estimate_rms_correlation",
    "geometric_null", "theoretical_null",
    "PriorMixture", "convolve_prior", "derivatives_at_zero", "posterior_cumulants_zero",
    "posterior_prob_uninteresting", "taylor_fdr", "taylor_null",
    "bayes_intervals", "fcr_intervals",
    "run_experiment", "simulate_correlated", "simulate_two_groups",
]
