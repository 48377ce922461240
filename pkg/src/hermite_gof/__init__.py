"""Goodness-of-fit testing for the bivariate Hermite distribution.

The test statistic is a weighted integrated squared distance between the
empirical probability generating function and the fitted one, calibrated by
a parametric bootstrap with maximum likelihood refits.
"""

from .alternatives import AlternativeSpec, alternative_pmf, alternative_pgf, parse_alternative, sample_alternative
from .bootstrap import TestReport, run_bootstrap_multi, run_bootstrap_test
from .harness import (
    ExperimentConfig,
    ResultTable,
    emit_table,
    ingest_contingency,
    ingest_pairs,
    load_accidents,
    read_table,
    run_gof_command,
    run_power_experiment,
    run_type1_experiment,
)
from .hermite import BHParams, gauge_normalize, moments, pgf_eval, pmf_table, poisson_decomposition, sample_bhd
from .mle import FitOptions, FitResult, fit_mle, initial_estimate, log_likelihood
from .samples import BivariateSample
from .statistic import WeightSpec, empirical_term_closed_form, statistic_vnw

__all__ = [
    "AlternativeSpec",
    "BHParams",
    "BivariateSample",
    "ExperimentConfig",
    "FitOptions",
    "FitResult",
    "ResultTable",
    "TestReport",
    "WeightSpec",
    "alternative_pgf",
    "alternative_pmf",
    "emit_table",
    "empirical_term_closed_form",
    "fit_mle",
    "gauge_normalize",
    "ingest_contingency",
    "ingest_pairs",
    "initial_estimate",
    "load_accidents",
    "log_likelihood",
    "moments",
    "parse_alternative",
    "pgf_eval",
    "pmf_table",
    "poisson_decomposition",
    "read_table",
    "run_bootstrap_multi",
    "run_bootstrap_test",
    "run_gof_command",
    "run_power_experiment",
    "run_type1_experiment",
    "sample_alternative",
    "sample_bhd",
    "statistic_vnw",
]

__version__ = "0.1.0"
