"""Square root graphical models for exponential, Poisson and Gaussian data."""

from .errors import *  # noqa: F401,F403
from .family import (
    FamilyTag,
    NodeConditionalParams,
    node_conditional_valid,
    node_log_partition,
    node_log_partition_grad,
    sample_node_conditional,
    slice_interval,
)
from .model import (
    Diagnostic,
    Normalizability,
    SqrModel,
    check_normalizable,
    exact_log_partition_small,
    gaussian_equivalent,
    load_model,
    node_conditional_params,
    radial_conditional_params,
    save_model,
    unnormalized_log_density,
)
from .estimation import FitConfig, NodeFit, fit, fit_independent_baseline, fit_node
from .sampling import AisConfig, AisResult, GibbsConfig, ais_log_partition, gibbs_sample, log_likelihood
from .bench import ChainSpec, chain_graph, edge_precision, relative_likelihood, run_chain_experiment
from .io import DataMatrix, load_csv, save_csv

__version__ = "0.1.0"
