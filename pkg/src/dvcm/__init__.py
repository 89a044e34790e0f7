"""Distributed Bayesian varying coefficient models with Gaussian process priors.

Subsets of the data are sampled independently with a tempered likelihood,
then the subset posteriors are combined (AMC, WASP, DPMC, PIE or CMC).
"""

from ._backend import BACKEND
from .combiner import ALL_METHODS, CombinedStore, combine
from .diagnostics import MetricReport, report_from_combined
from .errors import (
    ChainError,
    ConfigError,
    ConvergenceError,
    DatasetFormatError,
    DvcmError,
    FactorizationError,
)
from .io import ingest_dataset, write_dataset
from .kernels import KernelFamily, KernelParams, PriorRange
from .model import Dataset, ModelSpec, ParamState
from .partitioner import SubsetPlan, make_subsets
from .runner import RunConfig, load_config, run_distributed, run_full
from .sampler import ChainConfig, DrawStore, run_chain
from .simgen import SimTruth, generate_simulation

__version__ = "0.1.0"

__all__ = [
    "ALL_METHODS",
    "BACKEND",
    "ChainConfig",
    "ChainError",
    "CombinedStore",
    "ConfigError",
    "ConvergenceError",
    "Dataset",
    "DatasetFormatError",
    "DrawStore",
    "DvcmError",
    "FactorizationError",
    "KernelFamily",
    "KernelParams",
    "MetricReport",
    "ModelSpec",
    "ParamState",
    "PriorRange",
    "RunConfig",
    "SimTruth",
    "SubsetPlan",
    "combine",
    "generate_simulation",
    "ingest_dataset",
    "load_config",
    "make_subsets",
    "report_from_combined",
    "run_chain",
    "run_distributed",
    "run_full",
    "write_dataset",
]
