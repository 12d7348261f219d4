"""Evaluation toolkit for synthetic tabular trip data."""

__version__ = "0.1.0"

from .baselines import GeneratorSpec, fit_generator, sample
from .coverage import CoverageConfig, coverage
from .dataset import (
    ColumnKind,
    DataTable,
    SplitSpec,
    TableSchema,
    encode,
    fit_encoder,
    load_csv,
    preprocess_trips,
    split,
)
from .downstream import GbmConfig, downstream_suite, gbm_fit, gbm_predict, r_squared
from .graph_metric import build_graph, edge_distribution, graph_similarity
from .ot import OtConfig, wasserstein, wasserstein_1d
from .privacy import dcr_profile, percentile, rdcr, rdcr_sweep

__all__ = [
    "ColumnKind", "CoverageConfig", "DataTable", "GbmConfig", "GeneratorSpec", "OtConfig",
    "SplitSpec", "TableSchema", "build_graph", "coverage", "dcr_profile", "downstream_suite",
    "edge_distribution", "encode", "fit_encoder", "fit_generator", "gbm_fit", "gbm_predict",
    "graph_similarity", "load_csv", "percentile", "preprocess_trips", "r_squared", "rdcr",
    "rdcr_sweep", "sample", "split", "wasserstein", "wasserstein_1d",
]
