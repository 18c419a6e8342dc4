"""Layer-by-layer linear DAG learning with auxiliary-domain transfer."""

__version__ = "0.1.0"

from .dcov import (
    DistanceMatrixCache,
    dcov_squared,
    independence_test,
    max_test_over,
    normal_quantile_threshold,
    test_statistic,
)
from .engine import (
    DagEstimate,
    Diagnostics,
    MultiDomainDataset,
    OracleHooks,
    TransferConfig,
    estimate_parents,
    fit,
)
from .errors import AuxDagError
from .metrics import MetricsReport, compute_report, edge_confusion, structural_hamming
from .precision import (
    SolverOptions,
    divergence_matrix,
    estimate_precision_from_cov,
    estimate_precision_target,
    estimate_precision_transfer,
    sample_covariance,
    select_parameter_informative,
    soft_threshold_delta,
)
from .similarity import (
    LayerPartition,
    WeightedDag,
    is_global_informative,
    is_node_informative,
    is_parameter_informative,
    topological_layers,
)
from .synth import (
    NoiseSpec,
    ScenarioSpec,
    gen_aux_suite,
    gen_target,
    marginal_precision,
    population_covariance,
    population_precision,
    sample_sem,
)

__all__ = [
    "AuxDagError",
    "DagEstimate",
    "Diagnostics",
    "DistanceMatrixCache",
    "LayerPartition",
    "MetricsReport",
    "MultiDomainDataset",
    "NoiseSpec",
    "OracleHooks",
    "ScenarioSpec",
    "SolverOptions",
    "TransferConfig",
    "WeightedDag",
    "compute_report",
    "dcov_squared",
    "divergence_matrix",
    "edge_confusion",
    "estimate_parents",
    "estimate_precision_from_cov",
    "estimate_precision_target",
    "estimate_precision_transfer",
    "fit",
    "gen_aux_suite",
    "gen_target",
    "independence_test",
    "is_global_informative",
    "is_node_informative",
    "is_parameter_informative",
    "marginal_precision",
    "max_test_over",
    "normal_quantile_threshold",
    "population_covariance",
    "population_precision",
    "sample_covariance",
    "sample_sem",
    "select_parameter_informative",
    "soft_threshold_delta",
    "structural_hamming",
    "test_statistic",
    "topological_layers",
]
