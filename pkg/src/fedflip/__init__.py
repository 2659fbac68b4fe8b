"""fedflip: deterministic federated-learning simulation with label-flipping
attacks, a trust-based defense, and classic robust-aggregation baselines."""

from ._kernels import BACKEND
from .baselines import (
    AggregatorSpec,
    coordinate_median,
    fedavg,
    multi_krum,
    trimmed_mean,
)
from .data import (
    AttackPlan,
    AttackSchedule,
    FlipMap,
    LabeledDataset,
    PartitionSpec,
    apply_flip,
    gen_synthetic,
    is_attacking,
    load_idx,
    partition,
)
from .defense import (
    DefenseConfig,
    TrustState,
    compute_overhead_estimate,
    init_trust,
    mal_node_filter,
    normalize_trust,
    sq_deviation,
    weighted_aggregate,
)
from .errors import (
    AggregationStarvedError,
    ConfigError,
    DegenerateTrustError,
    FedFlipError,
    IdxFormatError,
)
from .harness import (
    DataSpec,
    DetectionReport,
    ExperimentConfig,
    RoundRecord,
    SuiteRow,
    build_datasets,
    run_experiment,
    run_suite,
)
from .models import (
    ModelArch,
    ParamVector,
    SgdConfig,
    evaluate,
    forward_loss_grad,
    init_params,
    local_train,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationStarvedError",
    "AggregatorSpec",
    "AttackPlan",
    "AttackSchedule",
    "BACKEND",
    "ConfigError",
    "DataSpec",
    "DefenseConfig",
    "DegenerateTrustError",
    "DetectionReport",
    "ExperimentConfig",
    "FedFlipError",
    "FlipMap",
    "IdxFormatError",
    "LabeledDataset",
    "ModelArch",
    "ParamVector",
    "PartitionSpec",
    "RoundRecord",
    "SgdConfig",
    "SuiteRow",
    "TrustState",
    "apply_flip",
    "build_datasets",
    "compute_overhead_estimate",
    "coordinate_median",
    "evaluate",
    "fedavg",
    "forward_loss_grad",
    "gen_synthetic",
    "init_params",
    "init_trust",
    "is_attacking",
    "load_idx",
    "local_train",
    "mal_node_filter",
    "multi_krum",
    "normalize_trust",
    "partition",
    "run_experiment",
    "run_suite",
    "sq_deviation",
    "trimmed_mean",
    "weighted_aggregate",
]
