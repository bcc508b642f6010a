"""Offline change point detection via self-supervised time-index regression.

The pipeline trains a regularized network to predict each sample's normalized
time index, then hands the univariate predicted sequence to exact dynamic
programming segmentation.  The package also ships the classic multivariate
baselines (direct DP on the raw series, CUSUM-projection reduction), seeded
synthetic problem generators, an experiment harness, and relevance-based
attribution of detected changes to input dimensions.
"""

__version__ = "0.1.0"

from .attribution import AttributionMap, gradient_input_explain, lrp_explain
from .baselines import (
    ProjectionVector,
    cusum_transform,
    project_and_detect,
    projection_direction,
    vanilla_detect,
)
from .benchgen import FAMILIES, LabeledDataset, ProblemSpec, generate
from .cpd_core import (
    ARCost,
    L2Cost,
    RBFCost,
    Segmentation,
    SegmentationConfig,
    best_split_gain,
    cost_ar,
    cost_l2,
    cost_rbf,
    median_heuristic_bandwidth,
    segment_dynp,
    total_cost,
)
from .errors import (
    ConfigError,
    FormatError,
    InfeasibleSegmentationError,
    InvalidRangeError,
    ShapeMismatchError,
    TimepredError,
    TrainingDivergedError,
)
from .harness import (
    BenchmarkConfig,
    BenchmarkReport,
    MethodId,
    all_methods,
    precision_at_tolerance,
    run_benchmark,
    timer,
)
from .model import (
    TimePredictor,
    TrainConfig,
    fit,
    linear_head_fit,
    load_model,
    normalized_targets,
    predict,
    save_model,
)

__all__ = [
    "__version__",
    "AttributionMap", "gradient_input_explain", "lrp_explain",
    "ProjectionVector", "cusum_transform", "project_and_detect",
    "projection_direction", "vanilla_detect",
    "FAMILIES", "LabeledDataset", "ProblemSpec", "generate",
    "ARCost", "L2Cost", "RBFCost", "Segmentation", "SegmentationConfig",
    "best_split_gain", "cost_ar", "cost_l2", "cost_rbf",
    "median_heuristic_bandwidth", "segment_dynp", "total_cost",
    "ConfigError", "FormatError", "InfeasibleSegmentationError",
    "InvalidRangeError", "ShapeMismatchError", "TimepredError",
    "TrainingDivergedError",
    "BenchmarkConfig", "BenchmarkReport", "MethodId", "all_methods",
    "precision_at_tolerance", "run_benchmark", "timer",
    "TimePredictor", "TrainConfig", "fit", "linear_head_fit", "load_model",
    "normalized_targets", "predict", "save_model",
]
