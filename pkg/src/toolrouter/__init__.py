"""Cost-aware query routing across homogeneous tools.

Pipeline: label responses (or simulate a world), train a per-tool score
predictor from query text alone, then assign queries to tools either by best
predicted score or by minimizing cost under an average-score threshold.
"""

from .assignment import (
    CostSavingRequest,
    SolveDiagnostics,
    Strategy,
    best_performance,
    cost_saving,
    cost_saving_exact,
    cost_saving_parametric,
    fixed_tool,
    max_achievable_mean,
    parse_strategy,
    route,
)
from .core import (
    Assignment,
    LabeledQuery,
    ScoreMatrix,
    ToolRegistry,
    ToolSpec,
    ValidationReport,
    default_registry,
    label_matrix,
    validate_dataset,
)
from .errors import (
    DataError,
    InfeasibleError,
    InvalidConfigError,
    RouterError,
    SizeBudgetExceededError,
)
from .evaluation import (
    CurvePoint,
    EvalReport,
    WinTieLose,
    compare_methods,
    cost_accuracy_curve,
    evaluate,
    win_tie_lose,
)
from .labeling import MatchConfig, ResponseRecord, build_labels, normalize, text_match, tokenize
from .predictor import (
    FeatureConfig,
    RouterModel,
    TrainConfig,
    TrainReport,
    featurize,
    load_model,
    predict,
    save_model,
    score_matrix,
    train,
)
from .synthworld import WorldConfig, generate, split

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "CostSavingRequest",
    "CurvePoint",
    "DataError",
    "EvalReport",
    "FeatureConfig",
    "InfeasibleError",
    "InvalidConfigError",
    "LabeledQuery",
    "MatchConfig",
    "ResponseRecord",
    "RouterError",
    "RouterModel",
    "ScoreMatrix",
    "SizeBudgetExceededError",
    "SolveDiagnostics",
    "Strategy",
    "ToolRegistry",
    "ToolSpec",
    "TrainConfig",
    "TrainReport",
    "ValidationReport",
    "WinTieLose",
    "WorldConfig",
    "best_performance",
    "build_labels",
    "compare_methods",
    "cost_accuracy_curve",
    "cost_saving",
    "cost_saving_exact",
    "cost_saving_parametric",
    "default_registry",
    "evaluate",
    "featurize",
    "fixed_tool",
    "generate",
    "label_matrix",
    "load_model",
    "max_achievable_mean",
    "normalize",
    "parse_strategy",
    "predict",
    "route",
    "save_model",
    "score_matrix",
    "split",
    "text_match",
    "tokenize",
    "train",
    "validate_dataset",
    "win_tie_lose",
]
