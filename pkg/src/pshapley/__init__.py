"""Data valuation for probabilistic binary classifiers.

Quantifies each training point's contribution to a logistic classifier via
probability-wise Shapley values (confidence-calibrated utilities), with an
exact enumeration oracle, truncated Monte Carlo estimation, leave-one-out and
Beta-semivalue baselines, and a removal-experiment metric suite (weighted
accuracy / Brier / cross-entropy drops).
"""

from .data import (
    DataSplit,
    Dataset,
    generate_synthetic,
    load_csv,
    save_csv,
    split_fingerprint,
    split_train_valid,
    standardize_split,
)
from .experiment import (
    MethodSpec,
    RunConfig,
    RunContext,
    SyntheticSpec,
    emit_report,
    materialize,
    parse_method,
    run_pipeline,
    run_removal_experiment,
    run_valuation_suite,
)
from .metrics import (
    RemovalCurve,
    RoundMetrics,
    brier_from_probs,
    brier_score,
    cross_entropy,
    cross_entropy_from_probs,
    curve_from_csv,
    curve_to_csv,
    wad,
    wbd,
    wcd,
    weighted_drop,
)
from .model import (
    LogisticModel,
    TrainConfig,
    logistic_loss,
    logistic_loss_gradients,
    sigmoid,
    train,
)
from .utility import (
    ACTIVATION_VARIANTS,
    ActivationKind,
    CoalitionCache,
    CoalitionModelCache,
    UtilityEvaluator,
    UtilityKind,
    accuracy_utility,
    activation_derivative,
    activation_eval,
    probability_utility,
)
from .valuation import (
    ValuationResult,
    beta_cardinality_weights,
    beta_shapley,
    exact_shapley,
    leave_one_out,
    tmc_shapley,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVATION_VARIANTS",
    "ActivationKind",
    "CoalitionCache",
    "CoalitionModelCache",
    "DataSplit",
    "Dataset",
    "LogisticModel",
    "MethodSpec",
    "RemovalCurve",
    "RoundMetrics",
    "RunConfig",
    "RunContext",
    "SyntheticSpec",
    "TrainConfig",
    "UtilityEvaluator",
    "UtilityKind",
    "ValuationResult",
    "accuracy_utility",
    "activation_derivative",
    "activation_eval",
    "beta_cardinality_weights",
    "beta_shapley",
    "brier_from_probs",
    "brier_score",
    "cross_entropy",
    "cross_entropy_from_probs",
    "curve_from_csv",
    "curve_to_csv",
    "emit_report",
    "exact_shapley",
    "generate_synthetic",
    "leave_one_out",
    "load_csv",
    "logistic_loss",
    "logistic_loss_gradients",
    "materialize",
    "parse_method",
    "probability_utility",
    "run_pipeline",
    "run_removal_experiment",
    "run_valuation_suite",
    "save_csv",
    "sigmoid",
    "split_fingerprint",
    "split_train_valid",
    "standardize_split",
    "tmc_shapley",
    "train",
    "wad",
    "wbd",
    "wcd",
    "weighted_drop",
]
