"""Python access to the CARL training core.

Losses return ``(value, [gradient per input])`` computed by the C++ tape in
double precision. Training, evaluation and checkpoints go through
:class:`RunConfig` and :class:`TrainState`.
"""

from ._carl_lab import (
    ConfigError,
    ContractError,
    DimensionError,
    DivergedError,
    FormatError,
    NumericError,
    RunConfig,
    StateError,
    TrainState,
    assign,
    carl_total_loss,
    config_keys,
    consistency_loss,
    cosine_learning_rate,
    decay_weight,
    evaluate,
    gaussian_mixture,
    gradcheck,
    infonce_loss,
    kl_to_uniform,
    linear_probe,
    top1_accuracy,
    train,
    usage_perplexity,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DimensionError",
    "DivergedError",
    "FormatError",
    "NumericError",
    "RunConfig",
    "StateError",
    "TrainState",
    "assign",
    "carl_total_loss",
    "config_keys",
    "consistency_loss",
    "cosine_learning_rate",
    "decay_weight",
    "evaluate",
    "gaussian_mixture",
    "gradcheck",
    "infonce_loss",
    "kl_to_uniform",
    "linear_probe",
    "top1_accuracy",
    "train",
    "usage_perplexity",
]
