"""Foresight re-sampling and advantage-calibrated self-training on toy tasks."""

from ._genius import (
    BudgetError,
    InputError,
    LossConfig,
    PreferenceQuintuple,
    RoundError,
    SamplingConfig,
    TabularPolicy,
    TrainConfig,
    Vocab,
    build_distribution,
    calibration_weight,
    collect_quintuples,
    evaluate,
    exact_foresight,
    gradcheck,
    oracle_verify,
    pair_loss,
    run_command,
    run_round,
    tasks,
)

__all__ = [
    "BudgetError",
    "InputError",
    "LossConfig",
    "PreferenceQuintuple",
    "RoundError",
    "SamplingConfig",
    "TabularPolicy",
    "TrainConfig",
    "Vocab",
    "build_distribution",
    "calibration_weight",
    "collect_quintuples",
    "evaluate",
    "exact_foresight",
    "gradcheck",
    "oracle_verify",
    "pair_loss",
    "run_command",
    "run_round",
    "tasks",
]
