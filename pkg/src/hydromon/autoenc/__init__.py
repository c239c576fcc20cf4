"""Mirrored autoencoders, hyperparameter search, and the per-state model bank."""

from .bank import (
    ModelBank,
    ScoreReport,
    StateEntry,
    export_scores_csv,
    fit_bank,
    load_bank,
    save_bank,
    score,
    score_rows,
)
from .mlp import (
    AutoencError,
    Mlp,
    MlpSpec,
    TrainConfig,
    forward,
    grad_check,
    init,
    loss_mae,
    row_mae,
    train,
)
from .search import SearchSpace, Trial, derive_seed, random_search, sample_spec

__all__ = [
    "AutoencError",
    "Mlp",
    "MlpSpec",
    "ModelBank",
    "ScoreReport",
    "SearchSpace",
    "StateEntry",
    "TrainConfig",
    "Trial",
    "derive_seed",
    "export_scores_csv",
    "fit_bank",
    "forward",
    "grad_check",
    "init",
    "load_bank",
    "loss_mae",
    "random_search",
    "row_mae",
    "sample_spec",
    "save_bank",
    "score",
    "score_rows",
    "train",
]
