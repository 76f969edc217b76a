"""Label flipping poisoning attacks on linear hinge-loss classifiers and kNN label sanitization."""

__version__ = "0.1.0"

from .attack import (
    AttackResult,
    FlipVector,
    apply_flips,
    brute_force_attack,
    budget_from_fraction,
    lfa_greedy,
    random_flip,
)
from .dataset import (
    DataSplit,
    Example,
    LabeledDataset,
    Standardizer,
    apply_standardizer,
    binarize_mnist,
    fit_standardizer,
    load_csv,
    load_mnist,
    random_split,
    save_csv,
)
from .defence import DefenceConfig, SanitizationReport, confidence, knn_indices, mode_label, sanitize, sanitize_pass
from .errors import ConfigError, DataError, InvariantError, LabelflipError
from .experiments import (
    ExperimentConfig,
    ResultsTable,
    aggregate,
    run_poison_sweep,
    select_k,
    sensitivity_sweep,
)
from .linear_model import (
    TrainConfig,
    Weights,
    avg_loss,
    hinge_loss,
    hinge_subgradient,
    predict,
    train_sgd,
    zero_one_error,
)
