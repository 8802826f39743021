"""Bernoulli matrix factorization for collaborative filtering.

Instead of regressing a single rating value, the model fits one Bernoulli
factorization per score on the rating scale and normalizes the per-score
activations into a full probability distribution for every (user, item)
pair. The winning probability doubles as a native reliability, so the
model can abstain on shaky predictions and rank recommendations by how
sure it is. Baselines (rating-scale MF and JMSD neighborhoods), a
retrofitted reliability add-on, and the evaluation protocol live alongside
for comparison.
"""

from .backend import active_backend, compiled_available
from .baselines import (KNNConfig, KNNModel, MFBaselineConfig, MFBaselineModel,
                        ReliabilityAddOn, enforce_reliability, fit_mf_baseline,
                        jmsd)
from .config import ConfigError, ExperimentConfig
from .data import (BinaryScoreView, RatingDataset, SplitDataset, load_ratings,
                   parse_ratings, score_views, split_train_test)
from .model import (Activation, BeMFModel, Hyperparams, Prediction,
                    TrainingDivergedError, cost, fit, get_activation, gradient,
                    register_activation)
from .scores import ScoreSet
from .synthetic import make_synthetic_dataset

__version__ = "0.1.0"

__all__ = [
    "Activation", "BeMFModel", "BinaryScoreView", "ConfigError",
    "ExperimentConfig", "Hyperparams", "KNNConfig", "KNNModel",
    "MFBaselineConfig", "MFBaselineModel", "Prediction", "RatingDataset",
    "ReliabilityAddOn", "ScoreSet", "SplitDataset", "TrainingDivergedError",
    "active_backend", "compiled_available", "cost", "enforce_reliability",
    "fit", "fit_mf_baseline", "get_activation", "gradient", "jmsd",
    "load_ratings", "make_synthetic_dataset", "parse_ratings",
    "register_activation", "score_views", "split_train_test",
    "__version__",
]
