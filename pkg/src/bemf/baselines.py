"""Reference recommenders to compare the Bernoulli model against.

Two families: squared-error matrix factorization on the raw rating values
(plain dot product, or with global mean and additive biases), and
neighborhood predictors using the JMSD similarity (Jaccard overlap times
one minus the mean squared difference of min-max normalized co-ratings).

enforce_reliability bolts an external reliability onto any predictor by
factorizing its absolute training errors; it exists so that a native
reliability can be compared against a retrofitted one on equal terms.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import backend
from .data import RatingDataset
from .model import TrainingDivergedError
from .scores import ScoreSet
from .serialize import load_container, save_container

MF_VARIANTS = ("pmf", "biasedmf")
KNN_VARIANTS = ("user", "item")


@dataclass
class MFBaselineConfig:
    """Knobs for the squared-error factorization baselines."""
    variant: str = "biasedmf"
    factors: int = 8
    learning_rate: float = 0.01
    regularization: float = 0.05
    iterations: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.variant not in MF_VARIANTS:
            raise ValueError(f"variant must be one of {MF_VARIANTS}, "
                             f"got {self.variant!r}")
        if int(self.factors) < 1:
            raise ValueError(f"factors must be >= 1, got {self.factors}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.regularization < 0:
            raise ValueError(f"regularization must be >= 0, got {self.regularization}")
        if int(self.iterations) < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if int(self.seed) < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        self.factors = int(self.factors)
        self.learning_rate = float(self.learning_rate)
        self.regularization = float(self.regularization)
        self.iterations = int(self.iterations)
        self.seed = int(self.seed)


def _fit_sgd(users, items, values, num_users, num_items,
             cfg: MFBaselineConfig, use_bias: bool):
    """Seeded SGD on squared error; shared by baselines and the add-on."""
    if users.size == 0:
        raise ValueError("cannot fit on an empty rating set")
    kern = backend.get_kernels()
    gen = np.random.Generator(np.random.Philox(cfg.seed))
    k = cfg.factors
    P = gen.random((num_users, k)) / np.sqrt(k)
    Q = gen.random((num_items, k)) / np.sqrt(k)
    user_bias = np.zeros(num_users)
    item_bias = np.zeros(num_items)
    mu = float(values.mean()) if use_bias else 0.0
    values = np.ascontiguousarray(values, dtype=np.float64)
    for epoch in range(cfg.iterations):
        order = gen.permutation(users.size).astype(np.int64)
        kern.sgd_epoch(P, Q, user_bias, item_bias, users, items, values,
                       order, mu, cfg.learning_rate, cfg.regularization,
                       use_bias)
        if not (np.isfinite(P).all() and np.isfinite(Q).all()
                and np.isfinite(user_bias).all() and np.isfinite(item_bias).all()):
            raise TrainingDivergedError(epoch, "non-finite baseline factor")
    return P, Q, user_bias, item_bias, mu


class MFBaselineModel:
    """Trained squared-error factorization over the rating scale."""

    def __init__(self, score_set: ScoreSet, config: MFBaselineConfig,
                 P, Q, user_bias, item_bias, mu: float,
                 user_ids=None, item_ids=None):
        self.score_set = score_set
        self.config = config
        self.P = np.ascontiguousarray(P, dtype=np.float64)
        self.Q = np.ascontiguousarray(Q, dtype=np.float64)
        self.user_bias = np.ascontiguousarray(user_bias, dtype=np.float64)
        self.item_bias = np.ascontiguousarray(item_bias, dtype=np.float64)
        self.mu = float(mu)
        self.user_ids = (list(user_ids) if user_ids is not None
                         else [str(u) for u in range(self.P.shape[0])])
        self.item_ids = (list(item_ids) if item_ids is not None
                         else [str(i) for i in range(self.Q.shape[0])])

    def predict_batch(self, users, items) -> np.ndarray:
        """Predicted rating values, clamped to the score range."""
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        pred = np.einsum("ij,ij->i", self.P[users], self.Q[items])
        if self.config.variant == "biasedmf":
            pred = pred + self.mu + self.user_bias[users] + self.item_bias[items]
        return np.clip(pred, self.score_set.min_value, self.score_set.max_value)

    def predict(self, user: int, item: int) -> float:
        return float(self.predict_batch([user], [item])[0])

    def rmse(self, dataset: RatingDataset) -> float:
        values = np.asarray(dataset.score_set.values)[dataset.score_idx]
        pred = self.predict_batch(dataset.users, dataset.items)
        return float(np.sqrt(np.mean((values - pred) ** 2)))

    def save(self, path) -> None:
        meta = {
            "format_version": 1,
            "score_set": self.score_set.to_spec(),
            "config": asdict(self.config),
            "mu": self.mu,
            "user_ids": self.user_ids,
            "item_ids": self.item_ids,
        }
        save_container(path, self.config.variant, meta, {
            "P": self.P, "Q": self.Q,
            "user_bias": self.user_bias, "item_bias": self.item_bias,
        })

    @classmethod
    def load(cls, path) -> "MFBaselineModel":
        kind, meta, arrays = load_container(path)
        if kind not in MF_VARIANTS:
            raise ValueError(f"{path}: expected an MF baseline, found {kind!r}")
        return cls(ScoreSet.from_spec(meta["score_set"]),
                   MFBaselineConfig(**meta["config"]),
                   arrays["P"], arrays["Q"],
                   arrays["user_bias"], arrays["item_bias"], meta["mu"],
                   meta["user_ids"], meta["item_ids"])


def fit_mf_baseline(train: RatingDataset, cfg: MFBaselineConfig) -> MFBaselineModel:
    """Fit PMF (variant 'pmf') or biased MF (variant 'biasedmf')."""
    values = np.asarray(train.score_set.values)[train.score_idx]
    use_bias = cfg.variant == "biasedmf"
    P, Q, bu, bi, mu = _fit_sgd(train.users, train.items, values,
                                train.num_users, train.num_items, cfg, use_bias)
    return MFBaselineModel(train.score_set, cfg, P, Q, bu, bi, mu,
                           train.user_ids, train.item_ids)


# -- neighborhood models -------------------------------------------------


def jmsd(keys_a, scores_a, keys_b, scores_b, score_set: ScoreSet) -> float:
    """Jaccard times (1 - MSD) similarity of two rating profiles.

    Profiles are (sorted unique key array, score index array) pairs as
    returned by RatingDataset.user_row / item_col. Ratings are min-max
    normalized to [0, 1] by the score range before the squared differences.
    Profiles with no common key have similarity 0.
    """
    common, ia, ib = np.intersect1d(keys_a, keys_b,
                                    assume_unique=True, return_indices=True)
    if common.size == 0:
        return 0.0
    union = keys_a.size + keys_b.size - common.size
    jaccard = common.size / union
    lo, hi = score_set.min_value, score_set.max_value
    values = np.asarray(score_set.values)
    na = (values[scores_a[ia]] - lo) / (hi - lo)
    nb = (values[scores_b[ib]] - lo) / (hi - lo)
    msd = float(np.mean((na - nb) ** 2))
    return float(jaccard * (1.0 - msd))


@dataclass
class KNNConfig:
    """Knobs for the neighborhood predictors; similarity is always JMSD."""
    variant: str = "user"
    neighbors: int = 25
    cache_similarities: bool = True

    def __post_init__(self):
        if self.variant not in KNN_VARIANTS:
            raise ValueError(f"variant must be one of {KNN_VARIANTS}, "
                             f"got {self.variant!r}")
        if int(self.neighbors) < 1:
            raise ValueError(f"neighbors must be >= 1, got {self.neighbors}")
        self.neighbors = int(self.neighbors)


class KNNModel:
    """K nearest neighbors over users or items with JMSD weights.

    Prediction for (u, i) averages the ratings of the top-K positively
    similar neighbors that rated the pair, weighted by similarity. Pairs
    with no usable neighbor are unpredictable (NaN), which is what gives
    the method its sub-1 coverage.
    """

    def __init__(self, train: RatingDataset, config: KNNConfig):
        self.train = train
        self.config = config
        self._sim_cache: dict = {}

    def _profile(self, idx: int):
        if self.config.variant == "user":
            return self.train.user_row(idx)
        return self.train.item_col(idx)

    def _similarity(self, a: int, b: int) -> float:
        key = (a, b) if a <= b else (b, a)
        if self.config.cache_similarities and key in self._sim_cache:
            return self._sim_cache[key]
        ka, sa = self._profile(a)
        kb, sb = self._profile(b)
        sim = jmsd(ka, sa, kb, sb, self.train.score_set)
        if self.config.cache_similarities:
            self._sim_cache[key] = sim
        return sim

    def predict(self, user: int, item: int) -> float:
        """Predicted value, or NaN when no positive-similarity neighbor."""
        if self.config.variant == "user":
            active, candidates, cand_scores = user, *self.train.item_col(item)
            drop = candidates != user
        else:
            active, candidates, cand_scores = item, *self.train.user_row(user)
            drop = candidates != item
        candidates = candidates[drop]
        cand_scores = cand_scores[drop]
        if candidates.size == 0:
            return float("nan")
        sims = np.array([self._similarity(active, int(c)) for c in candidates])
        keep = sims > 0.0
        if not keep.any():
            return float("nan")
        candidates, cand_scores, sims = candidates[keep], cand_scores[keep], sims[keep]
        if candidates.size > self.config.neighbors:
            # stable sort on -sim keeps ascending candidate index on ties
            top = np.argsort(-sims, kind="stable")[:self.config.neighbors]
            cand_scores, sims = cand_scores[top], sims[top]
        values = np.asarray(self.train.score_set.values)[cand_scores]
        return float(np.sum(sims * values) / np.sum(sims))

    def predict_batch(self, users, items) -> np.ndarray:
        return np.array([self.predict(int(u), int(i))
                         for u, i in zip(users, items)])

    @property
    def score_set(self) -> ScoreSet:
        return self.train.score_set

    @property
    def user_ids(self):
        return self.train.user_ids

    @property
    def item_ids(self):
        return self.train.item_ids

    def save(self, path) -> None:
        meta = {
            "format_version": 1,
            "score_set": self.train.score_set.to_spec(),
            "config": asdict(self.config),
            "user_ids": self.train.user_ids,
            "item_ids": self.train.item_ids,
        }
        save_container(path, f"knn-{self.config.variant}", meta, {
            "users": self.train.users,
            "items": self.train.items,
            "score_idx": self.train.score_idx,
        })

    @classmethod
    def load(cls, path) -> "KNNModel":
        kind, meta, arrays = load_container(path)
        if not kind.startswith("knn-"):
            raise ValueError(f"{path}: expected a knn model, found {kind!r}")
        train = RatingDataset(ScoreSet.from_spec(meta["score_set"]),
                              meta["user_ids"], meta["item_ids"],
                              arrays["users"], arrays["items"],
                              arrays["score_idx"])
        return cls(train, KNNConfig(**meta["config"]))


# -- retrofitted reliability ----------------------------------------------


class ReliabilityAddOn:
    """Reliability estimates factorized from a predictor's training errors.

    The absolute error of the base predictor on every predictable training
    pair is treated as a matrix to factorize; the reconstruction estimates
    the error expected on unseen pairs, and reliability is 1 / (1 + max(0,
    estimated error)), so zero expected error means reliability 1.
    """

    def __init__(self, P, Q, user_bias, item_bias, mu, use_bias):
        self.P = P
        self.Q = Q
        self.user_bias = user_bias
        self.item_bias = item_bias
        self.mu = mu
        self.use_bias = use_bias

    def estimated_error(self, users, items) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        est = np.einsum("ij,ij->i", self.P[users], self.Q[items])
        if self.use_bias:
            est = est + self.mu + self.user_bias[users] + self.item_bias[items]
        return est

    def reliability_batch(self, users, items) -> np.ndarray:
        est = self.estimated_error(users, items)
        return 1.0 / (1.0 + np.maximum(0.0, est))

    def reliability(self, user: int, item: int) -> float:
        return float(self.reliability_batch([user], [item])[0])


def enforce_reliability(base_predict, train: RatingDataset,
                        cfg: MFBaselineConfig) -> ReliabilityAddOn:
    """Fit a reliability add-on from a predictor's training errors.

    Args:
        base_predict: callable(users, items) -> predicted values (NaN where
            the base model abstains; such pairs are skipped).
        train: ratings the base model was fitted on.
        cfg: factorization knobs for the error matrix; variant 'pmf' keeps
            the raw dot product, 'biasedmf' adds mean and biases.
    """
    pred = np.asarray(base_predict(train.users, train.items), dtype=np.float64)
    actual = np.asarray(train.score_set.values)[train.score_idx]
    valid = np.isfinite(pred)
    if not valid.any():
        raise ValueError("base model predicted no training pair")
    errors = np.abs(actual[valid] - pred[valid])
    use_bias = cfg.variant == "biasedmf"
    P, Q, bu, bi, mu = _fit_sgd(train.users[valid], train.items[valid],
                                errors, train.num_users, train.num_items,
                                cfg, use_bias)
    return ReliabilityAddOn(P, Q, bu, bi, mu, use_bias)
