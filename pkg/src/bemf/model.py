"""Bernoulli factorization model over a discrete score set.

The model keeps one (users x factors, items x factors) pair per score. Each
pair is a Bernoulli factorization of that score's binary view: the
activation of the dot product estimates the probability that the pair's
rating equals that score. Normalizing the per-score activations for a
(user, item) pair yields a probability distribution over the whole scale;
its argmax is the predicted score and the winning probability is the
prediction's reliability.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, asdict
from typing import Callable, Iterable, Sequence

import numpy as np

from . import backend
from ._kernels_py import EPS, logistic
from .data import BinaryScoreView, RatingDataset, score_views
from .scores import ScoreSet
from .serialize import load_container, save_container

FORMAT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Raised when factors stop being finite during training."""

    def __init__(self, iteration: int, detail: str = ""):
        self.iteration = iteration
        msg = f"training diverged at iteration {iteration}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg + "; lower the learning rate or raise "
                               "the regularization")


@dataclass(frozen=True)
class Activation:
    """Differentiable squashing function mapping reals into (0, 1).

    psi and dpsi must accept float64 arrays. Outputs of psi are clamped to
    [EPS, 1 - EPS] before logs and divisions, so mild range violations at
    the tails are tolerated.
    """
    name: str
    psi: Callable
    dpsi: Callable


_ACTIVATIONS: dict = {}


def register_activation(act: Activation, replace: bool = False) -> None:
    if not replace and act.name in _ACTIVATIONS:
        raise ValueError(f"activation {act.name!r} already registered")
    _ACTIVATIONS[act.name] = act


def get_activation(name: str) -> Activation:
    try:
        return _ACTIVATIONS[name]
    except KeyError:
        raise KeyError(f"unknown activation {name!r}; registered: "
                       f"{sorted(_ACTIVATIONS)}") from None


register_activation(Activation(
    name="logistic",
    psi=logistic,
    dpsi=lambda x: logistic(x) * (1.0 - logistic(x)),
))


@dataclass
class Hyperparams:
    """Training knobs for the Bernoulli factorization."""
    factors: int = 4
    learning_rate: float = 0.01
    regularization: float = 0.1
    iterations: int = 100
    activation: str = "logistic"
    seed: int = 0

    def __post_init__(self):
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
        get_activation(self.activation)
        self.factors = int(self.factors)
        self.learning_rate = float(self.learning_rate)
        self.regularization = float(self.regularization)
        self.iterations = int(self.iterations)
        self.seed = int(self.seed)


@dataclass
class Prediction:
    """Outcome for one (user, item) pair.

    score_index/value are None when the model abstains because the winning
    probability fell below the requested reliability threshold.
    """
    probabilities: np.ndarray
    score_index: int | None
    value: float | None
    reliability: float


class BeMFModel:
    """Trained per-score factor pairs plus the scale they index."""

    def __init__(self, score_set: ScoreSet, user_factors, item_factors,
                 hyperparams: Hyperparams, user_ids=None, item_ids=None):
        U = np.ascontiguousarray(user_factors, dtype=np.float64)
        V = np.ascontiguousarray(item_factors, dtype=np.float64)
        if U.ndim != 3 or V.ndim != 3:
            raise ValueError("factor tensors must be (scores, rows, factors)")
        if U.shape[0] != len(score_set) or V.shape[0] != len(score_set):
            raise ValueError("factor tensors must have one slice per score")
        if U.shape[2] != V.shape[2]:
            raise ValueError("user and item factor counts differ")
        self.score_set = score_set
        self.user_factors = U
        self.item_factors = V
        self.hyperparams = hyperparams
        self.user_ids = (list(user_ids) if user_ids is not None
                         else [str(u) for u in range(U.shape[1])])
        self.item_ids = (list(item_ids) if item_ids is not None
                         else [str(i) for i in range(V.shape[1])])

    @property
    def num_users(self) -> int:
        return self.user_factors.shape[1]

    @property
    def num_items(self) -> int:
        return self.item_factors.shape[1]

    @property
    def num_factors(self) -> int:
        return self.user_factors.shape[2]

    # -- prediction ------------------------------------------------------

    def score_activations(self, users, items) -> np.ndarray:
        """Raw clamped activations, shape (pairs, scores)."""
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        act = get_activation(self.hyperparams.activation)
        out = np.empty((users.size, len(self.score_set)))
        for s in range(len(self.score_set)):
            e = np.einsum("ij,ij->i", self.user_factors[s, users],
                          self.item_factors[s, items])
            out[:, s] = act.psi(e)
        return np.clip(out, EPS, 1.0 - EPS)

    def predict_batch(self, users, items, min_reliability: float = 0.0):
        """Vectorized prediction.

        Returns (probabilities (n, scores), score_index (n,), reliability
        (n,)); score_index is -1 where the model abstains because the
        winning probability is below min_reliability.
        """
        acts = self.score_activations(users, items)
        probs = acts / acts.sum(axis=1, keepdims=True)
        idx = np.argmax(probs, axis=1)
        rho = probs[np.arange(probs.shape[0]), idx]
        pred = np.where(rho < min_reliability, -1, idx).astype(np.int64)
        return probs, pred, rho

    def predict_distribution(self, user: int, item: int) -> np.ndarray:
        """Probability of each score for one pair (sums to 1)."""
        probs, _, _ = self.predict_batch([user], [item])
        return probs[0]

    def predict(self, user: int, item: int,
                min_reliability: float = 0.0) -> Prediction:
        """Predict one pair, abstaining below the reliability threshold."""
        probs, pred, rho = self.predict_batch([user], [item], min_reliability)
        if pred[0] < 0:
            return Prediction(probs[0], None, None, float(rho[0]))
        s = int(pred[0])
        return Prediction(probs[0], s, self.score_set.value(s), float(rho[0]))

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        meta = {
            "format_version": FORMAT_VERSION,
            "score_set": self.score_set.to_spec(),
            "hyperparams": asdict(self.hyperparams),
            "user_ids": self.user_ids,
            "item_ids": self.item_ids,
        }
        save_container(path, "bemf", meta, {
            "user_factors": self.user_factors,
            "item_factors": self.item_factors,
        })

    @classmethod
    def load(cls, path) -> "BeMFModel":
        kind, meta, arrays = load_container(path)
        if kind != "bemf":
            raise ValueError(f"{path}: expected a bemf model, found {kind!r}")
        return cls(ScoreSet.from_spec(meta["score_set"]),
                   arrays["user_factors"], arrays["item_factors"],
                   Hyperparams(**meta["hyperparams"]),
                   meta["user_ids"], meta["item_ids"])


def resolve_workers(workers: int | None) -> int:
    """Worker count: explicit value, else BEMF_WORKERS, else 1."""
    if workers is None:
        workers = int(os.environ.get("BEMF_WORKERS", "1") or 1)
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def initial_factors(score_set: ScoreSet, num_users: int, num_items: int,
                    hp: Hyperparams) -> tuple:
    """Seeded uniform [0, 1) init; a pure function of seed and shapes."""
    gen = np.random.Generator(np.random.Philox(hp.seed))
    D = len(score_set)
    U = gen.random((D, num_users, hp.factors))
    V = gen.random((D, num_items, hp.factors))
    return U, V


def fit(train: RatingDataset, hp: Hyperparams, on_iteration=None,
        workers: int | None = None, initial: tuple | None = None) -> BeMFModel:
    """Train a BeMFModel by per-score alternating gradient ascent.

    Each iteration sweeps every score's view: one pass updating all user
    factors against frozen item factors, then one pass updating item
    factors against the already-updated user factors. Scores never share
    state, so the score loop may be spread over threads without changing
    the result.

    Args:
        train: ratings to fit.
        hp: hyperparameters; hp.iterations == 0 returns the bare init.
        on_iteration: optional callback(iteration, costs) where costs holds
            each score's regularized negative log-likelihood after that
            iteration. Computing it costs one extra pass, so it is skipped
            when the callback is None.
        workers: thread count for the score loop (default: BEMF_WORKERS
            or 1). The result never depends on it.
        initial: optional (user_factors, item_factors) tensors to start
            from instead of the seeded init; copied, never mutated.
    """
    workers = resolve_workers(workers)
    D = len(train.score_set)
    if initial is None:
        U, V = initial_factors(train.score_set, train.num_users,
                               train.num_items, hp)
    else:
        U = np.array(initial[0], dtype=np.float64, order="C", copy=True)
        V = np.array(initial[1], dtype=np.float64, order="C", copy=True)
        if U.shape != (D, train.num_users, hp.factors):
            raise ValueError(f"initial user factors must have shape "
                             f"{(D, train.num_users, hp.factors)}, "
                             f"got {U.shape}")
        if V.shape != (D, train.num_items, hp.factors):
            raise ValueError(f"initial item factors must have shape "
                             f"{(D, train.num_items, hp.factors)}, "
                             f"got {V.shape}")

    kern = backend.get_kernels(hp.activation)
    act = get_activation(hp.activation)
    extra = {} if hp.activation == "logistic" else {
        "psi": act.psi, "dpsi": act.dpsi}
    cost_extra = {} if hp.activation == "logistic" else {"psi": act.psi}
    row_match = [(train.user_scores == s).astype(np.uint8) for s in range(D)]
    col_match = [(train.item_user_scores == s).astype(np.uint8) for s in range(D)]

    def sweep(s):
        kern.update_factors(U[s], V[s], train.user_indptr, train.user_items,
                            row_match[s], hp.learning_rate, hp.regularization,
                            **extra)
        kern.update_factors(V[s], U[s], train.item_indptr, train.item_users,
                            col_match[s], hp.learning_rate, hp.regularization,
                            **extra)

    pool = None
    if workers > 1 and D > 1:
        from concurrent.futures import ThreadPoolExecutor
        pool = ThreadPoolExecutor(max_workers=min(workers, D))
    try:
        for it in range(hp.iterations):
            if pool is not None:
                list(pool.map(sweep, range(D)))
            else:
                for s in range(D):
                    sweep(s)
            if not (np.isfinite(U).all() and np.isfinite(V).all()):
                raise TrainingDivergedError(it, "non-finite factor")
            if on_iteration is not None:
                # near-divergent factors may overflow the penalty to inf,
                # which is a meaningful cost value, not an error
                with np.errstate(over="ignore"):
                    costs = np.array([
                        kern.data_cost(U[s], V[s], train.users, train.items,
                                       row_match[s], **cost_extra)
                        + 0.5 * hp.regularization
                        * (float(np.sum(U[s] ** 2)) + float(np.sum(V[s] ** 2)))
                        for s in range(D)])
                on_iteration(it, costs)
    finally:
        if pool is not None:
            pool.shutdown()

    return BeMFModel(train.score_set, U, V, hp, train.user_ids, train.item_ids)


def cost(model: BeMFModel, views: Sequence[BinaryScoreView],
         score_index: int) -> float:
    """Regularized negative log-likelihood of one score's view."""
    from . import _kernels_py
    view = views[score_index]
    ds = view.dataset
    hp = model.hyperparams
    extra = ({} if hp.activation == "logistic"
             else {"psi": get_activation(hp.activation).psi})
    U = model.user_factors[score_index]
    V = model.item_factors[score_index]
    data = _kernels_py.data_cost(U, V, ds.users, ds.items,
                                 view.match_row.astype(np.uint8), **extra)
    reg = 0.5 * hp.regularization * (float(np.sum(U ** 2)) + float(np.sum(V ** 2)))
    return data + reg


def gradient(model: BeMFModel, views: Sequence[BinaryScoreView],
             score_index: int) -> tuple:
    """Exact gradient of cost() w.r.t. one score's factor pair.

    Reference implementation used by tests and by anyone extending the
    training rule; the fitted sweeps apply the same quantity with opposite
    sign scaled by the learning rate.
    """
    view = views[score_index]
    ds = view.dataset
    hp = model.hyperparams
    act = get_activation(hp.activation)
    U = model.user_factors[score_index]
    V = model.item_factors[score_index]
    rows, cols = ds.users, ds.items
    match = view.match_row
    e = np.einsum("ij,ij->i", U[rows], V[cols])
    if hp.activation == "logistic":
        p = np.clip(logistic(e), EPS, 1.0 - EPS)
        coef = -(match - p)
    else:
        p = np.clip(act.psi(e), EPS, 1.0 - EPS)
        num = act.dpsi(e)
        coef = np.where(match, -num / p, num / (1.0 - p))
    dU = hp.regularization * U.copy()
    dV = hp.regularization * V.copy()
    np.add.at(dU, rows, coef[:, None] * V[cols])
    np.add.at(dV, cols, coef[:, None] * U[rows])
    return dU, dV
