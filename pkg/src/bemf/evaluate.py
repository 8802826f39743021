"""Evaluation metrics, ranked recommendations, and report emission.

Conventions used throughout: predicted values are floats with NaN marking
an abstention, actual values are on the score scale, and reliabilities live
in [0, 1]. MAE averages only over emitted predictions while coverage
reports how many pairs got one, so the two must be read together.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .scores import ScoreSet


def mae(actual_values, predicted_values) -> float | None:
    """Mean absolute error over emitted predictions; None if none exist."""
    actual = np.asarray(actual_values, dtype=np.float64)
    pred = np.asarray(predicted_values, dtype=np.float64)
    keep = np.isfinite(pred)
    if not keep.any():
        return None
    return float(np.mean(np.abs(actual[keep] - pred[keep])))


def coverage(predicted_values) -> float:
    """Fraction of pairs that received a prediction."""
    pred = np.asarray(predicted_values, dtype=np.float64)
    if pred.size == 0:
        return 0.0
    return float(np.isfinite(pred).mean())


def rpi(reliabilities, abs_errors) -> float:
    """Agreement between reliability and accuracy.

    Positive when high reliability goes with small absolute error
    (negated Pearson correlation); 0 for degenerate inputs (fewer than two
    pairs, or either side constant).
    """
    rel = np.asarray(reliabilities, dtype=np.float64)
    err = np.asarray(abs_errors, dtype=np.float64)
    if rel.size != err.size:
        raise ValueError("reliability and error arrays differ in length")
    if rel.size < 2:
        return 0.0
    x = rel - rel.mean()
    y = err - err.mean()
    denom = np.sqrt(np.sum(x * x) * np.sum(y * y))
    if denom == 0.0:
        return 0.0
    return float(-np.sum(x * y) / denom)


def confusion_matrix(actual_idx, predicted_idx, num_scores: int) -> np.ndarray:
    """Row-normalized confusion of score indices.

    Abstentions (predicted index < 0) are skipped. Rows whose true score
    never occurs stay all-zero instead of dividing by zero.
    """
    actual = np.asarray(actual_idx, dtype=np.int64)
    pred = np.asarray(predicted_idx, dtype=np.int64)
    keep = pred >= 0
    counts = np.zeros((num_scores, num_scores), dtype=np.float64)
    np.add.at(counts, (actual[keep], pred[keep]), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    out = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return out


def reliability_histogram(reliabilities, bin_width: float = 0.05):
    """Histogram of reliabilities over [0, 1].

    Returns (edges, counts) with len(edges) == len(counts) + 1; the last
    bin is closed so reliability 1.0 lands in it.
    """
    rel = np.asarray(reliabilities, dtype=np.float64)
    nbins = int(round(1.0 / bin_width))
    edges = np.linspace(0.0, 1.0, nbins + 1)
    # multiply rather than divide: rel * nbins is exact at the k/nbins
    # boundaries, rel / bin_width is not (e.g. 0.95 / 0.05 floors to 18)
    idx = np.minimum((rel * nbins).astype(np.int64), nbins - 1)
    counts = np.bincount(idx, minlength=nbins)
    return edges, counts


# -- ranked recommendations -------------------------------------------------


def _rank_top_n(users, items, scores, keep, n: int) -> dict:
    """Group kept pairs by user, sort by (-score, item), truncate to n."""
    recs = {int(u): [] for u in np.unique(users)}
    order = np.lexsort((items, -np.asarray(scores, dtype=np.float64)))
    for t in order:
        if keep[t]:
            bucket = recs[int(users[t])]
            if len(bucket) < n:
                bucket.append(int(items[t]))
    return recs


def recommend_by_reliability(model, test_users, test_items, n: int,
                             like_value: float,
                             min_probability: float = 0.0) -> dict:
    """Top-n test items per user by probability of liking.

    The probability of liking a pair is the predicted distribution's total
    mass on scores >= like_value. Pairs below min_probability are not
    recommendable; users may end up with fewer than n or zero items.
    """
    users = np.asarray(test_users, dtype=np.int64)
    items = np.asarray(test_items, dtype=np.int64)
    probs, _, _ = model.predict_batch(users, items)
    values = np.asarray(model.score_set.values)
    like_mass = probs[:, values >= like_value].sum(axis=1)
    keep = like_mass >= min_probability
    return _rank_top_n(users, items, like_mass, keep, n)


def recommend_by_prediction(predicted_values, test_users, test_items, n: int,
                            like_value: float) -> dict:
    """Top-n test items per user by predicted value, dropping sub-threshold
    and abstained pairs."""
    users = np.asarray(test_users, dtype=np.int64)
    items = np.asarray(test_items, dtype=np.int64)
    pred = np.asarray(predicted_values, dtype=np.float64)
    keep = np.isfinite(pred) & (pred >= like_value)
    safe = np.where(np.isfinite(pred), pred, -np.inf)
    return _rank_top_n(users, items, safe, keep, n)


def precision_recall_at_n(recommendations: dict, test_users, test_items,
                          test_values, like_value: float) -> tuple:
    """Average precision and recall of recommendation lists.

    Precision for a user divides hits by that user's list length and
    averages over users with non-empty lists; recall divides hits by the
    user's liked test items and averages over users who have at least one.
    Either average is None when no user qualifies.
    """
    users = np.asarray(test_users, dtype=np.int64)
    items = np.asarray(test_items, dtype=np.int64)
    values = np.asarray(test_values, dtype=np.float64)
    liked: dict = {}
    for u, i, v in zip(users, items, values):
        if v >= like_value:
            liked.setdefault(int(u), set()).add(int(i))
    precisions = []
    recalls = []
    for u in recommendations:
        rec = recommendations[u]
        liked_u = liked.get(u, set())
        hits = sum(1 for i in rec if i in liked_u)
        if rec:
            precisions.append(hits / len(rec))
        if liked_u:
            recalls.append(hits / len(liked_u))
    precision = float(np.mean(precisions)) if precisions else None
    recall = float(np.mean(recalls)) if recalls else None
    return precision, recall


# -- threshold sweeps --------------------------------------------------------


@dataclass
class SweepPoint:
    threshold: float
    mae: float | None
    coverage: float


def prediction_sweep(predicted_values, reliabilities, actual_values,
                     thresholds) -> list:
    """MAE and coverage as the reliability threshold rises.

    A pair counts as predicted at threshold t when the base prediction
    exists and its reliability is >= t; below-threshold pairs become
    abstentions. MAE is None at points where everything abstains.
    """
    pred = np.asarray(predicted_values, dtype=np.float64)
    rel = np.asarray(reliabilities, dtype=np.float64)
    actual = np.asarray(actual_values, dtype=np.float64)
    points = []
    for t in thresholds:
        gated = np.where(np.isfinite(pred) & (rel >= t), pred, np.nan)
        points.append(SweepPoint(float(t), mae(actual, gated), coverage(gated)))
    return points


@dataclass
class RecommendationPoint:
    threshold: float
    precision: float | None
    recall: float | None


def recommendation_sweep(model, test_users, test_items, test_values,
                         thresholds, n: int, like_value: float) -> list:
    """Precision/recall of reliability-ranked lists as the floor rises."""
    points = []
    for t in thresholds:
        recs = recommend_by_reliability(model, test_users, test_items, n,
                                        like_value, min_probability=float(t))
        p, r = precision_recall_at_n(recs, test_users, test_items,
                                     test_values, like_value)
        points.append(RecommendationPoint(float(t), p, r))
    return points


# -- report -------------------------------------------------------------


def fmt(x) -> str:
    """Numbers with 10 significant digits; blank for missing values."""
    if x is None:
        return ""
    if isinstance(x, float) and not np.isfinite(x):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


@dataclass
class EvalReport:
    """Everything `bemf evaluate` measures, plus CSV emission."""
    model_kind: str
    score_labels: list
    num_test: int
    like_value: float
    top_n: int
    mae: float | None
    coverage: float
    rpi: float | None
    precision: float | None
    recall: float | None
    prediction_curve: list = field(default_factory=list)
    recommendation_curve: list = field(default_factory=list)
    confusion: np.ndarray | None = None
    histogram: tuple | None = None
    extra_rows: list = field(default_factory=list)

    def summary_rows(self) -> list:
        return [
            ("model", self.model_kind),
            ("test_pairs", str(self.num_test)),
            ("like_threshold", fmt(self.like_value)),
            ("top_n", str(self.top_n)),
            ("mae", fmt(self.mae)),
            ("coverage", fmt(self.coverage)),
            ("rpi", fmt(self.rpi)),
            ("precision", fmt(self.precision)),
            ("recall", fmt(self.recall)),
        ] + [(k, str(v)) for k, v in self.extra_rows]

    def write(self, outdir) -> list:
        """Write the CSV files; returns the paths written."""
        os.makedirs(outdir, exist_ok=True)
        written = []

        def _open(name):
            path = os.path.join(outdir, name)
            written.append(path)
            return open(path, "w", newline="", encoding="utf-8")

        with _open("summary.csv") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "value"])
            w.writerows(self.summary_rows())
        if self.prediction_curve:
            with _open("prediction_curve.csv") as fh:
                w = csv.writer(fh)
                w.writerow(["threshold", "mae", "coverage"])
                for pt in self.prediction_curve:
                    w.writerow([fmt(pt.threshold), fmt(pt.mae),
                                fmt(pt.coverage)])
        if self.recommendation_curve:
            with _open("recommendation_curve.csv") as fh:
                w = csv.writer(fh)
                w.writerow(["threshold", "precision", "recall"])
                for pt in self.recommendation_curve:
                    w.writerow([fmt(pt.threshold), fmt(pt.precision),
                                fmt(pt.recall)])
        if self.confusion is not None:
            with _open("confusion_matrix.csv") as fh:
                w = csv.writer(fh)
                w.writerow(["actual\\predicted"] + list(self.score_labels))
                for label, row in zip(self.score_labels, self.confusion):
                    w.writerow([label] + [fmt(v) for v in row])
        if self.histogram is not None:
            edges, counts = self.histogram
            with _open("reliability_histogram.csv") as fh:
                w = csv.writer(fh)
                w.writerow(["bin_start", "bin_end", "count"])
                for b in range(len(counts)):
                    w.writerow([fmt(edges[b]), fmt(edges[b + 1]),
                                str(int(counts[b]))])
        return written
