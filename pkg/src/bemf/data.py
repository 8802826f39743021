"""Sparse rating data: parsing, holdout splits, and per-score binary views.

A RatingDataset stores one rating per (user, item) pair over a fixed
ScoreSet. Ratings live in coordinate arrays sorted by (user, item), with
compressed row/column adjacency built once on construction so that models
can sweep users or items without touching a dense matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .scores import ScoreSet

SEPARATORS = {"tab": "\t", "comma": ","}


class RatingDataset:
    """Immutable sparse matrix of ratings addressed by integer indices.

    Attributes:
        score_set: the rating scale.
        user_ids / item_ids: external id for each row / column index.
        users, items, score_idx: aligned int64 arrays, one entry per known
            rating, sorted by (user, item). score_idx holds indices into
            score_set, not rating values.
    """

    def __init__(self, score_set: ScoreSet, user_ids: Sequence[str],
                 item_ids: Sequence[str], users, items, score_idx):
        self.score_set = score_set
        self.user_ids = list(user_ids)
        self.item_ids = list(item_ids)
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        score_idx = np.asarray(score_idx, dtype=np.int64)
        if not (users.shape == items.shape == score_idx.shape):
            raise ValueError("rating arrays must have identical length")
        order = np.lexsort((items, users))
        self.users = users[order]
        self.items = items[order]
        self.score_idx = score_idx[order]
        self._check_entries()
        self._build_adjacency()

    def _check_entries(self):
        n, m, d = len(self.user_ids), len(self.item_ids), len(self.score_set)
        if self.users.size:
            if self.users.min() < 0 or self.users.max() >= n:
                raise ValueError("user index out of range")
            if self.items.min() < 0 or self.items.max() >= m:
                raise ValueError("item index out of range")
            if self.score_idx.min() < 0 or self.score_idx.max() >= d:
                raise ValueError("score index out of range")
            same = (np.diff(self.users) == 0) & (np.diff(self.items) == 0)
            if same.any():
                k = int(np.flatnonzero(same)[0])
                raise ValueError(
                    f"duplicate rating for user {self.user_ids[self.users[k]]} "
                    f"item {self.item_ids[self.items[k]]}")

    def _build_adjacency(self):
        n, m = self.num_users, self.num_items
        # rows: the COO arrays are already user-major
        self.user_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.users, minlength=n), out=self.user_indptr[1:])
        self.user_items = self.items
        self.user_scores = self.score_idx
        # columns: stable re-sort by item keeps users ascending inside a column
        col_order = np.argsort(self.items, kind="stable")
        self.item_indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.items, minlength=m), out=self.item_indptr[1:])
        self.item_users = self.users[col_order]
        self.item_user_scores = self.score_idx[col_order]

    # -- basic facts ----------------------------------------------------

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_items(self) -> int:
        return len(self.item_ids)

    @property
    def num_ratings(self) -> int:
        return int(self.users.size)

    def score_counts(self) -> np.ndarray:
        """Number of ratings at each score index."""
        return np.bincount(self.score_idx, minlength=len(self.score_set))

    def ratings(self) -> Iterator[tuple]:
        """Yield (user, item, score_index) in (user, item) order."""
        for u, i, s in zip(self.users, self.items, self.score_idx):
            yield int(u), int(i), int(s)

    def user_row(self, u: int) -> tuple:
        """Items rated by user u and the matching score indices."""
        lo, hi = self.user_indptr[u], self.user_indptr[u + 1]
        return self.user_items[lo:hi], self.user_scores[lo:hi]

    def item_col(self, i: int) -> tuple:
        """Users who rated item i and the matching score indices."""
        lo, hi = self.item_indptr[i], self.item_indptr[i + 1]
        return self.item_users[lo:hi], self.item_user_scores[lo:hi]

    def to_lines(self, separator: str = "\t") -> Iterator[str]:
        """Render back to text rows (lossless, canonical value labels)."""
        labels = self.score_set.labels
        for u, i, s in zip(self.users, self.items, self.score_idx):
            yield (f"{self.user_ids[u]}{separator}{self.item_ids[i]}"
                   f"{separator}{labels[s]}")

    def validate(self):
        """Re-check the representation invariants (used by tests)."""
        self._check_entries()
        keys = self.users * (self.num_items + 1) + self.items
        assert (np.diff(keys) > 0).all(), "entries not sorted by (user, item)"
        for u in range(self.num_users):
            cols, _ = self.user_row(u)
            assert (self.users[self.user_indptr[u]:self.user_indptr[u + 1]] == u).all()
            assert (np.diff(cols) > 0).all()
        for i in range(self.num_items):
            rows, scores = self.item_col(i)
            assert (np.diff(rows) > 0).all()
            for r, s in zip(rows, scores):
                lo, hi = self.user_indptr[r], self.user_indptr[r + 1]
                k = lo + int(np.searchsorted(self.user_items[lo:hi], i))
                assert self.user_items[k] == i and self.user_scores[k] == s
        assert int(self.user_indptr[-1]) == self.num_ratings
        assert int(self.item_indptr[-1]) == self.num_ratings


def parse_ratings(lines: Iterable[str], score_set: ScoreSet,
                  separator: str = "\t", header: bool = False,
                  user_index: dict | None = None,
                  item_index: dict | None = None) -> RatingDataset:
    """Parse `user<sep>item<sep>rating` rows into a RatingDataset.

    Ids are assigned dense integer indices in order of first appearance.
    When user_index/item_index maps are given they are authoritative: ids
    absent from them are an error (used to parse a test file against a
    training universe). Malformed rows, ratings outside the score set and
    duplicate (user, item) pairs raise ValueError naming the line number.

    Args:
        lines: iterable of text rows; blank rows are ignored.
        score_set: scale the rating column must belong to.
        separator: field separator character.
        header: skip the first non-blank row.
    """
    fixed_users = user_index is not None
    fixed_items = item_index is not None
    user_index = dict(user_index) if fixed_users else {}
    item_index = dict(item_index) if fixed_items else {}
    user_ids = [None] * len(user_index)
    for uid, idx in user_index.items():
        user_ids[idx] = uid
    item_ids = [None] * len(item_index)
    for iid, idx in item_index.items():
        item_ids[idx] = iid

    users, items, score_idx = [], [], []
    seen = set()
    skipped_header = not header
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if not skipped_header:
            skipped_header = True
            continue
        fields = [f.strip() for f in line.split(separator)]
        if len(fields) != 3:
            raise ValueError(
                f"line {lineno}: expected 3 fields separated by "
                f"{separator!r}, got {len(fields)}")
        uid, iid, token = fields
        if not uid or not iid:
            raise ValueError(f"line {lineno}: empty user or item id")
        try:
            s = score_set.index_of(token)
        except (KeyError, ValueError):
            raise ValueError(
                f"line {lineno}: rating {token!r} not in score set "
                f"[{', '.join(score_set.labels)}]") from None
        if uid not in user_index:
            if fixed_users:
                raise ValueError(f"line {lineno}: unknown user id {uid!r}")
            user_index[uid] = len(user_ids)
            user_ids.append(uid)
        if iid not in item_index:
            if fixed_items:
                raise ValueError(f"line {lineno}: unknown item id {iid!r}")
            item_index[iid] = len(item_ids)
            item_ids.append(iid)
        u, i = user_index[uid], item_index[iid]
        if (u, i) in seen:
            raise ValueError(
                f"line {lineno}: duplicate rating for user {uid!r} item {iid!r}")
        seen.add((u, i))
        users.append(u)
        items.append(i)
        score_idx.append(s)

    return RatingDataset(score_set, user_ids, item_ids, users, items, score_idx)


def load_ratings(path, score_set: ScoreSet, separator: str = "\t",
                 header: bool = False, user_index: dict | None = None,
                 item_index: dict | None = None) -> RatingDataset:
    """parse_ratings over a text file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_ratings(fh, score_set, separator=separator, header=header,
                             user_index=user_index, item_index=item_index)


@dataclass
class SplitDataset:
    """A train dataset plus held-out test triples from the same universe.

    The train part keeps the full user/item dimensions even when a row or
    column loses all its ratings to the test side.
    """
    train: RatingDataset
    test_users: np.ndarray
    test_items: np.ndarray
    test_scores: np.ndarray
    test_ratio: float
    seed: int

    @property
    def num_test(self) -> int:
        return int(self.test_users.size)

    def test_triples(self) -> Iterator[tuple]:
        for u, i, s in zip(self.test_users, self.test_items, self.test_scores):
            yield int(u), int(i), int(s)


def split_train_test(dataset: RatingDataset, test_ratio: float,
                     seed: int) -> SplitDataset:
    """Random per-rating holdout split.

    Every rating is sent to the test side independently with probability
    test_ratio, using one uniform draw per rating in (user, item) order, so
    the split is a pure function of (dataset, test_ratio, seed).
    """
    if not 0.0 < test_ratio < 1.0:
        raise ValueError(f"test_ratio must be in (0, 1), got {test_ratio}")
    if dataset.num_ratings == 0:
        raise ValueError("cannot split an empty dataset")
    draws = np.random.Generator(np.random.Philox(seed)).random(dataset.num_ratings)
    mask = draws < test_ratio
    train = RatingDataset(dataset.score_set, dataset.user_ids, dataset.item_ids,
                          dataset.users[~mask], dataset.items[~mask],
                          dataset.score_idx[~mask])
    return SplitDataset(train=train,
                        test_users=dataset.users[mask].copy(),
                        test_items=dataset.items[mask].copy(),
                        test_scores=dataset.score_idx[mask].copy(),
                        test_ratio=test_ratio, seed=seed)


class BinaryScoreView:
    """One score's binary relabeling of a dataset.

    Pairs rated exactly at the view's score are positives, pairs rated at
    any other score are negatives, and unrated pairs belong to neither
    class. The view is a stencil over the dataset arrays, not a copy.
    """

    def __init__(self, dataset: RatingDataset, score_index: int):
        if not 0 <= score_index < len(dataset.score_set):
            raise ValueError(f"score index {score_index} out of range")
        self.dataset = dataset
        self.score_index = int(score_index)
        self.match_row = (dataset.user_scores == score_index)
        self.match_col = (dataset.item_user_scores == score_index)

    @property
    def num_positives(self) -> int:
        return int(self.match_row.sum())

    @property
    def num_negatives(self) -> int:
        return int(self.match_row.size - self.num_positives)

    def positives(self) -> tuple:
        """(users, items) arrays of pairs rated exactly at this score."""
        m = self.match_row
        return self.dataset.users[m], self.dataset.items[m]

    def negatives(self) -> tuple:
        """(users, items) arrays of pairs rated at a different score."""
        m = ~self.match_row
        return self.dataset.users[m], self.dataset.items[m]


def score_views(dataset: RatingDataset) -> list:
    """One BinaryScoreView per score, in score order."""
    return [BinaryScoreView(dataset, s) for s in range(len(dataset.score_set))]
