import numpy as np
import pytest

from bemf import (RatingDataset, ScoreSet, parse_ratings, score_views,
                  split_train_test)
from bemf.synthetic import make_synthetic_dataset

import worked_example as wx

FIVE = ScoreSet([1, 2, 3, 4, 5])


def _parse(text, score_set=FIVE, **kw):
    return parse_ratings(text.splitlines(), score_set, **kw)


class TestParsing:
    def test_basic_tsv(self):
        ds = _parse("alice\tmatrix\t5\nbob\tmatrix\t3\nalice\tbrazil\t1\n")
        assert ds.num_users == 2 and ds.num_items == 2 and ds.num_ratings == 3
        # first-appearance index assignment
        assert ds.user_ids == ["alice", "bob"]
        assert ds.item_ids == ["matrix", "brazil"]
        assert list(ds.ratings()) == [(0, 0, 4), (0, 1, 0), (1, 0, 2)]

    def test_comma_separator_and_header(self):
        ds = _parse("user,item,rating\nu1,i1,2\n", separator=",", header=True)
        assert ds.num_ratings == 1
        assert ds.score_idx[0] == 1

    def test_blank_lines_ignored(self):
        ds = _parse("\nu1\ti1\t4\n\n   \nu2\ti1\t2\n\n")
        assert ds.num_ratings == 2

    def test_half_star_values(self):
        ds = _parse("u\ti\t3.5\n", ScoreSet.from_spec("0.5,4.0,0.5"))
        assert ds.score_idx[0] == 6

    def test_field_count_error_names_line(self):
        with pytest.raises(ValueError, match="line 2"):
            _parse("u\ti\t3\nu\ti\n")
        with pytest.raises(ValueError, match="expected 3 fields"):
            _parse("u\ti\t3\textra\n")

    def test_rating_outside_score_set_names_line(self):
        with pytest.raises(ValueError, match="line 1.*'6'"):
            _parse("u\ti\t6\n")
        with pytest.raises(ValueError, match="line 1"):
            _parse("u\ti\t4.5\n")

    def test_duplicate_pair_rejected(self):
        with pytest.raises(ValueError, match="line 3.*duplicate"):
            _parse("u\ti\t3\nu\tj\t3\nu\ti\t5\n")

    def test_empty_id_rejected(self):
        with pytest.raises(ValueError, match="empty user or item id"):
            _parse("\ti\t3\n")

    def test_fixed_index_maps_reject_unknown_ids(self):
        train = _parse("a\tx\t3\nb\ty\t4\n")
        user_index = {uid: u for u, uid in enumerate(train.user_ids)}
        item_index = {iid: i for i, iid in enumerate(train.item_ids)}
        test = _parse("a\ty\t5\n", user_index=user_index,
                      item_index=item_index)
        assert list(test.ratings()) == [(0, 1, 4)]
        with pytest.raises(ValueError, match="unknown user id 'c'"):
            _parse("c\tx\t3\n", user_index=user_index, item_index=item_index)
        with pytest.raises(ValueError, match="unknown item id 'z'"):
            _parse("a\tz\t3\n", user_index=user_index, item_index=item_index)

    def test_round_trip_through_text(self):
        # indices may be renumbered by first appearance, but the set of
        # (user id, item id, value) triples must survive exactly
        ds = make_synthetic_dataset(num_users=20, num_items=15,
                                    density=0.4, seed=11)
        again = parse_ratings(ds.to_lines("\t"), ds.score_set)
        assert again.score_set == ds.score_set
        assert sorted(again.to_lines("\t")) == sorted(ds.to_lines("\t"))
        assert again.num_ratings == ds.num_ratings

    def test_half_star_round_trip(self):
        s = ScoreSet.from_spec("0.5,4.0,0.5")
        ds = _parse("u\ti\t0.5\nu\tj\t4.0\n", s)
        lines = list(ds.to_lines("\t"))
        assert lines == ["u\ti\t0.5", "u\tj\t4"]
        again = parse_ratings(lines, s)
        assert np.array_equal(again.score_idx, ds.score_idx)


class TestDatasetInvariants:
    def test_duplicate_detection_in_constructor(self):
        with pytest.raises(ValueError, match="duplicate"):
            RatingDataset(FIVE, ["a"], ["x", "y"],
                          [0, 0], [1, 1], [0, 3])

    def test_out_of_range_indices(self):
        with pytest.raises(ValueError, match="user index"):
            RatingDataset(FIVE, ["a"], ["x"], [1], [0], [0])
        with pytest.raises(ValueError, match="score index"):
            RatingDataset(FIVE, ["a"], ["x"], [0], [0], [5])

    def test_entries_sorted_regardless_of_input_order(self):
        ds = RatingDataset(FIVE, ["a", "b"], ["x", "y"],
                           [1, 0, 0], [0, 1, 0], [0, 1, 2])
        assert list(zip(ds.users, ds.items)) == [(0, 0), (0, 1), (1, 0)]
        assert list(ds.score_idx) == [2, 1, 0]

    def test_adjacency_consistency_random(self):
        for seed in range(20):
            ds = make_synthetic_dataset(num_users=12, num_items=9,
                                        density=0.5, seed=seed)
            ds.validate()

    def test_user_row_and_item_col(self):
        ds = wx.build_dataset()
        items, scores = ds.user_row(1)
        assert list(items) == [0, 2, 3, 4]
        assert list(scores) == [wx.LIKE, wx.LIKE, wx.DISLIKE, wx.DISLIKE]
        users, scores = ds.item_col(2)
        assert list(users) == [1, 2, 3]
        assert list(scores) == [wx.LIKE, wx.LIKE, wx.DISLIKE]

    def test_score_counts(self):
        ds = wx.build_dataset()
        assert list(ds.score_counts()) == [6, 8]


class TestScoreViews:
    def test_worked_example_views_exactly(self):
        ds = wx.build_dataset()
        like, dislike = score_views(ds)[wx.LIKE], score_views(ds)[wx.DISLIKE]
        like_pos = set(zip(*(a.tolist() for a in like.positives())))
        assert like_pos == {(0, 1), (0, 3), (1, 0), (1, 2), (2, 1), (2, 2),
                            (3, 4), (3, 5)}
        dislike_pos = set(zip(*(a.tolist() for a in dislike.positives())))
        assert dislike_pos == {(0, 0), (1, 3), (1, 4), (2, 5), (3, 0), (3, 2)}
        # each view's negatives are exactly the other view's positives here
        assert set(zip(*(a.tolist() for a in like.negatives()))) == dislike_pos
        assert set(zip(*(a.tolist() for a in dislike.negatives()))) == like_pos

    def test_views_partition_known_ratings(self):
        ds = make_synthetic_dataset(num_users=15, num_items=10,
                                    density=0.5, seed=3)
        views = score_views(ds)
        assert sum(v.num_positives for v in views) == ds.num_ratings
        for v in views:
            assert v.num_positives + v.num_negatives == ds.num_ratings
        # positives across views are disjoint and cover all rated pairs
        seen = set()
        for v in views:
            pos = set(zip(*(a.tolist() for a in v.positives())))
            assert not (pos & seen)
            seen |= pos
        assert seen == set(zip(ds.users.tolist(), ds.items.tolist()))

    def test_score_index_out_of_range(self):
        from bemf import BinaryScoreView
        with pytest.raises(ValueError):
            BinaryScoreView(wx.build_dataset(), 2)


class TestSplit:
    def test_deterministic_given_seed(self):
        ds = make_synthetic_dataset(num_users=30, num_items=20,
                                    density=0.4, seed=5)
        a = split_train_test(ds, 0.2, 42)
        b = split_train_test(ds, 0.2, 42)
        assert np.array_equal(a.train.users, b.train.users)
        assert np.array_equal(a.test_users, b.test_users)
        assert np.array_equal(a.test_scores, b.test_scores)
        c = split_train_test(ds, 0.2, 43)
        assert not np.array_equal(a.test_users, c.test_users)

    def test_partition_is_exact(self):
        ds = make_synthetic_dataset(num_users=30, num_items=20,
                                    density=0.4, seed=5)
        sp = split_train_test(ds, 0.3, 7)
        assert sp.train.num_ratings + sp.num_test == ds.num_ratings
        train_pairs = set(zip(sp.train.users.tolist(), sp.train.items.tolist()))
        test_pairs = set(zip(sp.test_users.tolist(), sp.test_items.tolist()))
        assert not (train_pairs & test_pairs)
        all_pairs = set(zip(ds.users.tolist(), ds.items.tolist()))
        assert train_pairs | test_pairs == all_pairs

    def test_dimensions_preserved(self):
        # user 0 has a single rating; push it to test and check the train
        # side keeps the full universe
        ds = RatingDataset(FIVE, ["a", "b"], ["x", "y"],
                           [0, 1, 1], [0, 0, 1], [0, 1, 2])
        for seed in range(50):
            sp = split_train_test(ds, 0.5, seed)
            assert sp.train.num_users == 2 and sp.train.num_items == 2
            if 0 not in sp.train.users:
                break
        else:
            pytest.fail("no seed ever sent user 0's only rating to test")

    def test_ratio_close_at_scale(self):
        ds = make_synthetic_dataset(num_users=600, num_items=300,
                                    density=0.25, seed=9)
        assert ds.num_ratings > 40000
        sp = split_train_test(ds, 0.2, 123)
        observed = sp.num_test / ds.num_ratings
        assert abs(observed - 0.2) < 0.01

    def test_invalid_ratio(self):
        ds = wx.build_dataset()
        for ratio in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                split_train_test(ds, ratio, 0)

    def test_empty_dataset_rejected(self):
        empty = RatingDataset(FIVE, [], [], [], [], [])
        with pytest.raises(ValueError, match="empty"):
            split_train_test(empty, 0.2, 0)
