"""Hand-checkable two-score example shared by several test modules.

Four users rate six items on a like/dislike scale (value 1 = like, value
0 = dislike, so score index 0 is "dislike" and 1 is "like"). The reference
factor tables published with this example are two-decimal roundings;
REFERENCE_TOLERANCE reflects that. fit() with k=3, lr=0.1, reg=0.01 and one
iteration starting from INIT_* is the training scenario the reference
tables describe.
"""

import numpy as np

from bemf import Hyperparams, RatingDataset, ScoreSet

SCORE_SET = ScoreSet([0, 1])  # 0 = dislike, 1 = like
DISLIKE, LIKE = 0, 1

# (user, item, score index); items without an entry are unrated
RATINGS = [
    (0, 0, DISLIKE), (0, 1, LIKE), (0, 3, LIKE),
    (1, 0, LIKE), (1, 2, LIKE), (1, 3, DISLIKE), (1, 4, DISLIKE),
    (2, 1, LIKE), (2, 2, LIKE), (2, 5, DISLIKE),
    (3, 0, DISLIKE), (3, 2, DISLIKE), (3, 4, LIKE), (3, 5, LIKE),
]

NUM_USERS, NUM_ITEMS, NUM_FACTORS = 4, 6, 3

HYPERPARAMS = Hyperparams(factors=3, learning_rate=0.1, regularization=0.01,
                          iterations=1, activation="logistic", seed=0)

# published tables are rounded to two decimals
REFERENCE_TOLERANCE = 0.02

# initial factors, indexed [score, row, factor]; score 0 = dislike
INIT_USER_FACTORS = np.array([
    [[0.61, 0.83, 0.47],
     [0.12, 0.02, 0.54],
     [0.11, 0.41, 0.07],
     [0.81, 0.92, 0.52]],
    [[0.99, 0.26, 0.55],
     [0.77, 0.77, 0.85],
     [0.20, 0.27, 0.35],
     [0.11, 0.96, 0.13]],
])

INIT_ITEM_FACTORS = np.array([
    [[0.92, 0.53, 0.67],
     [0.40, 0.24, 0.12],
     [0.64, 0.22, 0.89],
     [0.64, 0.86, 0.60],
     [0.51, 0.12, 0.41],
     [0.92, 0.23, 0.75]],
    [[0.91, 0.15, 0.27],
     [0.54, 0.54, 0.79],
     [0.31, 0.57, 0.09],
     [1.00, 0.83, 0.75],
     [0.68, 0.03, 0.05],
     [0.35, 0.50, 0.75]],
])

# reference factors after one iteration (two-decimal roundings)
REFERENCE_USER_FACTORS = np.array([
    [[0.55, 0.76, 0.43],
     [0.07, 0.02, 0.49],
     [0.10, 0.39, 0.05],
     [0.73, 0.90, 0.46]],
    [[0.96, 0.27, 0.56],
     [0.72, 0.75, 0.81],
     [0.21, 0.29, 0.34],
     [0.05, 0.92, 0.12]],
])

REFERENCE_ITEM_FACTORS = np.array([
    [[0.90, 0.52, 0.66],
     [0.36, 0.21, 0.11],
     [0.57, 0.20, 0.80],
     [0.61, 0.82, 0.58],
     [0.50, 0.12, 0.40],
     [0.89, 0.22, 0.73]],
    [[0.82, 0.13, 0.24],
     [0.58, 0.58, 0.84],
     [0.31, 0.58, 0.09],
     [0.95, 0.79, 0.71],
     [0.66, 0.03, 0.05],
     [0.34, 0.48, 0.72]],
])

# the example's worked prediction for (user 0, item 2) from the reference
# factors: activations (dislike, like), their normalization, and the result
PREDICTION_USER = 0
PREDICTION_ITEM = 2
REFERENCE_ACTIVATIONS = np.array([0.71, 0.62])
REFERENCE_DISTRIBUTION = np.array([0.53, 0.47])
REFERENCE_PREDICTED_INDEX = DISLIKE
REFERENCE_RELIABILITY = 0.53


def build_dataset() -> RatingDataset:
    users, items, scores = zip(*RATINGS)
    return RatingDataset(SCORE_SET,
                         [f"u{u + 1}" for u in range(NUM_USERS)],
                         [f"i{i + 1}" for i in range(NUM_ITEMS)],
                         users, items, scores)
