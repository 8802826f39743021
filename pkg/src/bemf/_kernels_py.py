"""Pure numpy training kernels.

Mirror of the compiled module in bemf._kernels. Either backend gives
bit-identical results run to run; across backends results agree to rounding
error only, because numpy and the C loops may order float additions
differently.

The factor update treats one side (the "target") as rows of a CSR-like
adjacency whose column entries point into the other side. Updating users
passes (U, V, user adjacency); updating items passes (V, U, item
adjacency). All target rows are updated in one sweep from the other side's
frozen values, so a sweep is independent of row order.
"""

from __future__ import annotations

import numpy as np

# activations are clamped to [EPS, 1 - EPS] before logs and divisions
EPS = 1e-12


def logistic(x):
    """Numerically stable 1 / (1 + exp(-x)) for scalars or arrays."""
    return np.exp(-np.logaddexp(0.0, -x))


def _clamp(p):
    return np.clip(p, EPS, 1.0 - EPS)


def update_factors(target, other, indptr, indices, is_match, lr, reg,
                   psi=None, dpsi=None):
    """One in-place gradient-ascent sweep over all target rows.

    Args:
        target: (n, k) factors being updated.
        other: (m, k) factors held fixed during the sweep.
        indptr, indices: CSR adjacency from target rows to other rows,
            covering every known rating of the view.
        is_match: uint8 per adjacency entry, 1 where the rating equals the
            view's score.
        lr, reg: learning rate and L2 penalty.
        psi, dpsi: optional activation and derivative for non-logistic
            models; None selects the closed-form logistic coefficients.
    """
    counts = np.diff(indptr)
    rows = np.repeat(np.arange(indptr.size - 1), counts)
    e = np.einsum("ij,ij->i", target[rows], other[indices])
    if psi is None:
        p = _clamp(logistic(e))
        coef = is_match - p
    else:
        p = _clamp(psi(e))
        num = dpsi(e)
        coef = np.where(is_match, num / p, -num / (1.0 - p))
    grad = np.zeros_like(target)
    if e.size:
        nz = counts > 0
        grad[nz] = np.add.reduceat(coef[:, None] * other[indices],
                                   indptr[:-1][nz], axis=0)
    target += lr * (grad - reg * target)


def data_cost(U, V, rows, cols, is_match, psi=None):
    """Negative log-likelihood of one view's observed entries."""
    e = np.einsum("ij,ij->i", U[rows], V[cols])
    p = _clamp(logistic(e) if psi is None else psi(e))
    ll = np.where(is_match, np.log(p), np.log1p(-p))
    return float(-ll.sum())


def sgd_epoch(P, Q, user_bias, item_bias, users, items, values, order,
              mu, lr, reg, use_bias):
    """One stochastic pass over ratings in the given visiting order.

    Plain squared-error matrix factorization step, optionally with global
    mean and additive biases. Updates arrays in place. The compiled twin
    runs the same arithmetic in the same order.
    """
    k = P.shape[1]
    for t in order:
        u = users[t]
        i = items[t]
        pred = 0.0
        for f in range(k):
            pred += P[u, f] * Q[i, f]
        if use_bias:
            pred += mu + user_bias[u] + item_bias[i]
        err = values[t] - pred
        if use_bias:
            user_bias[u] += lr * (err - reg * user_bias[u])
            item_bias[i] += lr * (err - reg * item_bias[i])
        for f in range(k):
            pf = P[u, f]
            qf = Q[i, f]
            P[u, f] = pf + lr * (err * qf - reg * pf)
            Q[i, f] = qf + lr * (err * pf - reg * qf)
