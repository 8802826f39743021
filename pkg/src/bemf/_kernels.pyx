# Compiled training kernels; bemf._kernels_py documents the contract.
# Loops release the GIL so score factorizations can run on threads.

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, log1p

cnp.import_array()

cdef double EPS = 1e-12


cdef inline double clogistic(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def update_factors(double[:, ::1] target, double[:, ::1] other,
                   cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
                   cnp.uint8_t[::1] is_match, double lr, double reg):
    cdef Py_ssize_t n = target.shape[0]
    cdef Py_ssize_t k = target.shape[1]
    cdef Py_ssize_t r, j, f
    cdef cnp.int64_t c
    cdef double e, p, coef
    grad_arr = np.zeros(k, dtype=np.float64)
    cdef double[::1] grad = grad_arr
    with nogil:
        for r in range(n):
            for f in range(k):
                grad[f] = 0.0
            for j in range(indptr[r], indptr[r + 1]):
                c = indices[j]
                e = 0.0
                for f in range(k):
                    e += target[r, f] * other[c, f]
                p = clogistic(e)
                if p < EPS:
                    p = EPS
                elif p > 1.0 - EPS:
                    p = 1.0 - EPS
                coef = (1.0 if is_match[j] else 0.0) - p
                for f in range(k):
                    grad[f] += coef * other[c, f]
            for f in range(k):
                target[r, f] += lr * (grad[f] - reg * target[r, f])


def data_cost(double[:, ::1] U, double[:, ::1] V,
              cnp.int64_t[::1] rows, cnp.int64_t[::1] cols,
              cnp.uint8_t[::1] is_match):
    cdef Py_ssize_t nnz = rows.shape[0]
    cdef Py_ssize_t k = U.shape[1]
    cdef Py_ssize_t t, f
    cdef cnp.int64_t u, i
    cdef double e, p, total = 0.0
    with nogil:
        for t in range(nnz):
            u = rows[t]
            i = cols[t]
            e = 0.0
            for f in range(k):
                e += U[u, f] * V[i, f]
            p = clogistic(e)
            if p < EPS:
                p = EPS
            elif p > 1.0 - EPS:
                p = 1.0 - EPS
            if is_match[t]:
                total += log(p)
            else:
                total += log1p(-p)
    return -total


def sgd_epoch(double[:, ::1] P, double[:, ::1] Q,
              double[::1] user_bias, double[::1] item_bias,
              cnp.int64_t[::1] users, cnp.int64_t[::1] items,
              double[::1] values, cnp.int64_t[::1] order,
              double mu, double lr, double reg, bint use_bias):
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t k = P.shape[1]
    cdef Py_ssize_t t, f
    cdef cnp.int64_t idx, u, i
    cdef double pred, err, pf, qf
    with nogil:
        for t in range(n):
            idx = order[t]
            u = users[idx]
            i = items[idx]
            pred = 0.0
            for f in range(k):
                pred += P[u, f] * Q[i, f]
            if use_bias:
                pred += mu + user_bias[u] + item_bias[i]
            err = values[idx] - pred
            if use_bias:
                user_bias[u] += lr * (err - reg * user_bias[u])
                item_bias[i] += lr * (err - reg * item_bias[i])
            for f in range(k):
                pf = P[u, f]
                qf = Q[i, f]
                P[u, f] = pf + lr * (err * qf - reg * pf)
                Q[i, f] = qf + lr * (err * pf - reg * qf)
