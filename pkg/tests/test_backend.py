"""Backend selection and compiled-vs-numpy kernel agreement."""

import numpy as np
import pytest

from bemf import backend
from bemf import fit
from bemf._kernels_py import EPS
from bemf import _kernels_py
from bemf.model import Hyperparams
from bemf.synthetic import make_synthetic_dataset

needs_compiled = pytest.mark.skipif(
    not backend.compiled_available(),
    reason="compiled kernels not built in this environment")


def random_adjacency(rng, n_rows, n_cols, density=0.4):
    """CSR adjacency with at least one guaranteed-empty row."""
    mask = rng.random((n_rows, n_cols)) < density
    mask[0] = False
    counts = mask.sum(axis=1)
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.nonzero(mask)[1].astype(np.int64)
    is_match = (rng.random(indices.size) < 0.5).astype(np.uint8)
    return indptr, indices, is_match


class TestSelection:
    def test_active_backend_matches_availability(self, monkeypatch):
        monkeypatch.delenv("BEMF_BACKEND", raising=False)
        expected = "compiled" if backend.compiled_available() else "python"
        assert backend.active_backend() == expected

    @pytest.mark.parametrize("value", ["python", " PYTHON ", "Python"])
    def test_python_forced(self, monkeypatch, value):
        monkeypatch.setenv("BEMF_BACKEND", value)
        assert backend.active_backend() == "python"
        assert backend.get_kernels("logistic") is _kernels_py

    @pytest.mark.parametrize("value", ["", "auto", "AUTO"])
    def test_auto_values(self, monkeypatch, value):
        monkeypatch.setenv("BEMF_BACKEND", value)
        expected = "compiled" if backend.compiled_available() else "python"
        assert backend.active_backend() == expected

    def test_invalid_value_rejected(self, monkeypatch):
        monkeypatch.setenv("BEMF_BACKEND", "fortran")
        with pytest.raises(ValueError, match="BEMF_BACKEND"):
            backend.active_backend()

    def test_compiled_forced_without_extension_errors(self, monkeypatch):
        monkeypatch.setattr(backend, "_compiled", None)
        monkeypatch.setenv("BEMF_BACKEND", "compiled")
        with pytest.raises(RuntimeError, match="not.*built"):
            backend.active_backend()

    def test_auto_without_extension_downgrades(self, monkeypatch):
        monkeypatch.setattr(backend, "_compiled", None)
        monkeypatch.delenv("BEMF_BACKEND", raising=False)
        assert backend.active_backend() == "python"
        assert backend.get_kernels("logistic") is _kernels_py

    @needs_compiled
    def test_compiled_forced_when_available(self, monkeypatch):
        monkeypatch.setenv("BEMF_BACKEND", "compiled")
        assert backend.active_backend() == "compiled"
        assert backend.get_kernels("logistic") is not _kernels_py

    def test_nonlogistic_activation_always_python(self, monkeypatch):
        monkeypatch.delenv("BEMF_BACKEND", raising=False)
        assert backend.get_kernels("unit_tanh") is _kernels_py
        monkeypatch.setenv("BEMF_BACKEND", "compiled")
        if backend.compiled_available():
            assert backend.get_kernels("step") is _kernels_py


@needs_compiled
class TestKernelAgreement:
    """The C loops and the numpy code must agree to rounding error."""

    def _compiled(self):
        from bemf import _kernels
        return _kernels

    def test_update_factors_agreement(self):
        kern_c = self._compiled()
        for seed in range(5):
            rng = np.random.default_rng(seed)
            n, m, k = 12, 9, 4
            indptr, indices, is_match = random_adjacency(rng, n, m)
            target0 = rng.normal(size=(n, k))
            other = rng.normal(size=(m, k))
            t_py = target0.copy()
            t_c = target0.copy()
            for _ in range(4):
                _kernels_py.update_factors(
                    t_py, other, indptr, indices, is_match, 0.05, 0.02)
                kern_c.update_factors(
                    t_c, other, indptr, indices, is_match, 0.05, 0.02)
            np.testing.assert_allclose(t_c, t_py, rtol=0, atol=1e-12)

    def test_update_factors_empty_row_only_shrinks(self):
        kern_c = self._compiled()
        rng = np.random.default_rng(3)
        indptr, indices, is_match = random_adjacency(rng, 6, 5)
        assert indptr[1] == 0  # row 0 has no entries by construction
        other = rng.normal(size=(5, 3))
        for kern in (_kernels_py, kern_c):
            target = rng.normal(size=(6, 3)).copy()
            row0 = target[0].copy()
            kern.update_factors(target, other, indptr, indices, is_match,
                                0.1, 0.5)
            np.testing.assert_allclose(target[0], row0 * (1 - 0.1 * 0.5),
                                       rtol=0, atol=1e-15)

    def test_data_cost_agreement(self):
        kern_c = self._compiled()
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            n, m, k, nnz = 10, 8, 3, 40
            U = rng.normal(size=(n, k))
            V = rng.normal(size=(m, k))
            rows = rng.integers(0, n, size=nnz)
            cols = rng.integers(0, m, size=nnz)
            match = (rng.random(nnz) < 0.5).astype(np.uint8)
            c_py = _kernels_py.data_cost(U, V, rows, cols, match)
            c_c = kern_c.data_cost(U, V, rows, cols, match)
            assert c_c == pytest.approx(c_py, rel=1e-12)

    def test_data_cost_clamp_agreement(self):
        # saturated activations hit the clamp on both sides identically
        kern_c = self._compiled()
        U = np.full((1, 2), 60.0)
        V = np.full((1, 2), 60.0)
        rows = np.zeros(1, dtype=np.int64)
        cols = np.zeros(1, dtype=np.int64)
        mismatch = np.zeros(1, dtype=np.uint8)
        c_py = _kernels_py.data_cost(U, V, rows, cols, mismatch)
        c_c = kern_c.data_cost(U, V, rows, cols, mismatch)
        # cost of a mismatched saturated entry is -log1p(-(1 - EPS)) exactly
        assert c_py == pytest.approx(-np.log1p(-(1.0 - EPS)), rel=1e-12)
        assert c_c == pytest.approx(c_py, rel=1e-12)

    def test_sgd_epoch_agreement(self):
        kern_c = self._compiled()
        for seed in range(4):
            rng = np.random.default_rng(200 + seed)
            n, m, k, nnz = 15, 11, 5, 80
            users = rng.integers(0, n, size=nnz)
            items = rng.integers(0, m, size=nnz)
            values = rng.uniform(1, 5, size=nnz)
            order = rng.permutation(nnz)
            for use_bias in (False, True):
                state_py = [rng.normal(size=(n, k)), rng.normal(size=(m, k)),
                            np.zeros(n), np.zeros(m)]
                state_c = [a.copy() for a in state_py]
                mu = float(values.mean())
                _kernels_py.sgd_epoch(*state_py, users, items, values, order,
                                      mu, 0.01, 0.05, use_bias)
                kern_c.sgd_epoch(*state_c, users, items, values, order,
                                 mu, 0.01, 0.05, use_bias)
                for a_c, a_py in zip(state_c, state_py):
                    np.testing.assert_allclose(a_c, a_py, rtol=0, atol=1e-12)

    def test_full_fit_backends_close(self, monkeypatch):
        ds = make_synthetic_dataset(num_users=40, num_items=25, num_scores=3,
                                    density=0.3, seed=5)
        hp = Hyperparams(factors=3, learning_rate=0.05, regularization=0.05,
                         iterations=8, seed=11)
        monkeypatch.setenv("BEMF_BACKEND", "python")
        m_py = fit(ds, hp)
        monkeypatch.setenv("BEMF_BACKEND", "compiled")
        m_c = fit(ds, hp)
        np.testing.assert_allclose(m_c.user_factors, m_py.user_factors,
                                   rtol=0, atol=1e-9)
        np.testing.assert_allclose(m_c.item_factors, m_py.item_factors,
                                   rtol=0, atol=1e-9)
        probs_py, _, _ = m_py.predict_batch(np.arange(ds.num_users),
                                            np.zeros(ds.num_users, dtype=int))
        probs_c, _, _ = m_c.predict_batch(np.arange(ds.num_users),
                                          np.zeros(ds.num_users, dtype=int))
        np.testing.assert_allclose(probs_c, probs_py, rtol=0, atol=1e-9)
