"""Shared fixtures and independent oracles for the test suite.

The oracles here (brute-force nested prox, dense-matrix objective, etc.)
deliberately avoid the library's own fast paths so agreement is meaningful.
"""

import numpy as np
import pytest

from batchvr.dataio import SparseDataset
from batchvr.glm import CompositeObjective, LossKind, Regularizer


def naive_nested_prox(x, thr, drift, skipped):
    """Brute-force oracle: apply u <- soft_threshold(u - drift, thr)
    exactly ``skipped`` times.
    """
    u = x
    for _ in range(skipped):
        v = u - drift
        u = np.sign(v) * max(abs(v) - thr, 0.0)
    return u


def dense_matrix(ds: SparseDataset) -> np.ndarray:
    X = np.zeros((ds.n_samples, ds.n_features))
    for i in range(ds.n_samples):
        cols, vals = ds.row(i)
        X[i, cols] = vals
    return X


def make_dataset(X, labels) -> SparseDataset:
    """Build a SparseDataset from a dense matrix (zeros dropped)."""
    X = np.asarray(X, dtype=np.float64)
    offsets = [0]
    cols, vals = [], []
    for row in X:
        nz = np.nonzero(row)[0]
        cols.extend(nz.tolist())
        vals.extend(row[nz].tolist())
        offsets.append(len(cols))
    return SparseDataset(
        n_samples=X.shape[0],
        n_features=X.shape[1],
        row_offsets=np.asarray(offsets, dtype=np.int64),
        col_indices=np.asarray(cols, dtype=np.int64),
        values=np.asarray(vals, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.float64),
    )


def random_sparse_problem(rng, n, d, density=0.4, loss=LossKind.LOGISTIC,
                          reg=None, mu=None):
    X = rng.standard_normal((n, d)) * (rng.random((n, d)) < density)
    # keep every row nonempty so component gradients are informative
    for i in range(n):
        if not X[i].any():
            X[i, rng.integers(d)] = rng.standard_normal()
    if loss is LossKind.LOGISTIC:
        labels = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    else:
        labels = rng.standard_normal(n)
    ds = make_dataset(X, labels)
    if reg is None:
        reg = Regularizer.l2(0.1)
    return CompositeObjective(ds, loss, reg, mu=mu)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
