"""Composite GLM objectives: mean loss over samples plus an l1/l2 penalty."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dataio import SparseDataset


class LossKind(enum.Enum):
    LOGISTIC = "logistic"
    SQUARED = "squared"


@dataclass(frozen=True)
class Regularizer:
    kind: str  # "l1" | "l2" | "none"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("l1", "l2", "none"):
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")

    @classmethod
    def l1(cls, lam):
        return cls("l1", lam)

    @classmethod
    def l2(cls, lam):
        return cls("l2", lam)

    @classmethod
    def none(cls):
        return cls("none", 0.0)

    def value(self, w):
        if self.kind == "l1":
            return self.lam * float(np.abs(w).sum())
        if self.kind == "l2":
            return 0.5 * self.lam * float(w @ w)
        return 0.0

    @property
    def lam_l2(self):
        return self.lam if self.kind == "l2" else 0.0


class ConstantsUnavailable(ValueError):
    """mu cannot be derived (l1-only problem without a user-supplied bound)."""


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class CompositeObjective:
    """F(w) = (1/n) sum_i loss_i(x_i^T w) + g(w).

    Logistic loss is ``log(1 + exp(y * margin))`` with labels in {-1, +1};
    squared loss is ``(margin - y)^2 / 2``.  All evaluations are pure given
    the immutable dataset, so an objective is safe to share across runs.
    """

    def __init__(self, dataset: SparseDataset, loss: LossKind, reg: Regularizer, mu=None):
        if loss is LossKind.LOGISTIC:
            bad = np.setdiff1d(np.unique(dataset.labels), [-1.0, 1.0])
            if len(bad):
                raise ValueError(f"logistic loss needs labels in {{-1,+1}}, got {bad[:5]}")
        self.dataset = dataset
        self.loss = loss
        self.reg = reg
        self._mu_override = mu
        self._max_row_norm_sq = None

    # -- scalar pieces -----------------------------------------------------

    def loss_derivative_scalar(self, i, margin):
        """d/dm loss_i(m) at the given margin."""
        y = self.dataset.labels[i]
        if self.loss is LossKind.LOGISTIC:
            z = y * margin
            if z >= 0:
                return y / (1.0 + np.exp(-z))
            e = np.exp(z)
            return y * e / (1.0 + e)
        return margin - y

    def loss_value_scalar(self, i, margin):
        y = self.dataset.labels[i]
        if self.loss is LossKind.LOGISTIC:
            return float(np.logaddexp(0.0, y * margin))
        r = margin - y
        return 0.5 * r * r

    # -- vectorized over samples -------------------------------------------

    def margins(self, w):
        ds = self.dataset
        prod = ds.values * w[ds.col_indices]
        c = np.concatenate(([0.0], np.cumsum(prod)))
        return c[ds.row_offsets[1:]] - c[ds.row_offsets[:-1]]

    def loss_derivatives(self, margins):
        y = self.dataset.labels
        if self.loss is LossKind.LOGISTIC:
            return y * _sigmoid(y * margins)
        return margins - y

    def mean_loss(self, margins):
        y = self.dataset.labels
        if self.loss is LossKind.LOGISTIC:
            return float(np.logaddexp(0.0, y * margins).mean())
        r = margins - y
        return 0.5 * float((r * r).mean())

    # -- gradients / objective ---------------------------------------------

    def component_gradient(self, i, w):
        """Sparse gradient of loss_i at w: (col_indices, values)."""
        if not 0 <= i < self.dataset.n_samples:
            raise IndexError(f"sample index {i} out of range")
        cols, vals = self.dataset.row(i)
        margin = float(vals @ w[cols])
        return cols, self.loss_derivative_scalar(i, margin) * vals

    def full_gradient(self, w):
        """Dense gradient of the mean loss, one sequential pass over CSR."""
        ds = self.dataset
        s = self.loss_derivatives(self.margins(w))
        per_entry = np.repeat(s, np.diff(ds.row_offsets)) * ds.values
        return np.bincount(ds.col_indices, weights=per_entry, minlength=ds.n_features) / ds.n_samples

    def objective_value(self, w):
        return self.mean_loss(self.margins(w)) + self.reg.value(w)

    # -- conditioning -------------------------------------------------------

    @property
    def max_row_norm_sq(self):
        if self._max_row_norm_sq is None:
            norms = self.dataset.row_norms_sq()
            self._max_row_norm_sq = float(norms.max()) if len(norms) else 0.0
        return self._max_row_norm_sq

    @property
    def curvature_max(self):
        return 0.25 if self.loss is LossKind.LOGISTIC else 1.0

    def estimate_constants(self):
        """(L, mu, kappa).  L from the curvature bound times the largest row
        norm plus any l2 coefficient; mu from the l2 coefficient or the
        user-supplied override.  Raises :class:`ConstantsUnavailable` when no
        mu is derivable -- solvers with mu-free step sizes still run.
        """
        lam2 = self.reg.lam_l2
        L = self.curvature_max * self.max_row_norm_sq + lam2
        if lam2 > 0:
            mu = lam2
        elif self._mu_override is not None:
            mu = self._mu_override
        else:
            raise ConstantsUnavailable(
                "mu is unknown for this problem; pass mu= when constructing the "
                "objective (required for rate planning, not for running solvers)"
            )
        return L, mu, L / mu

    @property
    def smoothness_L(self):
        return self.curvature_max * self.max_row_norm_sq + self.reg.lam_l2
