"""Numba kernels for the unit-batch inner loop with lazy l1 updates.

The kernels operate on raw CSR arrays so the hot path (one stochastic step
per selected sample) stays allocation-free.  Coordinate j carries a stamp =
number of steps already materialized; before any read or write of w[j] the
pending identical prox-gradient steps are collapsed via the closed-form
nested soft threshold, which is valid because ubar[j] is unchanged while j
is untouched (SAGA-style updates touch j whenever ubar[j] moves; SVRG-style
freezes ubar between snapshots).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .prox import prox_l1, lazy_nested_prox

LOSS_LOGISTIC = 0
LOSS_SQUARED = 1


@njit(cache=True)
def _loss_derivative(loss_code, y, margin):
    if loss_code == LOSS_LOGISTIC:
        z = y * margin
        if z >= 0.0:
            return y / (1.0 + math.exp(-z))
        e = math.exp(z)
        return y * e / (1.0 + e)
    return margin - y


@njit(cache=True)
def unit_chunk_l1(row_off, cols, vals, labels, loss_code,
                  w, scalars, ubar, stamps, last_refresh,
                  idxs, t0, gamma, lam, saga_style,
                  stale_hist, stale_cap):
    """Run len(idxs) unit-batch steps starting at iteration t0.

    Mutates w, scalars, ubar, stamps, last_refresh and stale_hist in place.
    SVRG-style runs leave scalars/ubar/last_refresh untouched.
    """
    n = labels.shape[0]
    thr = gamma * lam
    inv_n = 1.0 / n
    for k in range(idxs.shape[0]):
        t = t0 + k
        i = idxs[k]
        gap = t - last_refresh[i]
        if gap > stale_cap:
            gap = stale_cap
        stale_hist[gap] += 1
        lo = row_off[i]
        hi = row_off[i + 1]
        for p in range(lo, hi):
            j = cols[p]
            pend = t - stamps[j]
            if pend > 0:
                w[j] = lazy_nested_prox(w[j], thr, gamma * ubar[j], pend)
            stamps[j] = t
        margin = 0.0
        for p in range(lo, hi):
            margin += vals[p] * w[cols[p]]
        s_new = _loss_derivative(loss_code, labels[i], margin)
        ds = s_new - scalars[i]
        for p in range(lo, hi):
            j = cols[p]
            g = ds * vals[p] + ubar[j]
            w[j] = prox_l1(w[j] - gamma * g, thr)
            stamps[j] = t + 1
        if saga_style:
            scalars[i] = s_new
            last_refresh[i] = t + 1
            for p in range(lo, hi):
                ubar[cols[p]] += ds * vals[p] * inv_n
    return t0 + idxs.shape[0]


@njit(cache=True)
def flush_l1(w, stamps, ubar, t, gamma, lam):
    """Materialize every coordinate up to iteration t."""
    thr = gamma * lam
    for j in range(w.shape[0]):
        pend = t - stamps[j]
        if pend > 0:
            w[j] = lazy_nested_prox(w[j], thr, gamma * ubar[j], pend)
            stamps[j] = t
