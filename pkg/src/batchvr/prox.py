"""Proximal operators and the O(1) n-fold nested soft threshold.

``lazy_nested_prox(x, thr, drift, skipped)`` collapses ``skipped``
applications of ``u <- soft_threshold(u - drift, thr)`` into constant-time
arithmetic.  The iteration is piecewise linear: writing a = drift + thr and
b = drift - thr, one step maps u to u - a (when u >= a), u - b (when u <= b)
or 0 otherwise.  A trajectory therefore consists of at most three linear
phases separated by single transition steps, each phase length obtainable by
an integer division, which is what the implementation exploits.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def prox_l1(x, thr):
    """Soft threshold: sign(x) * max(|x| - thr, 0)."""
    if x > thr:
        return x - thr
    if x < -thr:
        return x + thr
    return 0.0


def prox_l1_vec(x, thr):
    return np.sign(x) * np.maximum(np.abs(x) - thr, 0.0)


def prox_l2(x, thr, lam):
    """Prox of (lam/2)||.||^2 with step thr: componentwise shrinkage."""
    return np.asarray(x) / (1.0 + thr * lam)


@njit(cache=True)
def lazy_nested_prox(x, thr, drift, skipped):
    """Value of ``skipped``-fold ``u <- soft_threshold(u - drift, thr)``
    starting from ``u = x``, computed without iterating per step.
    """
    u = x
    m = skipped
    a = drift + thr
    b = drift - thr
    while m > 0:
        if u >= a:
            if a <= 0.0:
                # step increases u (or leaves it fixed); branch is absorbing
                return u - m * a
            k = int(u // a)
            if k > m:
                k = m
            elif k < 1:
                k = 1
            u -= k * a
            m -= k
        elif u <= b:
            if b >= 0.0:
                return u - m * b
            k = int(u // b)
            if k > m:
                k = m
            elif k < 1:
                k = 1
            u -= k * b
            m -= k
        else:
            u = 0.0
            m -= 1
            if b <= 0.0 <= a:
                return 0.0
    return u
