"""Sequential-vs-random data access timing: the cache effect ratio.

One sequential full-gradient pass is timed against n component-gradient
evaluations at random indices; their ratio eta = t_seq / t_rand is what the
batch planner consumes.  Both passes accumulate a checksum of the computed
margin derivatives so the work cannot be elided, and a warm-up repetition is
discarded to avoid first-touch page faults inflating t_seq.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import numpy as np

from .glm import CompositeObjective

# a profiling run should be the only active computation in the process
_PROFILE_LOCK = threading.Lock()


@dataclass(frozen=True)
class CacheProfile:
    t_seq_seconds: float
    t_rand_seconds: float
    eta: float
    reps: int
    dispersion: float  # max/min ratio of per-rep timings
    checksum: float

    def as_dict(self):
        return {
            "t_seq_seconds": self.t_seq_seconds,
            "t_rand_seconds": self.t_rand_seconds,
            "eta": self.eta,
            "reps": self.reps,
            "dispersion": self.dispersion,
            "checksum": self.checksum,
        }


def measure_cache_ratio(obj: CompositeObjective, reps=5, seed=0) -> CacheProfile:
    """Median-of-reps timing of one sequential full pass vs n random
    component evaluations (with replacement), both at w = 0 so the
    arithmetic cost is identical.
    """
    if reps < 3:
        raise ValueError("reps must be >= 3")
    ds = obj.dataset
    n = ds.n_samples
    w = np.zeros(ds.n_features)
    rng = np.random.default_rng(seed)
    rand_idx = rng.integers(0, n, size=n)

    with _PROFILE_LOCK:
        t_seq, t_rand = [], []
        checksums = []
        for rep in range(reps + 1):  # first rep is warm-up
            t0 = time.perf_counter()
            s = obj.loss_derivatives(obj.margins(w))
            cs_seq = float(s.sum())
            t1 = time.perf_counter()
            cs_rand = 0.0
            for i in rand_idx:
                cols, vals = ds.row(i)
                margin = float(vals @ w[cols])
                cs_rand += obj.loss_derivative_scalar(i, margin)
            t2 = time.perf_counter()
            if rep == 0:
                continue
            t_seq.append(t1 - t0)
            t_rand.append(t2 - t1)
            checksums.append(cs_seq + cs_rand)
    if min(t_seq) <= 0.0 or min(t_rand) <= 0.0:
        raise RuntimeError(
            "timing resolution too coarse for this dataset; use a larger "
            "dataset or more repetitions"
        )
    if max(abs(c - checksums[0]) for c in checksums) != 0.0:
        raise RuntimeError("checksum varied across repetitions")
    ts, tr = float(np.median(t_seq)), float(np.median(t_rand))
    dispersion = max(max(t_seq) / min(t_seq), max(t_rand) / min(t_rand))
    return CacheProfile(
        t_seq_seconds=ts,
        t_rand_seconds=tr,
        eta=ts / tr,
        reps=reps,
        dispersion=dispersion,
        checksum=checksums[0],
    )
