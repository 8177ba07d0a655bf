"""Unified variance-reduction solver with stochastic batch sizes.

One parameterized loop covers gradient descent (always-full batches), SAGA
(always-singleton batches with eagerly refreshed gradient memory), SVRG
(snapshot schedule, memory frozen between snapshots) and SAGA++ (snapshot
schedule or two-point batch law, memory refreshed on every access).

Gradient memory for GLM losses is a scalar per sample (the margin
derivative) plus the running mean gradient ``ubar``.  Under l1
regularization the solver defers untouched coordinates and recovers them in
O(1) with the closed-form nested soft threshold (see :mod:`batchvr.prox`).
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernels
from .glm import CompositeObjective, LossKind
from .prox import prox_l1_vec, prox_l2


class DivergenceError(RuntimeError):
    """Objective exceeded the divergence guard (1e3x the initial value)."""


class UpdateRule(enum.Enum):
    SAGA_STYLE = "saga_style"  # memory refreshed on every access
    SVRG_STYLE = "svrg_style"  # memory frozen between snapshots


@dataclass(frozen=True)
class BatchDistribution:
    """Random batch-size law: a point mass, the two-point full-or-single law,
    or the snapshot schedule (one full pass then m unit batches, repeated).
    """

    kind: str  # "fixed" | "two_point" | "snapshot"
    b: int = 1
    p_full: float = 0.0
    m: int = 0

    @classmethod
    def fixed(cls, b):
        if b < 1:
            raise ValueError("batch size must be >= 1")
        return cls("fixed", b=b)

    @classmethod
    def two_point(cls, p_full):
        if not 0.0 <= p_full <= 1.0:
            raise ValueError("p_full must lie in [0, 1]")
        return cls("two_point", p_full=p_full)

    @classmethod
    def snapshot(cls, m):
        if m < 1:
            raise ValueError("snapshot schedule needs m >= 1")
        return cls("snapshot", m=m)

    def expected_batch(self, n):
        if self.kind == "fixed":
            return float(min(self.b, n))
        if self.kind == "two_point":
            return self.p_full * n + (1.0 - self.p_full)
        # snapshot: one n-sized batch followed by m singletons per cycle
        return (n + self.m) / (self.m + 1.0)


@dataclass
class SolverConfig:
    gamma: float
    dist: BatchDistribution
    rule: UpdateRule
    epochs: float
    seed: int
    lazy: bool = True
    trace_every: float = 1.0  # in epoch-equivalents
    w0: np.ndarray | None = None
    f_star: float | None = None
    divergence_factor: float = 1e3
    random_access_delay: float = 0.0  # seconds per stochastic access (emulation)
    seq_access_delay: float = 0.0  # seconds per sequential access (emulation)


@dataclass(frozen=True)
class TraceRecord:
    epoch_equiv: float
    wall_seconds: float
    objective: float
    suboptimality: float | None
    nnz_w: int


@dataclass
class RunResult:
    w: np.ndarray
    trace: list
    staleness_hist: np.ndarray
    data_accesses: int
    iterations: int


@dataclass
class SolverState:
    w: np.ndarray
    scalars: np.ndarray  # stored margin derivatives, one per sample
    ubar: np.ndarray  # running mean of stored gradients
    stamps: np.ndarray  # per-coordinate materialization stamp (lazy mode)
    last_refresh: np.ndarray  # per-sample memory refresh iteration
    t: int = 0
    data_accesses: int = 0
    updates_since_rebuild: int = 0
    stale_hist: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    stale_cap: int = 0


def init_state(obj: CompositeObjective, w0=None, stale_cap=None) -> SolverState:
    """Initial state with one full pass: scalars at w0 and an exact ubar.

    The initialization pass is bookkeeping and is not counted as data
    accesses; every algorithm pays it identically.
    """
    ds = obj.dataset
    w = np.zeros(ds.n_features) if w0 is None else np.array(w0, dtype=np.float64)
    scalars = obj.loss_derivatives(obj.margins(w))
    ubar = _rebuild_ubar(obj, scalars)
    if stale_cap is None:
        stale_cap = 16 * ds.n_samples
    return SolverState(
        w=w,
        scalars=scalars,
        ubar=ubar,
        stamps=np.zeros(ds.n_features, dtype=np.int64),
        last_refresh=np.zeros(ds.n_samples, dtype=np.int64),
        stale_hist=np.zeros(stale_cap + 1, dtype=np.int64),
        stale_cap=stale_cap,
    )


def _rebuild_ubar(obj, scalars):
    ds = obj.dataset
    per_entry = np.repeat(scalars, np.diff(ds.row_offsets)) * ds.values
    return np.bincount(ds.col_indices, weights=per_entry, minlength=ds.n_features) / ds.n_samples


def vr_gradient(state: SolverState, obj: CompositeObjective, batch) -> np.ndarray:
    """Dense variance-reduced gradient estimate for the given batch:
    mean of fresh component gradients minus stored ones, plus ubar.
    """
    batch = np.atleast_1d(np.asarray(batch))
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    G = state.ubar.copy()
    inv_b = 1.0 / len(batch)
    for i in batch:
        cols, vals = obj.dataset.row(i)
        margin = float(vals @ state.w[cols])
        s = obj.loss_derivative_scalar(i, margin)
        G[cols] += (s - state.scalars[i]) * vals * inv_b
    return G


def _prox_dense(w, obj, gamma):
    reg = obj.reg
    if reg.kind == "l1":
        return prox_l1_vec(w, gamma * reg.lam)
    if reg.kind == "l2":
        return prox_l2(w, gamma, reg.lam)
    return w


def _eager_batch_step(state, obj, batch, gamma, rule):
    """One eager iteration on an explicit batch: dense prox update, then
    memory refresh per the update rule (full batches always refresh).
    """
    ds = obj.dataset
    n = ds.n_samples
    b = len(batch)
    w = state.w
    G = state.ubar.copy()
    inv_b = 1.0 / b
    s_new = np.empty(b)
    for k, i in enumerate(batch):
        cols, vals = ds.row(i)
        margin = float(vals @ w[cols])
        s_new[k] = obj.loss_derivative_scalar(i, margin)
        G[cols] += (s_new[k] - state.scalars[i]) * vals * inv_b
    if b == 1:
        gap = min(state.t - state.last_refresh[batch[0]], state.stale_cap)
        state.stale_hist[gap] += 1
    state.w = _prox_dense(w - gamma * G, obj, gamma)
    if rule is UpdateRule.SAGA_STYLE or b == n:
        for k, i in enumerate(batch):
            dsk = s_new[k] - state.scalars[i]
            cols, vals = ds.row(i)
            state.ubar[cols] += dsk * vals / n
            state.scalars[i] = s_new[k]
            state.last_refresh[i] = state.t + 1
            if b < n:
                state.updates_since_rebuild += 1
    state.t += 1
    state.data_accesses += b


def _full_pass_step(state, obj, gamma):
    """Vectorized full-batch step.  The stochastic terms of the estimator
    cancel against ubar for the full batch, so the update is a proximal
    full-gradient step; the pass also snapshots the gradient memory.
    """
    ds = obj.dataset
    margins = obj.margins(state.w)
    s_new = obj.loss_derivatives(margins)
    grad = _rebuild_ubar(obj, s_new)
    state.w = _prox_dense(state.w - gamma * grad, obj, gamma)
    state.scalars = s_new
    state.ubar = grad
    state.t += 1
    state.last_refresh[:] = state.t
    state.stamps[:] = state.t
    state.updates_since_rebuild = 0
    state.data_accesses += ds.n_samples


def flush_lazy(state: SolverState, gamma, lam):
    """Apply every coordinate's pending nested prox so w is the true iterate."""
    _kernels.flush_l1(state.w, state.stamps, state.ubar, state.t, gamma, lam)
    return state


def _lazy_unit_chunk(state, obj, idxs, gamma, rule):
    ds = obj.dataset
    loss_code = _kernels.LOSS_LOGISTIC if obj.loss is LossKind.LOGISTIC else _kernels.LOSS_SQUARED
    state.t = _kernels.unit_chunk_l1(
        ds.row_offsets, ds.col_indices, ds.values, ds.labels, loss_code,
        state.w, state.scalars, state.ubar, state.stamps, state.last_refresh,
        idxs, state.t, gamma, obj.reg.lam, rule is UpdateRule.SAGA_STYLE,
        state.stale_hist, state.stale_cap,
    )
    state.data_accesses += len(idxs)
    if rule is UpdateRule.SAGA_STYLE:
        state.updates_since_rebuild += len(idxs)


def step(state, obj, gamma, rule, dist, rng, lazy=False):
    """One iteration: sample the batch size, sample the batch uniformly
    without replacement, apply the prox-gradient update and refresh memory
    per the rule.  ``lazy`` uses deferred coordinate updates (l1, unit
    batches only).
    """
    n = obj.dataset.n_samples
    if dist.kind == "fixed":
        b = min(dist.b, n)
    elif dist.kind == "two_point":
        b = n if rng.random() < dist.p_full else 1
    else:
        raise ValueError("snapshot schedules are driven by run(), not step()")
    if b == n:
        if lazy and obj.reg.kind == "l1":
            flush_lazy(state, gamma, obj.reg.lam)
        _full_pass_step(state, obj, gamma)
        return state
    if b == 1:
        idx = rng.integers(0, n, size=1).astype(np.int64)
        if lazy and obj.reg.kind == "l1":
            _lazy_unit_chunk(state, obj, idx, gamma, rule)
        else:
            _eager_batch_step(state, obj, idx, gamma, rule)
        return state
    batch = np.sort(rng.choice(n, size=b, replace=False)).astype(np.int64)
    _eager_batch_step(state, obj, batch, gamma, rule)
    return state


def _busy_wait(seconds):
    if seconds <= 0.0:
        return
    end = time.perf_counter() + seconds
    while time.perf_counter() < end:
        pass


def run(obj: CompositeObjective, cfg: SolverConfig) -> RunResult:
    """Run the configured solver for ``cfg.epochs`` epoch-equivalents.

    Deterministic given the seed (all randomness flows through one PCG64
    generator in a schedule that does not depend on the lazy flag).  Traces
    are emitted at cadence boundaries after materializing the iterate; a
    full-batch step costs n data accesses, a unit step costs 1.
    """
    ds = obj.dataset
    n, d = ds.n_samples, ds.n_features
    rng = np.random.default_rng(cfg.seed)
    state = init_state(obj, cfg.w0)
    lazy = cfg.lazy and obj.reg.kind == "l1"
    gamma = cfg.gamma
    dist = cfg.dist
    target = int(round(cfg.epochs * n))
    trace_step = max(1, int(round(cfg.trace_every * n)))
    next_trace = trace_step
    trace = []
    start = time.perf_counter()

    def emit():
        if lazy:
            flush_lazy(state, gamma, obj.reg.lam)
        objective = obj.objective_value(state.w)
        rec = TraceRecord(
            epoch_equiv=state.data_accesses / n,
            wall_seconds=time.perf_counter() - start,
            objective=objective,
            suboptimality=None if cfg.f_star is None else objective - cfg.f_star,
            nnz_w=int(np.count_nonzero(state.w)),
        )
        trace.append(rec)
        return objective

    f0 = emit()
    guard = cfg.divergence_factor * max(abs(f0), 1.0)

    def do_full():
        if lazy:
            flush_lazy(state, gamma, obj.reg.lam)
        _full_pass_step(state, obj, gamma)
        _busy_wait(n * cfg.seq_access_delay)

    def do_units(k):
        idxs = rng.integers(0, n, size=k).astype(np.int64)
        if lazy:
            _lazy_unit_chunk(state, obj, idxs, gamma, dist_rule)
        else:
            for i in idxs:
                _eager_batch_step(state, obj, np.array([i]), gamma, dist_rule)
        _busy_wait(k * cfg.random_access_delay)

    dist_rule = cfg.rule
    inner_left = 0  # pending unit steps in the current snapshot cycle
    while state.data_accesses < target:
        if dist.kind == "fixed" and min(dist.b, n) == n:
            do_full()
        elif dist.kind == "fixed" and dist.b == 1:
            k = _chunk_len(state, target, next_trace, n, saga=dist_rule is UpdateRule.SAGA_STYLE)
            do_units(k)
        elif dist.kind == "fixed":
            batch = np.sort(rng.choice(n, size=dist.b, replace=False)).astype(np.int64)
            _eager_batch_step(state, obj, batch, gamma, dist_rule)
            _busy_wait(dist.b * cfg.random_access_delay)
        elif dist.kind == "two_point":
            if rng.random() < dist.p_full:
                do_full()
            else:
                do_units(1)
        else:  # snapshot
            if inner_left == 0:
                do_full()
                inner_left = dist.m
            else:
                k = _chunk_len(state, target, next_trace, n,
                               saga=dist_rule is UpdateRule.SAGA_STYLE, cap=inner_left)
                do_units(k)
                inner_left -= k
        if state.updates_since_rebuild >= n:
            if lazy:
                flush_lazy(state, gamma, obj.reg.lam)
            state.ubar = _rebuild_ubar(obj, state.scalars)
            state.updates_since_rebuild = 0
        if state.data_accesses >= next_trace or state.data_accesses >= target:
            objective = emit()
            next_trace += trace_step * (1 + (state.data_accesses - next_trace) // trace_step)
            if objective > guard:
                raise DivergenceError(
                    f"objective {objective:.3e} exceeded {cfg.divergence_factor:g}x "
                    f"the initial value after {state.data_accesses / n:.2f} epochs"
                )
    return RunResult(
        w=state.w,
        trace=trace,
        staleness_hist=state.stale_hist,
        data_accesses=state.data_accesses,
        iterations=state.t,
    )


def _chunk_len(state, target, next_trace, n, saga, cap=None):
    k = min(target - state.data_accesses, next_trace - state.data_accesses)
    if saga:
        k = min(k, n - state.updates_since_rebuild)
    if cap is not None:
        k = min(k, cap)
    return max(1, int(k))


# -- presets ---------------------------------------------------------------

def _resolve_inner_m(inner_m, n):
    if inner_m is None or inner_m == "1.5n":
        return int(round(1.5 * n))
    return int(inner_m)


def make_config(algorithm, n, gamma, epochs, seed, inner_m=None, p_full=None, **kw) -> SolverConfig:
    """Build a SolverConfig from an algorithm preset name
    (``gd`` | ``saga`` | ``svrg`` | ``saga++``).
    """
    algorithm = algorithm.lower()
    if algorithm == "gd":
        dist, rule = BatchDistribution.fixed(n), UpdateRule.SAGA_STYLE
    elif algorithm == "saga":
        dist, rule = BatchDistribution.fixed(1), UpdateRule.SAGA_STYLE
    elif algorithm == "svrg":
        dist, rule = BatchDistribution.snapshot(_resolve_inner_m(inner_m, n)), UpdateRule.SVRG_STYLE
    elif algorithm in ("saga++", "sagapp"):
        if p_full is not None:
            dist = BatchDistribution.two_point(p_full)
        else:
            dist = BatchDistribution.snapshot(_resolve_inner_m(inner_m, n))
        rule = UpdateRule.SAGA_STYLE
    else:
        raise ValueError(f"unknown algorithm preset {algorithm!r}")
    return SolverConfig(gamma=gamma, dist=dist, rule=rule, epochs=epochs, seed=seed, **kw)


# -- staleness laws --------------------------------------------------------

def staleness_distribution(rule, n, T, t):
    """Analytic law of the refresh time tau of a memory cell after step t.

    ``rule`` is "saga", "svrg" or "saga++".  For the snapshot-based rules,
    k = t // T indexes the latest snapshot.  The returned dict maps tau to
    probability and sums to 1.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    rule = rule.lower()
    if rule == "svrg":
        return {(t // T) * T: 1.0}
    q = 1.0 - 1.0 / n
    if rule == "saga":
        base = 0
    elif rule in ("saga++", "sagapp"):
        base = (t // T) * T
    else:
        raise ValueError(f"unknown rule {rule!r}")
    span = t - base
    law = {base: q ** span}
    for j in range(1, span + 1):
        law[base + j] = (1.0 / n) * q ** (span - j)
    return law


@njit(cache=True)
def _simulate_staleness_loop(idxs, n, T, refresh_on_select, snapshots, hist):
    last = np.zeros(n, dtype=np.int64)
    for k in range(idxs.shape[0]):
        t = k + 1
        if snapshots and t % T == 0:
            for i in range(n):
                last[i] = t
        else:
            if refresh_on_select:
                last[idxs[k]] = t
        for i in range(n):
            hist[t - last[i]] += 1


def simulate_staleness(rule, n, T, steps, seed):
    """Monte-Carlo staleness gaps (t - tau) aggregated over cells and steps.

    Returns the normalized gap histogram for a single simulated index path of
    the given update rule.
    """
    rule = rule.lower()
    rng = np.random.default_rng(seed)
    idxs = rng.integers(0, n, size=steps).astype(np.int64)
    hist = np.zeros(steps + 1, dtype=np.int64)
    _simulate_staleness_loop(
        idxs, n, T,
        rule in ("saga", "saga++", "sagapp"),
        rule in ("svrg", "saga++", "sagapp"),
        hist,
    )
    return hist / hist.sum()
