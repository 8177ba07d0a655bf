"""Step sizes, contraction factors and optimal average batch sizes.

Conventions used throughout: ``kappa = L / mu``, ``alpha = 4 kappa /
(sqrt(tau) n)``, and an average batch size ``B`` in [1, n].  The per-accuracy
data-access cost is ``B^2 / (sqrt(1 + alpha^2 B^2) - 1)``; with a cache
effect ratio ``eta = t_seq / t_rand < 1`` the wall-clock analogue weights
full passes by ``eta`` and stochastic accesses by 1.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import brentq

_REL_SLACK = 1e-9  # absorbs exact-equality boundaries in float arithmetic


@dataclass(frozen=True)
class RatePlan:
    n: int
    L: float
    mu: float
    kappa: float
    tau: float
    beta: float
    c_lyapunov: float
    expected_batch: float
    gamma: float
    rho: float
    eta_cache: float | None = None

    def as_dict(self):
        return asdict(self)


class InfeasibleTau(ValueError):
    """tau exceeds the feasibility bound (1/(L/(L-mu) + n/(4 kappa B)))^2."""


def _sqrt1p_minus1(z):
    """sqrt(1+z) - 1 without cancellation for small z."""
    return z / (np.sqrt(1.0 + z) + 1.0)


def validate_gamma(n, L, mu, gamma, beta, c, expected_batch):
    """Check the step-size window: gamma below both upper bounds and the
    quadratic lower-bound condition non-negative.  Returns
    ``(valid, violated)`` where ``violated`` lists failed bounds.
    """
    upper1 = 1.0 / ((1.0 + beta) * L)
    upper2 = np.sqrt(c * expected_batch / (2.0 * (1.0 + 1.0 / beta) * n * L))
    lower = 2.0 * mu * beta * gamma**2 + 2.0 * (L - mu) * gamma / L - c * expected_batch / n
    violated = []
    slack = _REL_SLACK * gamma
    if gamma > upper1 + slack:
        violated.append("upper_smoothness")
    if gamma > upper2 + slack:
        violated.append("upper_memory")
    if lower < -_REL_SLACK * (c * expected_batch / n + gamma / L):
        violated.append("lower")
    return not violated, violated


def gamma_adaptive(L):
    """mu-free step size: gamma = 1/(3L) with beta = 2 and the matching
    Lyapunov weight rule c = n / (3 L B).
    """
    if L <= 0:
        raise ValueError("L must be positive")
    gamma = 1.0 / (3.0 * L)
    beta = 2.0

    def c_rule(n, expected_batch):
        return n / (3.0 * L * expected_batch)

    return gamma, beta, c_rule


def feasible_tau_max(n, L, mu, expected_batch):
    """Largest tau for which the batch-dependent step size is valid."""
    if not L > mu > 0:
        raise ValueError("need L > mu > 0")
    kappa = L / mu
    return (1.0 / (L / (L - mu) + n / (4.0 * kappa * expected_batch))) ** 2


def gamma_dependent(n, L, mu, tau, expected_batch):
    """Batch-size-dependent step size and its contraction rate rho.

    gamma = (c / 8 kappa) (sqrt(1 + alpha^2 B^2) - 1) with
    c = tau n / (L B); linear convergence with factor 1 - rho, rho = gamma mu.
    Returns ``(gamma, rho, c, beta)`` with beta = 1 for validation.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    tau_max = feasible_tau_max(n, L, mu, expected_batch)
    if tau > tau_max:
        raise InfeasibleTau(
            f"tau={tau:g} exceeds feasibility bound "
            f"(1/(L/(L-mu) + n/(4 kappa B)))^2 = {tau_max:g}"
        )
    kappa = L / mu
    c = tau * n / (L * expected_batch)
    alpha = 4.0 * kappa / (np.sqrt(tau) * n)
    gamma = (c / (8.0 * kappa)) * _sqrt1p_minus1((alpha * expected_batch) ** 2)
    return gamma, gamma * mu, c, 1.0


def access_cost_curve(n, kappa, tau, expected_batch):
    """Data accesses per unit of accuracy: B^2 / (sqrt(1 + alpha^2 B^2) - 1).

    Monotone increasing on [1, n], so B = 1 minimizes data accesses.
    """
    alpha = 4.0 * kappa / (np.sqrt(tau) * n)
    B = np.asarray(expected_batch, dtype=float)
    return B * B / _sqrt1p_minus1((alpha * B) ** 2)


def access_cost_derivative(n, kappa, tau, expected_batch):
    """Closed-form derivative of :func:`access_cost_curve` (nonnegative).

    With s = sqrt(1 + alpha^2 B^2) the quotient rule collapses to B / s.
    """
    alpha = 4.0 * kappa / (np.sqrt(tau) * n)
    B = np.asarray(expected_batch, dtype=float)
    return B / np.sqrt(1.0 + (alpha * B) ** 2)


def wall_cost_curve(n, kappa, tau, eta_cache, B):
    """Wall-clock cost per unit of accuracy: ((B^2-B) eta + B) / (sqrt(1+alpha^2 B^2) - 1)."""
    alpha = 4.0 * kappa / (np.sqrt(tau) * n)
    B = np.asarray(B, dtype=float)
    return ((B * B - B) * eta_cache + B) / _sqrt1p_minus1((alpha * B) ** 2)


@dataclass(frozen=True)
class OptimalBatch:
    b_star: float
    xi: float
    residual: float
    clamped: bool


def solve_optimal_batch(n, kappa, tau, eta_cache):
    """Solve B = (1/eta - 1)(xi - 1)/(2 - xi) with
    xi = alpha^2 B^2 / (1 + alpha^2 B^2 - sqrt(1 + alpha^2 B^2)).

    With s = sqrt(1 + alpha^2 B^2) the right-hand side simplifies to
    (1/eta - 1)/(s - 1), so the fixed point is the unique root of the
    increasing function B (s(B) - 1) - (1/eta - 1).  The root is clamped to
    [1, n]; ``residual`` reports the fixed-point defect at the unconstrained
    root, ``clamped`` whether clamping occurred.
    """
    if not 0 < eta_cache <= 1:
        raise ValueError("eta must lie in (0, 1]")
    alpha = 4.0 * kappa / (np.sqrt(tau) * n)
    K = 1.0 / eta_cache - 1.0

    def s_of(B):
        return np.sqrt(1.0 + (alpha * B) ** 2)

    def h(B):
        return B * _sqrt1p_minus1((alpha * B) ** 2) - K

    if K <= 0.0:  # eta = 1: no sequential advantage, degenerate to B = 1
        root = 0.0
    else:
        hi = 1.0
        while h(hi) < 0.0:
            hi *= 2.0
            if hi > 1e18:
                raise RuntimeError("bracket expansion failed")
        root = brentq(h, 0.0, hi, xtol=1e-14, rtol=1e-15)
    if root > 0.0:
        residual = abs(root - K / (s_of(root) - 1.0))
    else:
        residual = 0.0
    b_star = min(max(root, 1.0), float(n))
    clamped = b_star != root
    s = s_of(b_star)
    xi = (s + 1.0) / s  # algebraic simplification of the defining ratio
    return OptimalBatch(b_star=b_star, xi=float(xi), residual=float(residual), clamped=clamped)


def two_point_params(b_star, n):
    """Probability of a full batch so that the two-point law has mean b_star
    exactly: p = (B - 1)/(n - 1).
    """
    if not 1 <= b_star <= n:
        raise ValueError("b_star must lie in [1, n]")
    if n == 1:
        return 0.0
    return (b_star - 1.0) / (n - 1.0)


def make_plan(n, kappa, tau, eta_cache, L=1.0):
    """Compose planner outputs into a RatePlan (+ p_full) given the condition
    number; mu is derived as L / kappa.
    """
    mu = L / kappa
    opt = solve_optimal_batch(n, kappa, tau, eta_cache)
    gamma, rho, c, beta = gamma_dependent(n, L, mu, tau, opt.b_star)
    plan = RatePlan(
        n=n, L=L, mu=mu, kappa=kappa, tau=tau, beta=beta, c_lyapunov=c,
        expected_batch=opt.b_star, gamma=gamma, rho=rho, eta_cache=eta_cache,
    )
    return plan, two_point_params(opt.b_star, n), opt
