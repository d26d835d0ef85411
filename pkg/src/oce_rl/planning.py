"""OCE Bellman operators, value iteration and numerical checks of the bounds.

The optimal operator is ``(T f)(s, a) = R(s, a) + gamma * rho_{s,a}(max_a' f(s', a'))``
where ``rho_{s,a}`` is the OCE under the next-state distribution ``P(.|s, a)``.
All (s, a) cells of one application are solved in a single vectorised call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import MismatchedMdpsError, OutsideDomainError
from .mdp import TabularMdp, greedy_from_q, v_from_q, validate_policy
from .risk import Utility, golden_section_max, oce_rows

# Residuals below a few ulps of the value scale cannot shrink further.
_NOISE_ULPS = 64
_MAX_SWEEPS = 1_000_000
GRID_POINTS = 10_001


@dataclass(frozen=True)
class PlanningResult:
    q: np.ndarray
    policy: np.ndarray
    iterations: int
    final_residual: float


class SimulationBound(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


class GreedyBound(NamedTuple):
    gap: float
    bound: float
    holds: bool


def _backup(m: TabularMdp, u: Utility, v: np.ndarray) -> np.ndarray:
    """``R + gamma * rho_{s,a}(v)`` for every (s, a), shape ``(S, A)``."""
    n_s, n_a = m.num_states, m.num_actions
    rho, _ = oce_rows(u, v, m.transitions.reshape(n_s * n_a, n_s))
    return m.rewards + m.gamma * rho.reshape(n_s, n_a)


def bellman_optimal_apply(m: TabularMdp, u: Utility, q) -> np.ndarray:
    return _backup(m, u, v_from_q(q))


def bellman_policy_apply(m: TabularMdp, u: Utility, pi, v) -> np.ndarray:
    pi = validate_policy(pi, m.num_states, m.num_actions)
    states = np.arange(m.num_states)
    rho, _ = oce_rows(u, np.asarray(v, dtype=float), m.transitions[states, pi])
    return m.rewards[states, pi] + m.gamma * rho


def vi_iterations(gamma: float, epsilon: float) -> int:
    """Smallest k with ``gamma**k / (2 (1 - gamma)) <= epsilon``, at least 1."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    k = math.ceil(math.log(1.0 / (2.0 * epsilon * (1.0 - gamma))) / math.log(1.0 / gamma))
    return max(k, 1)


def value_iteration(m: TabularMdp, u: Utility, epsilon: float) -> PlanningResult:
    """Run the fixed number of sweeps that guarantees ``||Q_k - Q*|| <= epsilon``.

    Starts from the constant table ``1 / (2 (1 - gamma))``, the midpoint of
    the value range, so the initial error is at most half the horizon.
    """
    k = vi_iterations(m.gamma, epsilon)
    q = np.full(m.rewards.shape, 0.5 * m.horizon)
    residual = 0.0
    for _ in range(k):
        q_next = bellman_optimal_apply(m, u, q)
        residual = float(np.max(np.abs(q_next - q)))
        q = q_next
    return PlanningResult(q, greedy_from_q(q), k, residual)


def _stop_threshold(gamma: float, tol: float, scale: float) -> float:
    return max(tol * (1.0 - gamma) / gamma, _NOISE_ULPS * np.finfo(float).eps * max(1.0, scale))


def exact_q_star(m: TabularMdp, u: Utility, tol: float) -> np.ndarray:
    """``Q*`` to sup-norm accuracy ``tol``, by iterating to a certified residual."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    q = np.full(m.rewards.shape, 0.5 * m.horizon)
    for _ in range(_MAX_SWEEPS):
        q_next = bellman_optimal_apply(m, u, q)
        residual = float(np.max(np.abs(q_next - q)))
        q = q_next
        if residual <= _stop_threshold(m.gamma, tol, m.horizon):
            return q
    raise RuntimeError("value iteration failed to converge")


def policy_value(m: TabularMdp, u: Utility, pi, tol: float) -> np.ndarray:
    """``V^pi`` to sup-norm accuracy ``tol``."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    pi = validate_policy(pi, m.num_states, m.num_actions)
    v = np.full(m.num_states, 0.5 * m.horizon)
    for _ in range(_MAX_SWEEPS):
        v_next = bellman_policy_apply(m, u, pi, v)
        residual = float(np.max(np.abs(v_next - v)))
        v = v_next
        if residual <= _stop_threshold(m.gamma, tol, m.horizon):
            return v
    raise RuntimeError("policy evaluation failed to converge")


def policy_q_value(m: TabularMdp, u: Utility, pi, tol: float) -> np.ndarray:
    """``Q^pi(s, a) = R(s, a) + gamma * rho_{s,a}(V^pi)``."""
    return _backup(m, u, policy_value(m, u, pi, tol))


def _same_shape(m1: TabularMdp, m2: TabularMdp) -> None:
    if m1.transitions.shape != m2.transitions.shape:
        raise MismatchedMdpsError(
            f"MDP shapes differ: {m1.transitions.shape} vs {m2.transitions.shape}"
        )
    if m1.gamma != m2.gamma or not np.array_equal(m1.rewards, m2.rewards):
        raise MismatchedMdpsError("MDPs must share rewards and discount factor")


def _sup_abs_utility_gap(u, v, diff, horizon, grid_points):
    """``max_rows sup_{eta in [0, H]} |diff_row . u(v - eta)|``.

    The map is not concave in eta, so scan a uniform grid, then polish the best
    grid point of each sign with golden-section on its neighbouring cells.
    """
    grid = np.linspace(0.0, horizon, grid_points)
    g = np.asarray(u(v[None, :] - grid[:, None])) @ diff.T  # (G, rows)
    step = grid[1] - grid[0] if grid_points > 1 else 0.0
    best = 0.0
    for r in range(diff.shape[0]):
        row = diff[r]
        if not np.any(row):
            continue
        for sign in (1.0, -1.0):
            j = int(np.argmax(sign * g[:, r]))
            lo, hi = max(0.0, grid[j] - step), min(horizon, grid[j] + step)

            def f(eta, sign=sign, row=row):
                return sign * float(row @ np.asarray(u(v - eta)))

            eta = golden_section_max(f, lo, hi, 1e-12 * max(1.0, horizon))
            best = max(best, sign * g[j, r], f(eta))
    return best


def simulation_bound_check(
    m1: TabularMdp,
    m2: TabularMdp,
    u: Utility,
    pi,
    tol: float,
    grid_points: int = GRID_POINTS,
) -> SimulationBound:
    """Check the simulation bound for two MDPs that differ only in transitions.

    ``lhs = ||Q^pi_1 - Q^pi_2||`` and
    ``rhs = gamma/(1-gamma) * max_{s,a} sup_eta |sum_s' (P1 - P2)(s') u(V^pi_1(s') - eta)|``.
    """
    _same_shape(m1, m2)
    if not u.has_full_domain:
        raise OutsideDomainError(f"simulation bound needs a full-domain utility, got {u.kind}")
    eval_tol = min(tol, 1e-10) / 10.0
    q1 = policy_q_value(m1, u, pi, eval_tol)
    q2 = policy_q_value(m2, u, pi, eval_tol)
    lhs = float(np.max(np.abs(q1 - q2)))
    v1 = policy_value(m1, u, pi, eval_tol)
    n = m1.num_states * m1.num_actions
    diff = (m1.transitions - m2.transitions).reshape(n, m1.num_states)
    sup = _sup_abs_utility_gap(u, v1, diff, m1.horizon, grid_points)
    rhs = m1.gamma / (1.0 - m1.gamma) * sup
    return SimulationBound(lhs, rhs, lhs <= rhs + tol)


def greedy_policy(m: TabularMdp, u: Utility, vbar) -> np.ndarray:
    """``argmax_a R(s, a) + gamma * rho_{s,a}(vbar)``, lowest index on ties."""
    return greedy_from_q(_backup(m, u, np.asarray(vbar, dtype=float)))


def greedy_bound_check(m: TabularMdp, u: Utility, vbar, tol: float) -> GreedyBound:
    """Check ``||V* - V^greedy|| <= 2 gamma eps / (1 - gamma)`` with ``eps = ||V* - vbar||``."""
    eval_tol = min(tol, 1e-10) / 10.0
    v_star = v_from_q(exact_q_star(m, u, eval_tol))
    vbar = np.asarray(vbar, dtype=float)
    eps = float(np.max(np.abs(v_star - vbar)))
    v_greedy = policy_value(m, u, greedy_policy(m, u, vbar), eval_tol)
    gap = float(np.max(np.abs(v_star - v_greedy)))
    bound = 2.0 * m.gamma * eps / (1.0 - m.gamma)
    return GreedyBound(gap, bound, gap <= bound + tol)
