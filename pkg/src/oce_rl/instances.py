"""Hard-instance MDP families and the thresholds used to certify their gaps.

Every generated instance puts the decision states ``s_1..s_S`` at indices
``0..S-1``, the rewarding absorbing state ``G`` at index ``S`` and the
zero-reward absorbing state ``B`` at index ``S + 1``. Decision states pay
nothing and move to ``G`` with probability ``q`` and to ``B`` otherwise.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import HypothesisViolatedError, InvalidParametersError, OutsideDomainError
from .mdp import TabularMdp, validate
from .planning import exact_q_star
from .risk import FiniteDistribution, Utility, oce_eval


class GapCheck(NamedTuple):
    gap: float
    certified_lb: float
    delta_factor: float
    holds: bool


def _check_common(S, A, gamma, p):
    if S < 1 or A < 1:
        raise InvalidParametersError(f"need S, A >= 1, got S={S}, A={A}")
    if not (0.0 < gamma < 1.0):
        raise InvalidParametersError(f"gamma must lie in (0, 1), got {gamma!r}")
    if not (0.5 < p < 1.0):
        raise InvalidParametersError(f"p must lie in (1/2, 1), got {p!r}")


def _goal_chain(S: int, n_actions: int, gamma: float, q: np.ndarray) -> TabularMdp:
    """Instance where decision pair ``(s, a)`` reaches G with probability ``q[s, a]``."""
    g, b = S, S + 1
    rewards = np.zeros((S + 2, n_actions))
    rewards[g] = 1.0
    p = np.zeros((S + 2, n_actions, S + 2))
    p[:S, :, g] = q
    p[:S, :, b] = 1.0 - q
    p[g, :, g] = 1.0
    p[b, :, b] = 1.0
    m = TabularMdp(gamma, rewards, p)
    validate(m)
    return m


def build_value_lb_pair(S: int, A: int, gamma: float, p: float, alpha: float,
                        i: int) -> tuple[TabularMdp, TabularMdp]:
    """``(M0, M1)`` where every pair has ``q = p`` except pair ``i``, which has ``p + alpha`` in M1.

    Pairs are numbered ``i = s * A + a``.
    """
    _check_common(S, A, gamma, p)
    if not (0.0 <= alpha < (1.0 - p) / 5.0):
        raise InvalidParametersError(f"alpha must lie in [0, (1-p)/5), got {alpha!r}")
    if not (0 <= i < S * A):
        raise InvalidParametersError(f"pair index must lie in [0, {S * A}), got {i}")
    q0 = np.full((S, A), p)
    q1 = q0.copy()
    q1[divmod(i, A)] = p + alpha
    return _goal_chain(S, A, gamma, q0), _goal_chain(S, A, gamma, q1)


def build_policy_lb_family(S: int, A: int, gamma: float, p: float, alpha: float,
                           i: int, l: int) -> TabularMdp:
    """Instance with ``A + 1`` actions under hypothesis ``l`` at state ``i``.

    Action 0 reaches G with probability ``p + alpha`` and all others with
    ``p``, except that for ``l >= 1`` action ``l`` at state ``i`` gets
    ``p + 2 alpha``. States other than ``i`` always follow the ``l = 0`` layout.
    """
    _check_common(S, A, gamma, p)
    if not (0.0 <= alpha < (1.0 - p) / 10.0):
        raise InvalidParametersError(f"alpha must lie in [0, (1-p)/10), got {alpha!r}")
    if not (0 <= i < S):
        raise InvalidParametersError(f"state index must lie in [0, {S}), got {i}")
    if not (0 <= l <= A):
        raise InvalidParametersError(f"hypothesis index must lie in [0, {A}], got {l}")
    q = np.full((S, A + 1), p)
    q[:, 0] = p + alpha
    if l > 0:
        q[i, l] = p + 2.0 * alpha
    return _goal_chain(S, A + 1, gamma, q)


def _check_impossibility(gamma, p):
    if not (0.0 < gamma < 1.0):
        raise InvalidParametersError(f"gamma must lie in (0, 1), got {gamma!r}")
    if not (0.0 < p <= 1.0):
        raise InvalidParametersError(f"p must lie in (0, 1], got {p!r}")


def build_impossibility_mdp(gamma: float, p: float) -> TabularMdp:
    """Three states ``s0=0, G=1, B=2`` and one action; ``s0`` reaches G with probability ``p``."""
    _check_impossibility(gamma, p)
    rewards = np.array([[0.0], [1.0], [0.0]])
    trans = np.zeros((3, 1, 3))
    trans[0, 0] = [0.0, p, 1.0 - p]
    trans[1, 0, 1] = 1.0
    trans[2, 0, 2] = 1.0
    return TabularMdp(gamma, rewards, trans)


def build_impossibility_policy_mdp(gamma: float, p: float, j: int) -> TabularMdp:
    """Two-action variant: action ``j`` at ``s0`` is the risky one, the other reaches G surely."""
    _check_impossibility(gamma, p)
    if j not in (0, 1):
        raise InvalidParametersError(f"risky action must be 0 or 1, got {j}")
    rewards = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]])
    trans = np.zeros((3, 2, 3))
    trans[0, j] = [0.0, p, 1.0 - p]
    trans[0, 1 - j, 1] = 1.0
    trans[1, :, 1] = 1.0
    trans[2, :, 2] = 1.0
    return TabularMdp(gamma, rewards, trans)


def distinguishing_sample_bound(p: float, delta: float) -> float:
    """``log(1/(2 delta)) / log(1/p)``: samples below which ``p`` and 1 look alike.

    Infinite at ``p = 1``.
    """
    if not (0.0 < p <= 1.0):
        raise InvalidParametersError(f"p must lie in (0, 1], got {p!r}")
    if not (0.0 < delta < 0.5):
        raise InvalidParametersError(f"delta must lie in (0, 1/2), got {delta!r}")
    if p == 1.0:
        return math.inf
    return math.log(1.0 / (2.0 * delta)) / math.log(1.0 / p)


def eta_star_threshold(u: Utility, x: float) -> float:
    """Smallest ``p`` at which ``eta* = x`` for ``{x w.p. p, 0 w.p. 1 - p}``.

    Only defined for utilities with a kink at zero, ``u'_+(0) < 1 < u'_-(0)``.
    """
    if x <= 0:
        raise ValueError(f"x must be positive, got {x!r}")
    d_plus, d_minus = u.right_derivative(0.0), u.left_derivative(0.0)
    if not (d_plus < 1.0 < d_minus):
        raise HypothesisViolatedError(
            f"{u.kind} needs u'_+(0) < 1 < u'_-(0), got {d_plus!r} and {d_minus!r}"
        )
    return 1.0 - (1.0 - d_plus) / (u.right_derivative(-x) - d_plus)


def risk_averse_pbar(u: Utility, x: float) -> float:
    """A ``p`` above which ``u(x - eta*) - u(-eta*) > 0``; 0 when ``u(-x) = -x``.

    With ``r = x / -u(-x)`` this is ``max((1 + r) / 2, 1 - r)``. Past ``1 - r``
    the point ``eta = 0`` can no longer be a maximiser, which is what keeps the
    gap factor positive when ``u`` vanishes on the positive half-line; the
    first term alone falls short of that once ``r < 1/3``.
    """
    if x <= 0:
        raise ValueError(f"x must be positive, got {x!r}")
    if not u.has_full_domain:
        raise OutsideDomainError(f"{u.kind} utility is -inf at -{x!r}")
    u_x = float(u(-x))
    if u_x >= -x:
        return 0.0
    r = x / -u_x
    return max(0.5 * (1.0 + r), 1.0 - r)


def suggest_p(u: Utility, x: float) -> float:
    """Midpoint between 1 and the largest applicable threshold (at least 1/2)."""
    floor = max(risk_averse_pbar(u, x), 0.5)
    try:
        floor = max(floor, eta_star_threshold(u, x))
    except HypothesisViolatedError:
        pass
    return 0.5 * (floor + 1.0)


def gap_check(u: Utility, gamma: float, p: float, alpha: float) -> GapCheck:
    """Compare ``Q*_1(z) - Q*_0(z)`` on the single-pair block with ``gamma * alpha * Delta``.

    ``Delta = u(H - eta0) - u(-eta0)`` with ``eta0`` the maximiser of the OCE of
    the continuation value ``{H w.p. p, 0 w.p. 1 - p}`` under M0.
    """
    m0, m1 = build_value_lb_pair(1, 1, gamma, p, alpha, 0)
    gap = float(exact_q_star(m1, u, 1e-10)[0, 0] - exact_q_star(m0, u, 1e-10)[0, 0])
    h = m0.horizon
    eta0 = oce_eval(u, FiniteDistribution([h, 0.0], [p, 1.0 - p])).eta
    delta_factor = float(u(h - eta0) - u(-eta0))
    lb = gamma * alpha * delta_factor
    return GapCheck(gap, lb, delta_factor, gap >= lb - 1e-8)


def random_mdp(rng: np.random.Generator, S: int, A: int, gamma: float) -> TabularMdp:
    """Uniform rewards and Dirichlet(1) rows; about one row in five is deterministic."""
    rewards = rng.uniform(0.0, 1.0, size=(S, A))
    trans = rng.dirichlet(np.ones(S), size=(S, A))
    sparse = rng.uniform(size=(S, A)) < 0.2
    targets = rng.integers(0, S, size=(S, A))
    trans[sparse] = np.eye(S)[targets[sparse]]
    # Renormalise so rows pass the strict stochasticity check.
    trans /= trans.sum(axis=2, keepdims=True)
    return TabularMdp.checked(gamma, rewards, trans)
