"""Model-based OCE value iteration (MB-OCE-VI) from a generative model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotLearnableError
from .planning import value_iteration
from .risk import Utility
from .sampling import GenerativeModel, estimate_model, sample_count_policy, sample_count_value

MODES = ("value", "policy")


@dataclass(frozen=True)
class LearnOutcome:
    q_hat: np.ndarray
    pi_hat: np.ndarray
    samples_used: int
    n_per_pair: int
    vi_iterations: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "q_hat": self.q_hat.tolist(),
            "pi_hat": self.pi_hat.tolist(),
            "samples_used": self.samples_used,
            "n_per_pair": self.n_per_pair,
            "vi_iterations": self.vi_iterations,
            "seed": self.seed,
        }


def per_pair_budget(u: Utility, gamma: float, S: int, A: int, epsilon: float, delta: float,
                    mode: str = "value", as_printed: bool = False) -> int:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    count = sample_count_value if mode == "value" else sample_count_policy
    return max(count(u, gamma, S, A, epsilon, delta, as_printed).per_pair, 1)


def mb_oce_vi(
    g: GenerativeModel,
    u: Utility,
    epsilon: float,
    delta: float,
    mode: str = "value",
    budget_override: int | None = None,
    as_printed: bool = False,
) -> LearnOutcome:
    """Estimate the model with ``N`` samples per pair, then plan on it.

    ``N`` comes from the sample-budget formula for ``mode`` unless
    ``budget_override`` is given. Planning targets accuracy ``epsilon / 2`` on
    the empirical MDP; the other half of the error budget is left for the
    estimation error.
    """
    if not u.has_full_domain:
        raise NotLearnableError(f"{u.kind} utility is not PAC-learnable")
    if not (0.0 < epsilon) or not (0.0 < delta < 1.0):
        raise ValueError("need epsilon > 0 and delta in (0, 1)")
    m = g.mdp
    if budget_override is not None:
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        n = int(budget_override)
    else:
        n = per_pair_budget(u, m.gamma, m.num_states, m.num_actions, epsilon, delta, mode, as_printed)
    model = estimate_model(g, n)
    plan = value_iteration(model.mdp, u, epsilon / 2.0)
    return LearnOutcome(
        q_hat=plan.q,
        pi_hat=plan.policy,
        samples_used=model.samples_used,
        n_per_pair=n,
        vi_iterations=plan.iterations,
        seed=g.seed,
    )
