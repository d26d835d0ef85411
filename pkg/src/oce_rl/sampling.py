"""Generative-model access, plug-in transition estimates and sample budgets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NotLearnableError
from .mdp import TabularMdp
from .risk import Utility

# Recorded in experiment outputs so the random streams can be reproduced.
PRNG_ALGORITHM = "numpy.random.PCG64; per-pair stream SeedSequence(entropy=seed, spawn_key=(s, a))"


class GenerativeModel:
    """Simulator returning next-state samples ``s' ~ P(.|s, a)``.

    Each (s, a) pair owns an independent PCG64 stream seeded from
    ``(seed, s, a)``, so draws for one pair never depend on how often other
    pairs were queried, or in which order.
    """

    def __init__(self, mdp: TabularMdp, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")
        self.mdp = mdp
        self.seed = int(seed)
        self.calls = 0
        self._streams: dict[tuple[int, int], np.random.Generator] = {}

    def _stream(self, s: int, a: int) -> np.random.Generator:
        key = (int(s), int(a))
        rng = self._streams.get(key)
        if rng is None:
            seq = np.random.SeedSequence(entropy=self.seed, spawn_key=key)
            rng = self._streams[key] = np.random.Generator(np.random.PCG64(seq))
        return rng

    def draw(self, s: int, a: int) -> int:
        """One next-state sample."""
        self.calls += 1
        return int(self._stream(s, a).choice(self.mdp.num_states, p=self.mdp.transitions[s, a]))

    def draw_counts(self, s: int, a: int, n: int) -> np.ndarray:
        """Tallies of ``n`` independent next-state samples from (s, a)."""
        self.calls += n
        return self._stream(s, a).multinomial(n, self.mdp.transitions[s, a])


@dataclass(frozen=True)
class EmpiricalModel:
    counts: np.ndarray
    n_per_pair: int
    mdp: TabularMdp

    @property
    def samples_used(self) -> int:
        return int(self.counts.sum())


def estimate_model(g: GenerativeModel, n_per_pair: int) -> EmpiricalModel:
    """Draw ``N`` samples from every (s, a) and build ``P_hat = n(s, a, s') / N``."""
    if n_per_pair < 1:
        raise ValueError(f"n_per_pair must be at least 1, got {n_per_pair}")
    m = g.mdp
    counts = np.zeros(m.transitions.shape, dtype=np.int64)
    for s in range(m.num_states):
        for a in range(m.num_actions):
            counts[s, a] = g.draw_counts(s, a, n_per_pair)
    p_hat = counts / float(n_per_pair)
    counts.setflags(write=False)
    return EmpiricalModel(counts, int(n_per_pair), m.with_transitions(p_hat))


class SampleBudget(NamedTuple):
    total: int
    per_pair: int


def _budget_terms(u, gamma, n_s, n_a, epsilon, delta):
    if not u.has_full_domain:
        raise NotLearnableError(f"{u.kind} has restricted domain; no finite sample budget exists")
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    if epsilon <= 0 or not (0.0 < delta < 1.0):
        raise ValueError("need epsilon > 0 and delta in (0, 1)")
    if n_s < 1 or n_a < 1:
        raise ValueError("need S, A >= 1")
    h = 1.0 / (1.0 - gamma)
    return n_s * n_a, float(u(-h)), u.right_derivative(-h)


def _finish(scale, log_arg, delta, as_printed, sa) -> SampleBudget:
    if not as_printed:
        log_arg /= delta
    # A nonpositive requirement means any budget suffices.
    t = max(math.ceil(scale * math.log(log_arg)), 0)
    return SampleBudget(t, -(-t // sa))


def sample_count_value(u: Utility, gamma: float, S: int, A: int, epsilon: float, delta: float,
                       as_printed: bool = False) -> SampleBudget:
    """Generative-model calls sufficient for (epsilon, delta)-correct Q-values.

    ``T = 32 g^2 SA u(-H)^2 / (eps^2 (1-g)^2) * log(8 g SA u'_+(-H) / (eps (1-g)^2) / delta)``.
    With ``as_printed`` the ``1/delta`` factor inside the logarithm is dropped.
    """
    sa, u_h, slope = _budget_terms(u, gamma, S, A, epsilon, delta)
    scale = 32.0 * gamma**2 * sa * u_h**2 / (epsilon**2 * (1.0 - gamma) ** 2)
    log_arg = 8.0 * gamma * sa * slope / (epsilon * (1.0 - gamma) ** 2)
    return _finish(scale, log_arg, delta, as_printed, sa)


def sample_count_policy(u: Utility, gamma: float, S: int, A: int, epsilon: float, delta: float,
                        as_printed: bool = False) -> SampleBudget:
    """Generative-model calls sufficient for an epsilon-optimal greedy policy.

    ``T = 128 g^4 SA u(-H)^2 / (eps^2 (1-g)^4) * log(16 g^2 SA u'_+(-H) / (eps (1-g)^3) / delta)``.
    """
    sa, u_h, slope = _budget_terms(u, gamma, S, A, epsilon, delta)
    scale = 128.0 * gamma**4 * sa * u_h**2 / (epsilon**2 * (1.0 - gamma) ** 4)
    log_arg = 16.0 * gamma**2 * sa * slope / (epsilon * (1.0 - gamma) ** 3)
    return _finish(scale, log_arg, delta, as_printed, sa)
