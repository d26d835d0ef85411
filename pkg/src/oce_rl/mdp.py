"""Tabular discounted MDPs with deterministic rewards, plus JSON I/O.

Q-tables are ``(S, A)`` float arrays, V-tables length-``S`` float arrays and
policies length-``S`` integer arrays of action indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidMdpError

_ROW_ATOL = 1e-12


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """``(S, A, P, R, gamma)`` with ``transitions[s, a, s']`` and ``rewards[s, a]``.

    Construction only normalises array types; call :func:`validate` (or
    ``TabularMdp.checked``) to enforce the invariants.
    """

    gamma: float
    rewards: np.ndarray
    transitions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "rewards", _frozen(self.rewards, float))
        object.__setattr__(self, "transitions", _frozen(self.transitions, float))

    @classmethod
    def checked(cls, gamma, rewards, transitions) -> TabularMdp:
        m = cls(gamma, rewards, transitions)
        validate(m)
        return m

    @property
    def num_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    @property
    def horizon(self) -> float:
        """Effective horizon ``1 / (1 - gamma)``."""
        return 1.0 / (1.0 - self.gamma)

    def with_transitions(self, transitions) -> TabularMdp:
        return TabularMdp(self.gamma, self.rewards, transitions)

    def __eq__(self, other):
        if not isinstance(other, TabularMdp):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and np.array_equal(self.rewards, other.rewards)
            and np.array_equal(self.transitions, other.transitions)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "rewards": self.rewards.tolist(),
            "transitions": self.transitions.tolist(),
        }

    def to_json(self, indent: int | None = None) -> str:
        # json writes floats with repr(), which round-trips bit-exactly.
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> TabularMdp:
        try:
            m = cls(data["gamma"], data["rewards"], data["transitions"])
        except KeyError as exc:
            raise InvalidMdpError(f"MDP JSON is missing field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise InvalidMdpError(f"MDP arrays are ragged or non-numeric: {exc}") from None
        validate(m)
        for key, actual in (("num_states", m.num_states), ("num_actions", m.num_actions)):
            if key in data and data[key] != actual:
                raise InvalidMdpError(f"{key}={data[key]} does not match the reward array")
        return m

    @classmethod
    def from_json(cls, text: str) -> TabularMdp:
        return cls.from_dict(json.loads(text))


def load_mdp(path) -> TabularMdp:
    return TabularMdp.from_json(Path(path).read_text())


def save_mdp(m: TabularMdp, path) -> None:
    Path(path).write_text(m.to_json(indent=None) + "\n")


def validate(m: TabularMdp) -> None:
    """Raise :class:`InvalidMdpError` naming the first violated invariant."""
    r, p = m.rewards, m.transitions
    if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 1:
        raise InvalidMdpError(f"rewards must be a nonempty S x A array, got shape {r.shape}")
    n_s, n_a = r.shape
    if p.shape != (n_s, n_a, n_s):
        raise InvalidMdpError(f"transitions must have shape {(n_s, n_a, n_s)}, got {p.shape}")
    if not (0.0 < m.gamma < 1.0):
        raise InvalidMdpError(f"gamma out of range (0, 1): {m.gamma!r}")
    if not np.all((r >= 0.0) & (r <= 1.0)):
        s, a = np.argwhere(~((r >= 0.0) & (r <= 1.0)))[0]
        raise InvalidMdpError(f"reward out of range [0, 1] at (s={s}, a={a}): {r[s, a]!r}")
    if not np.all(p >= 0.0):
        s, a, _ = np.argwhere(~(p >= 0.0))[0]
        raise InvalidMdpError(f"row not stochastic at (s={s}, a={a}): negative or NaN entry")
    sums = p.sum(axis=2)
    bad = np.abs(sums - 1.0) > _ROW_ATOL
    if np.any(bad):
        s, a = np.argwhere(bad)[0]
        raise InvalidMdpError(f"row not stochastic at (s={s}, a={a}): sums to {sums[s, a]!r}")


def validate_policy(pi, num_states: int, num_actions: int) -> np.ndarray:
    pi = np.asarray(pi)
    if pi.shape != (num_states,) or not np.issubdtype(pi.dtype, np.integer):
        raise ValueError(f"policy must be {num_states} integer action indices")
    if np.any((pi < 0) | (pi >= num_actions)):
        raise ValueError(f"policy action index outside [0, {num_actions})")
    return pi


def v_from_q(q) -> np.ndarray:
    return np.asarray(q, dtype=float).max(axis=1)


def greedy_from_q(q) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest action index."""
    return np.asarray(q, dtype=float).argmax(axis=1)
