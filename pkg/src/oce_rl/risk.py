"""Utility functions and exact evaluation of optimized certainty equivalents.

For a concave, nondecreasing utility ``u`` with ``u(0) = 0`` and ``1`` in the
superdifferential at zero, the OCE of a random variable ``X`` is::

    OCE(X) = sup_eta  eta + E[u(X - eta)]

Every utility here is one of a closed family (expectation, entropic, CVaR,
mean-variance, piecewise-linear coherent, essential infimum). Each variant
ships an exact solver for the inner maximisation over eta, vectorised over
many probability rows that share one support. ``oce_eval_generic`` is a
golden-section oracle kept deliberately independent of those solvers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Callable, ClassVar, NamedTuple

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidDistributionError, OutsideDomainError

# Maximisers within this relative distance of the best objective count as ties;
# ties resolve to the largest eta.
_TIE_RTOL = 1e-12
_PROB_ATOL = 1e-12


def _as_output(x):
    if np.ndim(x) == 0:
        return float(x)
    return x


class OceResult(NamedTuple):
    value: float
    eta: float


class DomainBound(NamedTuple):
    u_at_minus_h: float
    rderiv_bound: float
    holds: bool


@dataclass(frozen=True)
class FiniteDistribution:
    """A discrete random variable: ``values[i]`` with probability ``probs[i]``."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        if values.size == 0:
            raise InvalidDistributionError("distribution needs at least one support point")
        if values.shape != probs.shape:
            raise InvalidDistributionError(
                f"values and probs differ in length ({values.size} != {probs.size})"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidDistributionError("support values must be finite")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InvalidDistributionError("probabilities must be finite and nonnegative")
        if abs(probs.sum() - 1.0) > _PROB_ATOL:
            raise InvalidDistributionError(f"probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point_mass(cls, c: float) -> FiniteDistribution:
        return cls([c], [1.0])

    def shifted(self, c: float) -> FiniteDistribution:
        return FiniteDistribution(self.values + c, self.probs)

    def mean(self) -> float:
        return float(self.probs @ self.values)


class Utility:
    """Base class of the closed utility family.

    Subclasses are frozen dataclasses that evaluate elementwise on arrays and
    implement ``_solve_rows`` returning ``(values, etas)`` for a batch of
    probability rows over a shared support.
    """

    kind: ClassVar[str]
    has_full_domain: ClassVar[bool] = True

    def __call__(self, t):
        raise NotImplementedError

    def right_derivative(self, t: float) -> float:
        raise NotImplementedError

    def left_derivative(self, t: float) -> float:
        raise NotImplementedError

    def params(self) -> dict[str, float]:
        return {}

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.params()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def _solve_rows(self, values: np.ndarray, probs: np.ndarray):
        raise NotImplementedError


def _pick_largest_maximizer(obj: np.ndarray, cands: np.ndarray):
    """Row-wise max of ``obj`` (R, C); ties go to the largest candidate."""
    best = obj.max(axis=1)
    near = obj >= (best - _TIE_RTOL * np.maximum(1.0, np.abs(best)))[:, None]
    cands = np.broadcast_to(cands, obj.shape)
    eta = np.where(near, cands, -np.inf).max(axis=1)
    return best, eta


@dataclass(frozen=True)
class Expectation(Utility):
    kind: ClassVar[str] = "expectation"

    def __call__(self, t):
        return _as_output(np.asarray(t, dtype=float) * 1.0)

    def right_derivative(self, t):
        return 1.0

    def left_derivative(self, t):
        return 1.0

    def _solve_rows(self, values, probs):
        # Every eta is optimal; report the largest one on the support.
        eta = np.where(probs > 0, values[None, :], -np.inf).max(axis=1)
        return probs @ values, eta


@dataclass(frozen=True)
class Entropic(Utility):
    """``u(t) = (1 - exp(-beta t)) / beta``; OCE is ``-log E[exp(-beta X)] / beta``."""

    beta: float
    kind: ClassVar[str] = "entropic"

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"entropic beta must be positive, got {self.beta!r}")

    def __call__(self, t):
        with np.errstate(over="ignore"):
            return _as_output(-np.expm1(-self.beta * np.asarray(t, dtype=float)) / self.beta)

    def right_derivative(self, t):
        with np.errstate(over="ignore"):
            return float(np.exp(-self.beta * t))

    left_derivative = right_derivative

    def params(self):
        return {"beta": self.beta}

    def _solve_rows(self, values, probs):
        # logsumexp shifts by the max exponent; zero-probability terms drop out.
        value = -logsumexp(-self.beta * values[None, :], b=probs, axis=1) / self.beta
        return value, value.copy()


class _KinkedLinear(Utility):
    """Slope ``slope_pos`` on ``t >= 0`` and ``slope_neg`` on ``t < 0``."""

    slope_pos: float
    slope_neg: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return _as_output(np.where(t >= 0, self.slope_pos * t, self.slope_neg * t))

    def right_derivative(self, t):
        return self.slope_neg if t < 0 else self.slope_pos

    def left_derivative(self, t):
        return self.slope_neg if t <= 0 else self.slope_pos

    def _solve_rows(self, values, probs):
        # Concave piecewise-linear in eta with kinks at the support points,
        # so some support point is a maximiser.
        cands = values
        u = self(values[None, :] - cands[:, None])
        obj = cands[None, :] + probs @ u.T
        return _pick_largest_maximizer(obj, cands)


@dataclass(frozen=True)
class PiecewiseLinear(_KinkedLinear):
    """``u(t) = lambda1 * t`` for ``t >= 0`` and ``lambda2 * t`` for ``t < 0``.

    These are exactly the finite, strongly risk-averse coherent OCEs when
    ``0 <= lambda1 < 1 < lambda2``.
    """

    lambda1: float
    lambda2: float
    kind: ClassVar[str] = "piecewise_linear"

    def __post_init__(self):
        if not (0.0 <= self.lambda1 < 1.0):
            raise ValueError(f"lambda1 must lie in [0, 1), got {self.lambda1!r}")
        if not (self.lambda2 > 1.0 and math.isfinite(self.lambda2)):
            raise ValueError(f"lambda2 must exceed 1, got {self.lambda2!r}")

    @property
    def slope_pos(self):
        return self.lambda1

    @property
    def slope_neg(self):
        return self.lambda2

    def params(self):
        return {"lambda1": self.lambda1, "lambda2": self.lambda2}


@dataclass(frozen=True)
class Cvar(_KinkedLinear):
    """``u(t) = min(t, 0) / tau``; the OCE is CVaR at level ``tau``."""

    tau: float
    kind: ClassVar[str] = "cvar"

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ValueError(f"cvar tau must lie in (0, 1), got {self.tau!r}")

    slope_pos = 0.0

    @property
    def slope_neg(self):
        return 1.0 / self.tau

    def params(self):
        return {"tau": self.tau}


@dataclass(frozen=True)
class MeanVariance(Utility):
    """``u(t) = t - t**2 / 2`` for ``t <= 1``, else ``1/2``."""

    kind: ClassVar[str] = "mean_variance"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return _as_output(np.where(t <= 1.0, t - 0.5 * t * t, 0.5))

    def right_derivative(self, t):
        return 1.0 - t if t < 1.0 else 0.0

    def left_derivative(self, t):
        return 1.0 - t if t <= 1.0 else 0.0

    def _solve_rows(self, values, probs):
        # The eta-objective is concave and piecewise quadratic with breaks at
        # v_i - 1. On the piece where exactly the k+1 smallest support points
        # are in the quadratic regime the stationary point is
        # (1 - P_k + M_k) / P_k with P_k, M_k the partial mass and partial mean.
        n_rows = probs.shape[0]
        order = np.argsort(values, kind="stable")
        vs = values[order]
        ps = probs[:, order]
        mass = np.cumsum(ps, axis=1)
        moment = np.cumsum(ps * vs[None, :], axis=1)
        safe = np.where(mass > 0, mass, 1.0)
        vertex = np.where(mass > 0, (1.0 - mass + moment) / safe, vs[0])
        lo, hi = values.min(), values.max()
        common = np.clip(np.concatenate([values, values - 1.0]), lo, hi)
        cands = np.concatenate(
            [np.broadcast_to(common, (n_rows, common.size)), np.clip(vertex, lo, hi)], axis=1
        )
        u = self(values[None, None, :] - cands[:, :, None])
        obj = cands + np.einsum("rcm,rm->rc", u, probs)
        return _pick_largest_maximizer(obj, cands)


@dataclass(frozen=True)
class EssentialInfimum(Utility):
    """``u(t) = 0`` on ``[0, inf)`` and ``-inf`` below; dom(u) = [0, inf)."""

    kind: ClassVar[str] = "essinf"
    has_full_domain: ClassVar[bool] = False

    @property
    def xi(self) -> float:
        """``-inf dom(u)``."""
        return 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return _as_output(np.where(t >= 0, 0.0, -np.inf))

    def right_derivative(self, t):
        if t < 0:
            raise OutsideDomainError(f"essinf utility is -inf at t={t!r}")
        return 0.0

    def left_derivative(self, t):
        if t < 0:
            raise OutsideDomainError(f"essinf utility is -inf at t={t!r}")
        return math.inf if t == 0 else 0.0

    def _solve_rows(self, values, probs):
        value = np.where(probs > 0, values[None, :], np.inf).min(axis=1)
        return value, value.copy()


FULL_DOMAIN_KINDS = ("expectation", "entropic", "cvar", "mean_variance", "piecewise_linear")

_CONSTRUCTORS: dict[str, Callable[..., Utility]] = {
    "expectation": lambda: Expectation(),
    "entropic": lambda beta: Entropic(float(beta)),
    "cvar": lambda tau: Cvar(float(tau)),
    "mean_variance": lambda: MeanVariance(),
    "piecewise_linear": lambda lambda1, lambda2: PiecewiseLinear(float(lambda1), float(lambda2)),
    "essinf": lambda: EssentialInfimum(),
}


def utility_from_dict(spec: dict[str, Any]) -> Utility:
    """Build a utility from its JSON object form, e.g. ``{"kind": "cvar", "tau": 0.25}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"risk specification must be an object with a 'kind' key: {spec!r}")
    params = dict(spec)
    kind = params.pop("kind")
    try:
        ctor = _CONSTRUCTORS[kind]
    except KeyError:
        raise ValueError(f"unknown risk kind {kind!r}") from None
    try:
        return ctor(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for risk kind {kind!r}: {params!r}") from exc


def parse_risk(text: str) -> Utility:
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"risk specification is not valid JSON: {text!r}") from exc
    return utility_from_dict(spec)


def utility_eval(u: Utility, t: float) -> float:
    """``u(t)`` in the extended reals; ``-inf`` outside dom(u)."""
    return float(u(t))


def utility_right_derivative(u: Utility, t: float) -> float:
    return u.right_derivative(t)


def _check_rows(probs: np.ndarray) -> None:
    if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > _PROB_ATOL):
        raise InvalidDistributionError("each row must be a probability vector")


def oce_rows(u: Utility, values, probs) -> tuple[np.ndarray, np.ndarray]:
    """OCE of every row of ``probs`` (shape ``(R, m)``) over the support ``values``.

    Returns arrays ``(value, eta)`` of length R. Used by the Bellman operators,
    where all (s, a) rows share the next-state value vector.
    """
    values = np.asarray(values, dtype=float)
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    if probs.shape[1] != values.size:
        raise InvalidDistributionError("rows and support differ in length")
    return u._solve_rows(values, probs)


def oce_eval(u: Utility, d: FiniteDistribution) -> OceResult:
    """Exact ``sup_eta eta + E[u(X - eta)]`` and a maximising eta.

    Where the maximiser is not unique the largest one is returned.
    """
    if not isinstance(d, FiniteDistribution):
        raise InvalidDistributionError(f"expected a FiniteDistribution, got {type(d).__name__}")
    value, eta = oce_rows(u, d.values, d.probs[None, :])
    return OceResult(float(value[0]), float(eta[0]))


def expected_utility(u: Utility, values, probs, eta: float) -> float:
    """``E[u(X - eta)]`` with the convention ``0 * (-inf) = 0``."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    mask = probs > 0
    return float(probs[mask] @ np.asarray(u(values[mask] - eta), dtype=float))


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Maximiser of a unimodal ``f`` on ``[lo, hi]``, to a bracket narrower than ``tol``.

    Returns the midpoint of the final bracket.
    """
    a, b = float(lo), float(hi)
    if b - a <= tol:
        return 0.5 * (a + b)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def oce_eval_generic(u: Utility, d: FiniteDistribution, tol: float = 1e-9) -> OceResult:
    """Golden-section evaluation of the OCE; an oracle for :func:`oce_eval`."""
    if not u.has_full_domain:
        raise OutsideDomainError(f"generic solver needs a full-domain utility, got {u.kind}")
    if tol <= 0:
        raise ValueError("tol must be positive")

    def objective(eta):
        return eta + expected_utility(u, d.values, d.probs, eta)

    eta = golden_section_max(objective, d.values.min(), d.values.max(), tol)
    return OceResult(objective(eta), eta)


def check_domain_bound(u: Utility, h: float) -> DomainBound:
    """Compare ``-u(-H)`` with ``u'_+(-(H - 1))``; the former should dominate."""
    if not u.has_full_domain:
        raise OutsideDomainError(f"{u.kind} utility is -inf at -H")
    if h < 1:
        raise ValueError(f"H must be at least 1, got {h!r}")
    u_h = utility_eval(u, -h)
    slope = u.right_derivative(-(h - 1.0))
    return DomainBound(u_h, slope, bool(-u_h >= slope))
