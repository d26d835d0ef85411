"""Risk-sensitive tabular reinforcement learning with recursive OCE objectives."""

from .errors import (
    HypothesisViolatedError,
    InvalidDistributionError,
    InvalidMdpError,
    InvalidParametersError,
    MismatchedMdpsError,
    NotLearnableError,
    OceError,
    OutsideDomainError,
)
from .learner import LearnOutcome, mb_oce_vi
from .mdp import TabularMdp, load_mdp, save_mdp, validate
from .planning import exact_q_star, policy_value, value_iteration
from .risk import (
    Cvar,
    Entropic,
    EssentialInfimum,
    Expectation,
    FiniteDistribution,
    MeanVariance,
    PiecewiseLinear,
    oce_eval,
    parse_risk,
)
from .sampling import GenerativeModel, sample_count_policy, sample_count_value

__all__ = [
    "Cvar", "Entropic", "EssentialInfimum", "Expectation", "FiniteDistribution",
    "GenerativeModel", "HypothesisViolatedError", "InvalidDistributionError",
    "InvalidMdpError", "InvalidParametersError", "LearnOutcome", "MeanVariance",
    "MismatchedMdpsError", "NotLearnableError", "OceError", "OutsideDomainError",
    "PiecewiseLinear", "TabularMdp", "exact_q_star", "load_mdp", "mb_oce_vi",
    "oce_eval", "parse_risk", "policy_value", "sample_count_policy",
    "sample_count_value", "save_mdp", "validate", "value_iteration",
]
