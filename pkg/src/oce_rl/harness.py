"""Monte Carlo PAC experiments, impossibility tables and randomized bound checks."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.stats import binomtest

from . import instances
from .errors import InvalidParametersError
from .learner import MODES, mb_oce_vi
from .mdp import TabularMdp, load_mdp, v_from_q
from .planning import (
    bellman_optimal_apply,
    exact_q_star,
    greedy_bound_check,
    policy_value,
    simulation_bound_check,
)
from .risk import Cvar, Entropic, Expectation, EssentialInfimum, MeanVariance, PiecewiseLinear, Utility, utility_from_dict
from .sampling import PRNG_ALGORITHM, GenerativeModel

TRIAL_HEADER = ["n_per_pair", "trial_index", "seed", "error_sup_norm", "failed"]
SUMMARY_HEADER = [
    "n_per_pair", "trials", "failures", "fail_rate",
    "wilson_lo", "wilson_hi", "mean_err", "max_err", "wall_ms",
]
SEED_STRIDE = 1_000_003


def build_instance(kind: str, params: dict[str, Any]) -> TabularMdp:
    """Named hard instance from CLI-style parameters.

    ``value-lb`` takes ``variant`` 0 or 1 to pick M0 or M1; ``policy-lb`` takes
    the hypothesis index ``l``.
    """
    p = dict(params)
    gamma, prob = float(p.pop("gamma")), float(p.pop("p"))
    alpha = float(p.pop("alpha", 0.0))
    S, A, i = int(p.pop("S", 1)), int(p.pop("A", 1)), int(p.pop("i", 0))
    if kind == "value-lb":
        variant = int(p.pop("variant", 0))
        if variant not in (0, 1):
            raise InvalidParametersError(f"variant must be 0 or 1, got {variant}")
        m = instances.build_value_lb_pair(S, A, gamma, prob, alpha, i)[variant]
    elif kind == "policy-lb":
        m = instances.build_policy_lb_family(S, A, gamma, prob, alpha, i, int(p.pop("l", 0)))
    elif kind == "impossibility":
        m = instances.build_impossibility_mdp(gamma, prob)
    else:
        raise InvalidParametersError(f"unknown instance kind {kind!r}")
    if p:
        raise InvalidParametersError(f"unused instance parameters: {sorted(p)}")
    return m


@dataclass
class ExperimentConfig:
    mdp_source: dict[str, Any]
    risk: dict[str, Any]
    epsilon: float
    delta: float
    mode: str
    n_grid: list[int]
    trials: int
    base_seed: int
    output_path: str
    jobs: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParametersError("trials must be at least 1")
        grid = [int(n) for n in self.n_grid]
        if not grid or any(n < 1 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidParametersError("n_grid must be nonempty, positive and strictly increasing")
        self.n_grid = grid
        if self.mode not in MODES:
            raise InvalidParametersError(f"mode must be one of {MODES}")
        if self.epsilon <= 0 or not (0.0 < self.delta < 1.0):
            raise InvalidParametersError("need epsilon > 0 and delta in (0, 1)")
        if self.base_seed < 0 or self.jobs < 1:
            raise InvalidParametersError("base_seed must be >= 0 and jobs >= 1")
        src = self.mdp_source
        if not isinstance(src, dict) or len(src.keys() & {"path", "instance"}) != 1:
            raise InvalidParametersError("mdp_source needs exactly one of 'path' or 'instance'")

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> ExperimentConfig:
        data = dict(data)
        src = dict(data.get("mdp_source", {}))
        # Relative paths in a config file are relative to that file.
        if base_dir is not None:
            if "path" in src:
                src["path"] = str(Path(base_dir) / src["path"])
            if "output_path" in data:
                data["output_path"] = str(Path(base_dir) / data["output_path"])
        data["mdp_source"] = src
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidParametersError(f"bad experiment config: {exc}") from None

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def build_mdp(self) -> TabularMdp:
        if "path" in self.mdp_source:
            return load_mdp(self.mdp_source["path"])
        spec = dict(self.mdp_source["instance"])
        kind = spec.pop("kind")
        return build_instance(kind, spec)


@dataclass(frozen=True)
class TrialRecord:
    n_per_pair: int
    trial_index: int
    seed: int
    error_sup_norm: float
    failed: bool


@dataclass(frozen=True)
class SummaryRow:
    n_per_pair: int
    trials: int
    failures: int
    fail_rate: float
    wilson_lo: float
    wilson_hi: float
    mean_err: float
    max_err: float
    wall_ms: float


def wilson_interval(failures: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(failures, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def trial_seed(base_seed: int, trial_index: int, n: int) -> int:
    return base_seed + SEED_STRIDE * trial_index + n


def _csv_cell(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_csv_cell(getattr(row, h)) for h in header])


def run_pac_experiment(cfg: ExperimentConfig) -> list[SummaryRow]:
    """Repeat MB-OCE-VI ``trials`` times per budget and tabulate failure rates.

    Writes ``trials.csv``, ``summary.csv`` and ``meta.json`` into
    ``cfg.output_path``.
    """
    m = cfg.build_mdp()
    u = utility_from_dict(cfg.risk)
    truth_tol = cfg.epsilon / 100.0
    q_star = exact_q_star(m, u, truth_tol)
    v_star = v_from_q(q_star)

    def trial(n, k):
        seed = trial_seed(cfg.base_seed, k, n)
        out = mb_oce_vi(GenerativeModel(m, seed), u, cfg.epsilon, cfg.delta,
                        mode=cfg.mode, budget_override=n)
        if cfg.mode == "value":
            err = float(np.max(np.abs(q_star - out.q_hat)))
        else:
            err = float(np.max(np.abs(v_star - policy_value(m, u, out.pi_hat, truth_tol))))
        return TrialRecord(n, k, seed, err, err > cfg.epsilon)

    records: list[TrialRecord] = []
    summary: list[SummaryRow] = []
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        for n in cfg.n_grid:
            start = time.perf_counter()
            cell = list(pool.map(lambda k, n=n: trial(n, k), range(cfg.trials)))
            wall_ms = 1000.0 * (time.perf_counter() - start)
            records.extend(cell)
            errs = np.array([r.error_sup_norm for r in cell])
            fails = sum(r.failed for r in cell)
            lo, hi = wilson_interval(fails, cfg.trials)
            summary.append(SummaryRow(n, cfg.trials, fails, fails / cfg.trials, lo, hi,
                                      float(errs.mean()), float(errs.max()), wall_ms))

    out_dir = Path(cfg.output_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "trials.csv", TRIAL_HEADER, records)
    _write_csv(out_dir / "summary.csv", SUMMARY_HEADER, summary)
    meta = {"prng": PRNG_ALGORITHM, "risk": u.to_dict(), "epsilon": cfg.epsilon,
            "delta": cfg.delta, "mode": cfg.mode, "ground_truth_tol": truth_tol}
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return summary


@dataclass(frozen=True)
class ImpossibilityRow:
    p: float
    gap: float
    sample_bound: float


def run_impossibility_demo(gamma: float, p_grid, delta: float) -> list[ImpossibilityRow]:
    """Essential-infimum value gap between ``M_p`` and ``M_1`` next to the sample bound."""
    u = EssentialInfimum()
    q_one = exact_q_star(instances.build_impossibility_mdp(gamma, 1.0), u, 1e-10)[0, 0]
    rows = []
    for p in p_grid:
        q_p = exact_q_star(instances.build_impossibility_mdp(gamma, p), u, 1e-10)[0, 0]
        bound = instances.distinguishing_sample_bound(p, delta)
        rows.append(ImpossibilityRow(float(p), float(q_one - q_p), float(math.ceil(bound)) if math.isfinite(bound) else bound))
    return rows


def write_impossibility_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["p", "gap", "sample_bound"])
    for r in rows:
        bound = "inf" if math.isinf(r.sample_bound) else str(int(r.sample_bound))
        w.writerow([repr(r.p), repr(r.gap), bound])


def full_domain_variants(rng: np.random.Generator) -> list[Utility]:
    """One member of each full-domain utility kind, with random parameters."""
    lam1 = rng.uniform(0.0, 1.0)
    return [
        Expectation(),
        Entropic(float(rng.uniform(0.1, 2.0))),
        Cvar(float(rng.uniform(0.05, 1.0))),
        MeanVariance(),
        PiecewiseLinear(float(lam1), float(rng.uniform(1.05, 4.0))),
    ]


@dataclass
class CheckTally:
    passed: int = 0
    failed: int = 0
    worst_ratio: float = 0.0

    def add(self, ok: bool, lhs: float, rhs: float) -> None:
        if ok:
            self.passed += 1
        else:
            self.failed += 1
        if rhs > 0:
            self.worst_ratio = max(self.worst_ratio, float(lhs / rhs))


@dataclass
class BoundSuiteReport:
    count: int
    seed: int
    checks: dict[str, CheckTally] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(t.failed == 0 for t in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "seed": self.seed,
            "all_passed": self.all_passed,
            "checks": {k: vars(t) for k, t in self.checks.items()},
        }


def _random_shape(rng):
    return int(rng.integers(1, 7)), int(rng.integers(1, 5)), float(rng.choice([0.5, 0.9, 0.95]))


def contraction_check(m: TabularMdp, u: Utility, q, w, tol: float = 1e-9) -> tuple[bool, float, float]:
    lhs = float(np.max(np.abs(bellman_optimal_apply(m, u, q) - bellman_optimal_apply(m, u, w))))
    rhs = m.gamma * float(np.max(np.abs(np.asarray(q) - np.asarray(w))))
    return lhs <= rhs + tol, lhs, rhs


def run_bound_suite(count: int, seed: int, tol: float = 1e-8) -> BoundSuiteReport:
    """Contraction, simulation and greedy checks on ``count`` random draws per check."""
    if count < 1:
        raise InvalidParametersError("count must be at least 1")
    rng = np.random.default_rng(seed)
    report = BoundSuiteReport(count, seed, {k: CheckTally() for k in ("contraction", "simulation", "greedy")})
    for _ in range(count):
        S, A, gamma = _random_shape(rng)
        m = instances.random_mdp(rng, S, A, gamma)
        h = m.horizon
        q = rng.uniform(0.0, h, size=(S, A))
        w = rng.uniform(0.0, h, size=(S, A))
        m2 = instances.random_mdp(rng, S, A, gamma)
        mix = rng.uniform(0.0, 1.0)
        m2 = m.with_transitions((1 - mix) * m.transitions + mix * m2.transitions)
        pi = rng.integers(0, A, size=S)
        noise = rng.uniform(-1.0, 1.0, size=S) * rng.uniform(0.0, 0.5 * h)
        for u in full_domain_variants(rng):
            ok, lhs, rhs = contraction_check(m, u, q, w, min(tol, 1e-9))
            report.checks["contraction"].add(ok, lhs, rhs)
            sim = simulation_bound_check(m, m2, u, pi, tol)
            report.checks["simulation"].add(sim.holds, sim.lhs, sim.rhs)
            vbar = v_from_q(exact_q_star(m, u, 1e-10)) + noise
            gb = greedy_bound_check(m, u, vbar, tol)
            report.checks["greedy"].add(gb.holds, gb.gap, gb.bound)
    return report
