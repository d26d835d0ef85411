import csv
import io
import json
import math

import numpy as np
import pytest
from statsmodels.stats.proportion import proportion_confint

from oce_rl.errors import InvalidParametersError
from oce_rl.harness import (
    SUMMARY_HEADER,
    TRIAL_HEADER,
    ExperimentConfig,
    build_instance,
    run_bound_suite,
    run_impossibility_demo,
    run_pac_experiment,
    trial_seed,
    wilson_interval,
    write_impossibility_csv,
)
from oce_rl.instances import random_mdp
from oce_rl.mdp import TabularMdp, save_mdp


def config(tmp_path, **overrides):
    base = dict(
        mdp_source={"instance": {"kind": "value-lb", "gamma": 0.9, "p": 0.75, "alpha": 0.0}},
        risk={"kind": "cvar", "tau": 0.5},
        epsilon=0.2,
        delta=0.1,
        mode="value",
        n_grid=[10, 100],
        trials=12,
        base_seed=3,
        output_path=str(tmp_path / "out"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_wilson_matches_statsmodels():
    for k, n in [(0, 200), (1, 200), (7, 20), (20, 20), (50, 100), (1, 3)]:
        lo, hi = wilson_interval(k, n)
        ref = proportion_confint(k, n, alpha=0.05, method="wilson")
        assert lo == pytest.approx(ref[0], abs=1e-12)
        assert hi == pytest.approx(ref[1], abs=1e-12)
    z = 1.959963984540054
    assert wilson_interval(0, 200)[1] == pytest.approx(z * z / (200 + z * z), abs=1e-12)


def test_seed_formula():
    assert trial_seed(3, 2, 100) == 3 + 2 * 1_000_003 + 100


def test_outputs_have_exact_headers_and_consistent_rates(tmp_path):
    rows = run_pac_experiment(config(tmp_path))
    trials = read_csv(tmp_path / "out" / "trials.csv")
    summary = read_csv(tmp_path / "out" / "summary.csv")
    assert trials[0] == TRIAL_HEADER
    assert summary[0] == SUMMARY_HEADER
    assert ",".join(TRIAL_HEADER) == "n_per_pair,trial_index,seed,error_sup_norm,failed"
    assert len(trials) == 1 + 2 * 12
    for row in rows:
        flags = [int(t[4]) for t in trials[1:] if int(t[0]) == row.n_per_pair]
        assert row.fail_rate == sum(flags) / len(flags)
        errs = [float(t[3]) for t in trials[1:] if int(t[0]) == row.n_per_pair]
        assert all((e > 0.2) == bool(f) for e, f in zip(errs, flags))
        assert row.max_err == max(errs)
    seeds = [int(t[2]) for t in trials[1:]]
    assert seeds[:2] == [trial_seed(3, 0, 10), trial_seed(3, 1, 10)]
    assert json.loads((tmp_path / "out" / "meta.json").read_text())["prng"].startswith("numpy")


def test_reruns_are_byte_identical_apart_from_wall_time(tmp_path):
    run_pac_experiment(config(tmp_path, output_path=str(tmp_path / "a")))
    run_pac_experiment(config(tmp_path, output_path=str(tmp_path / "b"), jobs=4))
    assert (tmp_path / "a" / "trials.csv").read_bytes() == (tmp_path / "b" / "trials.csv").read_bytes()
    a = [r[:-1] for r in read_csv(tmp_path / "a" / "summary.csv")]
    b = [r[:-1] for r in read_csv(tmp_path / "b" / "summary.csv")]
    assert a == b


def test_deterministic_mdp_never_fails(tmp_path):
    p = np.zeros((2, 2, 2))
    p[0, 0, 1] = p[0, 1, 0] = p[1, :, 1] = 1.0
    m = TabularMdp.checked(0.9, [[0.0, 0.3], [1.0, 0.5]], p)
    save_mdp(m, tmp_path / "det.json")
    for mode in ("value", "policy"):
        rows = run_pac_experiment(config(tmp_path, mdp_source={"path": str(tmp_path / "det.json")},
                                         mode=mode, n_grid=[1, 5], epsilon=0.05))
        assert [r.failures for r in rows] == [0, 0]


def test_horizon_sized_epsilon_never_fails(tmp_path, rng):
    m = random_mdp(rng, 3, 2, 0.5)
    save_mdp(m, tmp_path / "r.json")
    rows = run_pac_experiment(config(tmp_path, mdp_source={"path": str(tmp_path / "r.json")},
                                     risk={"kind": "expectation"}, epsilon=2.0, n_grid=[1, 2, 3]))
    assert all(r.failures == 0 for r in rows)


def test_config_validation(tmp_path):
    for bad in (dict(trials=0), dict(n_grid=[]), dict(n_grid=[10, 10]), dict(n_grid=[100, 10]),
                dict(mode="both"), dict(mdp_source={}), dict(epsilon=0.0)):
        with pytest.raises(InvalidParametersError):
            config(tmp_path, **bad)


def test_config_file_paths_are_relative_to_the_file(tmp_path):
    save_mdp(random_mdp(np.random.default_rng(0), 2, 1, 0.5), tmp_path / "m.json")
    data = {
        "mdp_source": {"path": "m.json"}, "risk": {"kind": "expectation"}, "epsilon": 1.0,
        "delta": 0.1, "mode": "value", "n_grid": [2], "trials": 2, "base_seed": 0, "output_path": "res",
    }
    (tmp_path / "cfg.json").write_text(json.dumps(data))
    cfg = ExperimentConfig.load(tmp_path / "cfg.json")
    run_pac_experiment(cfg)
    assert (tmp_path / "res" / "summary.csv").exists()
    with pytest.raises(InvalidParametersError):
        ExperimentConfig.from_dict({**data, "surprise": 1})


def test_build_instance_variants():
    m0 = build_instance("value-lb", {"gamma": 0.9, "p": 0.6, "alpha": 0.05})
    m1 = build_instance("value-lb", {"gamma": 0.9, "p": 0.6, "alpha": 0.05, "variant": 1})
    assert m0.transitions[0, 0, 1] == 0.6 and m1.transitions[0, 0, 1] == pytest.approx(0.65)
    assert build_instance("policy-lb", {"gamma": 0.9, "p": 0.8, "alpha": 0.01, "A": 2}).num_actions == 3
    assert build_instance("impossibility", {"gamma": 0.9, "p": 1.0}).num_states == 3
    with pytest.raises(InvalidParametersError):
        build_instance("mystery", {"gamma": 0.9, "p": 0.6})
    with pytest.raises(InvalidParametersError):
        build_instance("impossibility", {"gamma": 0.9, "p": 0.6, "l": 2})


def test_impossibility_demo_table():
    rows = run_impossibility_demo(0.9, [0.9, 0.99, 0.999, 1.0], 0.1)
    assert [r.sample_bound for r in rows[:3]] == [16, 161, 1609]
    assert all(abs(r.gap - 9.0) <= 1e-8 for r in rows[:3])
    assert rows[3].gap == 0.0 and math.isinf(rows[3].sample_bound)
    buf = io.StringIO()
    write_impossibility_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "p,gap,sample_bound"
    assert lines[2].endswith(",161") and lines[4].endswith(",inf")


def test_bound_suite_small_runs_pass():
    report = run_bound_suite(1, 0)
    assert report.all_passed
    assert sum(t.passed for t in report.checks.values()) == 15
    d = run_bound_suite(3, 9).to_dict()
    assert d["all_passed"]
    assert d["checks"]["contraction"]["worst_ratio"] <= 1 + 1e-9
    with pytest.raises(InvalidParametersError):
        run_bound_suite(0, 0)
