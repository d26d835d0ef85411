import numpy as np
import pytest

from oce_rl.errors import NotLearnableError
from oce_rl.instances import build_value_lb_pair, random_mdp
from oce_rl.learner import mb_oce_vi, per_pair_budget
from oce_rl.mdp import TabularMdp
from oce_rl.planning import exact_q_star, policy_value, vi_iterations
from oce_rl.risk import Cvar, Entropic, EssentialInfimum, Expectation, MeanVariance
from oce_rl.sampling import GenerativeModel


def deterministic_mdp():
    p = np.zeros((3, 2, 3))
    p[0, 0, 1] = p[0, 1, 2] = p[1, :, 1] = p[2, :, 0] = 1.0
    return TabularMdp.checked(0.8, [[0.2, 0.0], [1.0, 1.0], [0.5, 0.0]], p)


def test_deterministic_mdp_is_learned_exactly_up_to_planning_error():
    m = deterministic_mdp()
    u = Cvar(0.3)
    out = mb_oce_vi(GenerativeModel(m, 7), u, 0.05, 0.1, budget_override=3)
    assert np.max(np.abs(out.q_hat - exact_q_star(m, u, 1e-11))) <= 0.025 + 1e-12
    assert out.samples_used == 3 * 6
    assert out.vi_iterations == vi_iterations(0.8, 0.025)


def test_outcome_is_reproducible_from_seed(rng):
    m = random_mdp(rng, 3, 2, 0.9)
    a = mb_oce_vi(GenerativeModel(m, 42), MeanVariance(), 0.3, 0.1, budget_override=50)
    b = mb_oce_vi(GenerativeModel(m, 42), MeanVariance(), 0.3, 0.1, budget_override=50)
    assert a.to_dict() == b.to_dict()
    assert a.seed == 42 and a.n_per_pair == 50


def test_default_budget_comes_from_formula():
    m0, _ = build_value_lb_pair(1, 1, 0.5, 0.75, 0.0, 0)
    out = mb_oce_vi(GenerativeModel(m0, 0), Expectation(), 1.0, 0.1)
    assert out.n_per_pair == per_pair_budget(Expectation(), 0.5, 3, 1, 1.0, 0.1)
    printed = mb_oce_vi(GenerativeModel(m0, 0), Expectation(), 1.0, 0.1, as_printed=True)
    assert printed.n_per_pair < out.n_per_pair
    policy = mb_oce_vi(GenerativeModel(m0, 0), Expectation(), 1.0, 0.1, mode="policy")
    assert policy.n_per_pair > out.n_per_pair


def test_large_budget_gives_accurate_values(rng):
    m = random_mdp(rng, 3, 2, 0.8)
    u = Cvar(0.5)
    out = mb_oce_vi(GenerativeModel(m, 1), u, 0.1, 0.1, budget_override=100_000)
    assert np.max(np.abs(out.q_hat - exact_q_star(m, u, 1e-10))) <= 0.1


def test_policy_is_greedy_in_q_hat(rng):
    m = random_mdp(rng, 4, 3, 0.9)
    out = mb_oce_vi(GenerativeModel(m, 3), Expectation(), 0.5, 0.1, mode="policy", budget_override=20)
    assert np.array_equal(out.pi_hat, out.q_hat.argmax(axis=1))


def test_input_errors(rng):
    m = random_mdp(rng, 2, 2, 0.9)
    g = GenerativeModel(m, 0)
    with pytest.raises(NotLearnableError):
        mb_oce_vi(g, EssentialInfimum(), 0.1, 0.1)
    with pytest.raises(ValueError):
        mb_oce_vi(g, Expectation(), 0.0, 0.1)
    with pytest.raises(ValueError):
        mb_oce_vi(g, Expectation(), 0.1, 0.1, mode="both", budget_override=5)
    with pytest.raises(ValueError):
        mb_oce_vi(g, Expectation(), 0.1, 0.1, budget_override=0)


def two_state_chain():
    return TabularMdp.checked(0.5, [[0.0], [1.0]], [[[0.4, 0.6]], [[0.3, 0.7]]])


def test_formula_budget_meets_delta_on_two_state_chain():
    m = two_state_chain()
    u = Expectation()
    q_star = exact_q_star(m, u, 1e-12)
    fails = sum(
        np.max(np.abs(mb_oce_vi(GenerativeModel(m, seed), u, 0.25, 0.1).q_hat - q_star)) > 0.25
        for seed in range(200)
    )
    assert fails / 200 <= 0.1


def test_policy_mode_meets_delta_under_its_budget():
    p = np.zeros((2, 2, 2))
    p[0, 0] = [0.5, 0.5]
    p[0, 1] = [0.9, 0.1]
    p[1, 0] = [0.2, 0.8]
    p[1, 1] = [0.6, 0.4]
    m = TabularMdp.checked(0.5, [[0.0, 0.2], [1.0, 0.6]], p)
    u = Cvar(0.5)
    v_star = exact_q_star(m, u, 1e-12).max(axis=1)
    fails = 0
    for seed in range(50):
        out = mb_oce_vi(GenerativeModel(m, seed), u, 0.5, 0.1, mode="policy")
        fails += np.max(np.abs(v_star - policy_value(m, u, out.pi_hat, 1e-12))) > 0.5
    assert fails / 50 <= 0.1


@pytest.mark.parametrize("u", [Cvar(0.5), Entropic(0.5)], ids=repr)
def test_huge_budget_is_accurate(u, rng):
    m = random_mdp(rng, 3, 2, 0.9)
    q_star = exact_q_star(m, u, 1e-11)
    fails = sum(
        np.max(np.abs(mb_oce_vi(GenerativeModel(m, seed), u, 0.1, 0.1, budget_override=10**6).q_hat - q_star)) > 0.1
        for seed in range(100)
    )
    assert fails <= 10
