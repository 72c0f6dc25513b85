import numpy as np
import pytest

from ldrl import (InputError, MdpModel, compare_with_spectral,
                  dominant_triplet, load_packaged_maze, shift_rewards,
                  soft_bellman_backup, solve_finite_horizon, to_mdp,
                  value_functions)
from ldrl.dp import state_values
from conftest import tilted_of


def test_single_state_fixed_point():
    model = MdpModel(1, 1, np.ones((1, 1)), np.ones((1, 1, 1)),
                     np.zeros((1, 1)), beta=1.0)
    q = soft_bellman_backup(model, np.zeros((1, 1)))
    assert np.array_equal(q, np.zeros((1, 1)))


def test_constant_reward_accumulates():
    model = MdpModel(3, 1, np.ones((3, 1)), np.full((3, 1, 3), 1 / 3),
                     np.full((3, 1), -0.5), beta=2.0)
    q = model.rewards
    for k in range(2, 6):
        q = soft_bellman_backup(model, q)
        assert np.abs(q - k * -0.5).max() < 1e-12


def test_two_state_single_backup(two_state_model, two_state_exact):
    q2 = soft_bellman_backup(two_state_model, two_state_model.rewards)
    assert np.abs(q2.ravel() - two_state_exact["q_n2"]).max() < 1e-12


def test_two_state_matches_spectral_exactly(two_state_model):
    sol = dominant_triplet(tilted_of(two_state_model))
    tables = solve_finite_horizon(two_state_model, 2)
    spec_q, _ = value_functions(two_state_model, sol, 2)
    rmsd, max_abs, pearson = compare_with_spectral(tables.q, spec_q)
    assert rmsd <= 1e-12
    assert pearson > 1 - 1e-12


def test_horizon_one_returns_rewards(two_state_model):
    tables = solve_finite_horizon(two_state_model, 1)
    assert np.array_equal(tables.q, two_state_model.rewards)


@pytest.mark.parametrize("n_states,n_actions,beta,seed,horizon", [
    (3, 2, 1.0, 0, 4), (5, 2, 2.0, 1, 9), (4, 4, 0.7, 2, 13),
])
def test_matrix_power_equivalence(random_mdp_factory, n_states, n_actions,
                                  beta, seed, horizon):
    # beta*Q_N(i) must equal log of the column sums of the N-th tilted power
    model = random_mdp_factory(n_states, n_actions, beta, seed)
    tilted = tilted_of(model).dense()
    tables = solve_finite_horizon(model, horizon)
    power = np.linalg.matrix_power(tilted, horizon)
    ref = np.log(power.sum(axis=0)).reshape(n_states, n_actions) / beta
    assert np.abs(tables.q - ref).max() < 1e-10


def test_state_value_identity(random_mdp_factory):
    model = random_mdp_factory(4, 3, 1.8, seed=5)
    tables = solve_finite_horizon(model, 6, keep_all=True)
    for q, v in zip(tables.q_steps, tables.v_steps):
        lhs = model.beta * v
        rhs = model.beta * state_values(model, q)
        assert np.abs(lhs - rhs).max() < 1e-12
        direct = np.log((model.prior_policy
                         * np.exp(model.beta * q)).sum(axis=1))
        assert np.abs(lhs - direct).max() < 1e-12


def test_keep_all_off_by_default(two_state_model):
    tables = solve_finite_horizon(two_state_model, 5)
    assert tables.q_steps is None and tables.v_steps is None
    assert tables.n_steps == 5


def test_deviation_shrinks_with_horizon():
    model = shift_rewards(to_mdp(load_packaged_maze("danger_5x5"), beta=5.0))
    sol = dominant_triplet(tilted_of(model))
    rmsds = []
    for n in (20, 60, 120):
        tables = solve_finite_horizon(model, n)
        spec_q, _ = value_functions(model, sol, n)
        rmsds.append(compare_with_spectral(tables.q, spec_q)[0])
    assert rmsds[0] > rmsds[1] > rmsds[2]


class TestCompare:
    def test_identical_tables(self):
        q = np.array([[1.0, 2.0], [3.0, 4.0]])
        rmsd, max_abs, pearson = compare_with_spectral(q, q.copy())
        assert rmsd == 0.0 and max_abs == 0.0 and pearson == 1.0

    def test_identical_constant_tables(self):
        q = np.full((2, 2), -3.0)
        rmsd, _, pearson = compare_with_spectral(q, q.copy())
        assert rmsd == 0.0 and pearson == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            compare_with_spectral(np.zeros((2, 2)), np.zeros((3, 2)))


def test_non_finite_q_rejected(two_state_model):
    bad = np.array([[np.inf], [0.0]])
    with pytest.raises(InputError):
        soft_bellman_backup(two_state_model, bad)


def test_bad_horizon(two_state_model):
    with pytest.raises(InputError):
        solve_finite_horizon(two_state_model, 0)
