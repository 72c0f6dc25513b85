import math

import numpy as np
import pytest
import scipy.linalg

from ldrl import (MdpModel, build_tilted_matrix, compose_transition_matrix,
                  shift_rewards)


@pytest.fixture
def two_state_model():
    """Two states, one action, uniform kernel, rewards (0, -1), beta 1.

    The tilted matrix is rank one, so every quantity is known in closed
    form; this is the micro-oracle used across the suite.
    """
    return MdpModel(
        n_states=2, n_actions=1,
        prior_policy=np.ones((2, 1)),
        dynamics=np.full((2, 1, 2), 0.5),
        rewards=np.array([[0.0], [-1.0]]),
        beta=1.0,
    )


@pytest.fixture
def two_state_exact():
    """Closed-form reference values for the two-state micro-oracle.

    rho = (1+e^{-1})/2, u = (c, c e^{-1}) with c = 2/(1+e^{-1}) so that
    rho*c = 1, v uniform, steady state = sigmoid(1), sigmoid(-1).
    """
    e1 = math.exp(-1.0)
    rho = (1.0 + e1) / 2.0
    theta = -math.log(rho)
    c = 2.0 / (1.0 + e1)
    sigma = 1.0 / (1.0 + e1)
    return {
        "rho": rho,
        "theta": theta,
        "u": np.array([c, c * e1]),
        "v": np.array([0.5, 0.5]),
        "steady": np.array([sigma, 1.0 - sigma]),
        "driven_column": np.array([sigma, 1.0 - sigma]),
        "q_n2": np.array([-theta, -theta - 1.0]),
        "energy": 1.0 - sigma,
        "kl": theta - (1.0 - sigma),
    }


def make_random_mdp(n_states: int, n_actions: int, beta: float,
                    seed: int) -> MdpModel:
    """Dense random MDP; strictly positive kernels, hence primitive."""
    rng = np.random.default_rng(seed)
    policy = rng.dirichlet(np.full(n_actions, 2.0), size=n_states)
    dynamics = rng.dirichlet(np.full(n_states, 1.5),
                             size=(n_states, n_actions))
    rewards = -2.0 * rng.random((n_states, n_actions))
    model = MdpModel(n_states=n_states, n_actions=n_actions,
                     prior_policy=policy, dynamics=dynamics,
                     rewards=rewards, beta=beta)
    return shift_rewards(model)


@pytest.fixture
def random_mdp_factory():
    return make_random_mdp


def tilted_of(model):
    return build_tilted_matrix(model, compose_transition_matrix(model))


def dense_perron(tilted):
    """Independent dense-eigendecomposition oracle for small instances."""
    eigvals, left, right = scipy.linalg.eig(tilted.dense(), left=True)
    k = int(np.argmax(eigvals.real))
    rho = float(eigvals[k].real)
    v = np.abs(right[:, k].real)
    u = np.abs(left[:, k].real)
    v = v / v.sum()
    u = u / (u @ v)
    return rho, u, v
