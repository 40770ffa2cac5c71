import numpy as np
import pytest

from jdcontrol import (
    ControlProblem,
    CostSpec,
    Dynamics,
    JumpParams,
    build_grid,
    constant_target,
    zero_control,
)


@pytest.fixture
def small_grid():
    return build_grid(2.0, 2.0, 4, 4)


@pytest.fixture
def paper_grid():
    return build_grid(2.0, 2.0, 10, 10)


@pytest.fixture
def jump_params():
    return JumpParams(gamma=0.9, beta=10.0)


@pytest.fixture
def harmonic():
    return Dynamics(kind="harmonic", eta=1.0, b1=0.2, b2=0.2)


@pytest.fixture
def tracking_cost():
    return CostSpec(kind="tracking", sigma_j=0.5, alpha=0.05, desired=constant_target(0.0, 0.0))


@pytest.fixture
def random_control(small_grid):
    cf = zero_control(small_grid, 0.5, 2.0, 10)
    rng = np.random.default_rng(7)
    return cf.with_mu(0.3 * rng.standard_normal(cf.mu.shape))


def gaussian_sampler(mean=(0.75, 0.75), std=0.1):
    def sampler(n, rng):
        return rng.normal(mean, std, size=(n, 2))

    return sampler


@pytest.fixture
def small_problem(harmonic, jump_params, tracking_cost):
    return ControlProblem(
        dynamics=harmonic,
        jumps=jump_params,
        cost=tracking_cost,
        initial_sampler=gaussian_sampler(),
        n_particles=20,
        t_final=2.0,
        n_t_u=10,
    )
