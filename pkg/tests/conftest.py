"""Shared fixtures: one F-16 collection run and its model-based oracles."""

import numpy as np
import pytest

from iolq import (
    RegressionSolver,
    StepSchedule,
    WeightSpec,
    build_filter,
    collect,
    construct_oracle,
    data_vi,
    f16_plant,
    make_probing,
    verify_gain_transfer,
)
from iolq.plant import F16_M


@pytest.fixture(scope="session")
def f16():
    return f16_plant(x0_seed=0)


@pytest.fixture(scope="session")
def fbank():
    return build_filter(3, 1, 1, F16_M)


@pytest.fixture(scope="session")
def weights():
    return WeightSpec(np.array([[1.0]]), np.array([[1.0]]))


@pytest.fixture(scope="session")
def probing():
    return make_probing(7)


@pytest.fixture(scope="session")
def collection(f16, fbank, probing):
    """The canonical 5 s probing run: (trajectory, regression data)."""
    return collect(f16, fbank, probing, t_end=5.0, dt=1e-4, sample_dt=0.01)


@pytest.fixture(scope="session")
def oracle(f16, fbank):
    """Model-based realization with the coupling matched to the run's x0."""
    return construct_oracle(f16, fbank, theta_y_seed=0, x0=f16.x0)


@pytest.fixture(scope="session")
def transfer(oracle, f16, weights):
    """Gain-transfer verification report (P*, K*, P_zeta*, K_zeta*, errors)."""
    return verify_gain_transfer(oracle, f16, weights)


@pytest.fixture(scope="session")
def learned(collection, fbank, weights, transfer):
    """Result of the data-driven value iteration, 2000 harmonic steps."""
    _, reg = collection
    solver = RegressionSolver(reg, fbank.b_zeta, weights.q,
                              allow_deficient=True)
    p_hat, k_hat, history, converged = data_vi(
        solver, weights, fbank.b_zeta,
        schedule=StepSchedule(1.0), delta=1e-4, max_iter=2000,
        oracle_pk=(transfer["p_zeta"], transfer["k_zeta"]),
    )
    return {"p": p_hat, "k": k_hat, "history": history,
            "converged": converged, "solver": solver}
