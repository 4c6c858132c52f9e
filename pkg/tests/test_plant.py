"""Plant construction, probing signals, fixed-step integration, cost."""

import numpy as np
import pytest
import scipy.linalg

from iolq.plant import (
    F16_A,
    F16_B,
    F16_C,
    LtiPlant,
    NonFiniteState,
    ProbingSignal,
    TrajectoryLog,
    WeightSpec,
    eval_cost,
    f16_plant,
    make_probing,
    random_unit_vector,
    rk4_path,
)


def test_plant_validates_dimensions():
    with pytest.raises(ValueError):
        LtiPlant(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), np.zeros(2))


def test_plant_rejects_uncontrollable():
    a = np.diag([-1.0, -2.0])
    b = np.array([[1.0], [0.0]])
    c = np.ones((1, 2))
    with pytest.raises(ValueError, match="controllable"):
        LtiPlant(a, b, c, np.zeros(2))


def test_plant_rejects_unobservable():
    a = np.diag([-1.0, -2.0])
    b = np.ones((2, 1))
    c = np.array([[1.0, 0.0]])
    with pytest.raises(ValueError, match="observable"):
        LtiPlant(a, b, c, np.zeros(2))


def test_f16_preset_shapes(f16):
    assert f16.n == 3 and f16.m == 1 and f16.p == 1
    assert np.array_equal(f16.a, F16_A)
    assert np.array_equal(f16.b, F16_B)
    assert np.array_equal(f16.c, F16_C)
    assert np.linalg.norm(f16.x0) == pytest.approx(1.0)


def test_f16_open_loop_stable(f16):
    assert np.all(np.linalg.eigvals(f16.a).real < 0)


def test_weight_spec_validation():
    with pytest.raises(ValueError):
        WeightSpec(np.array([[-1.0]]), np.array([[1.0]]))
    with pytest.raises(ValueError):
        WeightSpec(np.array([[1.0]]), np.array([[0.0]]))
    w = WeightSpec(np.array([[1.0]]), np.array([[1.0]]))
    assert w.check_cost_observable(f16_plant(x0_seed=0))


def test_probing_reproducible():
    s1 = make_probing(42)
    s2 = make_probing(42)
    ts = np.linspace(0.0, 1.0, 17)
    assert [s1(t) for t in ts] == [s2(t) for t in ts]
    assert np.all(s1.amps >= 20.0) and np.all(s1.amps <= 40.0)
    assert np.all(np.abs(s1.freqs) <= 500.0)
    assert s1.amps.size == 100


def test_probing_empty_is_zero():
    s = ProbingSignal(amps=np.empty(0), freqs=np.empty(0),
                      phases=np.empty(0))
    assert s(0.3) == 0.0


def test_rk4_matches_matrix_exponential():
    a = np.array([[-1.0, 2.0], [-2.0, -3.0]])
    x0 = np.array([1.0, -1.0])
    times, states = rk4_path(lambda t, s: a @ s, x0, 1.0, 1e-3, 0.1)
    for t, s in zip(times, states):
        assert np.allclose(s, scipy.linalg.expm(a * t) @ x0, atol=1e-9)


def test_rk4_rejects_bad_steps():
    with pytest.raises(ValueError):
        rk4_path(lambda t, s: s, np.ones(1), 1.0, 0.3, 0.1)
    with pytest.raises(ValueError):
        rk4_path(lambda t, s: s, np.ones(1), 1.05, 0.01, 0.1)


def test_rk4_detects_divergence():
    with np.errstate(over="ignore", invalid="ignore"), \
            pytest.raises(NonFiniteState):
        rk4_path(lambda t, s: s * s * 100.0, np.ones(1), 10.0, 0.01, 0.1)


def test_trajectory_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    traj = TrajectoryLog(
        t=np.linspace(0, 1, 11),
        u=rng.standard_normal((11, 1)),
        y=rng.standard_normal((11, 1)),
        zeta=rng.standard_normal((11, 4)),
    )
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    back = TrajectoryLog.from_csv(path)
    assert np.array_equal(back.t, traj.t)
    assert np.array_equal(back.u, traj.u)
    assert np.array_equal(back.y, traj.y)
    assert np.array_equal(back.zeta, traj.zeta)
    assert back.x is None


def test_eval_cost_quadratic():
    t = np.linspace(0.0, 2.0, 201)
    u = np.exp(-t)[:, None]
    y = np.zeros_like(u)
    traj = TrajectoryLog(t=t, u=u, y=y, zeta=u)
    w = WeightSpec(np.array([[1.0]]), np.array([[2.0]]))
    expected = 1.0 - np.exp(-4.0)  # r * int_0^2 exp(-2t) dt with r = 2
    assert eval_cost(traj, w, 2.0) == pytest.approx(expected, rel=1e-4)
    with pytest.raises(ValueError):
        eval_cost(traj, w, 3.0)


def test_random_unit_vector_deterministic():
    assert np.array_equal(random_unit_vector(3, 9), random_unit_vector(3, 9))
    assert np.linalg.norm(random_unit_vector(5, 1)) == pytest.approx(1.0)
