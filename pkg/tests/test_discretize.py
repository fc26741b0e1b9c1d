import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from etmg.discretize import expm, zoh_discretize

from conftest import ring_thermal


def rk4_held(A, B, E, x0, u, d, dt, substep):
    """Fine fixed-step RK4 with inputs held over the sample."""
    f = lambda x: A @ x + B @ u + E @ d
    x = np.array(x0, dtype=float)
    steps = int(round(dt / substep))
    h = dt / steps
    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def test_expm_zero_is_identity():
    np.testing.assert_array_equal(expm(np.zeros((3, 3))), np.eye(3))


def test_expm_diagonal():
    np.testing.assert_allclose(expm(np.diag([-1.0, 2.0])), np.diag([math.exp(-1), math.exp(2)]), rtol=1e-14)


def test_expm_nilpotent():
    np.testing.assert_allclose(expm(np.array([[0.0, 1.0], [0.0, 0.0]])), [[1.0, 1.0], [0.0, 1.0]], atol=1e-15)


@pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.array([[np.nan]]), np.zeros(3)])
def test_expm_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        expm(bad)


def test_zoh_scalar_decay():
    A, B, E = zoh_discretize([[-1.0]], [[1.0]], np.zeros((1, 0)), 1.0)
    assert A[0, 0] == pytest.approx(math.exp(-1), rel=1e-14)
    assert B[0, 0] == pytest.approx(1.0 - math.exp(-1), rel=1e-14)
    assert E.shape == (1, 0)


def test_zoh_integrator():
    A, B, E = zoh_discretize([[0.0]], [[2.0]], [[3.0]], 0.25)
    assert A[0, 0] == 1.0
    assert B[0, 0] == pytest.approx(0.5)
    assert E[0, 0] == pytest.approx(0.75)


def test_zoh_rejects_bad_step():
    with pytest.raises(ValueError):
        zoh_discretize([[-1.0]], [[1.0]], [[1.0]], 0.0)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-1.0, 1.0)), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_expm_semigroup(M, s, t):
    np.testing.assert_allclose(expm(M * (s + t)), expm(M * s) @ expm(M * t), rtol=1e-10, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-1.0, 1.0)), arrays(np.float64, (3, 2), elements=st.floats(-1.0, 1.0)))
def test_zoh_two_half_steps_compose(A, B):
    E = np.zeros((3, 1))
    Ad, Bd, _ = zoh_discretize(A, B, E, 1.0)
    Ah, Bh, _ = zoh_discretize(A, B, E, 0.5)
    np.testing.assert_allclose(Ad, Ah @ Ah, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(Bd, Ah @ Bh + Bh, rtol=1e-10, atol=1e-12)


def test_zoh_matches_integral_for_invertible_A():
    A = np.array([[-0.5, 0.2], [0.1, -0.3]])
    B = np.array([[1.0], [0.5]])
    Ad, Bd, _ = zoh_discretize(A, B, np.zeros((2, 0)), 2.0)
    np.testing.assert_allclose(Bd, np.linalg.solve(A, (Ad - np.eye(2)) @ B), rtol=1e-12)


def test_ring_block_matches_rk4(rng):
    cm = ring_thermal()
    Ad, Bd, Ed = zoh_discretize(cm.A, cm.B, cm.E, 900.0)
    x0 = rng.uniform(55.0, 95.0, cm.state_count)
    u = rng.uniform(0.0, 3e6, 1)
    d = np.array([-rng.uniform(0.0, 3e6), 10.0])
    ref = rk4_held(cm.A, cm.B, cm.E, x0, u, d, 900.0, 1.0)
    assert np.max(np.abs(Ad @ x0 + Bd @ u + Ed @ d - ref)) <= 1e-6
