import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from apfsmc import _kernels
from apfsmc.errors import RejectionExhausted, ValidationError
from apfsmc.quaternion import rotation_matrix
from apfsmc.rigid_body import (
    DisturbanceModel, InertiaModel, PlantState, delta_hat_bound, disturbance_at, disturbance_raw,
    inertial_momentum, rk4_step, sample_inertia, state_derivative,
)

I_STAR = np.array([[30.0, -3.0, 0.0], [-3.0, 30.0, -2.0], [0.0, -2.0, 40.0]])
Q_TEST = np.array([0.3, -0.2, 0.5, 0.78]) / np.linalg.norm([0.3, -0.2, 0.5, 0.78])


def tumble(dt, duration, inertia=I_STAR, w0=(0.05, -0.02, 0.03), h=(0.01, 0.0, -0.02)):
    x = np.r_[1.0, 0, 0, 0, w0]
    return _kernels.propagate_free(x, dt, int(round(duration / dt)), np.asarray(h, float),
                                   inertia, np.linalg.inv(inertia))


def test_z_spin_closed_form():
    w = 0.1
    s = PlantState([1, 0, 0, 0], [0, 0, w])
    inertia = InertiaModel.nominal(np.diag([10.0, 20.0, 30.0]))
    dt = 0.01
    for _ in range(500):
        s = rk4_step(s, dt, np.zeros(3), np.zeros(3), np.zeros(3), inertia)
    t = 500 * dt
    assert np.allclose(s.q, [math.cos(w * t / 2), 0, 0, math.sin(w * t / 2)], atol=1e-12)
    assert np.allclose(s.omega, [0, 0, w], atol=1e-15)


def test_full_revolution_returns():
    w = 2 * math.pi / 100.0
    x = _kernels.propagate_free(np.r_[1.0, 0, 0, 0, 0, 0, w], 0.01, 10000, np.zeros(3),
                                np.diag([10.0, 20.0, 30.0]), np.diag([0.1, 0.05, 1 / 30]))
    # one turn flips the quaternion sign
    assert np.allclose(x[:4], [-1, 0, 0, 0], atol=1e-6)


def test_rk4_fourth_order():
    ref = tumble(0.0025, 100.0)
    errs = [np.abs(tumble(dt, 100.0) - ref).max() for dt in (0.4, 0.2, 0.1)]
    # Richardson: the reference carries a small share of each error
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    for r in ratios:
        assert 13.0 < r < 19.0, ratios


@pytest.mark.parametrize("tau", [np.zeros(3), np.array([2e-3, -1e-3, 5e-4])])
def test_momentum_conserved(tau):
    inertia = InertiaModel.nominal(I_STAR)
    s = PlantState(Q_TEST, [0.02, -0.03, 0.01])
    h = np.array([0.05, -0.02, 0.01])
    H0 = inertial_momentum(s.q, s.omega, h, I_STAR)
    dt = 0.01
    for _ in range(1000):
        s2 = rk4_step(s, dt, tau, h, np.zeros(3), inertia)
        h = h - tau * dt
        s = s2
    H1 = inertial_momentum(s.q, s.omega, h, I_STAR)
    assert np.linalg.norm(H1 - H0) / np.linalg.norm(H0) < 1e-8


def test_momentum_rate_equals_disturbance():
    # with wheels exchanging torque internally, d/dt of inertial momentum is R^T d
    inertia = InertiaModel.nominal(I_STAR)
    rng = np.random.default_rng(3)
    for _ in range(5):
        q = rng.normal(size=4)
        s = PlantState(q / np.linalg.norm(q), rng.normal(scale=0.05, size=3))
        h = rng.normal(scale=0.05, size=3)
        tau = rng.normal(scale=1e-3, size=3)
        d = rng.normal(scale=1e-4, size=3)
        dt = 1e-3
        s1 = rk4_step(s, dt, tau, h, d, inertia)
        dH = (inertial_momentum(s1.q, s1.omega, h - tau * dt, I_STAR)
              - inertial_momentum(s.q, s.omega, h, I_STAR)) / dt
        mid = rk4_step(s, dt / 2, tau, h, d, inertia)
        assert np.allclose(dH, rotation_matrix(mid.q).T @ d, atol=1e-10)


def test_state_derivative_matches_kernel():
    inertia = InertiaModel.nominal(I_STAR)
    s = PlantState(Q_TEST, [0.02, -0.03, 0.01])
    tau, h, d = np.array([1e-3, 0, -2e-3]), np.array([0.1, 0.0, 0.05]), np.array([1e-5, 2e-5, 0])
    qd, wd = state_derivative(s, tau, h, d, inertia)
    out = np.empty(7)
    _kernels.plant_deriv(np.r_[s.q, s.omega], tau, h, d, I_STAR, np.linalg.inv(I_STAR), out)
    assert np.allclose(out, np.r_[qd, wd], atol=1e-16)


def test_delta_hat_scalar_analogue():
    m = InertiaModel(30.0 * np.eye(3), 6.0 * np.eye(3), 30.0 * np.eye(3))
    # |1/(30 + d) - 1/30| over |d| <= 6 peaks at d = -6
    assert np.allclose(np.diag(delta_hat_bound(m)), 6.0 / (30.0 * 24.0), rtol=1e-14)


def test_delta_hat_dominates_samples():
    m = InertiaModel.nominal(I_STAR, 0.2)
    bound = delta_hat_bound(m)
    inv = np.linalg.inv(I_STAR)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        dI = rng.uniform(-1, 1, (3, 3)) * m.delta_bound
        dI = np.triu(dI) + np.triu(dI, 1).T
        diff = np.abs(np.linalg.inv(I_STAR + dI) - inv)
        assert np.all(diff <= bound * (1 + 1e-12))
    assert np.linalg.norm(bound @ I_STAR, 1) < 1.0


def test_sample_inertia_in_box():
    m = InertiaModel.nominal(I_STAR, 0.2)
    rng = np.random.default_rng(1)
    for _ in range(50):
        s = sample_inertia(m, rng)
        assert np.all(np.abs(s.I_true - I_STAR) <= m.delta_bound + 1e-15)
        assert np.all(np.linalg.eigvalsh(s.I_true) > 0)


def test_sample_inertia_exhausted():
    m = InertiaModel.nominal(I_STAR, 0.2)
    with pytest.raises(RejectionExhausted):
        sample_inertia(m, np.random.default_rng(0), max_tries=0)


def test_disturbance_bounds():
    m = DisturbanceModel()
    t = np.linspace(0.0, 2e4, 10_000)
    d = disturbance_at(t, m)
    assert np.linalg.norm(d, axis=1).max() <= m.d_bar * (1 + 1e-12)
    assert np.abs(disturbance_raw(t, m)).max() == pytest.approx(5.1e-5, rel=1e-3)
    assert m.h_d_bar == pytest.approx((1e-6 + 0.707 * 5e-5) * 5828.0 / 4.0, rel=1e-15)


@given(st.floats(0, 1e5))
def test_disturbance_norm_property(t):
    assert np.linalg.norm(disturbance_at(t, DisturbanceModel())) <= 8.7e-5 * (1 + 1e-12)


def test_validation():
    with pytest.raises(ValidationError):
        InertiaModel.nominal(np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValidationError):
        InertiaModel(I_STAR, 0.1 * np.abs(I_STAR), I_STAR + 5 * np.eye(3))
    with pytest.raises(ValidationError):
        PlantState([1, 1, 0, 0], [0, 0, 0])
    with pytest.raises(ValidationError):
        PlantState([1, 0, 0, 0], [0, np.inf, 0])
    with pytest.raises(ValidationError):
        rk4_step(PlantState([1, 0, 0, 0], [0, 0, 0]), 0.0, np.zeros(3), np.zeros(3), np.zeros(3),
                 InertiaModel.nominal(I_STAR))
    with pytest.raises(ValidationError):
        DisturbanceModel(period=0.0)
