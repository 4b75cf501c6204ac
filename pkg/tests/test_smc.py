import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from apfsmc.errors import InfeasibleTorque, InvalidMargin, ValidationError
from apfsmc.quaternion import IDENTITY, from_axis_angle
from apfsmc.rigid_body import InertiaModel, delta_hat_bound
from apfsmc.smc import (
    SmcParams, accuracy_bound, control_input, gain_report, psi_factor, sat, synthesize_gains,
    tracking_error,
)

I_STAR = np.array([[30.0, -3.0, 0.0], [-3.0, 30.0, -2.0], [0.0, -2.0, 40.0]])
INERTIA = InertiaModel.nominal(I_STAR, 0.2)
P = SmcParams(0.01, 2e-4, 5e-4)


def test_params_validation():
    assert P.S == pytest.approx(5e-4 / math.sqrt(3))
    with pytest.raises(ValidationError):
        SmcParams(0.01, 2e-4, 0.01)  # sigma_bar = lambda leaves a vacuous bound
    with pytest.raises(ValidationError):
        SmcParams(0.01, -1.0, 5e-4)
    with pytest.raises(InvalidMargin):
        SmcParams(0.01, 2e-4, 5e-4, k=1.0)


def test_sat_examples():
    S = P.S
    assert np.allclose(sat([2 * S, -2 * S, S / 2], P), [1.0, -1.0, 0.5])
    assert np.allclose(sat([S, -S, 0.0], P), [1.0, -1.0, 0.0])


@given(st.floats(-1e-2, 1e-2), st.floats(1e-12, 1e-6))
def test_sat_lipschitz(x, h):
    # slope is at most 1/S everywhere, so sat is continuous across the layer edge
    a = sat([x, x, x], P)
    b = sat([x + h, x + h, x + h], P)
    # few-ulp slack: the difference of two O(1) values carries ~1e-16 rounding
    assert np.all(np.abs(b - a) <= h / P.S * (1 + 1e-9) + 4 * np.finfo(float).eps)
    assert np.all(np.abs(a) <= 1.0)


def test_tracking_error_definition():
    q_star = from_axis_angle([0, 0, 1], 0.1)
    q = from_axis_angle([0, 0, 1], 0.15)
    te = tracking_error(q, [0, 0, 0.02], q_star, [0, 0, 0.01], P)
    assert np.allclose(te.e_eps, [0, 0, math.sin(0.025)], atol=1e-15)
    assert te.e_eta == pytest.approx(math.cos(0.025))
    assert np.allclose(te.sigma, te.e_omega + P.lam * te.e_eps)


def test_control_deep_sliding():
    te = tracking_error(from_axis_angle([1, 1, 1], 1.0), [0.1, -0.1, 0.1], IDENTITY, np.zeros(3), P)
    u, tau = control_input(te, P, I_STAR)
    assert np.linalg.norm(u) == pytest.approx(P.gamma * math.sqrt(3), rel=1e-14)
    assert np.allclose(tau, I_STAR @ u)
    assert np.linalg.norm(tau) <= np.linalg.norm(I_STAR, 2) * P.gamma * math.sqrt(3) * (1 + 1e-12)
    assert np.linalg.norm(I_STAR, 2) == pytest.approx(40.4, abs=0.05)


def test_psi_factor():
    e = 0.014
    assert psi_factor(e, None) == pytest.approx(1 + (1 + e) / (2 * e))
    f = math.sin(math.radians(7.5))
    assert psi_factor(e, f) == pytest.approx(1 + (1 + e) / (2 * e) + (1 + f) / f)


def manual_gain(w, H, tau_bar, d, lam, k, e, f):
    """Same formula written against numpy's SVD norms."""
    dh = delta_hat_bound(INERTIA)
    num = ((np.linalg.norm(np.linalg.inv(I_STAR), 2) + np.linalg.norm(dh, 2)) * (w * H + d)
           + psi_factor(e, f) * w**2 + math.sqrt(2) * lam * w)
    den = 1 - np.linalg.norm(dh @ I_STAR, 1)
    return k * num / den, num, den


def test_gain_report_matches_manual_formula():
    args = (3.7e-3, 0.1956, 8.15e-3, 8.7e-5, 0.01, 1.02, 0.0141, math.sin(math.radians(7.5)))
    r = gain_report(INERTIA, *args)
    g, num, den = manual_gain(*args)
    assert r.gamma == pytest.approx(g, rel=1e-12)
    assert r.numerator == pytest.approx(num, rel=1e-12)
    assert r.denominator == pytest.approx(den, rel=1e-12)
    assert r.ceiling == pytest.approx(8.15e-3 / np.linalg.eigvalsh(I_STAR).max(), rel=1e-12)
    # k at the upper limit puts the gain exactly on the ceiling
    top = gain_report(INERTIA, *args[:5], r.k_upper, *args[6:])
    assert top.gamma == pytest.approx(r.ceiling, rel=1e-12)
    assert r.tau_required == pytest.approx(np.linalg.norm(I_STAR, 2) * num / den, rel=1e-12)


def test_synthesis_feasible_case():
    # slow guidance, small disturbance and a strong cluster
    args = (2e-4, 0.2, 0.05, 1e-6, 0.001, 1.02, 0.01, None)
    p = synthesize_gains(INERTIA, *args, sigma_bar=5e-4)
    r = gain_report(INERTIA, *args)
    assert r.feasible and r.within_ceiling
    assert p.gamma == pytest.approx(r.gamma, rel=1e-15)
    assert p.k == 1.02 and p.psi == r.psi
    with pytest.raises(InvalidMargin):
        synthesize_gains(INERTIA, *args[:5], r.k_upper * 1.01, *args[6:], sigma_bar=5e-4)


def test_synthesis_infeasible_torque():
    with pytest.raises(InfeasibleTorque):
        synthesize_gains(INERTIA, 3.7e-3, 0.1956, 8.15e-3, 8.7e-5, 0.01, 1.02, 0.0141,
                         math.sin(math.radians(7.5)), sigma_bar=5e-4)


def test_accuracy_bound():
    assert accuracy_bound(P) == pytest.approx(0.05)
