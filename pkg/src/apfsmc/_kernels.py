"""Compiled inner loop.

These kernels mirror ``rigid_body.state_derivative``, ``rw_cluster.wheel_step``
and ``smc.control_input`` on raw arrays so the 100 Hz plant / 20 Hz controller
loop runs without Python overhead.  The test-suite cross-checks them against
the readable numpy implementations.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# telemetry record layout, one row per plant step
COL_T = 0
COL_Q = slice(1, 5)
COL_W = slice(5, 8)
COL_QS = slice(8, 12)
COL_WS = slice(12, 15)
COL_SIGMA = slice(15, 18)
COL_U = slice(18, 21)
COL_TAU = slice(21, 24)
COL_TAU_W = slice(24, 28)
COL_H_W = slice(28, 32)
COL_TAU_SAT = 32
COL_H_SAT = 33
COL_THETA0 = 34


@njit(cache=True)
def plant_deriv(x, tau, h, d, inertia, inertia_inv, out):
    eta = x[0]
    e0, e1, e2 = x[1], x[2], x[3]
    w0, w1, w2 = x[4], x[5], x[6]
    H0 = inertia[0, 0] * w0 + inertia[0, 1] * w1 + inertia[0, 2] * w2 + h[0]
    H1 = inertia[1, 0] * w0 + inertia[1, 1] * w1 + inertia[1, 2] * w2 + h[1]
    H2 = inertia[2, 0] * w0 + inertia[2, 1] * w1 + inertia[2, 2] * w2 + h[2]
    out[0] = -0.5 * (w0 * e0 + w1 * e1 + w2 * e2)
    out[1] = 0.5 * (eta * w0 - (w1 * e2 - w2 * e1))
    out[2] = 0.5 * (eta * w1 - (w2 * e0 - w0 * e2))
    out[3] = 0.5 * (eta * w2 - (w0 * e1 - w1 * e0))
    r0 = -(w1 * H2 - w2 * H1) + tau[0] + d[0]
    r1 = -(w2 * H0 - w0 * H2) + tau[1] + d[1]
    r2 = -(w0 * H1 - w1 * H0) + tau[2] + d[2]
    for i in range(3):
        out[4 + i] = inertia_inv[i, 0] * r0 + inertia_inv[i, 1] * r1 + inertia_inv[i, 2] * r2


@njit(cache=True)
def rk4_plant(x, dt, tau, h0, d, inertia, inertia_inv):
    """One RK4 step of the rigid body; wheel momentum ramps as h0 - tau*s."""
    k1 = np.empty(7)
    k2 = np.empty(7)
    k3 = np.empty(7)
    k4 = np.empty(7)
    half = 0.5 * dt
    plant_deriv(x, tau, h0, d, inertia, inertia_inv, k1)
    plant_deriv(x + half * k1, tau, h0 - half * tau, d, inertia, inertia_inv, k2)
    plant_deriv(x + half * k2, tau, h0 - half * tau, d, inertia, inertia_inv, k3)
    plant_deriv(x + dt * k3, tau, h0 - dt * tau, d, inertia, inertia_inv, k4)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    n = math.sqrt(out[0] ** 2 + out[1] ** 2 + out[2] ** 2 + out[3] ** 2)
    for i in range(4):
        out[i] /= n
    return out


@njit(cache=True)
def _kin(q, w, out):
    out[0] = -0.5 * (w[0] * q[1] + w[1] * q[2] + w[2] * q[3])
    out[1] = 0.5 * (q[0] * w[0] - (w[1] * q[3] - w[2] * q[2]))
    out[2] = 0.5 * (q[0] * w[1] - (w[2] * q[1] - w[0] * q[3]))
    out[3] = 0.5 * (q[0] * w[2] - (w[0] * q[2] - w[1] * q[1]))


@njit(cache=True)
def rk4_kinematics(q, w, dt):
    """RK4 step of quaternion kinematics with body rate held constant."""
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    _kin(q, w, k1)
    _kin(q + 0.5 * dt * k1, w, k2)
    _kin(q + 0.5 * dt * k2, w, k3)
    _kin(q + dt * k3, w, k4)
    out = q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    n = math.sqrt(out[0] ** 2 + out[1] ** 2 + out[2] ** 2 + out[3] ** 2)
    return out / n


@njit(cache=True)
def propagate_free(x, dt, n_steps, h, inertia, inertia_inv):
    """Torque-free propagation with constant wheel momentum (test helper)."""
    zero = np.zeros(3)
    for _ in range(n_steps):
        x = rk4_plant(x, dt, zero, h, zero, inertia, inertia_inv)
    return x


@njit(cache=True)
def wheel_update(cmd, hw, fstate, fb, fa, h_max, dt, tau_out, hw_out):
    """Filter the (already clamped) command, integrate momentum, clamp it.

    Writes the torque actually delivered over the step into ``tau_out`` and the
    end-of-step momentum into ``hw_out``; returns True if any wheel hit its
    momentum limit.
    """
    hit = False
    for i in range(cmd.shape[0]):
        # direct form II transposed biquad
        y = fb[0] * cmd[i] + fstate[i, 0]
        fstate[i, 0] = fb[1] * cmd[i] - fa[1] * y + fstate[i, 1]
        fstate[i, 1] = fb[2] * cmd[i] - fa[2] * y
        h_new = hw[i] - y * dt
        if h_new > h_max:
            y = (hw[i] - h_max) / dt
            h_new = h_max
            hit = True
        elif h_new < -h_max:
            y = (hw[i] + h_max) / dt
            h_new = -h_max
            hit = True
        tau_out[i] = y
        hw_out[i] = h_new
    return hit


@njit(cache=True)
def smc_command(q, w, qs, ws, lam, gamma, s_width, istar, zp, tau_w_max, u, cmd):
    """Boundary-layer SMC, allocation and command clamp; returns clamp flag."""
    # e = conj(qs) (x) q
    e1 = qs[0] * q[1] - qs[1] * q[0] - qs[2] * q[3] + qs[3] * q[2]
    e2 = qs[0] * q[2] + qs[1] * q[3] - qs[2] * q[0] - qs[3] * q[1]
    e3 = qs[0] * q[3] - qs[1] * q[2] + qs[2] * q[1] - qs[3] * q[0]
    ev = (e1, e2, e3)
    for i in range(3):
        s = w[i] - ws[i] + lam * ev[i]
        if abs(s) >= s_width:
            u[i] = -gamma * (1.0 if s > 0 else -1.0)
        else:
            u[i] = -gamma * s / s_width
    tau_b = istar @ u
    clamped = False
    for i in range(cmd.shape[0]):
        c = zp[i, 0] * tau_b[0] + zp[i, 1] * tau_b[1] + zp[i, 2] * tau_b[2]
        if c > tau_w_max:
            c = tau_w_max
            clamped = True
        elif c < -tau_w_max:
            c = -tau_w_max
            clamped = True
        cmd[i] = c
    return clamped


@njit(cache=True)
def _sigma(q, w, qs, ws, lam, out):
    e1 = qs[0] * q[1] - qs[1] * q[0] - qs[2] * q[3] + qs[3] * q[2]
    e2 = qs[0] * q[2] + qs[1] * q[3] - qs[2] * q[0] - qs[3] * q[1]
    e3 = qs[0] * q[3] - qs[1] * q[2] + qs[2] * q[1] - qs[3] * q[0]
    en = math.sqrt(
        (qs[0] * q[0] + qs[1] * q[1] + qs[2] * q[2] + qs[3] * q[3]) ** 2
        + e1 * e1 + e2 * e2 + e3 * e3
    )
    out[0] = w[0] - ws[0] + lam * e1 / en
    out[1] = w[1] - ws[1] + lam * e2 / en
    out[2] = w[2] - ws[2] + lam * e3 / en


@njit(cache=True)
def _boresight_angles(q, m_body, zones, out):
    # m_I = R(q)^T m
    eta, a, b, c = q[0], q[1], q[2], q[3]
    s = eta * eta - (a * a + b * b + c * c)
    ed = a * m_body[0] + b * m_body[1] + c * m_body[2]
    cx = b * m_body[2] - c * m_body[1]
    cy = c * m_body[0] - a * m_body[2]
    cz = a * m_body[1] - b * m_body[0]
    # R^T m = s m + 2 e (e.m) + 2 eta (e x m)
    mx = s * m_body[0] + 2.0 * a * ed + 2.0 * eta * cx
    my = s * m_body[1] + 2.0 * b * ed + 2.0 * eta * cy
    mz = s * m_body[2] + 2.0 * c * ed + 2.0 * eta * cz
    for j in range(zones.shape[0]):
        n0, n1, n2 = zones[j, 0], zones[j, 1], zones[j, 2]
        dot = mx * n0 + my * n1 + mz * n2
        px = my * n2 - mz * n1
        py = mz * n0 - mx * n2
        pz = mx * n1 - my * n0
        out[j] = math.atan2(math.sqrt(px * px + py * py + pz * pz), dot)


@njit(cache=True)
def advance(
    k0, k1, final_row,
    x, qs, hw, fstate, cmd, u, ws, flags,
    d_table, inertia, inertia_inv, istar, z, zp, fb, fa,
    tau_w_max, h_w_max, gamma, lam, s_width, dt, smc_every,
    m_body, zones, rec,
):
    """Advance the closed loop over plant steps ``k0 .. k1 - 1``.

    ``x`` (q, omega), ``qs``, ``hw``, ``fstate``, ``cmd``, ``u`` and ``flags``
    are updated in place; ``ws`` is held.  Row ``k`` of ``rec`` receives the
    state at ``t_k`` together with the inputs applied over ``[t_k, t_k+dt)``.
    When ``final_row`` is set, row ``k1`` is filled with the end state and the
    last applied inputs.
    """
    tau_w = np.zeros(cmd.shape[0])
    hw_next = np.zeros(cmd.shape[0])
    tau_b = np.zeros(3)
    sig = np.zeros(3)
    theta = np.zeros(zones.shape[0])
    nz = zones.shape[0]
    for k in range(k0, k1):
        q = x[:4]
        w = x[4:]
        if k % smc_every == 0:
            flags[0] = 1.0 if smc_command(q, w, qs, ws, lam, gamma, s_width, istar, zp, tau_w_max, u, cmd) else 0.0
        hit = wheel_update(cmd, hw, fstate, fb, fa, h_w_max, dt, tau_w, hw_next)
        flags[1] = 1.0 if hit else 0.0
        for i in range(3):
            tau_b[i] = z[i, 0] * tau_w[0] + z[i, 1] * tau_w[1] + z[i, 2] * tau_w[2] + z[i, 3] * tau_w[3]
        h_body = z @ hw
        _sigma(q, w, qs, ws, lam, sig)
        _boresight_angles(q, m_body, zones, theta)

        row = rec[k]
        row[0] = k * dt
        row[1:5] = q
        row[5:8] = w
        row[8:12] = qs
        row[12:15] = ws
        row[15:18] = sig
        row[18:21] = u
        row[21:24] = tau_b
        row[24:28] = tau_w
        row[28:32] = hw
        row[32] = flags[0]
        row[33] = flags[1]
        row[34:34 + nz] = theta

        x[:] = rk4_plant(x, dt, tau_b, h_body, d_table[k], inertia, inertia_inv)
        qs[:] = rk4_kinematics(qs, ws, dt)
        hw[:] = hw_next

    if final_row:
        q = x[:4]
        w = x[4:]
        _sigma(q, w, qs, ws, lam, sig)
        _boresight_angles(q, m_body, zones, theta)
        row = rec[k1]
        row[0] = k1 * dt
        row[1:5] = q
        row[5:8] = w
        row[8:12] = qs
        row[12:15] = ws
        row[15:18] = sig
        row[18:21] = u
        row[21:24] = tau_b
        row[24:28] = tau_w
        row[28:32] = hw
        row[32] = flags[0]
        row[33] = flags[1]
        row[34:34 + nz] = theta
