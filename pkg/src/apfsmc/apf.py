"""Artificial-potential-field guidance.

An attractive field pulls the attitude toward ``q_d`` along the eigenaxis; one
hyperbolic repulsive field per forbidden cone pushes the boresight away from
the cone axis.  Their sum, rotated into the body frame, is the reference rate
``omega*`` tracked by the sliding-mode controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import BoresightOnForbiddenAxis, InfeasibleSpacing, ValidationError
from .quaternion import as_quat, norm2, quat_error, rotation_matrix, shortest_rotation, sign_plus
from .rigid_body import InertiaModel

# below this ||eps~_j|| the repulsion direction is numerically meaningless
DEGENERATE_EPS = 1e-6


@dataclass(frozen=True)
class ForbiddenZone:
    """Cone of half-apex ``theta_floor`` (rad) around the inertial unit vector ``n_hat``."""

    n_hat: np.ndarray
    theta_floor: float

    def __post_init__(self):
        n = np.asarray(self.n_hat, dtype=float).reshape(3)
        norm = float(np.linalg.norm(n))
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-2:
            raise ValidationError(f"zone direction {n} is not a unit vector")
        n = n / norm
        n.setflags(write=False)
        object.__setattr__(self, "n_hat", n)
        if not 0.0 < self.theta_floor < math.pi / 2:
            raise ValidationError("zone half-apex angle must lie in (0, pi/2)")

    @property
    def eps_floor(self) -> float:
        return math.sin(0.5 * self.theta_floor)


@dataclass(frozen=True)
class ApfParams:
    alpha1: float
    alpha2: float
    eps_e_bar: float
    zeta: tuple
    omega_bar: float


@dataclass(frozen=True)
class GuidanceState:
    q_star: np.ndarray
    omega_star: np.ndarray


def apf_params(omega_bar: float, tau_bar: float, inertia: InertiaModel, zones: Sequence[ForbiddenZone]) -> ApfParams:
    """Field gains sized from the rate bound and the torque sphere.

    ``eps_e_bar`` is the error at which a body spinning at ``omega_bar/2``
    can still stop under the worst-case deceleration.
    """
    if omega_bar <= 0 or tau_bar <= 0:
        raise ValidationError("rate and torque bounds must be positive")
    alpha2 = 0.5 * omega_bar
    eps_e_bar = alpha2**2 / (norm2(np.linalg.inv(inertia.upper)) * tau_bar)
    zeta = tuple(alpha2 * z.eps_floor**2 for z in zones)
    return ApfParams(alpha2 / eps_e_bar, alpha2, eps_e_bar, zeta, omega_bar)


def attractive_rate(e_q, p: ApfParams) -> np.ndarray:
    """Attractive rate for error quaternion ``e_q``, expressed along ``e_q``'s axis.

    The returned vector points along ``+eps_e`` (gradient of the attractive
    potential); the reference rate applies it with a minus sign so that the
    error decreases.
    """
    eta, eps = e_q[0], np.asarray(e_q[1:], dtype=float)
    n = math.sqrt(float(eps @ eps))
    s = sign_plus(eta)
    if n <= p.eps_e_bar:
        return p.alpha1 * s * eps
    return p.alpha2 * s * eps / n


def _zone_eps(m_inertial, zone: ForbiddenZone) -> np.ndarray:
    return shortest_rotation(m_inertial, zone.n_hat)[1:]


def repulsive_rate(q, m_hat_body, zones: Sequence[ForbiddenZone], p: ApfParams, t: float | None = None) -> np.ndarray:
    """Summed repulsive rate in the inertial frame.

    Each term ``-zeta_j eps~_j / ||eps~_j||^3`` spins the boresight away from
    the zone axis.
    """
    m_i = rotation_matrix(q).T @ np.asarray(m_hat_body, dtype=float)
    out = np.zeros(3)
    for zeta, zone in zip(p.zeta, zones):
        e = _zone_eps(m_i, zone)
        n = math.sqrt(float(e @ e))
        if n <= DEGENERATE_EPS:
            raise BoresightOnForbiddenAxis("boresight aligned with a forbidden direction", t)
        out -= zeta / n**3 * e
    return out


def reference_rate(q, q_d, m_hat_body, zones: Sequence[ForbiddenZone], p: ApfParams, t: float | None = None) -> np.ndarray:
    """Body-frame reference rate combining the attractive and repulsive fields."""
    e_q = quat_error(q_d, q)
    # the attractive axis lives in the goal frame; lift it to inertial
    w_att = -(rotation_matrix(q_d).T @ attractive_rate(e_q, p))
    return rotation_matrix(q) @ (w_att + repulsive_rate(q, m_hat_body, zones, p, t))


def propagate_reference(g: GuidanceState, omega_star, dt: float) -> GuidanceState:
    """One RK4 step of the reference kinematics with ``omega_star`` held."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    w = np.asarray(omega_star, dtype=float)
    return GuidanceState(_kernels.rk4_kinematics(np.asarray(g.q_star, dtype=float), w, float(dt)), w)


def theta_hat(theta_js: Sequence[float], theta_floor: float, j_excluded: int) -> float:
    """Guaranteed clearance from zone ``j_excluded`` given the other zones' angles."""
    s2 = math.sin(0.5 * theta_floor) ** 2
    total = 0.0
    for j, th in enumerate(theta_js):
        if j == j_excluded:
            continue
        if th <= 0:
            raise ValidationError("zone angles must be positive")
        total += s2 / math.sin(0.5 * th) ** 2
    return 2.0 * math.asin(math.sqrt(s2 / (1.0 + total)))


def theta_min(n_zones: int, theta_floor: float) -> float:
    """Spacing that keeps the summed repulsion within the rate bound."""
    if n_zones < 1:
        raise ValidationError("at least one zone is required")
    arg = math.sqrt(n_zones) * math.sin(0.5 * theta_floor)
    if arg > 1.0:
        raise InfeasibleSpacing(f"{n_zones} zones of half-apex {math.degrees(theta_floor):.3g} deg cannot be spaced")
    return 2.0 * math.asin(arg)


def pointing_margins(q, m_hat_body, zones: Sequence[ForbiddenZone]) -> list:
    """``(theta_j, violated)`` for every zone; the cone boundary counts as safe."""
    q = as_quat(q)
    m_i = rotation_matrix(q).T @ np.asarray(m_hat_body, dtype=float)
    out = []
    for zone in zones:
        a = float(m_i @ zone.n_hat)
        if 1.0 + a < 1e-12:
            out.append((math.pi, False))
            continue
        qt = shortest_rotation(m_i, zone.n_hat)
        eps_n = float(np.linalg.norm(qt[1:]))
        theta = 2.0 * math.atan2(eps_n, qt[0])
        out.append((theta, eps_n < zone.eps_floor * (1.0 - 1e-12)))
    return out
