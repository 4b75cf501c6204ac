"""Boundary-layer sliding-mode tracking controller and its gain synthesis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleTorque, InvalidMargin, ValidationError
from .quaternion import norm1, norm2, quat_error
from .rigid_body import InertiaModel, delta_hat_bound


@dataclass(frozen=True)
class SmcParams:
    """Controller gains.

    Attributes:
        lam: sliding-surface slope (1/s).
        gamma: switching gain (rad/s^2).
        sigma_bar: boundary-layer width (rad/s).
        k: margin factor the gain was synthesised with.
        psi: reference-rate derivative factor used in the synthesis.
    """

    lam: float
    gamma: float
    sigma_bar: float
    k: float = float("nan")
    psi: float = float("nan")

    def __post_init__(self):
        if not (self.lam > 0 and self.gamma > 0 and self.sigma_bar > 0):
            raise ValidationError("lambda, gamma and sigma_bar must be positive")
        if self.sigma_bar >= self.lam:
            raise ValidationError("boundary layer must be narrower than lambda")
        if not math.isnan(self.k) and self.k <= 1.0:
            raise InvalidMargin(f"margin factor k = {self.k} must exceed 1")

    @property
    def S(self) -> float:
        return self.sigma_bar / math.sqrt(3.0)


@dataclass(frozen=True)
class TrackingError:
    e_omega: np.ndarray
    e_eps: np.ndarray
    e_eta: float
    sigma: np.ndarray


def tracking_error(q, omega, q_star, omega_star, p: SmcParams) -> TrackingError:
    e_q = quat_error(q_star, q)
    e_w = np.asarray(omega, dtype=float) - np.asarray(omega_star, dtype=float)
    e_eps = e_q[1:]
    return TrackingError(e_w, e_eps, float(e_q[0]), e_w + p.lam * e_eps)


def sat(sigma, p: SmcParams) -> np.ndarray:
    """Componentwise saturation with linear zone ``|sigma_i| < S``."""
    sigma = np.asarray(sigma, dtype=float)
    return np.where(np.abs(sigma) >= p.S, np.sign(sigma), sigma / p.S)


def control_input(te: TrackingError, p: SmcParams, I_star) -> tuple:
    """``(u, tau)`` with ``u = -gamma sat(sigma)`` and ``tau = I* u``."""
    u = -p.gamma * sat(te.sigma, p)
    return u, np.asarray(I_star, dtype=float) @ u


def psi_factor(eps_e_bar: float, eps_floor: float | None) -> float:
    """Bound factor on the reference-rate derivative; ``eps_floor=None`` means no zones."""
    psi = 1.0 + (1.0 + eps_e_bar) / (2.0 * eps_e_bar)
    if eps_floor is not None:
        psi += (1.0 + eps_floor) / eps_floor
    return psi


@dataclass(frozen=True)
class GainReport:
    """Every intermediate of the gain synthesis, for inspection and printing."""

    eps_e_bar: float
    eps_floor: float | None
    psi: float
    delta_hat: np.ndarray
    delta_hat_norm: float
    delta_hat_istar_norm1: float
    numerator: float
    denominator: float
    k: float
    gamma: float
    ceiling: float
    tau_required: float
    tau_bar: float
    k_upper: float

    @property
    def feasible(self) -> bool:
        """Torque feasibility: the available torque exceeds the worst-case demand."""
        return self.denominator > 0 and self.tau_bar > self.tau_required

    @property
    def within_ceiling(self) -> bool:
        return self.gamma <= self.ceiling


def gain_report(
    inertia: InertiaModel,
    omega_bar: float,
    H_bar: float,
    tau_bar: float,
    d_bar: float,
    lam: float,
    k: float,
    eps_e_bar: float,
    eps_floor: float | None,
) -> GainReport:
    """Evaluate the switching gain and its feasibility conditions without raising."""
    I_star = inertia.I_star
    d_hat = delta_hat_bound(inertia)
    dh_norm = norm2(d_hat)
    dh_i1 = norm1(d_hat @ I_star)
    psi = psi_factor(eps_e_bar, eps_floor)
    num = (
        (norm2(np.linalg.inv(I_star)) + dh_norm) * (omega_bar * H_bar + d_bar)
        + psi * omega_bar**2
        + math.sqrt(2.0) * lam * omega_bar
    )
    den = 1.0 - dh_i1
    i_norm = norm2(I_star)
    ceiling = tau_bar / i_norm
    if den > 0:
        gamma = k * num / den
        tau_required = i_norm * num / den
        k_upper = ceiling * den / num
    else:
        gamma = tau_required = k_upper = float("inf")
    return GainReport(
        eps_e_bar, eps_floor, psi, d_hat, dh_norm, dh_i1, num, den, k,
        gamma, ceiling, tau_required, tau_bar, k_upper,
    )


def synthesize_gains(
    inertia: InertiaModel,
    omega_bar: float,
    H_bar: float,
    tau_bar: float,
    d_bar: float,
    lam: float,
    k: float,
    eps_e_bar: float,
    eps_floor: float | None,
    sigma_bar: float,
) -> SmcParams:
    """Switching gain that guarantees finite-time reaching of the boundary layer.

    Raises:
        InfeasibleTorque: the torque sphere cannot dominate the worst case.
        InvalidMargin: ``k`` is outside ``(1, k_upper)``.
    """
    r = gain_report(inertia, omega_bar, H_bar, tau_bar, d_bar, lam, k, eps_e_bar, eps_floor)
    if not r.feasible:
        raise InfeasibleTorque(
            f"required torque {r.tau_required:.4g} N m exceeds the available {tau_bar:.4g} N m"
        )
    if not 1.0 < k < r.k_upper:
        raise InvalidMargin(f"k = {k} outside (1, {r.k_upper:.6g})")
    return SmcParams(lam, r.gamma, sigma_bar, k, r.psi)


def accuracy_bound(p: SmcParams) -> float:
    """Ultimate bound on ``||e_eps||`` once inside the boundary layer."""
    return p.sigma_bar / p.lam
