"""Rigid spacecraft plant: uncertain inertia, disturbance torque, integration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import RejectionExhausted, SingularPerturbation, ValidationError
from .quaternion import as_quat, cross, rotation_matrix

_SYM_ENTRIES = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def _is_spd(a: np.ndarray) -> bool:
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        return False
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False
    return True


@dataclass(frozen=True)
class InertiaModel:
    """Nominal inertia, elementwise uncertainty bound and the actual inertia.

    Attributes:
        I_star: nominal (known) inertia tensor, kg m^2.
        delta_bound: elementwise bound on the uncertainty, non-negative.
        I_true: inertia actually used by the plant.
    """

    I_star: np.ndarray
    delta_bound: np.ndarray
    I_true: np.ndarray

    def __post_init__(self):
        for name in ("I_star", "delta_bound", "I_true"):
            a = np.array(getattr(self, name), dtype=float).reshape(3, 3)
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{name} has non-finite entries")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not _is_spd(self.I_star):
            raise ValidationError("nominal inertia must be symmetric positive definite")
        if not _is_spd(self.I_true):
            raise ValidationError("true inertia must be symmetric positive definite")
        if np.any(self.delta_bound < 0) or not np.allclose(self.delta_bound, self.delta_bound.T):
            raise ValidationError("uncertainty bound must be symmetric and non-negative")
        diag = np.diag(self.delta_bound) < np.diag(self.I_star)
        if not diag.all() or np.any(self.delta_bound > np.abs(self.I_star)):
            raise ValidationError("uncertainty bound must stay below |I*| elementwise")
        if np.any(np.abs(self.I_true - self.I_star) > self.delta_bound * (1 + 1e-12) + 1e-15):
            raise ValidationError("true inertia lies outside the uncertainty box")

    @classmethod
    def nominal(cls, I_star, fraction: float = 0.0) -> "InertiaModel":
        """Plant with ``I_true = I_star`` and ``delta_bound = fraction * |I_star|``."""
        I_star = np.asarray(I_star, dtype=float)
        return cls(I_star, fraction * np.abs(I_star), I_star)

    @property
    def upper(self) -> np.ndarray:
        return self.I_star + self.delta_bound

    @property
    def lower(self) -> np.ndarray:
        return self.I_star - self.delta_bound

    def with_true(self, I_true) -> "InertiaModel":
        return replace(self, I_true=np.asarray(I_true, dtype=float))


def sample_inertia(model: InertiaModel, rng: np.random.Generator, max_tries: int = 100) -> InertiaModel:
    """Draw a symmetric positive-definite ``I_true`` uniformly inside the box."""
    for _ in range(max_tries):
        delta = np.zeros((3, 3))
        for i, j in _SYM_ENTRIES:
            delta[i, j] = delta[j, i] = rng.uniform(-1.0, 1.0) * model.delta_bound[i, j]
        candidate = model.I_star + delta
        if _is_spd(candidate):
            return model.with_true(candidate)
    raise RejectionExhausted(f"no positive-definite inertia sample in {max_tries} tries")


def delta_hat_bound(model: InertiaModel) -> np.ndarray:
    """Elementwise bound on ``inv(I* + dI) - inv(I*)`` over the uncertainty box.

    Evaluates the matrix-inversion-lemma perturbation at the 2^6 sign corners
    of the symmetric box and keeps the elementwise largest magnitude.
    """
    inv_star = np.linalg.inv(model.I_star)
    bound = np.zeros((3, 3))
    for signs in itertools.product((-1.0, 1.0), repeat=len(_SYM_ENTRIES)):
        delta = np.zeros((3, 3))
        for (i, j), s in zip(_SYM_ENTRIES, signs):
            delta[i, j] = delta[j, i] = s * model.delta_bound[i, j]
        inner = np.eye(3) + inv_star @ delta
        if abs(np.linalg.det(inner)) < 1e-12:
            raise SingularPerturbation(f"perturbation corner {signs} is singular")
        d_hat = -inv_star @ delta @ np.linalg.inv(inner) @ inv_star
        bound = np.maximum(bound, np.abs(d_hat))
    return bound


@dataclass(frozen=True)
class DisturbanceModel:
    """Environmental torque: per-axis bias plus a sinusoid, norm-limited.

    ``d1_bar``/``d2_bar`` bound the secular and periodic parts and
    ``period`` is the orbital period; together they set the momentum a
    disturbance can inject over a quarter orbit.
    """

    bias: np.ndarray = field(default_factory=lambda: np.full(3, 1e-6))
    amp: np.ndarray = field(default_factory=lambda: np.full(3, 5e-5))
    freq: float = 1e-3
    phase: np.ndarray = field(default_factory=lambda: np.zeros(3))
    d_bar: float = 8.7e-5
    d1_bar: float = 1e-6
    d2_bar: float = 5e-5
    period: float = 5828.0

    def __post_init__(self):
        for name in ("bias", "amp", "phase"):
            v = np.array(np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (3,)))
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.d_bar < 0 or self.d1_bar < 0 or self.d2_bar < 0 or self.period <= 0:
            raise ValidationError("disturbance bounds must be non-negative and period positive")

    @classmethod
    def zero(cls) -> "DisturbanceModel":
        return cls(bias=np.zeros(3), amp=np.zeros(3), d_bar=0.0, d1_bar=0.0, d2_bar=0.0)

    @property
    def h_d_bar(self) -> float:
        """Momentum injected over a quarter orbit, ``(d1 + 0.707 d2) T / 4``."""
        return (self.d1_bar + 0.707 * self.d2_bar) * self.period / 4.0


def disturbance_raw(t, m: DisturbanceModel) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return m.bias + m.amp * np.sin(m.freq * t[..., None] + m.phase)


def disturbance_at(t, m: DisturbanceModel) -> np.ndarray:
    """Disturbance torque at time(s) ``t``; shape ``t.shape + (3,)``."""
    d = disturbance_raw(t, m)
    n = np.linalg.norm(d, axis=-1, keepdims=True)
    scale = np.where(n > m.d_bar, m.d_bar / np.where(n > 0, n, 1.0), 1.0)
    return d * scale


@dataclass(frozen=True)
class PlantState:
    q: np.ndarray
    omega: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", as_quat(self.q))
        w = np.asarray(self.omega, dtype=float).reshape(3)
        if not np.all(np.isfinite(w)):
            raise ValidationError("angular rate has non-finite entries")
        object.__setattr__(self, "omega", w)


def state_derivative(s: PlantState, tau, h, d, inertia: InertiaModel):
    """Attitude kinematics and rigid-body dynamics with wheel momentum ``h``.

    Returns ``(q_dot, omega_dot)`` for body rate ``omega`` and total momentum
    ``H = I_true omega + h``.
    """
    q, w = s.q, s.omega
    eta, eps = q[0], q[1:]
    q_dot = np.concatenate(([-0.5 * w @ eps], 0.5 * (eta * w - cross(w, eps))))
    H = inertia.I_true @ w + np.asarray(h, dtype=float)
    w_dot = np.linalg.solve(inertia.I_true, -cross(w, H) + np.asarray(tau) + np.asarray(d))
    return q_dot, w_dot


def rk4_step(s: PlantState, dt: float, tau, h, d, inertia: InertiaModel) -> PlantState:
    """Classical RK4 step with inputs held over ``dt``.

    ``h`` is the wheel momentum at the start of the step; inside the step it
    follows ``h - tau * s`` so that wheel and body exchange momentum exactly.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    x = np.concatenate((s.q, s.omega))
    tau = np.asarray(tau, dtype=float)
    out = _kernels.rk4_plant(
        x, float(dt), tau, np.asarray(h, dtype=float), np.asarray(d, dtype=float),
        inertia.I_true, np.linalg.inv(inertia.I_true),
    )
    return PlantState(out[:4], out[4:], s.t + dt)


def inertial_momentum(q, omega, h, inertia: np.ndarray) -> np.ndarray:
    """Total angular momentum expressed in the inertial frame."""
    return rotation_matrix(q).T @ (inertia @ np.asarray(omega) + np.asarray(h))

