"""Four-wheel pyramid cluster: geometry, allocation, envelope and wheel dynamics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import _kernels
from .errors import DegenerateGeometry, InfeasibleActuation, ValidationError
from .quaternion import norm2
from .rigid_body import DisturbanceModel, InertiaModel

# wheel torque tracking dynamics H(s) = (1.214 s + 0.7625) / (s^2 + 2.40 s + 0.7625)
RW_NUM = (1.214, 0.7625)
RW_DEN = (1.0, 2.40, 0.7625)


def z_matrix(alpha: float, beta: float) -> np.ndarray:
    """Spin-axis matrix mapping wheel quantities to body axes (3 x 4)."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    return np.array(
        [
            [ca * cb, -sa * cb, -ca * cb, sa * cb],
            [sa * cb, ca * cb, -sa * cb, -ca * cb],
            [sb, sb, sb, sb],
        ]
    )


@dataclass(frozen=True)
class RwCluster:
    """Pyramid cluster with per-wheel torque and momentum limits.

    Angles are in radians; ``tau_w_max`` in N m, ``h_w_max`` in N m s.
    """

    alpha: float
    beta: float
    tau_w_max: float
    h_w_max: float
    Z: np.ndarray = field(init=False, repr=False)
    Z_pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.beta < math.pi / 2:
            raise ValidationError("pyramid elevation must lie in (0, pi/2)")
        if self.tau_w_max <= 0 or self.h_w_max <= 0:
            raise ValidationError("wheel limits must be positive")
        z = z_matrix(self.alpha, self.beta)
        zp = np.linalg.pinv(z)
        z.setflags(write=False)
        zp.setflags(write=False)
        object.__setattr__(self, "Z", z)
        object.__setattr__(self, "Z_pinv", zp)

    @classmethod
    def from_degrees(cls, alpha_deg, beta_deg, tau_w_max, h_w_max) -> "RwCluster":
        return cls(math.radians(alpha_deg), math.radians(beta_deg), tau_w_max, h_w_max)


def allocate(cluster: RwCluster, tau_body) -> np.ndarray:
    """Minimum-norm wheel torques reproducing ``tau_body``."""
    return cluster.Z_pinv @ np.asarray(tau_body, dtype=float)


def wheels_to_body(cluster: RwCluster, x_w) -> np.ndarray:
    return cluster.Z @ np.asarray(x_w, dtype=float)


def inscribed_radius(z: np.ndarray, cap: float) -> float:
    """Radius of the largest origin-centred sphere inside ``{z x : |x_i| <= cap}``.

    Each facet is swept by two free wheels while the other two sit at
    ``+-cap``.  All pair/sign combinations are enumerated; a candidate plane
    is kept only if it supports the envelope, and coincident planes are
    merged before taking the closest one.
    """
    n_w = z.shape[1]
    planes = []
    for i, j in itertools.combinations(range(n_w), 2):
        normal = np.cross(z[:, i], z[:, j])
        length = np.linalg.norm(normal)
        if length < 1e-12:
            raise DegenerateGeometry(f"wheels {i + 1} and {j + 1} have parallel spin axes")
        normal /= length
        proj = normal @ z
        support = cap * np.abs(proj).sum()
        fixed = [k for k in range(n_w) if k not in (i, j)]
        for signs in itertools.product((-1.0, 1.0), repeat=len(fixed)):
            offset = cap * sum(s * proj[k] for s, k in zip(signs, fixed))
            if abs(abs(offset) - support) > 1e-12 * max(1.0, support):
                continue  # interior plane, not a facet
            n_out = normal if offset >= 0 else -normal
            dist = abs(offset)
            if not any(np.allclose(n_out, p, atol=1e-12) and abs(dist - d) < 1e-12 for p, d in planes):
                planes.append((n_out, dist))
    return min(d for _, d in planes)


def envelope_radius(cluster: RwCluster, kind: str = "momentum") -> float:
    """Inscribed momentum sphere radius (``kind='momentum'``) or torque sphere radius."""
    if kind == "momentum":
        cap = cluster.h_w_max
    elif kind == "torque":
        cap = cluster.tau_w_max
    else:
        raise ValidationError(f"unknown envelope kind {kind!r}")
    return inscribed_radius(cluster.Z, cap)


def omega_max(H_bar: float, dist: DisturbanceModel, inertia: InertiaModel) -> float:
    """Largest body rate that keeps the wheels clear of momentum saturation."""
    h_d = dist.h_d_bar
    if H_bar <= h_d:
        raise InfeasibleActuation(
            f"disturbance momentum {h_d:.4g} N m s exceeds the momentum sphere {H_bar:.4g} N m s"
        )
    return (H_bar - h_d) / norm2(inertia.upper)


@dataclass(frozen=True)
class RwFilter:
    """Bilinear discretisation of the wheel torque transfer function."""

    dt: float
    b: np.ndarray = field(init=False, repr=False)
    a: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValidationError("filter step must be positive")
        b, a = signal.bilinear(RW_NUM, RW_DEN, fs=1.0 / self.dt)
        b = np.concatenate((np.zeros(3 - len(b)), b)) / a[0]
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a / a[0])

    @property
    def poles(self) -> np.ndarray:
        return np.roots(self.a)


@dataclass(frozen=True)
class WheelState:
    h_w: np.ndarray = field(default_factory=lambda: np.zeros(4))
    filter_state: np.ndarray = field(default_factory=lambda: np.zeros((4, 2)))
    tau_saturated: bool = False
    h_saturated: bool = False


def wheel_step(ws: WheelState, tau_w_cmd, dt: float, cluster: RwCluster, filt: RwFilter | None = None):
    """Advance the wheels one step.

    The command is clamped to ``+-tau_w_max``, passed through the torque
    filter, integrated as ``dh/dt = -tau`` and the momentum clamped to
    ``+-h_w_max``; a wheel sitting on its momentum limit delivers only the
    torque that keeps it there.

    Returns:
        ``(new_state, tau_actual)``; ``tau_actual`` is the torque delivered
        over the step.
    """
    if filt is None or filt.dt != dt:
        filt = RwFilter(dt)
    cmd = np.asarray(tau_w_cmd, dtype=float)
    clipped = np.clip(cmd, -cluster.tau_w_max, cluster.tau_w_max)
    fstate = ws.filter_state.copy()
    tau = np.zeros(4)
    h_new = np.zeros(4)
    hit = _kernels.wheel_update(clipped, ws.h_w, fstate, filt.b, filt.a, cluster.h_w_max, dt, tau, h_new)
    return WheelState(h_new, fstate, bool(np.any(clipped != cmd)), bool(hit)), tau
