"""Quaternion and small dense linear algebra.

Quaternions are scalar-first numpy arrays ``[eta, e1, e2, e3]`` describing the
body frame with respect to the inertial frame.  ``rotation_matrix(q)`` maps
inertial-frame coordinates to body-frame coordinates, so a body-fixed vector
``m`` is seen in the inertial frame as ``rotation_matrix(q).T @ m``.

Every function that returns a quaternion renormalises it.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import AntiparallelAxes, ValidationError

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

# 1 + m.n below this leaves the shortest-rotation axis undefined.
ANTIPARALLEL_TOL = 1e-12


def as_quat(q, tol: float = 1e-3) -> np.ndarray:
    """Validate a 4-sequence as an attitude quaternion and return it normalised.

    ``tol`` is the accepted deviation of the raw norm from one; typed-in
    values such as ``[-0.306, 0.530, 0.660, -0.436]`` are only unit to a few
    digits.
    """
    q = np.asarray(q, dtype=float).reshape(4)
    if not np.all(np.isfinite(q)):
        raise ValidationError(f"quaternion has non-finite entries: {q}")
    n = math.sqrt(float(q @ q))
    if abs(n - 1.0) > tol:
        raise ValidationError(f"quaternion norm {n:.6g} is not close to 1")
    return q / n


def normalize(q: np.ndarray) -> np.ndarray:
    return q / math.sqrt(float(q @ q))


def skew(x) -> np.ndarray:
    """Cross-product matrix: ``skew(x) @ y == cross(x, y)``."""
    return np.array(
        [
            [0.0, -x[2], x[1]],
            [x[2], 0.0, -x[0]],
            [-x[1], x[0], 0.0],
        ]
    )


def cross(a, b) -> np.ndarray:
    # np.cross carries a lot of per-call overhead for 3-vectors
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product ``a (x) b``, renormalised."""
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    out = np.array(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ]
    )
    return normalize(out)


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]], dtype=float)


def quat_error(q_ref, q) -> np.ndarray:
    """Error quaternion ``conj(q_ref) (x) q``."""
    return quat_mul(quat_conj(q_ref), q)


def rotation_matrix(q) -> np.ndarray:
    """Direction-cosine matrix taking inertial coordinates to body coordinates."""
    eta = q[0]
    eps = np.asarray(q[1:], dtype=float)
    return (
        (eta * eta - eps @ eps) * np.eye(3)
        + 2.0 * np.outer(eps, eps)
        - 2.0 * eta * skew(eps)
    )


def from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate(([math.cos(half)], math.sin(half) * axis))


def rotate_active(q, v) -> np.ndarray:
    """Rotate ``v`` by ``q`` in a fixed frame (``q (x) v (x) conj(q)``)."""
    return rotation_matrix(q).T @ np.asarray(v, dtype=float)


def shortest_rotation(m, n) -> np.ndarray:
    """Quaternion of the shortest rotation carrying unit vector ``m`` onto ``n``.

    The scalar part equals ``cos(theta / 2)`` with ``theta`` the angle between
    the two vectors, so it is never negative.

    Raises:
        AntiparallelAxes: if ``1 + m.n`` is below ``ANTIPARALLEL_TOL``.
    """
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    a = float(m @ n)
    if 1.0 + a < ANTIPARALLEL_TOL:
        raise AntiparallelAxes("shortest rotation undefined for antiparallel vectors")
    q = np.concatenate(([1.0 + a], cross(m, n)))
    return normalize(q)


def sign_plus(x: float) -> float:
    """-1 for negative input, +1 otherwise (zero included)."""
    return -1.0 if x < 0 else 1.0


def _jacobi_eigvals(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 64) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    scale = max(float(np.abs(a).max()), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.tril(a, -1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                # below this the entry cannot hold up convergence
                if abs(a[p, r]) <= 1e-3 * tol * scale:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * a[p, r])
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[r, r] = c
                rot[p, r] = s
                rot[r, p] = -s
                a = rot.T @ a @ rot
    return np.diag(a).copy()


def norm2(a) -> float:
    """l2-induced matrix norm (largest singular value)."""
    a = np.asarray(a, dtype=float)
    return math.sqrt(max(float(_jacobi_eigvals(a.T @ a).max()), 0.0))


def norm1(a) -> float:
    """l1-induced matrix norm (largest absolute column sum)."""
    return float(np.abs(np.asarray(a, dtype=float)).sum(axis=0).max())


def angle_between(x, y) -> float:
    """Angle (rad) between two vectors, accurate near 0 and pi."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return math.atan2(float(np.linalg.norm(cross(x, y))), float(x @ y))
