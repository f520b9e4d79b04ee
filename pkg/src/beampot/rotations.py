"""SO(3) maps used by the rod solver: exp, log, tangent inverses, quaternions.

All closed forms switch to series below a small-angle threshold chosen so
the trigonometric cancellations never dominate the result. Angles are
assumed below pi, which element-wise relative rotations of a load-stepped
rod never exceed.
"""

from __future__ import annotations

import numpy as np

_SMALL = 0.02


def skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def exp_so3(phi: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(phi)
    k = skew(phi)
    if angle < _SMALL:
        a = 1.0 - angle**2 / 6.0 + angle**4 / 120.0
        b = 0.5 - angle**2 / 24.0 + angle**4 / 720.0
    else:
        a = np.sin(angle) / angle
        b = (1.0 - np.cos(angle)) / angle**2
    return np.eye(3) + a * k + b * (k @ k)


def log_so3(rot: np.ndarray) -> np.ndarray:
    cos_a = np.clip(0.5 * (np.trace(rot) - 1.0), -1.0, 1.0)
    angle = np.arccos(cos_a)
    axial = 0.5 * np.array(
        [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
    )
    if angle < _SMALL:
        # axial = sin(angle)/angle * phi; invert by series
        return axial * (
            1.0 + angle**2 / 6.0 + 7.0 * angle**4 / 360.0 + 31.0 * angle**6 / 15120.0
        )
    if angle > np.pi - 1e-3:
        # near pi the axial part degenerates; recover the axis from R + I
        b = 0.5 * (rot + np.eye(3))
        j = int(np.argmax(np.diag(b)))
        axis = b[:, j] / np.sqrt(b[j, j])
        axis /= np.linalg.norm(axis)
        if axial @ axis < 0.0:
            axis = -axis
        return angle * axis
    return axial * angle / np.sin(angle)


def _c_coeff(angle: float) -> float:
    """c(t) with J_l(t)^-1 = I - skew/2 + c skew^2; series below the threshold."""
    if angle < _SMALL:
        return 1.0 / 12.0 + angle**2 / 720.0 + angle**4 / 30240.0
    half = 0.5 * angle
    return (1.0 - half * np.cos(half) / np.sin(half)) / angle**2


def _c_coeff_prime(angle: float) -> float:
    if angle < _SMALL:
        return angle / 360.0 + angle**3 / 7560.0 + angle**5 / 201600.0
    half = 0.5 * angle
    cot = np.cos(half) / np.sin(half)
    num = -0.5 * cot + angle / (4.0 * np.sin(half) ** 2)
    return num / angle**2 - 2.0 * (1.0 - half * cot) / angle**3


def left_jacobian_inv(phi: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(phi)
    k = skew(phi)
    return np.eye(3) - 0.5 * k + _c_coeff(angle) * (k @ k)


def right_jacobian_inv(phi: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(phi)
    k = skew(phi)
    return np.eye(3) + 0.5 * k + _c_coeff(angle) * (k @ k)


def d_left_jacobian_inv_apply(phi: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Derivative of J_l(phi)^-1 d with respect to phi, as a 3x3 matrix."""
    angle = np.linalg.norm(phi)
    c = _c_coeff(angle)
    out = 0.5 * skew(d)
    out += c * ((phi @ d) * np.eye(3) + np.outer(phi, d) - 2.0 * np.outer(d, phi))
    if angle > 0.0:
        k2d = np.cross(phi, np.cross(phi, d))
        out += (_c_coeff_prime(angle) / angle) * np.outer(k2d, phi)
    return out


# -- quaternions (w, x, y, z) ------------------------------------------------------


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_from_rotvec(phi: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(phi)
    if angle < 1e-12:
        return quat_normalize(np.array([1.0, 0.5 * phi[0], 0.5 * phi[1], 0.5 * phi[2]]))
    axis = phi / angle
    half = 0.5 * angle
    return np.array([np.cos(half), *(np.sin(half) * axis)])


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
