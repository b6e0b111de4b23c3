"""Small-rotation utilities shared across the navigation modules.

All direction cosine matrices (DCMs) map body to navigation frame unless
stated otherwise. Euler angles follow the Z-Y-X (yaw, pitch, roll)
convention throughout.
"""

from __future__ import annotations

import numpy as np


def skew(u: np.ndarray) -> np.ndarray:
    """Return the skew-symmetric cross-product matrix [u x]."""
    return np.array(
        [
            [0.0, -u[2], u[1]],
            [u[2], 0.0, -u[0]],
            [-u[1], u[0], 0.0],
        ]
    )


def rodrigues(rotvec: np.ndarray) -> np.ndarray:
    """Rotation matrix of an axis-angle vector (exact exponential map).

    For very small angles the first-order expansion I + [r x] is used; its
    orthonormality defect is O(|r|^2) and negligible below the threshold.
    """
    angle = float(np.linalg.norm(rotvec))
    if angle < 1e-12:
        return np.eye(3) + skew(rotvec)
    k = skew(rotvec / angle)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rotvec_from_dcm(c: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rodrigues` for rotation angles in [0, pi).

    Angles close to pi (within ~1e-6) are not expected from the
    small-misalignment geometry handled here and fall back to the
    antisymmetric-part formula.
    """
    cos_angle = np.clip((np.trace(c) - 1.0) / 2.0, -1.0, 1.0)
    angle = float(np.arccos(cos_angle))
    axis_raw = 0.5 * np.array([c[2, 1] - c[1, 2], c[0, 2] - c[2, 0], c[1, 0] - c[0, 1]])
    if angle < 1e-7:
        # sin(angle)/angle ~ 1; axis_raw already equals rotvec to O(angle^3)
        return axis_raw
    return axis_raw * (angle / np.sin(angle))


def dcm_from_euler(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Body-to-navigation DCM from Z-Y-X Euler angles (radians)."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def euler_from_dcm(c: np.ndarray) -> tuple[float, float, float]:
    """Extract (yaw, pitch, roll) in radians from a body-to-nav DCM."""
    pitch = float(np.arcsin(np.clip(-c[2, 0], -1.0, 1.0)))
    yaw = float(np.arctan2(c[1, 0], c[0, 0]))
    roll = float(np.arctan2(c[2, 1], c[2, 2]))
    return yaw, pitch, roll


def orthonormalize(c: np.ndarray) -> np.ndarray:
    """Project a near-orthonormal matrix onto SO(3) (closest rotation)."""
    u, _, vt = np.linalg.svd(c)
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r
