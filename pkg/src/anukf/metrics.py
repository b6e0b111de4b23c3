"""Velocity and misalignment error metrics over Monte Carlo runs."""

from __future__ import annotations

import numpy as np

from .geometry import euler_from_dcm

#: Pitch magnitude (rad) beyond which Euler extraction is flagged.
GIMBAL_LIMIT = np.radians(89.9)


def vrmse(velocity_errors: np.ndarray) -> float:
    """Root mean square of velocity-error norms over runs and steps.

    ``velocity_errors`` has shape (runs, steps, 3) or (steps, 3) for a
    single run.
    """
    err = np.asarray(velocity_errors, dtype=float)
    if err.ndim == 2:
        err = err[None]
    if err.ndim != 3 or err.shape[-1] != 3 or err.size == 0:
        raise ValueError(f"expected (runs, steps, 3) errors, got shape {err.shape}")
    m, n = err.shape[0], err.shape[1]
    return float(np.sqrt(np.sum(err**2) / (m * n)))


def mrmse(misalignment_angles_series: np.ndarray) -> float:
    """Root mean square of misalignment Euler-triple norms.

    Same contract as :func:`vrmse` but over (yaw, pitch, roll) triples in
    radians. Rows containing NaN (flagged gimbal samples) are excluded.
    """
    ang = np.asarray(misalignment_angles_series, dtype=float)
    if ang.ndim == 2:
        ang = ang[None]
    if ang.ndim != 3 or ang.shape[-1] != 3 or ang.size == 0:
        raise ValueError(f"expected (runs, steps, 3) angles, got shape {ang.shape}")
    flat = ang.reshape(-1, 3)
    keep = ~np.any(np.isnan(flat), axis=1)
    if not np.any(keep):
        raise ValueError("no usable samples (all flagged)")
    return float(np.sqrt(np.mean(np.sum(flat[keep] ** 2, axis=1))))


def track_average(v5: float, v6: float) -> float:
    """Two-track RMS aggregate: sqrt((v5^2 + v6^2) / 2)."""
    if v5 < 0.0 or v6 < 0.0:
        raise ValueError("track metrics must be nonnegative")
    return float(np.sqrt(0.5 * (v5 * v5 + v6 * v6)))


def misalignment_angles(
    c_bn_est: np.ndarray, c_bn_truth: np.ndarray
) -> tuple[np.ndarray, bool]:
    """Euler angles of the estimated-over-true attitude discrepancy.

    Forms the rotation from the true navigation frame to the estimated one
    (estimated DCM composed with the transposed truth DCM) and extracts
    (yaw, pitch, roll). Returns the triple and a gimbal-proximity flag;
    flagged samples should be excluded from aggregates.
    """
    c = np.asarray(c_bn_est, dtype=float) @ np.asarray(c_bn_truth, dtype=float).T
    yaw, pitch, roll = euler_from_dcm(c)
    flagged = abs(pitch) > GIMBAL_LIMIT
    return np.array([yaw, pitch, roll]), flagged


def misalignment_series(
    est_dcms: np.ndarray, truth_dcms: np.ndarray
) -> tuple[np.ndarray, int]:
    """Misalignment triples for aligned DCM series.

    Returns an (n, 3) array with flagged samples set to NaN, plus the
    flagged-sample count.
    """
    est = np.asarray(est_dcms, dtype=float)
    tru = np.asarray(truth_dcms, dtype=float)
    if est.shape != tru.shape or est.ndim != 3:
        raise ValueError("series must be matching stacks of 3x3 DCMs")
    out = np.empty((est.shape[0], 3))
    flagged = 0
    for i in range(est.shape[0]):
        angles, bad = misalignment_angles(est[i], tru[i])
        if bad:
            out[i] = np.nan
            flagged += 1
        else:
            out[i] = angles
    return out, flagged
