"""Strapdown inertial mechanization for short, local-level missions.

Earth rotation and transport-rate terms are deliberately omitted: at the
few-minute mission lengths and tactical-grade noise levels targeted here
they are second-order against sensor bias and noise. Gravity is modeled
as a constant navigation-frame vector (NED, positive down).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ImplausibleCorrectionError
from .geometry import orthonormalize, rodrigues

#: Default gravity vector in NED coordinates (m/s^2).
GRAVITY_NED = np.array([0.0, 0.0, 9.7963])

#: Error-state layout shared with the 12-state model: velocity error,
#: misalignment, accelerometer bias, gyroscope bias.
SL_DV = slice(0, 3)
SL_PSI = slice(3, 6)
SL_BA = slice(6, 9)
SL_BG = slice(9, 12)


@dataclass(frozen=True)
class NavState:
    """Navigation solution carried by the mechanization.

    Attributes
    ----------
    c_bn : ndarray (3, 3)
        Body-to-navigation direction cosine matrix; kept orthonormal.
    v_n : ndarray (3,)
        Velocity in the navigation frame (NED, m/s).
    b_a_hat : ndarray (3,)
        Estimated accelerometer bias (m/s^2), subtracted from raw readings.
    b_g_hat : ndarray (3,)
        Estimated gyroscope bias (rad/s), subtracted from raw readings.
    t : float
        Solution time (s).
    """

    c_bn: np.ndarray
    v_n: np.ndarray
    b_a_hat: np.ndarray
    b_g_hat: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "c_bn", np.asarray(self.c_bn, dtype=float))
        object.__setattr__(self, "v_n", np.asarray(self.v_n, dtype=float))
        object.__setattr__(self, "b_a_hat", np.asarray(self.b_a_hat, dtype=float))
        object.__setattr__(self, "b_g_hat", np.asarray(self.b_g_hat, dtype=float))
        c = self.c_bn
        if c.shape != (3, 3):
            raise ValueError(f"c_bn must be 3x3, got {c.shape}")
        defect = float(np.max(np.abs(c @ c.T - np.eye(3))))
        if defect > 1e-9:
            raise ValueError(f"c_bn is not orthonormal (defect {defect:.2e})")
        if abs(float(np.linalg.det(c)) - 1.0) > 1e-9:
            raise ValueError("c_bn must be a proper rotation (det +1)")

    @classmethod
    def level(cls, v_n=(0.0, 0.0, 0.0), t: float = 0.0) -> "NavState":
        """Identity attitude, given velocity, zero bias estimates."""
        return cls(
            c_bn=np.eye(3),
            v_n=np.asarray(v_n, dtype=float),
            b_a_hat=np.zeros(3),
            b_g_hat=np.zeros(3),
            t=t,
        )


@dataclass(frozen=True)
class ImuSample:
    """One inertial sample: specific force and angular rate in body axes."""

    f_b: np.ndarray  # m/s^2
    w_b: np.ndarray  # rad/s
    t: float = 0.0


def mechanize_arrays(
    c_bn: np.ndarray,
    v_n: np.ndarray,
    f_b: np.ndarray,
    w_b: np.ndarray,
    dt: float,
    gravity_n: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One mechanization step on raw arrays (bias already removed).

    Attitude advances by the exact axis-angle rotation of ``w_b * dt`` and
    is re-orthonormalized; velocity integrates the navigation-frame
    specific force plus gravity using the pre-update attitude.
    """
    v_new = v_n + c_bn @ f_b * dt + gravity_n * dt
    c_new = orthonormalize(c_bn @ rodrigues(w_b * dt))
    return c_new, v_new


def mechanize_step(
    nav: NavState,
    imu: ImuSample,
    dt: float,
    gravity_n: np.ndarray = GRAVITY_NED,
) -> NavState:
    """Advance the navigation solution by one IMU interval.

    Raises
    ------
    ValueError
        If ``dt <= 0`` or the IMU sample contains non-finite values.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    f_b = np.asarray(imu.f_b, dtype=float)
    w_b = np.asarray(imu.w_b, dtype=float)
    if not (np.all(np.isfinite(f_b)) and np.all(np.isfinite(w_b))):
        raise ValueError("IMU sample contains non-finite values")
    c_new, v_new = mechanize_arrays(
        nav.c_bn, nav.v_n, f_b - nav.b_a_hat, w_b - nav.b_g_hat, dt, gravity_n
    )
    return NavState(
        c_bn=c_new, v_n=v_new, b_a_hat=nav.b_a_hat, b_g_hat=nav.b_g_hat, t=nav.t + dt
    )


def apply_error_correction(nav: NavState, err: np.ndarray) -> NavState:
    """Feed an estimated 12-dim error state back into the navigation solution.

    The error layout is [velocity error, misalignment, accel bias increment,
    gyro bias increment]. Velocity error is subtracted (the state estimates
    the excess of the solution over truth); the misalignment rotates the
    attitude in the navigation frame toward truth; bias estimates are
    incremented by their residual estimates. The caller is expected to zero
    the filter's error mean afterwards (closed-loop reset).

    Raises
    ------
    ImplausibleCorrectionError
        If the misalignment correction exceeds 0.5 rad, which indicates
        filter divergence rather than a small-error fix.
    """
    err = np.asarray(err, dtype=float)
    if err.shape != (12,):
        raise ValueError(f"error state must have shape (12,), got {err.shape}")
    if not np.all(np.isfinite(err)):
        raise ValueError("error state contains non-finite values")
    dpsi = err[SL_PSI]
    dpsi_norm = float(np.linalg.norm(dpsi))
    if dpsi_norm > 0.5:
        raise ImplausibleCorrectionError(
            f"misalignment correction {dpsi_norm:.3f} rad exceeds 0.5 rad"
        )
    return NavState(
        c_bn=rodrigues(dpsi) @ nav.c_bn,
        v_n=nav.v_n - err[SL_DV],
        b_a_hat=nav.b_a_hat + err[SL_BA],
        b_g_hat=nav.b_g_hat + err[SL_BG],
        t=nav.t,
    )
