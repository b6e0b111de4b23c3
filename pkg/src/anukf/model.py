"""12-state INS/DVL error model: dynamics, discrete noise, DVL measurement.

State layout (fixed, never reordered): navigation-frame velocity error,
navigation-frame misalignment, accelerometer residual bias, gyroscope
residual bias, three axes each.

Sign conventions (pinned by closed-loop convergence, see tests):

* velocity error  = solution minus truth (subtract to correct);
* misalignment    = rotation vector taking the solution attitude to the
  true attitude in the navigation frame (left-apply to correct);
* residual biases = true bias minus current estimate (add to correct).

With these, the DVL measurement mapping below predicts the innovation
``solution-predicted body velocity minus DVL-measured body velocity``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import rodrigues, skew
from .strapdown import SL_BA, SL_BG, SL_DV, SL_PSI, NavState

ERROR_DIM = 12


@dataclass(frozen=True)
class ErrorState:
    """Structured view of the 12-dim error state."""

    dv_n: np.ndarray
    dpsi_n: np.ndarray
    ba: np.ndarray
    bg: np.ndarray

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "ErrorState":
        x = np.asarray(x, dtype=float)
        if x.shape != (ERROR_DIM,):
            raise ValueError(f"expected shape (12,), got {x.shape}")
        return cls(dv_n=x[SL_DV], dpsi_n=x[SL_PSI], ba=x[SL_BA], bg=x[SL_BG])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.dv_n, self.dpsi_n, self.ba, self.bg])


@dataclass(frozen=True)
class NoiseSpec:
    """White-noise and bias random-walk strengths of the inertial sensors.

    ``sigma_a`` / ``sigma_g`` are per-sample standard deviations of the
    100 Hz white noise; ``sigma_ab`` / ``sigma_gb`` are random-walk
    densities (per sqrt-second).
    """

    sigma_a: float  # m/s^2
    sigma_g: float  # rad/s
    sigma_ab: float  # m/s^2 / sqrt(s)
    sigma_gb: float  # rad/s / sqrt(s)

    def __post_init__(self):
        for name in ("sigma_a", "sigma_g", "sigma_ab", "sigma_gb"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")


def build_f_matrix(nav: NavState, f_b: np.ndarray) -> np.ndarray:
    """Continuous-time error dynamics matrix for the current solution.

    ``f_b`` is the bias-corrected specific force in body axes. The bias
    rows are zero (random-walk states); velocity error couples to
    misalignment through the navigation-frame specific force and to the
    accelerometer bias through the attitude.
    """
    f = np.zeros((ERROR_DIM, ERROR_DIM))
    f[SL_DV, SL_PSI] = skew(nav.c_bn @ np.asarray(f_b, dtype=float))
    f[SL_DV, SL_BA] = nav.c_bn
    f[SL_PSI, SL_BG] = -nav.c_bn
    return f


def build_g_matrix(nav: NavState) -> np.ndarray:
    """Noise distribution matrix: block diagonal [C_bn, C_bn, I, I]."""
    g = np.zeros((ERROR_DIM, ERROR_DIM))
    g[SL_DV, SL_DV] = nav.c_bn
    g[SL_PSI, SL_PSI] = nav.c_bn
    g[SL_BA, SL_BA] = np.eye(3)
    g[SL_BG, SL_BG] = np.eye(3)
    return g


def discretize(f: np.ndarray, dt: float) -> np.ndarray:
    """Second-order transition matrix Phi = I + F dt + F^2 dt^2 / 2.

    For this model F^3 = 0 whenever the attitude is held over the step, so
    the truncation equals the exact matrix exponential there.
    """
    if not 0.0 < dt <= 1.0:
        raise ValueError(f"dt must be in (0, 1], got {dt}")
    f = np.asarray(f, dtype=float)
    return np.eye(f.shape[0]) + f * dt + f @ f * (dt * dt / 2.0)


def qstar_diagonal(noise: NoiseSpec, tau: float, tau_prop: float) -> np.ndarray:
    """Diagonal of the discrete driving-noise covariance Q*.

    ``tau`` is the IMU sampling interval (converts per-sample variances to
    noise densities) and ``tau_prop`` the filter propagation interval. The
    white-noise slots integrate density over the propagation interval
    (sigma^2 tau tau_prop); the random-walk slots integrate their densities
    directly (sigma^2 tau_prop).
    """
    return np.concatenate(
        [
            np.full(3, noise.sigma_a**2 * tau * tau_prop),
            np.full(3, noise.sigma_g**2 * tau * tau_prop),
            np.full(3, noise.sigma_ab**2 * tau_prop),
            np.full(3, noise.sigma_gb**2 * tau_prop),
        ]
    )


def build_q_discrete(g: np.ndarray, qstar: np.ndarray) -> np.ndarray:
    """Discrete process noise Q = G Q* G^T.

    ``qstar`` may be the 12-vector diagonal or the full diagonal matrix.

    Raises
    ------
    ValueError
        If the diagonal has negative entries.
    """
    qstar = np.asarray(qstar, dtype=float)
    diag = np.diag(qstar) if qstar.ndim == 2 else qstar
    if np.any(diag < 0.0):
        raise ValueError("Q* diagonal must be nonnegative")
    q = (g * diag) @ g.T
    return 0.5 * (q + q.T)


def dvl_measurement_map(err: np.ndarray, nav: NavState) -> np.ndarray:
    """Predicted DVL innovation for a given error-state hypothesis.

    Rotates the error-corrected navigation velocity into body axes through
    the misalignment hypothesis and subtracts the uncorrected prediction.
    This is the nonlinear mapping applied per sigma point.
    """
    err = np.asarray(err, dtype=float)
    c_nb = nav.c_bn.T
    corrected = rodrigues(err[SL_PSI]) @ (nav.v_n + err[SL_DV])
    return c_nb @ corrected - c_nb @ nav.v_n


def dvl_innovation(nav: NavState, dvl_v_b: np.ndarray) -> np.ndarray:
    """Observed innovation: predicted body velocity minus DVL measurement.

    The sign pairs with :func:`dvl_measurement_map` so that the mapping
    evaluated at the true error state reproduces the innovation to first
    order (verified by the closed-loop convergence tests).
    """
    dvl_v_b = np.asarray(dvl_v_b, dtype=float)
    if not np.all(np.isfinite(dvl_v_b)):
        raise ValueError("DVL velocity contains non-finite values")
    return nav.c_bn.T @ nav.v_n - dvl_v_b


def dvl_jacobian(nav: NavState) -> np.ndarray:
    """First-order expansion of :func:`dvl_measurement_map` at zero error."""
    h = np.zeros((3, ERROR_DIM))
    c_nb = nav.c_bn.T
    h[:, SL_DV] = c_nb
    h[:, SL_PSI] = -c_nb @ skew(nav.v_n)
    return h
