"""Closed-loop error-state filter runner.

Drives the strapdown mechanization at the IMU rate and the error-state
filter at the DVL rate: each epoch aggregates the IMU samples since the
previous epoch, propagates the error covariance through the discretized
dynamics with either a static or a regressed process noise, conditions on
the DVL innovation when a usable measurement exists, and feeds the
estimated errors back into the navigation solution (closed-loop reset).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import processnet
from .adaptive import ClampBounds, adapt_q, assemble_qnet, validate_clamp
from .ekf import EkfSession, ekf_predict, ekf_update
from .model import (
    ERROR_DIM,
    build_f_matrix,
    build_g_matrix,
    build_q_discrete,
    discretize,
    dvl_innovation,
    dvl_jacobian,
    dvl_measurement_map,
)
from .strapdown import GRAVITY_NED, NavState, apply_error_correction, mechanize_arrays
from .simulate import DvlData, ImuData
from .ukf import GaussianState, UtParams, compute_weights, generate_sigma_points
from .ukf import measurement_update, time_update

FILTER_KINDS = ("ukf", "anekf", "anukf")


@dataclass(frozen=True)
class StaticQSource:
    """Fixed driving-noise diagonal fed through G every epoch."""

    qstar_diag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.qstar_diag, dtype=float)
        object.__setattr__(self, "qstar_diag", diag)
        if diag.shape != (ERROR_DIM,):
            raise ValueError("qstar_diag must be a 12-vector")


@dataclass(frozen=True)
class AdaptiveQSource:
    """Regressed driving noise from trailing inertial windows."""

    acc_model: processnet.ProcessNetModel
    gyro_model: processnet.ProcessNetModel
    tau: float = 0.01
    tau_a: float = 1.0
    tau_g: float = 1.0
    bounds: ClampBounds = field(default_factory=ClampBounds)


@dataclass(frozen=True)
class FusionConfig:
    """Filter-side settings shared by all filter kinds."""

    ut: UtParams = field(default_factory=lambda: UtParams(n=ERROR_DIM))
    r_dvl: np.ndarray = field(default_factory=lambda: np.eye(3) * 0.02**2)
    p0_diag: np.ndarray = field(
        default_factory=lambda: np.concatenate(
            [
                np.array([0.25, 0.25, 0.05]) ** 2,
                np.full(3, np.radians(0.01) ** 2),
                np.full(3, 0.3**2),
                np.full(3, 7.3e-5**2),
            ]
        )
    )
    gravity_n: np.ndarray = field(default_factory=lambda: GRAVITY_NED.copy())


@dataclass(frozen=True)
class FilterRun:
    """Per-epoch navigation estimates and filter covariances."""

    t: np.ndarray  # (K,)
    v_n: np.ndarray  # (K, 3)
    c_bn: np.ndarray  # (K, 3, 3)
    b_a_hat: np.ndarray  # (K, 3)
    b_g_hat: np.ndarray  # (K, 3)
    cov: np.ndarray  # (K, 12, 12) posterior covariance after each epoch
    clamp_events: int
    replaced_events: int


def run_filter(
    kind: str,
    imu: ImuData,
    dvl: DvlData,
    nav0: NavState,
    q_source: StaticQSource | AdaptiveQSource,
    config: FusionConfig = FusionConfig(),
) -> FilterRun:
    """Run one filter over one corrupted track.

    ``kind`` selects the algorithm: "ukf" and "anukf" use the unscented
    machinery, "anekf" the extended baseline; the adaptive variants differ
    from the static one only through ``q_source``.
    """
    if kind not in FILTER_KINDS:
        raise ValueError(f"unknown filter kind {kind!r}; expected one of {FILTER_KINDS}")
    adaptive = isinstance(q_source, AdaptiveQSource)
    use_ut = kind in ("ukf", "anukf")

    imu_dt = float(np.median(np.diff(imu.t))) if imu.t.size > 1 else 0.01
    n_epochs = dvl.t.shape[0]
    window = processnet.WINDOW_LEN

    weights = compute_weights(config.ut) if use_ut else None
    state = GaussianState(mean=np.zeros(ERROR_DIM), cov=np.diag(config.p0_diag))
    nav = nav0
    c_bn, v_n = nav.c_bn.copy(), nav.v_n.copy()
    b_a, b_g = nav.b_a_hat.copy(), nav.b_g_hat.copy()
    t_now = nav.t

    out_t = np.empty(n_epochs)
    out_v = np.empty((n_epochs, 3))
    out_c = np.empty((n_epochs, 3, 3))
    out_ba = np.empty((n_epochs, 3))
    out_bg = np.empty((n_epochs, 3))
    out_cov = np.empty((n_epochs, ERROR_DIM, ERROR_DIM))
    clamp_events = 0
    replaced_events = 0

    sample_idx = 0
    n_samples = imu.t.shape[0]
    for m in range(n_epochs):
        epoch_t = float(dvl.t[m])
        start_idx = sample_idx
        f_sum = np.zeros(3)
        while sample_idx < n_samples and imu.t[sample_idx] < epoch_t - 1e-9:
            f_b = imu.f[sample_idx] - b_a
            w_b = imu.w[sample_idx] - b_g
            c_bn, v_n = mechanize_arrays(c_bn, v_n, f_b, w_b, imu_dt, config.gravity_n)
            f_sum += f_b
            sample_idx += 1
        n_steps = sample_idx - start_idx
        if n_steps == 0:
            raise ValueError(f"no IMU samples before DVL epoch t={epoch_t}")
        tau_prop = n_steps * imu_dt
        t_now += tau_prop
        nav = NavState(c_bn=c_bn, v_n=v_n, b_a_hat=b_a, b_g_hat=b_g, t=t_now)

        f_mat = build_f_matrix(nav, f_sum / n_steps)
        phi = discretize(f_mat, tau_prop)
        g_mat = build_g_matrix(nav)

        if adaptive:
            if sample_idx < window:
                raise ValueError(
                    f"adaptive filtering needs {window} trailing IMU samples "
                    f"before the first DVL epoch"
                )
            acc_win = imu.f[sample_idx - window : sample_idx]
            gyro_win = imu.w[sample_idx - window : sample_idx]
            acc_out = processnet.forward(q_source.acc_model, acc_win)
            gyro_out = processnet.forward(q_source.gyro_model, gyro_win)
            qnet = assemble_qnet(
                acc_out, gyro_out, q_source.tau, q_source.tau_a, q_source.tau_g
            )
            diag, report = validate_clamp(qnet, q_source.bounds)
            clamp_events += report.clamped
            replaced_events += report.replaced
            q = adapt_q(g_mat, diag)
        else:
            q = build_q_discrete(g_mat, q_source.qstar_diag)

        if use_ut:
            points = generate_sigma_points(state, config.ut)
            pred = time_update(points, lambda x: phi @ x, weights, q)
            if dvl.valid[m]:
                z = dvl_innovation(nav, dvl.v_b[m])
                post = measurement_update(
                    pred,
                    lambda x: dvl_measurement_map(x, nav),
                    weights,
                    config.r_dvl,
                    z,
                    config.ut,
                )
            else:
                post = pred
        else:
            session = ekf_predict(EkfSession(state=state), phi, q)
            if dvl.valid[m]:
                z = dvl_innovation(nav, dvl.v_b[m])
                session = ekf_update(session, dvl_jacobian(nav), config.r_dvl, z)
            post = session.state

        nav = apply_error_correction(nav, post.mean)
        c_bn, v_n = nav.c_bn, nav.v_n
        b_a, b_g = nav.b_a_hat, nav.b_g_hat
        state = GaussianState(mean=np.zeros(ERROR_DIM), cov=post.cov)

        out_t[m] = epoch_t
        out_v[m] = v_n
        out_c[m] = c_bn
        out_ba[m] = b_a
        out_bg[m] = b_g
        out_cov[m] = post.cov

    return FilterRun(
        t=out_t, v_n=out_v, c_bn=out_c, b_a_hat=out_ba, b_g_hat=out_bg,
        cov=out_cov, clamp_events=clamp_events, replaced_events=replaced_events,
    )
