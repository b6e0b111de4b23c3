import numpy as np
import pytest

from anukf.errors import ImplausibleCorrectionError
from anukf.geometry import dcm_from_euler, euler_from_dcm, rodrigues
from anukf.strapdown import (
    GRAVITY_NED,
    ImuSample,
    NavState,
    apply_error_correction,
    mechanize_step,
)


def test_navstate_rejects_nonorthonormal():
    with pytest.raises(ValueError):
        NavState(c_bn=np.eye(3) * 1.1, v_n=np.zeros(3),
                 b_a_hat=np.zeros(3), b_g_hat=np.zeros(3))


def test_navstate_rejects_reflection():
    c = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ValueError):
        NavState(c_bn=c, v_n=np.zeros(3), b_a_hat=np.zeros(3), b_g_hat=np.zeros(3))


class TestMechanizeStep:
    def test_stationary_cancellation(self):
        nav = NavState.level()
        imu = ImuSample(f_b=-nav.c_bn.T @ GRAVITY_NED, w_b=np.zeros(3))
        for _ in range(50):
            nav = mechanize_step(nav, imu, dt=0.01)
        np.testing.assert_allclose(nav.v_n, np.zeros(3), atol=1e-12)

    def test_constant_acceleration_integral(self):
        nav = NavState.level()
        f_net = np.array([1.0, 0.0, 0.0])
        imu = ImuSample(f_b=f_net - GRAVITY_NED, w_b=np.zeros(3))
        for _ in range(100):
            nav = mechanize_step(nav, imu, dt=0.01)
        np.testing.assert_allclose(nav.v_n, [1.0, 0.0, 0.0], atol=1e-9)
        assert nav.t == pytest.approx(1.0)

    def test_single_axis_rotation(self):
        nav = NavState.level()
        imu = ImuSample(f_b=np.zeros(3), w_b=np.array([0.0, 0.0, 0.1]))
        for _ in range(1000):
            nav = mechanize_step(nav, imu, dt=0.01)
        yaw, pitch, roll = euler_from_dcm(nav.c_bn)
        assert yaw == pytest.approx(1.0, abs=1e-6)
        assert pitch == pytest.approx(0.0, abs=1e-9)
        assert roll == pytest.approx(0.0, abs=1e-9)

    def test_zero_input_fixed_point(self):
        nav = NavState(
            c_bn=dcm_from_euler(0.3, -0.1, 0.2), v_n=np.array([1.0, -2.0, 0.5]),
            b_a_hat=np.zeros(3), b_g_hat=np.zeros(3),
        )
        imu = ImuSample(f_b=-nav.c_bn.T @ GRAVITY_NED, w_b=np.zeros(3))
        out = nav
        for _ in range(200):
            out = mechanize_step(out, imu, dt=0.01)
        np.testing.assert_allclose(out.v_n, nav.v_n, atol=1e-12)
        np.testing.assert_allclose(out.c_bn, nav.c_bn, atol=1e-12)
        assert out.t == pytest.approx(2.0)

    def test_bias_estimates_are_subtracted(self):
        bias = np.array([0.5, -0.25, 0.1])
        nav = NavState(c_bn=np.eye(3), v_n=np.zeros(3),
                       b_a_hat=bias, b_g_hat=np.zeros(3))
        imu = ImuSample(f_b=-GRAVITY_NED + bias, w_b=np.zeros(3))
        out = mechanize_step(nav, imu, dt=0.01)
        np.testing.assert_allclose(out.v_n, np.zeros(3), atol=1e-15)

    @pytest.mark.parametrize("dt", [0.0, -0.01])
    def test_rejects_bad_dt(self, dt):
        nav = NavState.level()
        with pytest.raises(ValueError):
            mechanize_step(nav, ImuSample(f_b=np.zeros(3), w_b=np.zeros(3)), dt=dt)

    def test_rejects_nonfinite_imu(self):
        nav = NavState.level()
        with pytest.raises(ValueError):
            mechanize_step(
                nav, ImuSample(f_b=np.array([np.nan, 0, 0]), w_b=np.zeros(3)), dt=0.01
            )

    def test_orthonormality_over_long_run(self):
        rng = np.random.default_rng(3)
        nav = NavState.level()
        worst = 0.0
        for _ in range(100_000):
            imu = ImuSample(
                f_b=rng.uniform(-20.0, 20.0, 3), w_b=rng.uniform(-1.0, 1.0, 3)
            )
            nav = mechanize_step(nav, imu, dt=0.01)
            defect = np.max(np.abs(nav.c_bn @ nav.c_bn.T - np.eye(3)))
            worst = max(worst, defect)
        assert worst < 1e-8


class TestApplyErrorCorrection:
    def test_zero_correction_is_identity(self):
        nav = NavState(
            c_bn=dcm_from_euler(1.0, 0.2, -0.4), v_n=np.array([2.0, 0.0, -0.1]),
            b_a_hat=np.array([0.01, 0.0, 0.0]), b_g_hat=np.array([0.0, 1e-5, 0.0]),
        )
        out = apply_error_correction(nav, np.zeros(12))
        np.testing.assert_array_equal(out.v_n, nav.v_n)
        np.testing.assert_array_equal(out.c_bn, nav.c_bn)
        np.testing.assert_array_equal(out.b_a_hat, nav.b_a_hat)
        np.testing.assert_array_equal(out.b_g_hat, nav.b_g_hat)

    def test_velocity_error_is_subtracted(self):
        nav = NavState.level(v_n=(2.0, 1.0, 0.0))
        err = np.zeros(12)
        err[0:3] = [0.1, 0.0, 0.0]
        out = apply_error_correction(nav, err)
        np.testing.assert_allclose(out.v_n, [1.9, 1.0, 0.0])

    def test_misalignment_rotates_toward_truth(self):
        # convention: the misalignment state is the rotation taking the
        # current attitude to the true attitude, so the correction applies
        # it directly (positive yaw error -> positive yaw move)
        nav = NavState.level()
        err = np.zeros(12)
        err[3:6] = [0.0, 0.0, 1e-3]
        out = apply_error_correction(nav, err)
        yaw, pitch, roll = euler_from_dcm(out.c_bn)
        assert yaw == pytest.approx(1e-3, abs=1e-9)
        assert pitch == pytest.approx(0.0, abs=1e-9)

    def test_bias_increments(self):
        nav = NavState.level()
        err = np.zeros(12)
        err[6:9] = [0.01, -0.02, 0.03]
        err[9:12] = [1e-5, 2e-5, -3e-5]
        out = apply_error_correction(nav, err)
        np.testing.assert_allclose(out.b_a_hat, [0.01, -0.02, 0.03])
        np.testing.assert_allclose(out.b_g_hat, [1e-5, 2e-5, -3e-5])

    def test_corrupt_then_correct_round_trip(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            nav = NavState(
                c_bn=dcm_from_euler(*rng.uniform(-1, 1, 3) * 0.5),
                v_n=rng.normal(0, 2, 3),
                b_a_hat=rng.normal(0, 0.1, 3),
                b_g_hat=rng.normal(0, 1e-4, 3),
            )
            err = np.concatenate([
                rng.normal(0, 0.1, 3),
                rng.normal(0, 1.0, 3) * 1e-3 / np.sqrt(3),
                rng.normal(0, 0.05, 3),
                rng.normal(0, 1e-5, 3),
            ])
            corrupted = NavState(
                c_bn=rodrigues(-err[3:6]) @ nav.c_bn,
                v_n=nav.v_n + err[0:3],
                b_a_hat=nav.b_a_hat - err[6:9],
                b_g_hat=nav.b_g_hat - err[9:12],
                t=nav.t,
            )
            restored = apply_error_correction(corrupted, err)
            np.testing.assert_allclose(restored.v_n, nav.v_n, atol=1e-6)
            np.testing.assert_allclose(restored.c_bn, nav.c_bn, atol=1e-6)
            np.testing.assert_allclose(restored.b_a_hat, nav.b_a_hat, atol=1e-6)

    def test_large_misalignment_rejected(self):
        nav = NavState.level()
        err = np.zeros(12)
        err[3:6] = [0.6, 0.0, 0.0]
        with pytest.raises(ImplausibleCorrectionError):
            apply_error_correction(nav, err)

    def test_nonfinite_rejected(self):
        nav = NavState.level()
        err = np.zeros(12)
        err[0] = np.inf
        with pytest.raises(ValueError):
            apply_error_correction(nav, err)
