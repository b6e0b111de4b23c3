import numpy as np
import pytest
from scipy.linalg import expm

from anukf.geometry import dcm_from_euler, rodrigues, skew
from anukf.model import (
    ErrorState,
    NoiseSpec,
    build_f_matrix,
    build_g_matrix,
    build_q_discrete,
    discretize,
    dvl_innovation,
    dvl_jacobian,
    dvl_measurement_map,
    qstar_diagonal,
)
from anukf.strapdown import NavState


def random_nav(rng, speed=2.0):
    return NavState(
        c_bn=dcm_from_euler(*rng.uniform(-np.pi, np.pi, 3) * [1.0, 0.45, 0.45]),
        v_n=rng.normal(0.0, speed, 3),
        b_a_hat=np.zeros(3),
        b_g_hat=np.zeros(3),
    )


class TestErrorState:
    def test_round_trip_layout(self):
        x = np.arange(12.0)
        es = ErrorState.from_vector(x)
        np.testing.assert_array_equal(es.dv_n, [0, 1, 2])
        np.testing.assert_array_equal(es.dpsi_n, [3, 4, 5])
        np.testing.assert_array_equal(es.ba, [6, 7, 8])
        np.testing.assert_array_equal(es.bg, [9, 10, 11])
        np.testing.assert_array_equal(es.as_vector(), x)


class TestNoiseSpec:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            NoiseSpec(sigma_a=0.0, sigma_g=1e-6, sigma_ab=1e-3, sigma_gb=1e-7)


class TestFMatrix:
    def test_zero_force_identity_attitude(self):
        f = build_f_matrix(NavState.level(), np.zeros(3))
        np.testing.assert_array_equal(f[0:3, 3:6], np.zeros((3, 3)))
        np.testing.assert_array_equal(f[0:3, 6:9], np.eye(3))
        np.testing.assert_array_equal(f[3:6, 9:12], -np.eye(3))

    def test_gravity_reaction_coupling(self):
        f = build_f_matrix(NavState.level(), np.array([0.0, 0.0, -9.79]))
        block = f[0:3, 3:6]
        # skew of (0, 0, -9.79): magnitude 9.79 at the (0,1)/(1,0) corners
        assert block[0, 1] == pytest.approx(9.79)
        assert block[1, 0] == pytest.approx(-9.79)
        assert np.count_nonzero(block) == 2

    def test_bias_rows_are_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            f = build_f_matrix(random_nav(rng), rng.normal(0, 10, 3))
            np.testing.assert_array_equal(f[6:12, :], np.zeros((6, 12)))

    def test_sparsity_pattern(self):
        rng = np.random.default_rng(1)
        mask = np.zeros((12, 12), dtype=bool)
        mask[0:3, 3:6] = True
        mask[0:3, 6:9] = True
        mask[3:6, 9:12] = True
        for _ in range(10):
            f = build_f_matrix(random_nav(rng), rng.normal(0, 10, 3))
            np.testing.assert_array_equal(f[~mask], 0.0)


class TestGMatrix:
    def test_identity_attitude(self):
        np.testing.assert_array_equal(build_g_matrix(NavState.level()), np.eye(12))

    def test_yawed_attitude_blocks(self):
        c = dcm_from_euler(np.pi / 2, 0.0, 0.0)
        nav = NavState(c_bn=c, v_n=np.zeros(3), b_a_hat=np.zeros(3), b_g_hat=np.zeros(3))
        g = build_g_matrix(nav)
        np.testing.assert_allclose(g[0:3, 0:3], c, atol=1e-15)
        np.testing.assert_allclose(g[3:6, 3:6], c, atol=1e-15)
        np.testing.assert_array_equal(g[6:9, 6:9], np.eye(3))

    def test_ggt_has_identity_blocks(self):
        rng = np.random.default_rng(2)
        g = build_g_matrix(random_nav(rng))
        ggt = g @ g.T
        for i in range(0, 12, 3):
            np.testing.assert_allclose(ggt[i : i + 3, i : i + 3], np.eye(3), atol=1e-14)


class TestDiscretize:
    def test_zero_dynamics(self):
        np.testing.assert_array_equal(discretize(np.zeros((12, 12)), 0.5), np.eye(12))

    def test_matches_exact_exponential_on_model_f(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            f = build_f_matrix(random_nav(rng), rng.normal(0, 10, 3))
            phi = discretize(f, 1.0)
            np.testing.assert_allclose(phi, expm(f), atol=1e-12, rtol=0)

    def test_model_f_is_nilpotent(self):
        rng = np.random.default_rng(4)
        f = build_f_matrix(random_nav(rng), rng.normal(0, 10, 3))
        np.testing.assert_allclose(f @ f @ f, np.zeros((12, 12)), atol=1e-12)

    def test_small_dt_series_bound(self):
        rng = np.random.default_rng(5)
        f = build_f_matrix(random_nav(rng), rng.normal(0, 10, 3))
        for dt in (1e-4, 1e-3, 1e-2):
            phi = discretize(f, dt)
            norm_f = np.linalg.norm(f, 2)
            assert np.linalg.norm(phi - np.eye(12), 2) <= norm_f * dt + norm_f**2 * dt**2

    @pytest.mark.parametrize("dt", [0.0, -0.1, 1.5])
    def test_rejects_bad_dt(self, dt):
        with pytest.raises(ValueError):
            discretize(np.zeros((12, 12)), dt)


class TestQDiscrete:
    def test_identity_distribution(self):
        qstar = np.arange(1.0, 13.0)
        np.testing.assert_array_equal(
            build_q_discrete(np.eye(12), qstar), np.diag(qstar)
        )

    def test_isotropic_blocks_invariant(self):
        rng = np.random.default_rng(6)
        g = build_g_matrix(random_nav(rng))
        qstar = np.concatenate([np.full(3, 0.7), np.full(3, 0.2),
                                np.full(3, 0.05), np.full(3, 0.01)])
        q = build_q_discrete(g, qstar)
        np.testing.assert_allclose(q, np.diag(qstar), atol=1e-14)

    def test_anisotropic_rotated_block(self):
        c = dcm_from_euler(np.pi / 2, 0.0, 0.0)
        nav = NavState(c_bn=c, v_n=np.zeros(3), b_a_hat=np.zeros(3), b_g_hat=np.zeros(3))
        g = build_g_matrix(nav)
        qstar = np.concatenate([np.array([1.0, 2.0, 3.0]), np.zeros(9)])
        q = build_q_discrete(g, qstar)
        np.testing.assert_allclose(
            q[0:3, 0:3], c @ np.diag([1.0, 2.0, 3.0]) @ c.T, atol=1e-14
        )

    def test_rejects_negative_diagonal(self):
        with pytest.raises(ValueError):
            build_q_discrete(np.eye(12), -np.ones(12))

    def test_psd_for_random_attitudes(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            g = build_g_matrix(random_nav(rng))
            qstar = rng.uniform(0.0, 1.0, 12)
            q = build_q_discrete(g, qstar)
            assert np.min(np.linalg.eigvalsh(q)) >= -1e-12


class TestQstarDiagonal:
    def test_structure_and_scaling(self):
        noise = NoiseSpec(sigma_a=0.03, sigma_g=7.3e-6, sigma_ab=3e-3, sigma_gb=7.3e-7)
        diag = qstar_diagonal(noise, tau=0.01, tau_prop=1.0)
        np.testing.assert_allclose(diag[0:3], 0.03**2 * 0.01)
        np.testing.assert_allclose(diag[3:6], (7.3e-6) ** 2 * 0.01)
        np.testing.assert_allclose(diag[6:9], (3e-3) ** 2 * 1.0)
        np.testing.assert_allclose(diag[9:12], (7.3e-7) ** 2 * 1.0)


class TestDvlMeasurementMap:
    def test_zero_error_maps_to_zero(self):
        rng = np.random.default_rng(8)
        nav = random_nav(rng)
        np.testing.assert_array_equal(dvl_measurement_map(np.zeros(12), nav), np.zeros(3))

    def test_pure_velocity_error(self):
        rng = np.random.default_rng(9)
        nav = random_nav(rng)
        err = np.zeros(12)
        err[0:3] = [0.3, -0.1, 0.05]
        np.testing.assert_allclose(
            dvl_measurement_map(err, nav), nav.c_bn.T @ err[0:3], atol=1e-14
        )

    def test_small_misalignment_first_order(self):
        nav = NavState.level(v_n=(2.0, 0.0, 0.0))
        err = np.zeros(12)
        err[3:6] = [0.0, 0.0, 1e-4]
        out = dvl_measurement_map(err, nav)
        # exact rotation of (2,0,0) by 1e-4 rad about z, minus (2,0,0):
        # the first-order value (0, 2e-4, 0) is exact on y to within 1e-9,
        # while x carries the second-order term 2(cos(1e-4)-1) = -1e-8
        exact = np.array([2.0 * (np.cos(1e-4) - 1.0), 2.0 * np.sin(1e-4), 0.0])
        np.testing.assert_allclose(out, exact, atol=1e-12)
        assert out[1] == pytest.approx(2e-4, abs=1e-9)

    def test_jacobian_matches_central_differences(self):
        rng = np.random.default_rng(10)
        eps = 1e-3
        for _ in range(10):
            nav = random_nav(rng)
            h = dvl_jacobian(nav)
            fd = np.zeros((3, 12))
            for j in range(12):
                step = np.zeros(12)
                step[j] = eps
                fd[:, j] = (
                    dvl_measurement_map(step, nav) - dvl_measurement_map(-step, nav)
                ) / (2 * eps)
            scale = max(1.0, float(np.max(np.abs(h))))
            assert np.max(np.abs(fd - h)) <= 1e-6 * scale

    def test_jacobian_blocks(self):
        rng = np.random.default_rng(11)
        nav = random_nav(rng)
        h = dvl_jacobian(nav)
        np.testing.assert_allclose(h[:, 0:3], nav.c_bn.T, atol=1e-15)
        np.testing.assert_allclose(h[:, 3:6], -nav.c_bn.T @ skew(nav.v_n), atol=1e-15)
        np.testing.assert_array_equal(h[:, 6:12], np.zeros((3, 6)))


class TestDvlInnovation:
    def test_perfect_ins_zero_innovation(self):
        rng = np.random.default_rng(12)
        nav = random_nav(rng)
        z = dvl_innovation(nav, nav.c_bn.T @ nav.v_n)
        np.testing.assert_allclose(z, np.zeros(3), atol=1e-15)

    def test_innovation_predicted_by_map(self):
        # solution overestimates truth; the mapping evaluated at the true
        # error state must reproduce the innovation to first order
        rng = np.random.default_rng(13)
        for _ in range(10):
            nav_true = random_nav(rng)
            dv = rng.normal(0.0, 0.1, 3)
            dpsi = rng.normal(0.0, 1e-3, 3)
            nav_est = NavState(
                c_bn=rodrigues(-dpsi) @ nav_true.c_bn,
                v_n=nav_true.v_n + dv,
                b_a_hat=np.zeros(3), b_g_hat=np.zeros(3),
            )
            err_true = np.zeros(12)
            err_true[0:3] = dv
            err_true[3:6] = dpsi
            z = dvl_innovation(nav_est, nav_true.c_bn.T @ nav_true.v_n)
            predicted = dvl_measurement_map(err_true, nav_est)
            np.testing.assert_allclose(predicted, z, atol=2e-3 * max(1, np.max(np.abs(z))))

    def test_noise_statistics(self):
        rng = np.random.default_rng(14)
        nav = random_nav(rng)
        v_b = nav.c_bn.T @ nav.v_n
        draws = np.array([
            dvl_innovation(nav, v_b + rng.normal(0.0, 0.02, 3)) for _ in range(10_000)
        ])
        np.testing.assert_allclose(draws.mean(axis=0), np.zeros(3), atol=0.001)
        np.testing.assert_allclose(draws.std(axis=0), 0.02, rtol=0.05)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            dvl_innovation(NavState.level(), np.array([np.inf, 0.0, 0.0]))
