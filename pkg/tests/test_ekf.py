import numpy as np
import pytest

from anukf.ekf import EkfSession, ekf_predict, ekf_update
from anukf.errors import SingularInnovationError
from anukf.ukf import (
    GaussianState,
    UtParams,
    compute_weights,
    generate_sigma_points,
    measurement_update,
    time_update,
)

from linear_kf import random_spd


def session_from(rng, n=12):
    return EkfSession(
        state=GaussianState(mean=rng.normal(size=n), cov=random_spd(rng, n))
    )


class TestPredict:
    def test_identity_no_noise(self):
        rng = np.random.default_rng(0)
        s = session_from(rng)
        out = ekf_predict(s, np.eye(12), np.zeros((12, 12)))
        np.testing.assert_allclose(out.state.mean, s.state.mean)
        np.testing.assert_allclose(out.state.cov, s.state.cov)

    def test_additive_diagonal(self):
        rng = np.random.default_rng(1)
        s = EkfSession(state=GaussianState(mean=np.zeros(12), cov=random_spd(rng, 12)))
        d = np.linspace(0.1, 1.2, 12)
        out = ekf_predict(s, np.eye(12), np.diag(d))
        np.testing.assert_allclose(out.state.cov, s.state.cov + np.diag(d))

    def test_matches_unscented_propagation(self):
        rng = np.random.default_rng(2)
        n = 12
        params = UtParams(n=n, alpha=1.0)
        weights = compute_weights(params)
        phi = rng.normal(0.0, 0.3, (n, n)) + np.eye(n)
        q = random_spd(rng, n, scale=0.01)
        ekf = session_from(rng, n)
        ukf_state = ekf.state
        for _ in range(100):
            ekf = ekf_predict(ekf, phi, q)
            pts = generate_sigma_points(ukf_state, params)
            ukf_state = time_update(pts, lambda x: phi @ x, weights, q)
            scale = max(1.0, np.max(np.abs(ekf.state.cov)))
            assert np.max(np.abs(ekf.state.mean - ukf_state.mean)) <= 1e-7 * scale
            assert np.max(np.abs(ekf.state.cov - ukf_state.cov)) <= 1e-7 * scale
            # keep magnitudes bounded over the trajectory
            if np.max(np.abs(ekf.state.cov)) > 1e6:
                break


class TestUpdate:
    def test_zero_innovation_keeps_mean(self):
        rng = np.random.default_rng(3)
        s = session_from(rng)
        h = rng.normal(size=(3, 12))
        z = h @ s.state.mean
        out = ekf_update(s, h, np.eye(3) * 0.01, z)
        np.testing.assert_allclose(out.state.mean, s.state.mean, atol=1e-12)

    def test_huge_noise_kills_gain(self):
        rng = np.random.default_rng(4)
        s = session_from(rng)
        h = np.zeros((1, 12))
        h[0, 0] = 1.0
        out = ekf_update(s, h, np.eye(1) * 1e15, np.array([100.0]))
        np.testing.assert_allclose(out.state.mean, s.state.mean, atol=1e-9)

    def test_matches_unscented_update_near_linearity(self):
        rng = np.random.default_rng(5)
        n = 12
        params = UtParams(n=n, alpha=1.0)
        weights = compute_weights(params)
        for _ in range(10):
            cov = random_spd(rng, n, scale=1e-4)
            mean = rng.normal(0.0, 0.01, n)
            h_mat = rng.normal(size=(3, n))
            r = np.eye(3) * 0.02**2
            z = rng.normal(0.0, 0.05, 3)

            def h_soft(x):
                # mildly nonlinear measurement to exercise both paths
                return h_mat @ x + 0.05 * np.array(
                    [x[0] * x[1], x[2] * x[3], x[4] * x[5]]
                )

            jac = h_mat.copy()
            jac[0, 0] += 0.05 * mean[1]
            jac[0, 1] += 0.05 * mean[0]
            jac[1, 2] += 0.05 * mean[3]
            jac[1, 3] += 0.05 * mean[2]
            jac[2, 4] += 0.05 * mean[5]
            jac[2, 5] += 0.05 * mean[4]

            ekf = ekf_update(
                EkfSession(state=GaussianState(mean=mean, cov=cov)), jac, r,
                z - (h_soft(mean) - jac @ mean),
            )
            ukf = measurement_update(
                GaussianState(mean=mean, cov=cov),
                lambda x: h_soft(x) - h_soft(mean) + jac @ mean,
                weights, r, z, params,
            )
            np.testing.assert_allclose(ekf.state.mean, ukf.mean, atol=1e-4)

    def test_joseph_form_keeps_symmetry_and_pd(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            s = session_from(rng)
            h = rng.normal(size=(3, 12))
            r = random_spd(rng, 3, scale=0.1)
            out = ekf_update(s, h, r, rng.normal(size=3))
            cov = out.state.cov
            assert np.max(np.abs(cov - cov.T)) == 0.0
            np.linalg.cholesky(cov)

    def test_singular_innovation_raises(self):
        s = EkfSession(state=GaussianState(mean=np.zeros(12), cov=np.eye(12)))
        with pytest.raises(SingularInnovationError):
            ekf_update(s, np.zeros((3, 12)), np.zeros((3, 3)), np.zeros(3))
