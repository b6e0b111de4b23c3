"""Error-state extended Kalman filter baseline.

Shares the 12-state model and the adaptive process-noise pipeline with the
unscented filter so that comparisons isolate the filtering algorithm, not
the system model. The covariance update uses the Joseph form for numerical
robustness over long Monte Carlo runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FilterConditioningError, SingularInnovationError
from .ukf import GaussianState


@dataclass(frozen=True)
class EkfSession:
    """Single-owner filter state; the mean is zeroed after each closed-loop
    correction by the caller."""

    state: GaussianState


def ekf_predict(session: EkfSession, phi: np.ndarray, q: np.ndarray) -> EkfSession:
    """Propagate mean and covariance: x <- Phi x, P <- Phi P Phi^T + Q."""
    mean = phi @ session.state.mean
    cov = phi @ session.state.cov @ phi.T + q
    cov = 0.5 * (cov + cov.T)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        min_eig = float(np.min(np.linalg.eigvalsh(cov)))
        raise FilterConditioningError(min_eigenvalue=min_eig) from None
    return EkfSession(state=GaussianState(mean=mean, cov=cov))


def ekf_update(
    session: EkfSession, h_jac: np.ndarray, r: np.ndarray, z: np.ndarray
) -> EkfSession:
    """Condition on an observation with measurement Jacobian ``h_jac``.

    Joseph-form covariance update: P <- (I-KH) P (I-KH)^T + K R K^T.

    Raises
    ------
    SingularInnovationError
        If the innovation covariance cannot be inverted.
    """
    mean, cov = session.state.mean, session.state.cov
    s = h_jac @ cov @ h_jac.T + r
    try:
        gain = np.linalg.solve(s.T, h_jac @ cov).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError("innovation covariance is singular") from exc
    innovation = np.asarray(z, dtype=float) - h_jac @ mean
    mean = mean + gain @ innovation
    ikh = np.eye(cov.shape[0]) - gain @ h_jac
    cov = ikh @ cov @ ikh.T + gain @ r @ gain.T
    cov = 0.5 * (cov + cov.T)
    return EkfSession(state=GaussianState(mean=mean, cov=cov))
