"""Scaled unscented-transform Kalman filter over caller-supplied mappings.

The functions here are generic: the state dimension, process mapping ``f``
and measurement mapping ``h`` are whatever the caller provides. All
covariance outputs are symmetrized before return to suppress floating-point
drift over long runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    FilterConditioningError,
    NotPositiveDefiniteError,
    PropagationDivergenceError,
    SingularInnovationError,
)

#: Covariance weight forms for the center sigma point. ``"as-printed"``
#: uses lambda/(n+lambda) + (1 + alpha^2 + beta); ``"canonical"`` uses the
#: common literature variant with (1 - alpha^2 + beta).
WC0_FORMS = ("as-printed", "canonical")


@dataclass(frozen=True)
class UtParams:
    """Scaled unscented transform parameters.

    Parameters
    ----------
    n : int
        State dimension.
    alpha : float
        Spread of the sigma points around the mean; must be positive.
    beta : float
        Prior-distribution knowledge parameter (2 for Gaussian priors).
    kappa : float
        Secondary scaling parameter (usually 0).
    wc0_form : str
        Which center covariance-weight form to use, see :data:`WC0_FORMS`.
    """

    n: int
    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0
    wc0_form: str = "as-printed"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"state dimension must be >= 1, got {self.n}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.wc0_form not in WC0_FORMS:
            raise ValueError(f"wc0_form must be one of {WC0_FORMS}")
        if self.n + self.lam == 0.0:
            raise ValueError("n + lambda must be nonzero")

    @property
    def lam(self) -> float:
        """Derived scaling parameter lambda = alpha^2 (n + kappa) - n."""
        return self.alpha**2 * (self.n + self.kappa) - self.n


@dataclass(frozen=True)
class UtWeights:
    """Mean and covariance weights for 2n+1 sigma points."""

    wm: np.ndarray
    wc: np.ndarray


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance matrix of a Gaussian state estimate."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        n = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (n, n):
            raise ValueError(f"inconsistent shapes: mean {mean.shape}, cov {cov.shape}")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValueError("state contains non-finite values")
        scale = max(float(np.max(np.abs(cov))), 1.0)
        if float(np.max(np.abs(cov - cov.T))) > 1e-10 * scale:
            raise ValueError("covariance is not symmetric")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class SigmaPointSet:
    """2n+1 state vectors sampled from a Gaussian by the scaled UT."""

    points: np.ndarray  # (2n+1, n)
    params: UtParams = field(repr=False)


def cholesky_lower(mat: np.ndarray) -> np.ndarray:
    """Lower-triangular Cholesky factor, reporting the failing pivot.

    Raises
    ------
    NotPositiveDefiniteError
        If factorization fails; ``pivot`` is the 0-based index of the first
        non-positive-definite leading minor.
    """
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        for k in range(1, mat.shape[0] + 1):
            try:
                np.linalg.cholesky(mat[:k, :k])
            except np.linalg.LinAlgError:
                raise NotPositiveDefiniteError(pivot=k - 1) from None
        raise NotPositiveDefiniteError(pivot=mat.shape[0] - 1) from None


def compute_weights(params: UtParams) -> UtWeights:
    """Mean and covariance weights of the scaled unscented transform.

    ``wm[0] = lambda / (n + lambda)`` and all non-center weights equal
    ``1 / (2 (n + lambda))``; the center covariance weight adds the
    configured alpha/beta term.
    """
    n, lam = params.n, params.lam
    denom = n + lam
    if denom == 0.0:
        raise ValueError("n + lambda must be nonzero")
    wm = np.full(2 * n + 1, 1.0 / (2.0 * denom))
    wc = wm.copy()
    wm[0] = lam / denom
    if params.wc0_form == "as-printed":
        wc[0] = lam / denom + (1.0 + params.alpha**2 + params.beta)
    else:
        wc[0] = lam / denom + (1.0 - params.alpha**2 + params.beta)
    return UtWeights(wm=wm, wc=wc)


def generate_sigma_points(state: GaussianState, params: UtParams) -> SigmaPointSet:
    """Sample 2n+1 sigma points around ``state.mean``.

    Point 0 sits at the mean; points i and i+n add and subtract column i of
    the lower Cholesky factor of (n + lambda) P, so the set is symmetric
    about the mean.
    """
    n = params.n
    if state.dim != n:
        raise ValueError(f"state dimension {state.dim} does not match params.n {n}")
    scaled = (n + params.lam) * state.cov
    l_factor = cholesky_lower(scaled)
    points = np.empty((2 * n + 1, n))
    points[0] = state.mean
    points[1 : n + 1] = state.mean + l_factor.T
    points[n + 1 :] = state.mean - l_factor.T
    return SigmaPointSet(points=points, params=params)


def _reconstruct(points: np.ndarray, weights: UtWeights) -> tuple[np.ndarray, np.ndarray]:
    mean = weights.wm @ points
    delta = points - mean
    cov = (delta.T * weights.wc) @ delta
    return mean, cov


def time_update(
    points: SigmaPointSet,
    f: Callable[[np.ndarray], np.ndarray],
    weights: UtWeights,
    q: np.ndarray,
) -> GaussianState:
    """Propagate sigma points through ``f`` and add process noise ``q``.

    Returns the predicted Gaussian state; the covariance is symmetrized.

    Raises
    ------
    PropagationDivergenceError
        If any propagated point contains non-finite values.
    """
    propagated = np.empty_like(points.points)
    for i, pt in enumerate(points.points):
        out = np.asarray(f(pt), dtype=float)
        if not np.all(np.isfinite(out)):
            raise PropagationDivergenceError(point_index=i)
        propagated[i] = out
    mean, cov = _reconstruct(propagated, weights)
    cov = cov + q
    cov = 0.5 * (cov + cov.T)
    return GaussianState(mean=mean, cov=cov)


def measurement_update(
    pred: GaussianState,
    h: Callable[[np.ndarray], np.ndarray],
    weights: UtWeights,
    r: np.ndarray,
    z: np.ndarray,
    params: UtParams,
) -> GaussianState:
    """Condition a predicted state on an observation ``z``.

    Sigma points are regenerated from the prediction, mapped through ``h``,
    and combined into the innovation covariance S (with additive ``r``),
    the state/measurement cross covariance, and the Kalman gain. The
    posterior covariance P - K S K^T is symmetrized.

    Raises
    ------
    SingularInnovationError
        If S cannot be inverted.
    FilterConditioningError
        If the posterior covariance is no longer positive definite.
    """
    z = np.asarray(z, dtype=float)
    sigma = generate_sigma_points(pred, params)
    mapped = np.array([np.asarray(h(pt), dtype=float) for pt in sigma.points])
    z_hat = weights.wm @ mapped
    dz = mapped - z_hat
    dx = sigma.points - pred.mean
    s = (dz.T * weights.wc) @ dz + r
    p_xz = (dx.T * weights.wc) @ dz
    try:
        gain = np.linalg.solve(s.T, p_xz.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError("innovation covariance is singular") from exc
    mean = pred.mean + gain @ (z - z_hat)
    cov = pred.cov - gain @ s @ gain.T
    cov = 0.5 * (cov + cov.T)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        min_eig = float(np.min(np.linalg.eigvalsh(cov)))
        raise FilterConditioningError(min_eigenvalue=min_eig) from None
    return GaussianState(mean=mean, cov=cov)
