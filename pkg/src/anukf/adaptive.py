"""Assembly, validation and mapping of the regressed process noise.

The network outputs per-axis variance estimates for the accelerometers and
gyroscopes. These are scaled by the integration interval into driving-noise
terms, duplicated into the velocity/orientation uncertainty slots, clamped
into physically plausible per-block ranges, and mapped through the noise
distribution matrix into the 12x12 process noise fed to either filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BLOCK_NAMES = ("q_v", "q_psi", "q_a", "q_g")


@dataclass(frozen=True)
class QNetDiag:
    """Structured diagonal of the regressed process-noise matrix.

    Invariant: ``q_v = q_a * tau_a`` and ``q_psi = q_g * tau_g`` element
    by element; the diagonal block order is [q_v, q_psi, q_a, q_g].
    """

    q_a: np.ndarray
    q_g: np.ndarray
    q_v: np.ndarray
    q_psi: np.ndarray
    tau: float
    tau_a: float
    tau_g: float

    def diagonal(self) -> np.ndarray:
        return np.concatenate([self.q_v, self.q_psi, self.q_a, self.q_g])

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.diagonal())


def assemble_qnet(
    acc_out: np.ndarray,
    gyro_out: np.ndarray,
    tau: float,
    tau_a: float,
    tau_g: float,
) -> QNetDiag:
    """Build the structured noise diagonal from raw network outputs.

    ``tau`` is the integration (IMU sampling) interval; ``tau_a`` and
    ``tau_g`` scale the accelerometer and gyroscope terms into the
    velocity and orientation uncertainty slots. No validation happens
    here; clamping is a separate stage.
    """
    acc_out = np.asarray(acc_out, dtype=float)
    gyro_out = np.asarray(gyro_out, dtype=float)
    if acc_out.shape != (3,) or gyro_out.shape != (3,):
        raise ValueError("network outputs must be 3-vectors")
    q_a = acc_out * tau
    q_g = gyro_out * tau
    return QNetDiag(
        q_a=q_a, q_g=q_g, q_v=q_a * tau_a, q_psi=q_g * tau_g,
        tau=tau, tau_a=tau_a, tau_g=tau_g,
    )


@dataclass(frozen=True)
class ClampBounds:
    """Per-block [min, max] bounds plus fallback defaults.

    ``defaults`` replaces non-finite entries before clamping; it holds one
    value per block in [q_v, q_psi, q_a, q_g] order (typically derived
    from the static noise specification).
    """

    minimums: dict = field(default_factory=dict)
    maximums: dict = field(default_factory=dict)
    defaults: dict = field(default_factory=dict)
    default_min: float = 1e-12
    default_max: float = 1e2

    def bounds_for(self, block: str) -> tuple[float, float, float]:
        lo = float(self.minimums.get(block, self.default_min))
        hi = float(self.maximums.get(block, self.default_max))
        if not 0.0 < lo < hi:
            raise ValueError(f"invalid clamp bounds for {block}: [{lo}, {hi}]")
        return lo, hi, float(self.defaults.get(block, lo))


@dataclass
class ClampReport:
    """Counts of clamp and non-finite-replacement events."""

    clamped: int = 0
    replaced: int = 0


def validate_clamp(
    qnet: QNetDiag | np.ndarray, bounds: ClampBounds
) -> tuple[np.ndarray, ClampReport]:
    """Clamp each diagonal entry into its block's valid range.

    Non-finite entries are replaced by the block default before clamping.
    Returns the clamped 12-vector diagonal and an event report; the output
    is strictly positive.
    """
    if isinstance(qnet, QNetDiag):
        diag = qnet.diagonal().copy()
    else:
        diag = np.asarray(qnet, dtype=float)
        if diag.ndim == 2:
            diag = np.diag(diag).copy()
        else:
            diag = diag.copy()
    if diag.shape != (12,):
        raise ValueError(f"expected a 12-entry diagonal, got shape {diag.shape}")
    report = ClampReport()
    for b_idx, block in enumerate(BLOCK_NAMES):
        lo, hi, default = bounds.bounds_for(block)
        sl = slice(3 * b_idx, 3 * b_idx + 3)
        seg = diag[sl]
        bad = ~np.isfinite(seg)
        if np.any(bad):
            seg[bad] = default
            report.replaced += int(np.count_nonzero(bad))
        out_of_range = (seg < lo) | (seg > hi)
        report.clamped += int(np.count_nonzero(out_of_range))
        diag[sl] = np.clip(seg, lo, hi)
    return diag, report


def adapt_q(g: np.ndarray, qnet_validated: np.ndarray) -> np.ndarray:
    """Map the validated diagonal through the noise distribution matrix.

    Returns G Qnet G^T, the adaptive process noise handed to the filter's
    time update in place of the static Q.
    """
    diag = np.asarray(qnet_validated, dtype=float)
    if diag.ndim == 2:
        diag = np.diag(diag)
    q = (g * diag) @ g.T
    return 0.5 * (q + q.T)
