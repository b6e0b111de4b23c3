"""Synthetic trajectory and sensor-stream generation, plus CSV interchange.

Truth tracks are planar constant-speed paths built from straight and
constant-rate turn segments, sampled at the IMU rate with a level attitude
whose yaw follows the turn profile. The ideal IMU stream is the exact
discrete inverse of the strapdown mechanization, so re-mechanizing it
reproduces the truth to rounding error.

Corruption adds per-sample white noise, initial biases with a slow random
walk, and a piecewise-constant factor schedule scaling the biases, along
with the per-window noise-variance labels used as regression targets.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import IngestError
from .geometry import dcm_from_euler, euler_from_dcm, rotvec_from_dcm
from .strapdown import GRAVITY_NED


@dataclass(frozen=True)
class Segment:
    """One trajectory piece: straight or constant-rate turn."""

    kind: str  # "straight" | "turn"
    duration: float  # s
    speed: float  # m/s
    rate_deg_s: float = 0.0  # yaw rate, turns only

    def __post_init__(self):
        if self.kind not in ("straight", "turn"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.duration <= 0.0 or self.speed < 0.0:
            raise ValueError("segment duration must be positive, speed nonnegative")


@dataclass(frozen=True)
class TrajectorySpec:
    """A named track: segments, sensor rates and a generation seed."""

    name: str
    duration: float
    segments: tuple[Segment, ...]
    imu_rate: float = 100.0
    dvl_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.duration <= 0.0 or self.imu_rate <= 0.0 or self.dvl_rate <= 0.0:
            raise ValueError("duration and rates must be positive")
        total = sum(s.duration for s in self.segments)
        if abs(total - self.duration) > 1e-9:
            raise ValueError(
                f"segments tile {total} s but duration is {self.duration} s"
            )
        if abs(self.imu_rate / self.dvl_rate - round(self.imu_rate / self.dvl_rate)) > 1e-9:
            raise ValueError("imu_rate must be an integer multiple of dvl_rate")


@dataclass(frozen=True)
class TruthStream:
    """Kinematically consistent truth plus ideal sensor streams.

    States are sampled at t = 0 .. duration (N+1 epochs); IMU samples
    cover the N intervals between them; ideal DVL body velocities are
    sampled at the DVL epochs (excluding t = 0).
    """

    t: np.ndarray  # (N+1,)
    c_bn: np.ndarray  # (N+1, 3, 3)
    v_n: np.ndarray  # (N+1, 3)
    imu_f: np.ndarray  # (N, 3)
    imu_w: np.ndarray  # (N, 3)
    dvl_t: np.ndarray  # (M,)
    dvl_v_b: np.ndarray  # (M, 3)
    imu_rate: float
    dvl_rate: float
    gravity_n: np.ndarray = field(default_factory=lambda: GRAVITY_NED.copy())


def generate_truth(spec: TrajectorySpec) -> TruthStream:
    """Sample the truth path and derive the exactly consistent sensors."""
    dt = 1.0 / spec.imu_rate
    counts = [round(seg.duration * spec.imu_rate) for seg in spec.segments]
    for seg, cnt in zip(spec.segments, counts):
        if abs(cnt - seg.duration * spec.imu_rate) > 1e-6:
            raise ValueError(
                f"segment duration {seg.duration} s is not a whole number of IMU steps"
            )
    n = sum(counts)

    yaw_rate = np.zeros(n)
    speed = np.zeros(n + 1)
    pos = 0
    for seg, cnt in zip(spec.segments, counts):
        if seg.kind == "turn":
            yaw_rate[pos : pos + cnt] = np.radians(seg.rate_deg_s)
        speed[pos : pos + cnt] = seg.speed
        pos += cnt
    speed[n] = spec.segments[-1].speed

    yaw = np.concatenate([[0.0], np.cumsum(yaw_rate) * dt])
    t = np.arange(n + 1) * dt
    v_n = np.stack([speed * np.cos(yaw), speed * np.sin(yaw), np.zeros(n + 1)], axis=1)
    c_bn = np.stack([dcm_from_euler(y, 0.0, 0.0) for y in yaw])

    # exact discrete inverse of the mechanization
    imu_w = np.empty((n, 3))
    imu_f = np.empty((n, 3))
    g = GRAVITY_NED
    for k in range(n):
        imu_w[k] = rotvec_from_dcm(c_bn[k].T @ c_bn[k + 1]) / dt
        imu_f[k] = c_bn[k].T @ ((v_n[k + 1] - v_n[k]) / dt - g)

    stride = round(spec.imu_rate / spec.dvl_rate)
    m = int(n // stride)
    dvl_idx = (np.arange(1, m + 1) * stride).astype(int)
    dvl_v_b = np.einsum("kij,ki->kj", c_bn[dvl_idx], v_n[dvl_idx])
    return TruthStream(
        t=t, c_bn=c_bn, v_n=v_n, imu_f=imu_f, imu_w=imu_w,
        dvl_t=t[dvl_idx], dvl_v_b=dvl_v_b,
        imu_rate=spec.imu_rate, dvl_rate=spec.dvl_rate,
    )


@dataclass(frozen=True)
class FactorSchedule:
    """Piecewise-constant bias scaling factors with change times."""

    times: np.ndarray  # ascending, times[0] == 0
    factors: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        factors = np.asarray(self.factors, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "factors", factors)
        if times.shape != factors.shape or times.ndim != 1 or times.size == 0:
            raise ValueError("times and factors must be equal-length 1-d arrays")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0.0):
            raise ValueError("times must start at 0 and increase")
        if np.any(factors < 1.0) or np.any(factors > 6.0):
            raise ValueError("factors must lie in [1, 6]")

    def at(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") - 1
        return self.factors[np.clip(idx, 0, self.factors.size - 1)]

    @classmethod
    def constant(cls, factor: float = 1.0) -> "FactorSchedule":
        return cls(times=np.array([0.0]), factors=np.array([factor]))

    @classmethod
    def random(
        cls,
        duration: float,
        rng: np.random.Generator,
        dwell: float = 30.0,
        lo: float = 1.0,
        hi: float = 6.0,
    ) -> "FactorSchedule":
        """Seeded schedule with one factor draw per dwell interval.

        The change grid carries a random phase offset so regime switches
        do not align with round-number event times (DVL outages, segment
        boundaries) across every run.
        """
        phase = max(rng.uniform(0.0, dwell), 1e-6 * dwell)
        times = np.concatenate([[0.0], np.arange(phase, duration, dwell)])
        factors = rng.uniform(lo, hi, size=times.size)
        return cls(times=times, factors=factors)


@dataclass(frozen=True)
class CorruptionSpec:
    """Injected error magnitudes for sensor corruption.

    Bias values are drawn once per run with the given standard deviations
    and evolve by a slow random walk. The piecewise-constant factor
    schedule (a seeded one is drawn per run when none is given) scales the
    whole injected inertial error, bias and white noise alike; the emitted
    labels track the white-noise variance in effect, which is exactly the
    driving-noise variance the process-noise assembly consumes.
    """

    accel_noise_std: float = 0.03  # m/s^2 per sample
    gyro_noise_std: float = 7.3e-6  # rad/s per sample
    accel_bias_std: float = 0.3  # m/s^2
    gyro_bias_std: float = 7.3e-5  # rad/s
    accel_bias_rw_std: float = 3e-3  # m/s^2 / sqrt(s)
    gyro_bias_rw_std: float = 7.3e-7  # rad/s / sqrt(s)
    dvl_noise_std: float = 0.02  # m/s per axis
    init_vel_err_std: tuple = (0.25, 0.25, 0.05)  # m/s, NED
    init_misalign_std_deg: float = 0.01  # deg per axis
    bias_factor_schedule: FactorSchedule | None = None
    factor_dwell_s: float = 30.0
    factor_min: float = 1.0
    factor_max: float = 6.0

    def __post_init__(self):
        for name in (
            "accel_noise_std", "gyro_noise_std", "accel_bias_std", "gyro_bias_std",
            "accel_bias_rw_std", "gyro_bias_rw_std", "dvl_noise_std",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        if not 1.0 <= self.factor_min <= self.factor_max <= 6.0:
            raise ValueError("factor range must lie within [1, 6]")


@dataclass(frozen=True)
class ImuData:
    t: np.ndarray
    f: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class DvlData:
    t: np.ndarray
    v_b: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class CorruptedRun:
    """Measured streams plus the bookkeeping needed for labels and truth."""

    imu: ImuData
    dvl: DvlData
    label_t: np.ndarray  # (L,) window end times
    labels_acc: np.ndarray  # (L, 3) variance targets, (m/s^2)^2
    labels_gyro: np.ndarray  # (L, 3) variance targets, (rad/s)^2
    bias_a: np.ndarray  # (N, 3) true accelerometer bias series
    bias_g: np.ndarray  # (N, 3)
    factors: np.ndarray  # (N,)
    init_vel_err: np.ndarray  # (3,) added to the true initial velocity
    init_misalign: np.ndarray  # (3,) rotvec applied to the true initial DCM
    schedule: FactorSchedule


def corrupt(truth: TruthStream, spec: CorruptionSpec, seed: int) -> CorruptedRun:
    """Corrupt a truth stream into measured sensor streams, deterministically.

    Independent substreams are derived from ``seed`` for each noise source,
    so the realization does not depend on evaluation order.
    """
    streams = np.random.SeedSequence(seed).spawn(9)
    rng_an, rng_gn, rng_b0, rng_rw, rng_fac, rng_dvl, rng_init, _, _ = [
        np.random.default_rng(s) for s in streams
    ]
    n = truth.imu_f.shape[0]
    dt = 1.0 / truth.imu_rate
    t_imu = truth.t[:n]

    schedule = spec.bias_factor_schedule
    if schedule is None:
        schedule = FactorSchedule.random(
            duration=float(truth.t[-1]), rng=rng_fac,
            dwell=spec.factor_dwell_s, lo=spec.factor_min, hi=spec.factor_max,
        )
    factors = schedule.at(t_imu)

    b0_a = rng_b0.normal(0.0, spec.accel_bias_std, 3)
    b0_g = rng_b0.normal(0.0, spec.gyro_bias_std, 3)
    rw_a = np.cumsum(rng_rw.normal(0.0, spec.accel_bias_rw_std, (n, 3)), axis=0) * np.sqrt(dt)
    rw_g = np.cumsum(rng_rw.normal(0.0, spec.gyro_bias_rw_std, (n, 3)), axis=0) * np.sqrt(dt)
    bias_a = factors[:, None] * (b0_a + rw_a)
    bias_g = factors[:, None] * (b0_g + rw_g)

    noise_a = factors[:, None] * rng_an.normal(0.0, spec.accel_noise_std, (n, 3))
    noise_g = factors[:, None] * rng_gn.normal(0.0, spec.gyro_noise_std, (n, 3))
    f_meas = truth.imu_f + bias_a + noise_a
    w_meas = truth.imu_w + bias_g + noise_g

    dvl_v = truth.dvl_v_b + rng_dvl.normal(0.0, spec.dvl_noise_std, truth.dvl_v_b.shape)
    dvl = DvlData(
        t=truth.dvl_t.copy(), v_b=dvl_v, valid=np.ones(truth.dvl_t.shape[0], dtype=bool)
    )

    init_vel = rng_init.normal(0.0, 1.0, 3) * np.asarray(spec.init_vel_err_std)
    init_mis = rng_init.normal(0.0, np.radians(spec.init_misalign_std_deg), 3)

    # per-window labels: white-noise variance in effect under the schedule
    win = round(truth.imu_rate)
    n_windows = n // win
    var_acc = factors**2 * spec.accel_noise_std**2
    var_gyro = factors**2 * spec.gyro_noise_std**2
    labels_acc = var_acc[: n_windows * win].reshape(n_windows, win).mean(axis=1)
    labels_gyro = var_gyro[: n_windows * win].reshape(n_windows, win).mean(axis=1)
    label_t = truth.t[(np.arange(1, n_windows + 1) * win).astype(int)]

    return CorruptedRun(
        imu=ImuData(t=t_imu.copy(), f=f_meas, w=w_meas),
        dvl=dvl,
        label_t=label_t,
        labels_acc=np.repeat(labels_acc[:, None], 3, axis=1),
        labels_gyro=np.repeat(labels_gyro[:, None], 3, axis=1),
        bias_a=bias_a, bias_g=bias_g, factors=factors,
        init_vel_err=init_vel, init_misalign=init_mis,
        schedule=schedule,
    )


def iter_windows(imu_values: np.ndarray, window: int = 100):
    """Yield trailing windows ending at each whole multiple of ``window``."""
    n = imu_values.shape[0] // window
    for j in range(1, n + 1):
        yield imu_values[(j - 1) * window : j * window]


# ---------------------------------------------------------------------------
# CSV interchange


_IMU_HEADER = ["t", "fx", "fy", "fz", "wx", "wy", "wz"]
_DVL_HEADER = ["t", "vx", "vy", "vz", "valid"]
_TRUTH_HEADER = ["t", "yaw", "pitch", "roll", "vN", "vE", "vD"]


def _write_rows(path: str, header: list[str], rows: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def write_track_csv(
    out_dir: str, truth: TruthStream, run: CorruptedRun
) -> None:
    """Write imu.csv / dvl.csv / truth.csv for one corrupted realization."""
    os.makedirs(out_dir, exist_ok=True)
    imu_rows = np.column_stack([run.imu.t, run.imu.f, run.imu.w])
    _write_rows(os.path.join(out_dir, "imu.csv"), _IMU_HEADER, imu_rows)
    dvl_rows = np.column_stack([run.dvl.t, run.dvl.v_b, run.dvl.valid.astype(float)])
    _write_rows(os.path.join(out_dir, "dvl.csv"), _DVL_HEADER, dvl_rows)
    euler = np.array([euler_from_dcm(c) for c in truth.c_bn])
    truth_rows = np.column_stack([truth.t, euler, truth.v_n])
    _write_rows(os.path.join(out_dir, "truth.csv"), _TRUTH_HEADER, truth_rows)


@dataclass(frozen=True)
class IngestResult:
    imu: ImuData
    dvl: DvlData
    truth_t: np.ndarray | None = None
    truth_c_bn: np.ndarray | None = None
    truth_v_n: np.ndarray | None = None


def _read_table(path: str, header: list[str]) -> np.ndarray:
    name = os.path.basename(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            found = next(reader)
        except StopIteration:
            raise IngestError(f"{name}: empty file") from None
        if [h.strip() for h in found] != header:
            raise IngestError(f"{name}: expected columns {header}, found {found}")
        rows = []
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestError(f"{name}: wrong column count", row=lineno)
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise IngestError(f"{name}: non-numeric value", row=lineno) from None
    if not rows:
        raise IngestError(f"{name}: no data rows")
    return np.asarray(rows, dtype=float)


def _check_monotone(name: str, t: np.ndarray) -> None:
    bad = np.nonzero(np.diff(t) <= 0.0)[0]
    if bad.size:
        raise IngestError(f"{name}: non-monotone timestamps", row=int(bad[0]) + 2)


def ingest_csv(track_dir: str) -> IngestResult:
    """Load a track directory in the documented CSV schema.

    Expects ``imu.csv`` and ``dvl.csv``; ``truth.csv`` is optional. Units
    are SI with angles in radians. Raises :class:`IngestError` with the
    offending 1-based data row on schema, monotonicity or range failures.
    """
    imu_rows = _read_table(os.path.join(track_dir, "imu.csv"), _IMU_HEADER)
    _check_monotone("imu.csv", imu_rows[:, 0])
    too_big = np.nonzero(np.max(np.abs(imu_rows[:, 1:4]), axis=1) > 100.0)[0]
    if too_big.size:
        raise IngestError(
            "imu.csv: specific force exceeds 100 m/s^2", row=int(too_big[0]) + 1
        )
    imu = ImuData(t=imu_rows[:, 0], f=imu_rows[:, 1:4], w=imu_rows[:, 4:7])

    dvl_rows = _read_table(os.path.join(track_dir, "dvl.csv"), _DVL_HEADER)
    _check_monotone("dvl.csv", dvl_rows[:, 0])
    dvl = DvlData(
        t=dvl_rows[:, 0], v_b=dvl_rows[:, 1:4], valid=dvl_rows[:, 4] != 0.0
    )

    truth_path = os.path.join(track_dir, "truth.csv")
    if not os.path.exists(truth_path):
        return IngestResult(imu=imu, dvl=dvl)
    truth_rows = _read_table(truth_path, _TRUTH_HEADER)
    _check_monotone("truth.csv", truth_rows[:, 0])
    c_bn = np.stack([dcm_from_euler(*row[1:4]) for row in truth_rows])
    return IngestResult(
        imu=imu, dvl=dvl,
        truth_t=truth_rows[:, 0], truth_c_bn=c_bn, truth_v_n=truth_rows[:, 4:7],
    )


# ---------------------------------------------------------------------------
# Default track roster: four training tracks and two test tracks of 240 s
# with contrasting maneuver density.


def _track(name: str, seed: int, speed: float, pieces: list[tuple]) -> TrajectorySpec:
    segments = []
    for piece in pieces:
        if len(piece) == 2:
            segments.append(Segment("straight", piece[1], speed))
        else:
            segments.append(Segment("turn", piece[1], speed, rate_deg_s=piece[2]))
    duration = sum(s.duration for s in segments)
    return TrajectorySpec(name=name, duration=duration, segments=tuple(segments), seed=seed)


def default_training_tracks() -> list[TrajectorySpec]:
    return [
        _track("train1", 101, 2.0, [
            ("s", 20.0), ("t", 30.0, 3.0), ("s", 20.0), ("t", 30.0, -4.0),
            ("s", 20.0), ("t", 40.0, 5.0), ("s", 30.0), ("t", 30.0, -3.0), ("s", 20.0),
        ]),
        _track("train2", 102, 1.8, [
            ("t", 60.0, 2.5), ("s", 30.0), ("t", 24.0, -5.0),
            ("s", 36.0), ("t", 45.0, 4.0), ("s", 45.0),
        ]),
        _track("train3", 103, 2.2, [
            ("s", 90.0), ("t", 30.0, 3.0), ("s", 90.0), ("t", 30.0, -3.0),
        ]),
        _track("train4", 104, 1.6, [
            ("s", 120.0), ("t", 45.0, -2.0), ("s", 75.0),
        ]),
    ]


def default_test_tracks() -> list[TrajectorySpec]:
    return [
        _track("track5", 105, 2.0, [
            ("s", 40.0), ("t", 40.0, 3.5), ("s", 50.0), ("t", 40.0, -4.5),
            ("s", 40.0), ("t", 30.0, 2.0),
        ]),
        _track("track6", 106, 1.9, [
            ("s", 70.0), ("t", 45.0, -3.0), ("s", 55.0), ("t", 30.0, 4.0), ("s", 40.0),
        ]),
    ]
