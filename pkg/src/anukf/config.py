"""Experiment configuration: a TOML file with the sections below.

    [experiment]   mc_runs, seed, filters, optional outage window
    [ut]           unscented-transform parameters
    [simulation]   every corruption-spec field
    [adaptive]     tau factors, clamp bounds, weight file paths, gyro scales
    [training]     optimizer settings and draws per training track
    [[tracks]]     test tracks: inline segment lists or CSV directories
    [[training_tracks]]  optional override of the default training roster

Omitted sections fall back to package defaults; unknown keys are rejected
so typos fail loudly. Relative paths resolve against the config file.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .fusion import FILTER_KINDS
from .simulate import (
    CorruptionSpec,
    Segment,
    TrajectorySpec,
    default_test_tracks,
    default_training_tracks,
)
from .ukf import UtParams


@dataclass(frozen=True)
class TrackEntry:
    """Either a synthetic trajectory or a CSV track directory."""

    name: str
    spec: TrajectorySpec | None = None
    path: str | None = None


@dataclass(frozen=True)
class AdaptiveConfig:
    tau: float = 0.01
    tau_a: float = 1.0
    tau_g: float = 1.0
    # floor sits below the default gyroscope nominal (7.3e-6 rad/s at 100 Hz
    # gives 5.3e-13 in the q_g slot) so validation only fires on implausible
    # regressor output, not on quiet-sensor regimes
    clamp_min: float = 1e-13
    clamp_max: float = 1e2
    accel_weights: str = "acc_net.json"
    gyro_weights: str = "gyro_net.json"
    gyro_in_scale: float = 1e4
    gyro_out_scale: float = 1e-8


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 40
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 7
    draws_per_track: int = 2
    init_seed: int = 11


@dataclass(frozen=True)
class ExperimentConfig:
    mc_runs: int = 20
    seed: int = 20260810
    filters: tuple[str, ...] = ("ukf", "anekf", "anukf")
    outage: tuple[float, float] | None = None
    ut: UtParams = field(default_factory=lambda: UtParams(n=12))
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)
    adaptive: AdaptiveConfig = field(default_factory=AdaptiveConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    tracks: tuple[TrackEntry, ...] = ()
    training_tracks: tuple[TrajectorySpec, ...] = ()

    def __post_init__(self):
        if self.mc_runs < 1:
            raise ConfigError("mc_runs must be >= 1")
        for f in self.filters:
            if f not in FILTER_KINDS:
                raise ConfigError(f"unknown filter {f!r}; expected one of {FILTER_KINDS}")
        if not self.tracks:
            object.__setattr__(
                self,
                "tracks",
                tuple(TrackEntry(name=s.name, spec=s) for s in default_test_tracks()),
            )
        if not self.training_tracks:
            object.__setattr__(self, "training_tracks", tuple(default_training_tracks()))


def _take(section: dict, name: str, allowed: set[str]) -> dict:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return section


def _parse_segments(raw, track_name: str) -> tuple[Segment, ...]:
    segments = []
    for i, seg in enumerate(raw):
        allowed = {"kind", "duration", "speed", "rate_deg_s"}
        _take(seg, f"tracks.{track_name}.segments[{i}]", allowed)
        try:
            segments.append(Segment(**seg))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"track {track_name!r} segment {i}: {exc}") from exc
    return tuple(segments)


def _parse_track(raw: dict, base_dir: str, default_seed: int) -> TrackEntry:
    name = raw.get("name")
    if not name:
        raise ConfigError("every [[tracks]] entry needs a name")
    if "path" in raw:
        _take(raw, f"tracks.{name}", {"name", "path"})
        return TrackEntry(name=name, path=os.path.join(base_dir, raw["path"]))
    allowed = {"name", "segments", "imu_rate", "dvl_rate", "seed", "duration"}
    _take(raw, f"tracks.{name}", allowed)
    if "segments" not in raw:
        raise ConfigError(f"track {name!r} needs segments or a path")
    segments = _parse_segments(raw["segments"], name)
    duration = raw.get("duration", sum(s.duration for s in segments))
    try:
        spec = TrajectorySpec(
            name=name,
            duration=float(duration),
            segments=segments,
            imu_rate=float(raw.get("imu_rate", 100.0)),
            dvl_rate=float(raw.get("dvl_rate", 1.0)),
            seed=int(raw.get("seed", default_seed)),
        )
    except ValueError as exc:
        raise ConfigError(f"track {name!r}: {exc}") from exc
    return TrackEntry(name=name, spec=spec)


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate an experiment configuration file."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))

    top_allowed = {"experiment", "ut", "simulation", "adaptive", "training",
                   "tracks", "training_tracks"}
    _take(doc, "top level", top_allowed)

    exp = _take(doc.get("experiment", {}), "experiment",
                {"mc_runs", "seed", "filters", "outage_start_s",
                 "outage_duration_s"})
    outage = None
    if "outage_start_s" in exp or "outage_duration_s" in exp:
        if not ("outage_start_s" in exp and "outage_duration_s" in exp):
            raise ConfigError("outage needs both outage_start_s and outage_duration_s")
        outage = (float(exp["outage_start_s"]), float(exp["outage_duration_s"]))

    ut_raw = _take(doc.get("ut", {}), "ut",
                   {"alpha", "beta", "kappa", "wc0_form"})
    try:
        ut = UtParams(n=12, **ut_raw)
    except ValueError as exc:
        raise ConfigError(f"[ut]: {exc}") from exc

    sim_raw = _take(doc.get("simulation", {}), "simulation", {
        "accel_noise_std", "gyro_noise_std", "accel_bias_std", "gyro_bias_std",
        "accel_bias_rw_std", "gyro_bias_rw_std", "dvl_noise_std",
        "init_vel_err_std", "init_misalign_std_deg",
        "factor_dwell_s", "factor_min", "factor_max",
    })
    if "init_vel_err_std" in sim_raw:
        sim_raw = dict(sim_raw)
        sim_raw["init_vel_err_std"] = tuple(sim_raw["init_vel_err_std"])
    try:
        corruption = CorruptionSpec(**sim_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[simulation]: {exc}") from exc

    ad_raw = dict(_take(doc.get("adaptive", {}), "adaptive", {
        "tau", "tau_a", "tau_g", "clamp_min", "clamp_max",
        "accel_weights", "gyro_weights", "gyro_in_scale", "gyro_out_scale",
    }))
    for key in ("accel_weights", "gyro_weights"):
        if key in ad_raw:
            ad_raw[key] = os.path.join(base_dir, ad_raw[key])
    adaptive = AdaptiveConfig(**ad_raw)

    tr_raw = _take(doc.get("training", {}), "training", {
        "epochs", "batch_size", "learning_rate", "seed",
        "draws_per_track", "init_seed",
    })
    training = TrainingConfig(**tr_raw)

    seed = int(exp.get("seed", 20260810))
    tracks = tuple(
        _parse_track(raw, base_dir, default_seed=seed + i)
        for i, raw in enumerate(doc.get("tracks", []))
    )
    training_tracks = []
    for i, raw in enumerate(doc.get("training_tracks", [])):
        entry = _parse_track(raw, base_dir, default_seed=seed + 1000 + i)
        if entry.spec is None:
            raise ConfigError("training tracks must be synthetic (segments)")
        training_tracks.append(entry.spec)

    filters = tuple(exp.get("filters", ("ukf", "anekf", "anukf")))
    return ExperimentConfig(
        mc_runs=int(exp.get("mc_runs", 20)),
        seed=seed,
        filters=filters,
        outage=outage,
        ut=ut,
        corruption=corruption,
        adaptive=adaptive,
        training=training,
        tracks=tracks,
        training_tracks=tuple(training_tracks),
    )
