"""Monte Carlo experiment driver: simulate, train, run, aggregate.

Every stochastic input of a run derives from a stable 64-bit mix of
(base seed, track name, filter name, run index), so adding a filter or
reordering the roster never perturbs the other draws, and outputs are
byte-identical across repeated executions and worker-pool sizes.
"""

from __future__ import annotations

import csv
import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import processnet
from .adaptive import ClampBounds, assemble_qnet
from .config import ExperimentConfig, TrackEntry
from .errors import AnukfError, ConfigError, IngestError
from .fusion import AdaptiveQSource, FusionConfig, StaticQSource, run_filter
from .geometry import rodrigues
from .metrics import misalignment_series, mrmse, track_average, vrmse
from .simulate import (
    CorruptedRun,
    DvlData,
    TrajectorySpec,
    TruthStream,
    corrupt,
    generate_truth,
    ingest_csv,
    write_track_csv,
)
from .strapdown import NavState


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from a tuple of identifiers."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def apply_outage(dvl: DvlData, start_s: float, duration_s: float) -> DvlData:
    """Mark DVL epochs in [start, start + duration) as unusable.

    The window must lie within the stream span; a zero duration returns the
    stream unchanged (masking aside, streams are never modified).
    """
    if duration_s < 0.0:
        raise ValueError("outage duration must be nonnegative")
    if duration_s == 0.0:
        return dvl
    if start_s < 0.0 or start_s + duration_s > dvl.t[-1] + 1e-9:
        raise ValueError(
            f"outage window [{start_s}, {start_s + duration_s}) outside stream span"
        )
    masked = dvl.valid & ~(
        (dvl.t >= start_s - 1e-9) & (dvl.t < start_s + duration_s - 1e-9)
    )
    return DvlData(t=dvl.t, v_b=dvl.v_b, valid=masked)


def _worker_count() -> int:
    env = os.environ.get("ANUKF_THREADS")
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError(f"ANUKF_THREADS must be an integer, got {env!r}") from None
        if workers < 1:
            raise ConfigError("ANUKF_THREADS must be >= 1")
        return workers
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class ResolvedTrack:
    """A track with its truth stream materialized."""

    name: str
    truth: TruthStream


def _resolve_track(entry: TrackEntry) -> ResolvedTrack:
    if entry.spec is not None:
        return ResolvedTrack(name=entry.name, truth=generate_truth(entry.spec))
    ingested = ingest_csv(entry.path)
    if ingested.truth_t is None:
        raise IngestError(f"track {entry.name!r}: truth.csv required for benchmarking")
    n = ingested.imu.t.shape[0]
    if ingested.truth_t.shape[0] != n + 1:
        raise IngestError(
            f"track {entry.name!r}: truth.csv must have one more row than imu.csv"
        )
    imu_rate = 1.0 / float(np.median(np.diff(ingested.imu.t)))
    dvl_rate = 1.0 / float(np.median(np.diff(ingested.dvl.t)))
    return ResolvedTrack(
        name=entry.name,
        truth=TruthStream(
            t=ingested.truth_t,
            c_bn=ingested.truth_c_bn,
            v_n=ingested.truth_v_n,
            imu_f=ingested.imu.f,
            imu_w=ingested.imu.w,
            dvl_t=ingested.dvl.t,
            dvl_v_b=ingested.dvl.v_b,
            imu_rate=imu_rate,
            dvl_rate=dvl_rate,
        ),
    )


def static_qstar(config: ExperimentConfig) -> np.ndarray:
    """Driving-noise diagonal of the fixed-Q filter.

    Uses the same assembly as the adaptive pipeline with the network
    replaced by the nominal (factor one) white-noise variances, so the
    fixed and adaptive filters differ only in the adaptation itself.
    """
    sim = config.corruption
    ad = config.adaptive
    return assemble_qnet(
        np.full(3, sim.accel_noise_std**2),
        np.full(3, sim.gyro_noise_std**2),
        ad.tau, ad.tau_a, ad.tau_g,
    ).diagonal()


def clamp_bounds(config: ExperimentConfig) -> ClampBounds:
    """Per-block bounds spanning the physically admissible variance range.

    The regressed variances can never fall below the factor-one sensor
    nominals nor exceed the top of the factor range; bounds sit half a
    decade outside that band so honest estimates pass untouched while
    negative or wildly extrapolated outputs are pulled back. The absolute
    config bounds still apply as outer rails.
    """
    base = static_qstar(config)
    sim = config.corruption
    ad = config.adaptive
    nominal = {"q_v": base[0], "q_psi": base[3], "q_a": base[6], "q_g": base[9]}
    lo_scale = 0.5 * sim.factor_min**2
    hi_scale = 2.0 * sim.factor_max**2
    return ClampBounds(
        minimums={k: max(ad.clamp_min, v * lo_scale) for k, v in nominal.items()},
        maximums={k: min(ad.clamp_max, v * hi_scale) for k, v in nominal.items()},
        defaults=nominal,
        default_min=ad.clamp_min,
        default_max=ad.clamp_max,
    )


def _initial_factor_ms(sim) -> float:
    """Mean square of the bias factor in effect at the start of a run."""
    if sim.bias_factor_schedule is not None:
        return float(sim.bias_factor_schedule.factors[0]) ** 2
    lo, hi = sim.factor_min, sim.factor_max
    return (lo * lo + lo * hi + hi * hi) / 3.0


def fusion_config(config: ExperimentConfig) -> FusionConfig:
    sim = config.corruption
    # the initial bias uncertainty must cover the factor-scaled draw
    factor_ms = _initial_factor_ms(sim)
    p0 = np.concatenate(
        [
            np.asarray(sim.init_vel_err_std, dtype=float) ** 2,
            np.full(3, np.radians(sim.init_misalign_std_deg) ** 2),
            np.full(3, sim.accel_bias_std**2 * factor_ms),
            np.full(3, sim.gyro_bias_std**2 * factor_ms),
        ]
    )
    return FusionConfig(
        ut=config.ut, r_dvl=np.eye(3) * sim.dvl_noise_std**2, p0_diag=p0
    )


def _load_adaptive_source(config: ExperimentConfig) -> AdaptiveQSource:
    ad = config.adaptive
    with open(ad.accel_weights, "rb") as fh:
        acc_model = processnet.load_weights(fh.read())
    with open(ad.gyro_weights, "rb") as fh:
        gyro_model = processnet.load_weights(fh.read())
    return AdaptiveQSource(
        acc_model=acc_model,
        gyro_model=gyro_model,
        tau=ad.tau, tau_a=ad.tau_a, tau_g=ad.tau_g,
        bounds=clamp_bounds(config),
    )


def initial_nav(truth: TruthStream, run: CorruptedRun) -> NavState:
    return NavState(
        c_bn=rodrigues(run.init_misalign) @ truth.c_bn[0],
        v_n=truth.v_n[0] + run.init_vel_err,
        b_a_hat=np.zeros(3),
        b_g_hat=np.zeros(3),
        t=float(truth.t[0]),
    )


@dataclass(frozen=True)
class RunOutcome:
    track: str
    filter_kind: str
    run_index: int
    dv: np.ndarray | None  # (K, 3) velocity errors at DVL epochs
    dpsi: np.ndarray | None  # (K, 3) misalignment triples (NaN where flagged)
    t: np.ndarray | None
    clamp_events: int
    flagged: int
    elapsed_s: float
    error: str | None = None


def _execute_run(
    track: ResolvedTrack,
    filter_kind: str,
    run_index: int,
    config: ExperimentConfig,
    q_sources: dict,
    fus_cfg: FusionConfig,
) -> RunOutcome:
    started = time.perf_counter()
    seed = derive_seed(config.seed, track.name, filter_kind, run_index)
    try:
        run = corrupt(track.truth, config.corruption, seed)
        dvl = run.dvl
        if config.outage is not None:
            dvl = apply_outage(dvl, config.outage[0], config.outage[1])
        result = run_filter(
            kind=filter_kind,
            imu=run.imu,
            dvl=dvl,
            nav0=initial_nav(track.truth, run),
            q_source=q_sources[filter_kind],
            config=fus_cfg,
        )
        stride = round(track.truth.imu_rate / track.truth.dvl_rate)
        idx = (np.arange(1, result.t.shape[0] + 1) * stride).astype(int)
        dv = result.v_n - track.truth.v_n[idx]
        dpsi, flagged = misalignment_series(result.c_bn, track.truth.c_bn[idx])
        return RunOutcome(
            track=track.name, filter_kind=filter_kind, run_index=run_index,
            dv=dv, dpsi=dpsi, t=result.t,
            clamp_events=result.clamp_events, flagged=flagged,
            elapsed_s=time.perf_counter() - started,
        )
    except (AnukfError, np.linalg.LinAlgError, ValueError) as exc:
        return RunOutcome(
            track=track.name, filter_kind=filter_kind, run_index=run_index,
            dv=None, dpsi=None, t=None, clamp_events=0, flagged=0,
            elapsed_s=time.perf_counter() - started,
            error=f"{type(exc).__name__}: {exc}",
        )


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def run_experiment(config: ExperimentConfig, out_dir: str) -> dict:
    """Execute the configured Monte Carlo comparison and write outputs.

    Produces ``metrics.csv`` (per track and filter, plus the two-track
    average), per-run error series ``errors_<track>_<filter>.csv``, the
    across-run mean/std series ``series_<track>_<filter>.csv``, and
    ``timings.csv`` (wall time lives outside metrics.csv so that repeated
    executions are byte-identical). Returns the metrics as a dict keyed by
    (track, filter).
    """
    os.makedirs(out_dir, exist_ok=True)
    tracks = [_resolve_track(entry) for entry in config.tracks]
    fus_cfg = fusion_config(config)

    q_sources = {}
    for kind in config.filters:
        if kind == "ukf":
            q_sources[kind] = StaticQSource(qstar_diag=static_qstar(config))
        else:
            q_sources[kind] = _load_adaptive_source(config)

    tasks = [
        (track, kind, run_index)
        for track in tracks
        for kind in config.filters
        for run_index in range(config.mc_runs)
    ]
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        outcomes = list(
            pool.map(
                lambda args: _execute_run(
                    args[0], args[1], args[2], config, q_sources, fus_cfg
                ),
                tasks,
            )
        )
    by_key: dict = {}
    for outcome in outcomes:
        by_key.setdefault((outcome.track, outcome.filter_kind), []).append(outcome)

    metrics_rows = []
    timing_rows = []
    summary: dict = {}
    for track in tracks:
        for kind in config.filters:
            group = sorted(by_key[(track.name, kind)], key=lambda o: o.run_index)
            good = [o for o in group if o.error is None]
            failed = [o for o in group if o.error is not None]
            for o in failed:
                print(f"run failed: {track.name}/{kind}/{o.run_index}: {o.error}")
            if not good:
                raise AnukfError(
                    f"all {len(group)} runs failed for {track.name}/{kind}"
                )
            dv = np.stack([o.dv for o in good])
            dpsi = np.stack([o.dpsi for o in good])
            v_metric = vrmse(dv)
            m_metric = mrmse(dpsi)
            clamp_total = sum(o.clamp_events for o in good)
            summary[(track.name, kind)] = {
                "vrmse": v_metric, "mrmse": m_metric,
                "clamp_events": clamp_total, "failed_runs": len(failed),
            }
            metrics_rows.append([
                track.name, kind, repr(v_metric), repr(m_metric),
                clamp_total, len(failed),
            ])
            timing_rows.append([
                track.name, kind, f"{sum(o.elapsed_s for o in group):.3f}",
            ])

            err_path = os.path.join(out_dir, f"errors_{track.name}_{kind}.csv")
            err_rows = []
            for o in good:
                dv_norm = np.linalg.norm(o.dv, axis=1)
                dpsi_norm = np.linalg.norm(o.dpsi, axis=1)
                for j in range(o.t.shape[0]):
                    err_rows.append([
                        o.run_index, repr(float(o.t[j])),
                        repr(float(dv_norm[j])), repr(float(dpsi_norm[j])),
                    ])
            _write_csv(err_path, ["run", "t", "dv_norm", "dpsi_norm"], err_rows)

            norms = np.linalg.norm(dv, axis=2)
            series_path = os.path.join(out_dir, f"series_{track.name}_{kind}.csv")
            series_rows = [
                [repr(float(t)), repr(float(mu)), repr(float(sd))]
                for t, mu, sd in zip(
                    good[0].t, norms.mean(axis=0), norms.std(axis=0)
                )
            ]
            _write_csv(series_path, ["t", "dv_norm_mean", "dv_norm_std"], series_rows)

    if len(tracks) == 2:
        for kind in config.filters:
            v_avg = track_average(
                summary[(tracks[0].name, kind)]["vrmse"],
                summary[(tracks[1].name, kind)]["vrmse"],
            )
            m_avg = track_average(
                summary[(tracks[0].name, kind)]["mrmse"],
                summary[(tracks[1].name, kind)]["mrmse"],
            )
            summary[("track_avg", kind)] = {"vrmse": v_avg, "mrmse": m_avg}
            metrics_rows.append(["track_avg", kind, repr(v_avg), repr(m_avg), "", ""])

    _write_csv(
        os.path.join(out_dir, "metrics.csv"),
        ["track", "filter", "vrmse", "mrmse", "clamp_events", "failed_runs"],
        metrics_rows,
    )
    _write_csv(os.path.join(out_dir, "timings.csv"),
               ["track", "filter", "wall_s"], timing_rows)
    return summary


def build_training_set(
    config: ExperimentConfig,
) -> tuple[list, list]:
    """Corrupt the training tracks and pair windows with variance labels."""
    acc_pairs = []
    gyro_pairs = []
    window = processnet.WINDOW_LEN
    for spec in config.training_tracks:
        truth = generate_truth(spec)
        for draw in range(config.training.draws_per_track):
            seed = derive_seed(config.seed, "train", spec.name, draw)
            run = corrupt(truth, config.corruption, seed)
            n_windows = run.labels_acc.shape[0]
            for j in range(n_windows):
                sl = slice(j * window, (j + 1) * window)
                acc_pairs.append((run.imu.f[sl], run.labels_acc[j]))
                gyro_pairs.append((run.imu.w[sl], run.labels_gyro[j]))
    return acc_pairs, gyro_pairs


def train_command(config: ExperimentConfig, out_dir: str) -> dict:
    """Train both regressor instances and write weights plus loss history."""
    os.makedirs(out_dir, exist_ok=True)
    acc_pairs, gyro_pairs = build_training_set(config)
    tr = config.training
    train_cfg = processnet.TrainConfig(
        epochs=tr.epochs, batch_size=tr.batch_size,
        learning_rate=tr.learning_rate, seed=tr.seed,
    )
    ad = config.adaptive

    acc_model = processnet.init_model(derive_seed(tr.init_seed, "acc"))
    acc_model, acc_hist = processnet.train(acc_model, acc_pairs, train_cfg)
    gyro_model = processnet.init_model(
        derive_seed(tr.init_seed, "gyro"),
        in_scale=ad.gyro_in_scale, out_scale=ad.gyro_out_scale,
    )
    gyro_model, gyro_hist = processnet.train(gyro_model, gyro_pairs, train_cfg)

    acc_path = os.path.join(out_dir, os.path.basename(ad.accel_weights))
    gyro_path = os.path.join(out_dir, os.path.basename(ad.gyro_weights))
    with open(acc_path, "wb") as fh:
        fh.write(processnet.save_weights(acc_model))
    with open(gyro_path, "wb") as fh:
        fh.write(processnet.save_weights(gyro_model))
    _write_csv(
        os.path.join(out_dir, "loss.csv"),
        ["epoch", "acc_mse", "gyro_mse"],
        [[i, repr(a), repr(g)] for i, (a, g) in enumerate(zip(acc_hist, gyro_hist))],
    )
    return {
        "acc_weights": acc_path, "gyro_weights": gyro_path,
        "acc_loss": acc_hist, "gyro_loss": gyro_hist,
    }


def simulate_command(config: ExperimentConfig, out_dir: str) -> list[str]:
    """Write one corrupted realization per configured synthetic track."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for entry in config.tracks:
        if entry.spec is None:
            continue
        truth = generate_truth(entry.spec)
        seed = derive_seed(config.seed, "simulate", entry.name, 0)
        run = corrupt(truth, config.corruption, seed)
        track_dir = os.path.join(out_dir, entry.name)
        write_track_csv(track_dir, truth, run)
        written.append(track_dir)
    return written
