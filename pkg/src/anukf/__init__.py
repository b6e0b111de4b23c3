"""Sensor-fusion toolkit: adaptive neural unscented Kalman filtering for
INS/DVL navigation, with an error-state EKF baseline, a learned
process-noise regressor, a synthetic AUV data generator and a Monte Carlo
benchmark harness."""

from .adaptive import ClampBounds, QNetDiag, adapt_q, assemble_qnet, validate_clamp
from .ekf import EkfSession, ekf_predict, ekf_update
from .fusion import AdaptiveQSource, FusionConfig, StaticQSource, run_filter
from .metrics import misalignment_angles, mrmse, track_average, vrmse
from .model import (
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
from .processnet import (
    ProcessNetModel,
    TrainConfig,
    backward,
    forward,
    init_model,
    load_weights,
    mse_loss,
    save_weights,
    train,
)
from .simulate import (
    CorruptionSpec,
    FactorSchedule,
    Segment,
    TrajectorySpec,
    corrupt,
    generate_truth,
    ingest_csv,
)
from .strapdown import ImuSample, NavState, apply_error_correction, mechanize_step
from .ukf import (
    GaussianState,
    SigmaPointSet,
    UtParams,
    UtWeights,
    compute_weights,
    generate_sigma_points,
    measurement_update,
    time_update,
)

__version__ = "0.1.0"
