"""1-D convolutional regressor mapping inertial windows to noise variances.

The network consumes a 100-sample, 3-axis window of raw inertial readings
and regresses the three per-axis noise variances feeding the adaptive
process-noise assembly. Architecture (all convolutions kernel length 3,
stride 1, one zero-pad row on each side, cross-correlation orientation):

    100x3 -conv+ReLU-> 100x30 -conv+ReLU-> 100x30 -avgpool2-> 50x30
    -conv+ReLU-> 50x30 -conv+ReLU-> 50x30 -maxpool2-> 25x30
    -flatten-> 750 -linear-> 3

Everything (forward, exact reverse-mode gradients, the training loop and
weight serialization) is implemented directly on numpy; convolutions are
evaluated as GEMMs over sliding windows.

The gyroscope instance wraps the same architecture with input/output scale
constants so the network operates on numbers of order one; the
accelerometer instance uses unit scales.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericFaultError, TrainingFaultError, WeightFormatError

WINDOW_LEN = 100
IN_CHANNELS = 3
CONV_CHANNELS = 30
KERNEL = 3
FLAT_LEN = 25 * CONV_CHANNELS
OUT_DIM = 3

_TENSOR_SHAPES = {
    "theta1": (IN_CHANNELS, CONV_CHANNELS, KERNEL),
    "theta2": (CONV_CHANNELS, CONV_CHANNELS, KERNEL),
    "theta3": (CONV_CHANNELS, CONV_CHANNELS, KERNEL),
    "theta4": (CONV_CHANNELS, CONV_CHANNELS, KERNEL),
    "theta5": (FLAT_LEN, OUT_DIM),
    "b1": (CONV_CHANNELS,),
    "b2": (CONV_CHANNELS,),
    "b3": (CONV_CHANNELS,),
    "b4": (CONV_CHANNELS,),
    "b5": (OUT_DIM,),
}

_WEIGHT_FORMAT = "anukf-processnet-weights"
_WEIGHT_VERSION = 1


@dataclass(frozen=True)
class ProcessNetModel:
    """All layer parameters plus the input/output scale constants.

    ``avg_pool_as_printed`` switches the average-pooling layer to the
    alternate parenthesization 0.5*a + b (audit mode); the default is the
    standard 0.5*(a + b).
    """

    theta1: np.ndarray
    theta2: np.ndarray
    theta3: np.ndarray
    theta4: np.ndarray
    theta5: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    b4: np.ndarray
    b5: np.ndarray
    in_scale: float = 1.0
    out_scale: float = 1.0
    avg_pool_as_printed: bool = False

    def __post_init__(self):
        for name, shape in _TENSOR_SHAPES.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _TENSOR_SHAPES}


@dataclass(frozen=True)
class Gradients:
    """Parameter gradients, same shapes as the model tensors."""

    theta1: np.ndarray
    theta2: np.ndarray
    theta3: np.ndarray
    theta4: np.ndarray
    theta5: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    b4: np.ndarray
    b5: np.ndarray

    def tensors(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def init_model(
    seed: int, in_scale: float = 1.0, out_scale: float = 1.0
) -> ProcessNetModel:
    """Fresh model with fan-in-scaled uniform kernels and zero biases."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in _TENSOR_SHAPES.items():
        if name.startswith("b"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = shape[0] * (shape[2] if len(shape) == 3 else 1)
            bound = 1.0 / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ProcessNetModel(in_scale=in_scale, out_scale=out_scale, **tensors)


def _theta_as_gemm(theta: np.ndarray) -> np.ndarray:
    # (Cin, Cout, K) -> (Cin*K, Cout) with (channel, tap) row ordering
    cin, cout, k = theta.shape
    return theta.transpose(0, 2, 1).reshape(cin * k, cout)


def _gemm_as_theta(mat: np.ndarray, cin: int) -> np.ndarray:
    cout = mat.shape[1]
    return mat.reshape(cin, KERNEL, cout).transpose(0, 2, 1)


def _conv_forward(x: np.ndarray, theta: np.ndarray, bias: np.ndarray) -> tuple:
    """Same-length 1-D cross-correlation plus bias; x is (B, W, Cin)."""
    b, w, cin = x.shape
    x_pad = np.zeros((b, w + 2, cin))
    x_pad[:, 1:-1, :] = x
    windows = sliding_window_view(x_pad, KERNEL, axis=1)  # (B, W, Cin, K)
    cols = windows.reshape(b * w, cin * KERNEL)
    out = (cols @ _theta_as_gemm(theta) + bias).reshape(b, w, -1)
    return out, cols


def _conv_backward(
    d_out: np.ndarray, cols: np.ndarray, theta: np.ndarray, in_shape: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    b, w, cin = in_shape
    d_mat = d_out.reshape(b * w, -1)
    d_theta = _gemm_as_theta(cols.T @ d_mat, cin)
    d_bias = d_mat.sum(axis=0)
    d_cols = (d_mat @ _theta_as_gemm(theta).T).reshape(b, w, cin, KERNEL)
    d_x_pad = np.zeros((b, w + 2, cin))
    for t in range(KERNEL):
        d_x_pad[:, t : t + w, :] += d_cols[:, :, :, t]
    return d_x_pad[:, 1:-1, :], d_theta, d_bias


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericFaultError(layer=name)


def _forward_batch(model: ProcessNetModel, windows: np.ndarray, want_cache: bool):
    """Batched forward pass; returns (B, 3) outputs and, optionally, the
    activation cache needed for the backward pass."""
    x = np.asarray(windows, dtype=float)
    assert x.ndim == 3 and x.shape[1:] == (WINDOW_LEN, IN_CHANNELS), (
        f"window batch must be (B, {WINDOW_LEN}, {IN_CHANNELS}), got {x.shape}"
    )
    x0 = x * model.in_scale

    z1, cols1 = _conv_forward(x0, model.theta1, model.b1)
    l1 = np.maximum(z1, 0.0)
    _check_finite("l1", l1)
    assert l1.shape[1:] == (100, 30)

    z2, cols2 = _conv_forward(l1, model.theta2, model.b2)
    l2 = np.maximum(z2, 0.0)
    _check_finite("l2", l2)
    assert l2.shape[1:] == (100, 30)

    if model.avg_pool_as_printed:
        l3 = 0.5 * l2[:, 0::2, :] + l2[:, 1::2, :]
    else:
        l3 = 0.5 * (l2[:, 0::2, :] + l2[:, 1::2, :])
    _check_finite("l3", l3)
    assert l3.shape[1:] == (50, 30)

    z4, cols4 = _conv_forward(l3, model.theta3, model.b3)
    l4 = np.maximum(z4, 0.0)
    _check_finite("l4", l4)
    assert l4.shape[1:] == (50, 30)

    z5, cols5 = _conv_forward(l4, model.theta4, model.b4)
    l5 = np.maximum(z5, 0.0)
    _check_finite("l5", l5)
    assert l5.shape[1:] == (50, 30)

    first = l5[:, 0::2, :]
    second = l5[:, 1::2, :]
    l6 = np.maximum(first, second)
    _check_finite("l6", l6)
    assert l6.shape[1:] == (25, 30)

    l7 = l6.reshape(l6.shape[0], FLAT_LEN)
    out = (l7 @ model.theta5 + model.b5) * model.out_scale
    _check_finite("head", out)
    assert out.shape[1:] == (OUT_DIM,)

    if not want_cache:
        return out, None
    cache = {
        "x0": x0,
        "z1": z1, "cols1": cols1, "l1": l1,
        "z2": z2, "cols2": cols2,
        "l3": l3,
        "z4": z4, "cols4": cols4, "l4": l4,
        "z5": z5, "cols5": cols5, "l5": l5,
        "max_first": first >= second,
        "l7": l7,
    }
    return out, cache


def forward(model: ProcessNetModel, window: np.ndarray) -> np.ndarray:
    """Regressed per-axis noise variances for one window.

    Parameters
    ----------
    window : ndarray (100, 3)
        Raw inertial readings (accelerometer or gyroscope instance).

    Returns
    -------
    ndarray (3,)
        Variance estimates in the instrument's physical units squared.
    """
    window = np.asarray(window, dtype=float)
    if window.shape != (WINDOW_LEN, IN_CHANNELS):
        raise ValueError(
            f"window must have shape ({WINDOW_LEN}, {IN_CHANNELS}), got {window.shape}"
        )
    if not np.all(np.isfinite(window)):
        raise ValueError("window contains non-finite values")
    out, _ = _forward_batch(model, window[None], want_cache=False)
    return out[0]


def _backward_batch(
    model: ProcessNetModel, cache: dict, d_out: np.ndarray
) -> Gradients:
    b = d_out.shape[0]
    d_head = d_out * model.out_scale

    d_theta5 = cache["l7"].T @ d_head
    d_b5 = d_head.sum(axis=0)
    d_l7 = d_head @ model.theta5.T
    d_l6 = d_l7.reshape(b, 25, CONV_CHANNELS)

    d_l5 = np.zeros((b, 50, CONV_CHANNELS))
    mask = cache["max_first"]
    d_l5[:, 0::2, :] = np.where(mask, d_l6, 0.0)
    d_l5[:, 1::2, :] = np.where(mask, 0.0, d_l6)

    d_z5 = d_l5 * (cache["z5"] > 0.0)
    d_l4, d_theta4, d_b4 = _conv_backward(
        d_z5, cache["cols5"], model.theta4, cache["l4"].shape
    )
    d_z4 = d_l4 * (cache["z4"] > 0.0)
    d_l3, d_theta3, d_b3 = _conv_backward(
        d_z4, cache["cols4"], model.theta3, cache["l3"].shape
    )

    d_l2 = np.zeros((b, 100, CONV_CHANNELS))
    if model.avg_pool_as_printed:
        d_l2[:, 0::2, :] = 0.5 * d_l3
        d_l2[:, 1::2, :] = d_l3
    else:
        d_l2[:, 0::2, :] = 0.5 * d_l3
        d_l2[:, 1::2, :] = 0.5 * d_l3

    d_z2 = d_l2 * (cache["z2"] > 0.0)
    d_l1, d_theta2, d_b2 = _conv_backward(
        d_z2, cache["cols2"], model.theta2, cache["l1"].shape
    )
    d_z1 = d_l1 * (cache["z1"] > 0.0)
    _, d_theta1, d_b1 = _conv_backward(
        d_z1, cache["cols1"], model.theta1, cache["x0"].shape
    )
    return Gradients(
        theta1=d_theta1, theta2=d_theta2, theta3=d_theta3, theta4=d_theta4,
        theta5=d_theta5, b1=d_b1, b2=d_b2, b3=d_b3, b4=d_b4, b5=d_b5,
    )


def backward(
    model: ProcessNetModel, window: np.ndarray, upstream_grad: np.ndarray
) -> Gradients:
    """Exact parameter gradients for one window.

    ``upstream_grad`` is the loss gradient with respect to the (scaled)
    network output. The ReLU subgradient at exactly zero is taken as zero.
    """
    window = np.asarray(window, dtype=float)
    upstream = np.asarray(upstream_grad, dtype=float).reshape(1, OUT_DIM)
    _, cache = _forward_batch(model, window[None], want_cache=True)
    return _backward_batch(model, cache, upstream)


def mse_loss(pred_batch: np.ndarray, target_batch: np.ndarray) -> float:
    """Mean over the batch of squared error-vector norms."""
    pred = np.asarray(pred_batch, dtype=float)
    target = np.asarray(target_batch, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.ndim != 2 or pred.shape[0] < 1:
        raise ValueError("batches must be nonempty 2-d arrays")
    return float(np.sum((pred - target) ** 2) / pred.shape[0])


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings for :func:`train`."""

    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


def train(
    model: ProcessNetModel,
    dataset: Sequence[tuple[np.ndarray, np.ndarray]] | Iterable,
    config: TrainConfig = TrainConfig(),
) -> tuple[ProcessNetModel, list[float]]:
    """Mini-batch Adam on the squared-error loss.

    The optimization runs in the network's scaled domain: inputs are
    multiplied by ``in_scale`` inside the forward pass and the targets are
    divided by ``out_scale``, so the reported per-epoch losses are in the
    scaled output domain. Shuffling is driven by ``config.seed`` only, so
    identical (model, dataset, config) triples give identical histories.

    Raises
    ------
    TrainingFaultError
        If the loss becomes non-finite.
    """
    pairs = list(dataset)
    if not pairs:
        raise ValueError("dataset must be nonempty")
    windows = np.stack([np.asarray(w, dtype=float) for w, _ in pairs])
    targets = np.stack([np.asarray(t, dtype=float) for _, t in pairs])
    if np.any(targets <= 0.0):
        raise ValueError("targets must be strictly positive variances")
    scaled_targets = targets / model.out_scale
    # out_scale=1 during optimization; gradients stay O(1) for Adam
    work = replace(model, out_scale=1.0)

    rng = np.random.default_rng(config.seed)
    n = windows.shape[0]
    params = {k: v.copy() for k, v in work.tensors().items()}
    m_state = {k: np.zeros_like(v) for k, v in params.items()}
    v_state = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0
    history: list[float] = []

    # divergence shows up as a non-finite epoch loss; the overflow warnings
    # on the way there are expected, not actionable
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            epoch_sq_sum = 0.0
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                batch_w = windows[idx]
                batch_t = scaled_targets[idx]
                try:
                    work = replace(work, **params)
                    out, cache = _forward_batch(work, batch_w, want_cache=True)
                except (NumericFaultError, ValueError) as exc:
                    raise TrainingFaultError(epoch=epoch) from exc
                resid = out - batch_t
                epoch_sq_sum += float(np.sum(resid**2))
                d_out = 2.0 * resid / idx.shape[0]
                grads = _backward_batch(work, cache, d_out)
                step += 1
                bc1 = 1.0 - config.beta1**step
                bc2 = 1.0 - config.beta2**step
                for name, g in grads.tensors().items():
                    m_state[name] = config.beta1 * m_state[name] + (1 - config.beta1) * g
                    v_state[name] = (
                        config.beta2 * v_state[name] + (1 - config.beta2) * g**2
                    )
                    params[name] = params[name] - config.learning_rate * (
                        m_state[name] / bc1
                    ) / (np.sqrt(v_state[name] / bc2) + config.eps)
            epoch_loss = epoch_sq_sum / n
            if not np.isfinite(epoch_loss):
                raise TrainingFaultError(epoch=epoch)
            history.append(epoch_loss)

    trained = replace(model, **params)
    return trained, history


def save_weights(model: ProcessNetModel) -> bytes:
    """Serialize a model to a self-describing JSON document."""
    doc = {
        "format": _WEIGHT_FORMAT,
        "version": _WEIGHT_VERSION,
        "in_scale": model.in_scale,
        "out_scale": model.out_scale,
        "avg_pool_as_printed": model.avg_pool_as_printed,
        "tensors": {name: arr.tolist() for name, arr in model.tensors().items()},
    }
    return json.dumps(doc).encode("utf-8")


def load_weights(data: bytes) -> ProcessNetModel:
    """Parse and validate a serialized model.

    Raises
    ------
    WeightFormatError
        On malformed documents, version mismatches, wrong tensor shapes or
        non-finite entries; the message names the offending tensor.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFormatError(f"unparseable weight document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _WEIGHT_FORMAT:
        raise WeightFormatError("not a recognizable weight document")
    if doc.get("version") != _WEIGHT_VERSION:
        raise WeightFormatError(f"unsupported version {doc.get('version')!r}")
    tensors = doc.get("tensors")
    if not isinstance(tensors, dict):
        raise WeightFormatError("missing tensors section")
    parsed = {}
    for name, shape in _TENSOR_SHAPES.items():
        if name not in tensors:
            raise WeightFormatError(f"missing tensor {name}")
        arr = np.asarray(tensors[name], dtype=float)
        if arr.shape != shape:
            raise WeightFormatError(
                f"tensor {name} has shape {arr.shape}, expected {shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise WeightFormatError(f"tensor {name} contains non-finite values")
        parsed[name] = arr
    return ProcessNetModel(
        in_scale=float(doc.get("in_scale", 1.0)),
        out_scale=float(doc.get("out_scale", 1.0)),
        avg_pool_as_printed=bool(doc.get("avg_pool_as_printed", False)),
        **parsed,
    )
