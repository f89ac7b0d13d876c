"""Two-head MLP, exact gradients, Adam and cosine schedule, from scratch.

The network maps a feature vector to two 2-d heads sharing a ReLU trunk:
a position estimate and a position-bias estimate. Everything runs in
float64. The training loss is a batch mean of weighted Euclidean residual
norms,

    L = (1/|B|) * ( sum_i a_i ||l_hat_i - l_i|| + sum_i c_i ||b_hat_i - b_i|| )

with per-sample coefficients a_i (position term) and c_i (bias term, may
be absent). The supervised, reference-pair and pseudo-label objectives
used elsewhere are all instances of this form, differing only in the
coefficient vectors. The norm's subgradient at an exactly zero residual
is taken as zero.
"""

from __future__ import annotations

import copy
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np


class TrainingError(RuntimeError):
    """Raised when optimization produces a non-finite loss."""


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture: input width, hidden ReLU widths, two 2-d output heads."""

    input_dim: int
    hidden_dims: tuple[int, ...] = (512, 256, 128)
    n_outputs: int = 2

    def validate(self) -> None:
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("layer widths must be positive")
        if not self.hidden_dims:
            raise ValueError("at least one hidden layer is required")


@dataclass
class MlpParams:
    """Weight arrays; canonical order is hidden layers then the two heads."""

    hidden_w: list[np.ndarray]
    hidden_b: list[np.ndarray]
    w_pos: np.ndarray
    b_pos: np.ndarray
    w_bias: np.ndarray
    b_bias: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.hidden_w, self.hidden_b):
            out.extend([w, b])
        out.extend([self.w_pos, self.b_pos, self.w_bias, self.b_bias])
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            hidden_w=[w.copy() for w in self.hidden_w],
            hidden_b=[b.copy() for b in self.hidden_b],
            w_pos=self.w_pos.copy(),
            b_pos=self.b_pos.copy(),
            w_bias=self.w_bias.copy(),
            b_bias=self.b_bias.copy(),
        )

    @staticmethod
    def from_arrays(spec: NetworkSpec, arrays: list[np.ndarray]) -> "MlpParams":
        n_hidden = len(spec.hidden_dims)
        hw = [arrays[2 * i] for i in range(n_hidden)]
        hb = [arrays[2 * i + 1] for i in range(n_hidden)]
        w_pos, b_pos, w_bias, b_bias = arrays[2 * n_hidden:2 * n_hidden + 4]
        return MlpParams(hw, hb, w_pos, b_pos, w_bias, b_bias)


def init_params(spec: NetworkSpec, seed: int) -> MlpParams:
    """He-uniform fan-in init, biases zero.

    Weights are uniform on (-L, L) with L = sqrt(6 / fan_in), giving an
    entry std of sqrt(2 / fan_in). Draw order is fixed, so the same seed
    always yields the same parameters.
    """
    spec.validate()
    rng = np.random.default_rng(seed)

    def he(fan_in: int, fan_out: int) -> np.ndarray:
        limit = math.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    dims = (spec.input_dim,) + tuple(spec.hidden_dims)
    hidden_w = [he(dims[i], dims[i + 1]) for i in range(len(spec.hidden_dims))]
    hidden_b = [np.zeros(d) for d in spec.hidden_dims]
    last = dims[-1]
    return MlpParams(
        hidden_w=hidden_w,
        hidden_b=hidden_b,
        w_pos=he(last, spec.n_outputs),
        b_pos=np.zeros(spec.n_outputs),
        w_bias=he(last, spec.n_outputs),
        b_bias=np.zeros(spec.n_outputs),
    )


def _forward_cached(params: MlpParams, x: np.ndarray):
    acts = [x]
    h = x
    for w, b in zip(params.hidden_w, params.hidden_b):
        h = np.maximum(h @ w + b, 0.0)
        acts.append(h)
    pos = h @ params.w_pos + params.b_pos
    bias = h @ params.w_bias + params.b_bias
    return pos, bias, acts


def forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Head outputs for a (n, input_dim) batch: (positions, biases)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.hidden_w[0].shape[0]:
        raise ValueError(
            f"expected (n, {params.hidden_w[0].shape[0]}) input, got {x.shape}"
        )
    pos, bias, _ = _forward_cached(params, x)
    return pos, bias


def _residual_grad(pred: np.ndarray, target: np.ndarray, coeff: np.ndarray):
    """Norm terms and d/dpred of sum_i coeff_i ||pred_i - target_i||."""
    r = pred - target
    norms = np.sqrt(np.einsum("ij,ij->i", r, r))
    safe = np.where(norms > 0.0, norms, 1.0)
    grad = (coeff / safe)[:, None] * r          # zero rows stay zero
    return norms, grad


def loss_and_gradients(
    params: MlpParams,
    x: np.ndarray,
    pos_targets: np.ndarray,
    pos_coeff: np.ndarray,
    bias_targets: np.ndarray | None = None,
    bias_coeff: np.ndarray | None = None,
    denom: float | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Weighted residual-norm loss and exact gradients in array order.

    denom defaults to the batch size. The bias head contributes only when
    bias_targets is given; its coefficients default to ones.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if denom is None:
        denom = float(n)
    pos, bias, acts = _forward_cached(params, x)

    pos_norms, dpos = _residual_grad(pos, pos_targets, np.asarray(pos_coeff, dtype=np.float64))
    total = pos_norms @ np.asarray(pos_coeff, dtype=np.float64)
    if bias_targets is not None:
        if bias_coeff is None:
            bias_coeff = np.ones(n)
        bias_norms, dbias = _residual_grad(bias, bias_targets, np.asarray(bias_coeff, dtype=np.float64))
        total += bias_norms @ np.asarray(bias_coeff, dtype=np.float64)
    else:
        dbias = np.zeros_like(bias)
    loss = float(total / denom)
    dpos /= denom
    dbias /= denom

    h_last = acts[-1]
    grads_heads = [
        h_last.T @ dpos, dpos.sum(axis=0),
        h_last.T @ dbias, dbias.sum(axis=0),
    ]
    dh = dpos @ params.w_pos.T + dbias @ params.w_bias.T
    grads_hidden: list[np.ndarray] = []
    for i in range(len(params.hidden_w) - 1, -1, -1):
        dz = dh * (acts[i + 1] > 0.0)
        grads_hidden.insert(0, dz.sum(axis=0))              # bias grad
        grads_hidden.insert(0, acts[i].T @ dz)              # weight grad
        if i > 0:
            dh = dz @ params.hidden_w[i].T
    return loss, grads_hidden + grads_heads


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @staticmethod
    def zeros_like(params: MlpParams) -> "AdamState":
        arrays = params.arrays()
        return AdamState(
            step=0,
            m=[np.zeros_like(a) for a in arrays],
            v=[np.zeros_like(a) for a in arrays],
        )


def adam_step(
    params: MlpParams,
    state: AdamState,
    grads: list[np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for a, m, v, g in zip(params.arrays(), state.m, state.v, grads):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        a -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def cosine_lr(epoch: int, total_epochs: int, lr0: float) -> float:
    """lr0 * (1 + cos(pi * epoch / total_epochs)) / 2, floored at zero."""
    if total_epochs < 1:
        raise ValueError("total_epochs must be positive")
    value = lr0 * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))
    return max(value, 0.0)


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 5e-2
    batch_size: int = 256
    epochs: int = 150
    schedule: str = "cosine"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def validate(self) -> None:
        if self.schedule != "cosine":
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.lr0 <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("lr0, batch_size and epochs must be positive")


@dataclass(frozen=True)
class TrainingData:
    """A featurized training set with per-sample loss coefficients."""

    features: np.ndarray                 # (n, input_dim) float64
    pos_targets: np.ndarray              # (n, 2)
    pos_coeff: np.ndarray                # (n,)
    bias_targets: np.ndarray | None = None
    bias_coeff: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.features.shape[0]
        if self.pos_targets.shape[0] != n or self.pos_coeff.shape[0] != n:
            raise ValueError("targets and coefficients must match the batch")
        if (self.bias_targets is None) != (self.bias_coeff is None):
            raise ValueError("bias targets and coefficients come together")


@dataclass
class TrainedModel:
    """Weights plus training metadata; loss_history has one entry per epoch."""

    params: MlpParams
    spec: NetworkSpec
    train_config: TrainConfig
    loss_history: list[float]
    scheme: str = ""
    seed: int = 0
    config_hash: str = ""
    wall_time: float = 0.0


def train(
    params: MlpParams,
    data: TrainingData,
    config: TrainConfig,
    spec: NetworkSpec,
    epoch_callback=None,
) -> TrainedModel:
    """Minibatch Adam with a per-epoch cosine learning rate.

    Samples are reshuffled every epoch from a seeded stream, so two runs
    with identical inputs follow identical trajectories. The recorded
    epoch loss is the sample-weighted mean of its batch losses.
    epoch_callback(epoch, params), when given, runs after each epoch; it
    must not mutate the parameters.
    """
    import time as _time

    config.validate()
    n = data.features.shape[0]
    if n == 0:
        raise ValueError("training data is empty")
    state = AdamState.zeros_like(params)
    shuffle_rng = np.random.default_rng([config.seed, 0xE0C])
    history: list[float] = []
    t0 = _time.perf_counter()
    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config.epochs, config.lr0)
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_gradients(
                params,
                data.features[idx],
                data.pos_targets[idx],
                data.pos_coeff[idx],
                None if data.bias_targets is None else data.bias_targets[idx],
                None if data.bias_coeff is None else data.bias_coeff[idx],
            )
            if not math.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss} at epoch {epoch} batch {start // config.batch_size}"
                )
            adam_step(params, state, grads, lr, config.beta1, config.beta2, config.eps)
            epoch_loss += loss * idx.size
        history.append(epoch_loss / n)
        if epoch_callback is not None:
            epoch_callback(epoch, params)
    return TrainedModel(
        params=params,
        spec=spec,
        train_config=config,
        loss_history=history,
        seed=config.seed,
        wall_time=_time.perf_counter() - t0,
    )


_MODEL_MAGIC = b"SSLW"
_MODEL_HEADER = struct.Struct("<4sII")


def save_model(model: TrainedModel, path: str) -> None:
    """Binary checkpoint: JSON header, then float64 arrays in canonical
    order. Loss history goes to a JSON sidecar."""
    header = {
        "input_dim": model.spec.input_dim,
        "hidden_dims": list(model.spec.hidden_dims),
        "n_outputs": model.spec.n_outputs,
        "scheme": model.scheme,
        "seed": model.seed,
        "config_hash": model.config_hash,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(_MODEL_HEADER.pack(_MODEL_MAGIC, 1, len(blob)))
        f.write(blob)
        for a in model.params.arrays():
            f.write(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    with open(path + ".history.json", "w") as f:
        json.dump({"loss_history": model.loss_history}, f)
        f.write("\n")


def load_model(path: str) -> TrainedModel:
    with open(path, "rb") as f:
        raw = f.read()
    magic, version, blob_len = _MODEL_HEADER.unpack_from(raw, 0)
    if magic != _MODEL_MAGIC or version != 1:
        raise ValueError(f"{path}: not a model checkpoint")
    header = json.loads(raw[_MODEL_HEADER.size:_MODEL_HEADER.size + blob_len])
    spec = NetworkSpec(
        input_dim=header["input_dim"],
        hidden_dims=tuple(header["hidden_dims"]),
        n_outputs=header["n_outputs"],
    )
    dims = (spec.input_dim,) + tuple(spec.hidden_dims)
    shapes: list[tuple[int, ...]] = []
    for i in range(len(spec.hidden_dims)):
        shapes.extend([(dims[i], dims[i + 1]), (dims[i + 1],)])
    shapes.extend([
        (dims[-1], spec.n_outputs), (spec.n_outputs,),
        (dims[-1], spec.n_outputs), (spec.n_outputs,),
    ])
    off = _MODEL_HEADER.size + blob_len
    arrays = []
    for shp in shapes:
        count = int(np.prod(shp))
        arrays.append(
            np.frombuffer(raw, dtype=np.float64, count=count, offset=off).reshape(shp).copy()
        )
        off += count * 8
    history = []
    try:
        with open(path + ".history.json") as f:
            history = json.load(f).get("loss_history", [])
    except FileNotFoundError:
        pass
    return TrainedModel(
        params=MlpParams.from_arrays(spec, arrays),
        spec=spec,
        train_config=TrainConfig(),
        loss_history=history,
        scheme=header.get("scheme", ""),
        seed=header.get("seed", 0),
        config_hash=header.get("config_hash", ""),
    )
