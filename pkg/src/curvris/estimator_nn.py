"""Feedforward regressor mapping normalized power vectors to surface coefficients.

A plain numpy implementation: three ReLU hidden layers (128, 64, 32), a
linear 5-unit output, mean-squared-error loss, Adam updates, and early
stopping on the validation loss.  Everything is deterministic given the
generator passed to :func:`train`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError
from .geometry import SurfaceCoeffs
from .measurement import Dataset, MinMaxScaler

MODEL_MAGIC = b"RISMLP01"
HIDDEN_SIZES = (128, 64, 32)
OUTPUT_SIZE = 5

__all__ = [
    "MlpParams",
    "AdamState",
    "TrainConfig",
    "TrainHistory",
    "TrainedModel",
    "EarlyStopping",
    "init_params",
    "mlp_forward",
    "mlp_backward",
    "adam_step",
    "train",
    "predict",
    "mean_squared_error",
    "per_parameter_mse",
    "save_model",
    "load_model",
]


@dataclass
class MlpParams:
    """Layer weights (out x in) and biases; also reused as a gradient container."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m: MlpParams
    v: MlpParams
    step: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params: MlpParams, learning_rate: float = 0.001) -> "AdamState":
        zero = lambda: MlpParams(
            [np.zeros_like(w) for w in params.weights],
            [np.zeros_like(b) for b in params.biases],
        )
        return cls(m=zero(), v=zero(), learning_rate=learning_rate)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 500
    batch_size: int = 100
    patience: int = 50
    learning_rate: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if min(self.max_epochs, self.batch_size, self.patience) < 1:
            raise ValueError("epochs, batch size, and patience must be positive")


@dataclass
class TrainHistory:
    train_mse: list[float]
    val_mse: list[float]
    best_epoch: int  # 1-based
    stopped_early: bool

    @property
    def n_epochs(self) -> int:
        return len(self.val_mse)


class EarlyStopping:
    """Stop after ``patience`` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_value = np.inf
        self.best_epoch = 0
        self.epoch = 0
        self.stale = 0

    def update(self, value: float) -> bool:
        """Record one epoch's validation loss; True means stop now."""
        self.epoch += 1
        if value < self.best_value:
            self.best_value = value
            self.best_epoch = self.epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def init_params(input_dim: int, rng: np.random.Generator,
                hidden_sizes: tuple[int, ...] = HIDDEN_SIZES) -> MlpParams:
    """He-style uniform fan-in initialization, biases at zero."""
    sizes = (input_dim,) + tuple(hidden_sizes) + (OUTPUT_SIZE,)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases)


def _forward_pass(params: MlpParams, x: np.ndarray):
    """Return (pre-activations, activations) for a (B, D) batch."""
    pre, act = [], [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        act.append(h)
    return pre, act


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Network output; a (D,) input yields a (5,) output, a (B, D) batch a (B, 5)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.shape[1] != params.input_dim:
        raise ValueError(f"expected input dim {params.input_dim}, got {batch.shape[1]}")
    _, act = _forward_pass(params, batch)
    return act[-1][0] if single else act[-1]


def mlp_backward(params: MlpParams, inputs, targets) -> tuple[MlpParams, float]:
    """Gradients of the batch MSE (mean over samples and the 5 outputs).

    The ReLU subgradient at exactly 0 is taken as 0.  Returns the gradient
    container (same shapes as the parameters) and the batch loss.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    if x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValueError("batch inputs and targets must be non-empty and aligned")
    pre, act = _forward_pass(params, x)
    err = act[-1] - y
    loss = float(np.mean(err**2))

    d_ws = [np.empty(0)] * len(params.weights)
    d_bs = [np.empty(0)] * len(params.biases)
    delta = 2.0 * err / err.size
    for i in range(len(params.weights) - 1, -1, -1):
        d_ws[i] = delta.T @ act[i]
        d_bs[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * (pre[i - 1] > 0.0)
    return MlpParams(weights=d_ws, biases=d_bs), loss


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState
              ) -> tuple[MlpParams, AdamState]:
    """One Adam update with bias-corrected moments; inputs are left untouched."""
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    new_w, new_b = [], []
    new_m = MlpParams([], [])
    new_v = MlpParams([], [])
    for attr, out in (("weights", new_w), ("biases", new_b)):
        for p, g, m, v in zip(getattr(params, attr), getattr(grads, attr),
                              getattr(state.m, attr), getattr(state.v, attr)):
            m_next = state.beta1 * m + (1.0 - state.beta1) * g
            v_next = state.beta2 * v + (1.0 - state.beta2) * g * g
            update = state.learning_rate * (m_next / c1) / (np.sqrt(v_next / c2) + state.epsilon)
            out.append(p - update)
            getattr(new_m, attr).append(m_next)
            getattr(new_v, attr).append(v_next)
    next_state = AdamState(
        m=new_m, v=new_v, step=t, learning_rate=state.learning_rate,
        beta1=state.beta1, beta2=state.beta2, epsilon=state.epsilon,
    )
    return MlpParams(weights=new_w, biases=new_b), next_state


def mean_squared_error(params: MlpParams, dataset: Dataset) -> float:
    pred = mlp_forward(params, dataset.inputs)
    return float(np.mean((pred - dataset.targets) ** 2))


def per_parameter_mse(params: MlpParams, dataset: Dataset) -> np.ndarray:
    """MSE of each of the 5 output coefficients separately, shape (5,)."""
    pred = mlp_forward(params, dataset.inputs)
    return np.mean((pred - dataset.targets) ** 2, axis=0)


def train(train_set: Dataset, val_set: Dataset, config: TrainConfig,
          rng: np.random.Generator) -> tuple[MlpParams, TrainHistory]:
    """Mini-batch Adam training with validation-based early stopping.

    Batches are reshuffled every epoch from ``rng``; after each epoch the full
    validation MSE is evaluated.  Returns the parameter snapshot of the best
    (earliest-minimum) validation epoch together with the loss history.
    """
    if train_set.n_samples == 0 or val_set.n_samples == 0:
        raise ValueError("training and validation partitions must be non-empty")
    if train_set.input_dim != val_set.input_dim:
        raise ValueError("partitions disagree on input dimension")

    params = init_params(train_set.input_dim, rng)
    state = AdamState.zeros_like(params, learning_rate=config.learning_rate)
    stopper = EarlyStopping(config.patience)
    best_params = params.copy()
    train_hist: list[float] = []
    val_hist: list[float] = []
    stopped_early = False

    n = train_set.n_samples
    for _ in range(config.max_epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            grads, loss = mlp_backward(params, train_set.inputs[idx], train_set.targets[idx])
            params, state = adam_step(params, grads, state)
            loss_sum += loss * idx.size
        train_hist.append(loss_sum / n)

        val_mse = mean_squared_error(params, val_set)
        val_hist.append(val_mse)
        improved = val_mse < stopper.best_value
        stop = stopper.update(val_mse)
        if improved:
            best_params = params.copy()
        if stop:
            stopped_early = True
            break

    history = TrainHistory(
        train_mse=train_hist,
        val_mse=val_hist,
        best_epoch=stopper.best_epoch,
        stopped_early=stopped_early,
    )
    return best_params, history


def predict(params: MlpParams, scaler: MinMaxScaler, raw_powers) -> SurfaceCoeffs:
    """Normalize a raw power vector with the model's scaler and regress."""
    raw = np.asarray(raw_powers, dtype=float).reshape(-1)
    if raw.size != scaler.mins.size:
        raise ValueError(
            f"power vector has dim {raw.size}, scaler expects {scaler.mins.size}"
        )
    return SurfaceCoeffs.from_array(mlp_forward(params, scaler.transform(raw)))


@dataclass(frozen=True)
class TrainedModel:
    """A parameter snapshot bundled with the scaler it was trained behind."""

    params: MlpParams
    scaler: MinMaxScaler

    @property
    def input_dim(self) -> int:
        return self.params.input_dim

    def predict(self, raw_powers) -> SurfaceCoeffs:
        return predict(self.params, self.scaler, raw_powers)


def save_model(model: TrainedModel, path) -> None:
    """Model file: header (magic, input dim, layer sizes), the scaler rows,
    then every layer's weights and bias as little-endian float64."""
    params = model.params
    sizes = params.layer_sizes
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sII", MODEL_MAGIC, params.input_dim, len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        fh.write(np.vstack([model.scaler.mins, model.scaler.maxs]).astype("<f8").tobytes())
        for w, b in zip(params.weights, params.biases):
            fh.write(w.astype("<f8").tobytes())
            fh.write(b.astype("<f8").tobytes())


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise DataFormatError(f"{path}: truncated model header")
        magic, input_dim, n_layers = struct.unpack("<8sII", header)
        if magic != MODEL_MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r}")
        raw_sizes = fh.read(4 * n_layers)
        if len(raw_sizes) != 4 * n_layers:
            raise DataFormatError(f"{path}: truncated layer sizes")
        sizes = struct.unpack(f"<{n_layers}I", raw_sizes)

        def read_floats(count):
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise DataFormatError(f"{path}: truncated model payload")
            return np.frombuffer(raw, dtype="<f8").astype(float)

        scaler = MinMaxScaler(mins=read_floats(input_dim), maxs=read_floats(input_dim))
        weights, biases = [], []
        fan_in = input_dim
        for size in sizes:
            weights.append(read_floats(size * fan_in).reshape(size, fan_in))
            biases.append(read_floats(size))
            fan_in = size
        if fh.read(1):
            raise DataFormatError(f"{path}: trailing bytes after model payload")
    return TrainedModel(params=MlpParams(weights=weights, biases=biases), scaler=scaler)
