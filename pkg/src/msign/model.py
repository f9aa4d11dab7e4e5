"""A tiny fully-connected classifier implemented directly on numpy.

Rectified-linear hidden layers, softmax output, mean cross-entropy loss,
full-batch gradient descent.  Models are immutable values: training and
editing return new instances, which keeps federated rounds and watermark
embedding reproducible and side-effect free.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

MODEL_MAGIC = b"MSM1"

# Default scenario architecture and a deeper variant with two extra hidden
# layers, used to probe how capacity grows with parameter count.
DEFAULT_ARCH = (16, 32, 16, 4)
DEEP_ARCH = (16, 48, 32, 32, 16, 4)


class InvalidConfig(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class EvalMetric:
    accuracy: float


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus integer labels; ``weight`` is the sample count."""

    inputs: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.labels.ndim != 1:
            raise InvalidConfig("inputs must be (n, d), labels (n,)")
        if len(self.inputs) != len(self.labels):
            raise InvalidConfig("inputs and labels disagree on sample count")

    @property
    def weight(self) -> int:
        return len(self.inputs)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx])


def layer_shapes_from_dims(dims: tuple[int, ...]) -> tuple[tuple[int, int], ...]:
    return tuple((dims[i], dims[i + 1]) for i in range(len(dims) - 1))


def param_count(layer_shapes: tuple[tuple[int, int], ...]) -> int:
    return sum(fi * fo + fo for fi, fo in layer_shapes)


@dataclass(frozen=True)
class ToyModel:
    """Flat float64 parameter vector plus the layer shapes to unpack it."""

    layer_shapes: tuple[tuple[int, int], ...]
    params: np.ndarray

    def __post_init__(self):
        if self.params.dtype != np.float64 or self.params.ndim != 1:
            raise InvalidConfig("params must be a flat float64 vector")
        if len(self.params) != param_count(self.layer_shapes):
            raise DimensionMismatch(
                f"params length {len(self.params)} does not match shapes "
                f"{self.layer_shapes}"
            )

    @property
    def input_dim(self) -> int:
        return self.layer_shapes[0][0]

    @property
    def num_classes(self) -> int:
        return self.layer_shapes[-1][1]

    @property
    def num_params(self) -> int:
        return len(self.params)

    def with_params(self, params: np.ndarray) -> "ToyModel":
        return ToyModel(self.layer_shapes, np.asarray(params, dtype=np.float64))

    def unpack(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views of (weight, bias) per layer over the flat vector."""
        out = []
        offset = 0
        for fan_in, fan_out in self.layer_shapes:
            w = self.params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = self.params[offset : offset + fan_out]
            offset += fan_out
            out.append((w, b))
        return out

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        """Class probabilities, rows summing to one."""
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if x.shape[1] != self.input_dim:
            raise DimensionMismatch(
                f"input dim {x.shape[1]} != model dim {self.input_dim}"
            )
        layers = self.unpack()
        for w, b in layers[:-1]:
            x = np.maximum(x @ w + b, 0.0)
        w, b = layers[-1]
        logits = x @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        return exp / exp.sum(axis=1, keepdims=True)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward(inputs), axis=1)


def init_model(dims: tuple[int, ...], seed: int | np.random.Generator) -> ToyModel:
    """Fresh model with scaled-normal weights and zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shapes = layer_shapes_from_dims(dims)
    chunks = []
    for fan_in, fan_out in shapes:
        scale = np.sqrt(2.0 / fan_in)
        chunks.append(rng.normal(0.0, scale, fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return ToyModel(shapes, np.concatenate(chunks))


def make_synthetic_task(
    num_classes: int,
    dim: int,
    n_per_class: int,
    seed: int,
    mean_scale: float = 3.0,
    test_per_class: int | None = None,
) -> tuple[Dataset, Dataset]:
    """Class-balanced Gaussian-blob data with a disjoint held-out split.

    Class means sit on scaled coordinate axes so separation (and hence the
    attainable accuracy) is stable across seeds.
    """
    if num_classes < 2 or dim < 2:
        raise InvalidConfig("need num_classes >= 2 and dim >= 2")
    if n_per_class <= 0:
        raise InvalidConfig("n_per_class must be positive")
    if num_classes > dim:
        raise InvalidConfig("axis-aligned means need num_classes <= dim")
    if test_per_class is None:
        test_per_class = max(25, n_per_class // 5)

    rng = np.random.default_rng(seed)
    means = np.zeros((num_classes, dim))
    for c in range(num_classes):
        means[c, c] = mean_scale

    def sample(per_class: int) -> Dataset:
        xs, ys = [], []
        for c in range(num_classes):
            xs.append(rng.normal(0.0, 1.0, (per_class, dim)) + means[c])
            ys.append(np.full(per_class, c, dtype=np.int64))
        inputs = np.concatenate(xs)
        labels = np.concatenate(ys)
        order = rng.permutation(len(inputs))
        return Dataset(inputs[order], labels[order])

    return sample(n_per_class), sample(test_per_class)


def _forward_cache(model: ToyModel, inputs: np.ndarray):
    activations = [inputs]
    layers = model.unpack()
    x = inputs
    for w, b in layers[:-1]:
        x = np.maximum(x @ w + b, 0.0)
        activations.append(x)
    w, b = layers[-1]
    logits = x @ w + b
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return activations, probs


def loss(model: ToyModel, data: Dataset) -> float:
    """Mean cross-entropy of the true labels."""
    _, probs = _forward_cache(model, data.inputs)
    picked = probs[np.arange(len(data.labels)), data.labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))


def local_gradient(model: ToyModel, data: Dataset) -> np.ndarray:
    """Full-batch gradient of the mean cross-entropy, flat like params."""
    if data.dim != model.input_dim:
        raise DimensionMismatch("data dimension does not match model input")
    n = data.weight
    activations, probs = _forward_cache(model, data.inputs)
    delta = probs.copy()
    delta[np.arange(n), data.labels] -= 1.0
    delta /= n

    layers = model.unpack()
    grads: list[np.ndarray] = [np.empty(0)] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        gw = activations[i].T @ delta
        gb = delta.sum(axis=0)
        grads[i] = np.concatenate([gw.ravel(), gb])
        if i > 0:
            delta = (delta @ w.T) * (activations[i] > 0)
    return np.concatenate(grads)


def train(model: ToyModel, data: Dataset, epochs: int, lr: float) -> ToyModel:
    """Deterministic full-batch gradient descent; returns the updated model."""
    if data.dim != model.input_dim:
        raise DimensionMismatch("data dimension does not match model input")
    params = model.params.copy()
    current = model
    for _ in range(epochs):
        params = params - lr * local_gradient(current, data)
        current = model.with_params(params)
    return current


def evaluate(model: ToyModel, test: Dataset) -> EvalMetric:
    """Fraction of argmax-correct predictions on the held-out set."""
    preds = model.predict(test.inputs)
    return EvalMetric(accuracy=float(np.mean(preds == test.labels)))


# ---------------------------------------------------------------------------
# Self-describing binary save format
# ---------------------------------------------------------------------------


def model_bytes(model: ToyModel) -> bytes:
    """Magic, shape table, then the little-endian float64 parameter array."""
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    buf.write(struct.pack("<H", len(model.layer_shapes)))
    for fan_in, fan_out in model.layer_shapes:
        buf.write(struct.pack("<II", fan_in, fan_out))
    buf.write(model.params.astype("<f8").tobytes())
    return buf.getvalue()


def model_from_bytes(data: bytes) -> ToyModel:
    if data[:4] != MODEL_MAGIC:
        raise ValueError("not a serialized model (bad magic)")
    (n_layers,) = struct.unpack_from("<H", data, 4)
    offset = 6
    shapes = []
    for _ in range(n_layers):
        fan_in, fan_out = struct.unpack_from("<II", data, offset)
        shapes.append((fan_in, fan_out))
        offset += 8
    params = np.frombuffer(data[offset:], dtype="<f8").astype(np.float64)
    return ToyModel(tuple(shapes), params)


def save_model(model: ToyModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_bytes(model))


def load_model(path) -> ToyModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
