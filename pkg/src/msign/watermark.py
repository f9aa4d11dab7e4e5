"""Key generation and the three watermarking schemes.

A scheme turns (model, key) into (marked model, verifier specification).
The verifier spec fully determines later verification: it names the scheme,
its parameters, and an acceptance threshold, and has a canonical encoding
so it can be hashed into broadcast trees as evidence.

Schemes:

* weight marks  -- a key-seeded PRF picks parameter slots and target values
  in [-0.5, 0.5]; those slots are overwritten.  Verification re-derives the
  slots and checks the values are still there.
* trigger marks -- the PRF generates out-of-distribution input patterns and
  labels; the model is tuned until it classifies them as assigned.
* autoencoder triggers -- trigger inputs come from the decoder of an
  averaged, author-trained autoencoder, so they live near the data manifold
  and different keys produce structurally unrelated triggers.

All key-derived randomness is hash-counter output over the key seed with a
purpose tag, so embedding and verification are reproducible everywhere.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .crypto import (
    TAG_KEY,
    TAG_VERIFIER_SPEC,
    _Reader,
    _blob,
    _text,
    _u8,
    _u16,
    _u32,
    hash0,
)
from .model import Dataset, ToyModel, local_gradient


class WeakSecurityParam(ValueError):
    pass


class ModelTooSmall(ValueError):
    pass


class SchemeMismatch(TypeError):
    pass


class EmbedFailed(RuntimeError):
    pass


class ShapeMismatch(ValueError):
    pass


class EmptyList(ValueError):
    pass


class DimMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# Keys and the derivation PRF
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Key:
    """An author's identity secret: 32-byte seed plus its owner's id."""

    seed: bytes
    author_id: str

    def __post_init__(self):
        if len(self.seed) != 32:
            raise ValueError("key seed must be 32 bytes")

    def canonical_bytes(self) -> bytes:
        return _u8(TAG_KEY) + _blob(self.seed) + _text(self.author_id)

    @classmethod
    def from_canonical(cls, data: bytes) -> "Key":
        r = _Reader(data)
        if r.u8() != TAG_KEY:
            raise ValueError("not a key encoding")
        seed = r.blob()
        author_id = r.text()
        r.done()
        return cls(seed=seed, author_id=author_id)


@dataclass(frozen=True)
class SurveillanceKey(Key):
    """Aggregator-only tracing key; never sent to the author it watches."""


def gen(security_param: int, rng: np.random.Generator, author_id: str = "") -> Key:
    """Fresh key with ``security_param`` bits of entropy from ``rng``."""
    if security_param < 128:
        raise WeakSecurityParam(f"security parameter {security_param} < 128")
    material = rng.bytes(security_param // 8)
    return Key(seed=hash0(material), author_id=author_id)


def gen_surveillance(
    security_param: int, rng: np.random.Generator, author_id: str
) -> SurveillanceKey:
    base = gen(security_param, rng, author_id)
    return SurveillanceKey(seed=base.seed, author_id=base.author_id)


def prf_blocks(seed: bytes, purpose: bytes, n_blocks: int) -> bytes:
    """Hash-counter keystream: block i is hash0(seed | purpose | i)."""
    return b"".join(
        hash0(seed + purpose + i.to_bytes(4, "little")) for i in range(n_blocks)
    )


def prf_u64(seed: bytes, purpose: bytes, count: int) -> np.ndarray:
    raw = prf_blocks(seed, purpose, (count + 3) // 4)
    return np.frombuffer(raw, dtype="<u8")[:count]


def prf_floats(
    seed: bytes, purpose: bytes, count: int, low: float, high: float
) -> np.ndarray:
    units = prf_u64(seed, purpose, count).astype(np.float64) / 2.0**64
    return low + units * (high - low)


def prf_ints(seed: bytes, purpose: bytes, count: int, modulus: int) -> np.ndarray:
    return (prf_u64(seed, purpose, count) % modulus).astype(np.int64)


def prf_indices(seed: bytes, purpose: bytes, count: int, modulus: int) -> np.ndarray:
    """``count`` distinct indices in [0, modulus), in derivation order."""
    if count > modulus:
        raise ValueError("cannot draw more distinct indices than the modulus")
    out: list[int] = []
    seen: set[int] = set()
    block = 0
    while len(out) < count:
        for v in prf_u64(seed, purpose + b"#" + block.to_bytes(4, "little"), 16):
            idx = int(v % modulus)
            if idx not in seen:
                seen.add(idx)
                out.append(idx)
                if len(out) == count:
                    break
        block += 1
    return np.array(out, dtype=np.int64)


# ---------------------------------------------------------------------------
# Verifier specifications
# ---------------------------------------------------------------------------


class SchemeId(str, Enum):
    WEIGHTMARK = "weightmark"
    TRIGGERMARK = "triggermark"
    ATGFMARK = "atgfmark"


_SCHEME_CODES = {SchemeId.WEIGHTMARK: 1, SchemeId.TRIGGERMARK: 2, SchemeId.ATGFMARK: 3}
_CODE_SCHEMES = {v: k for k, v in _SCHEME_CODES.items()}


def _f64(v: float) -> bytes:
    return struct.pack("<d", v)


@dataclass(frozen=True)
class WeightMarkParams:
    n_marked: int
    tolerance: float
    param_count: int


@dataclass(frozen=True)
class TriggerMarkParams:
    n_triggers: int
    input_dim: int
    num_classes: int
    low: float
    high: float
    trigger_digests: tuple[bytes, ...]


@dataclass(frozen=True)
class AtgfMarkParams:
    n_triggers: int
    input_dim: int
    num_classes: int
    trigger_digests: tuple[bytes, ...]
    generator: "AtgfGenerator"


@dataclass(frozen=True)
class VerifierSpec:
    """Names a scheme, its parameters and the acceptance threshold."""

    scheme_id: SchemeId
    threshold: float
    params: WeightMarkParams | TriggerMarkParams | AtgfMarkParams

    def canonical_bytes(self) -> bytes:
        out = [
            _u8(TAG_VERIFIER_SPEC),
            _u8(_SCHEME_CODES[self.scheme_id]),
            _f64(self.threshold),
        ]
        p = self.params
        if self.scheme_id is SchemeId.WEIGHTMARK:
            out += [_u32(p.n_marked), _f64(p.tolerance), _u32(p.param_count)]
        elif self.scheme_id is SchemeId.TRIGGERMARK:
            out += [
                _u32(p.n_triggers),
                _u32(p.input_dim),
                _u32(p.num_classes),
                _f64(p.low),
                _f64(p.high),
                _u16(len(p.trigger_digests)),
            ]
            out += list(p.trigger_digests)
        else:
            out += [
                _u32(p.n_triggers),
                _u32(p.input_dim),
                _u32(p.num_classes),
                _u16(len(p.trigger_digests)),
            ]
            out += list(p.trigger_digests)
            out.append(p.generator.canonical_bytes())
        return b"".join(out)

    @classmethod
    def from_canonical(cls, data: bytes) -> "VerifierSpec":
        r = _Reader(data)
        if r.u8() != TAG_VERIFIER_SPEC:
            raise ValueError("not a verifier-spec encoding")
        scheme = _CODE_SCHEMES[r.u8()]
        threshold = struct.unpack("<d", r.take(8))[0]
        if scheme is SchemeId.WEIGHTMARK:
            params = WeightMarkParams(
                n_marked=r.u32(),
                tolerance=struct.unpack("<d", r.take(8))[0],
                param_count=r.u32(),
            )
        elif scheme is SchemeId.TRIGGERMARK:
            n, dim, classes = r.u32(), r.u32(), r.u32()
            low, high = struct.unpack("<dd", r.take(16))
            digests = tuple(r.take(32) for _ in range(r.u16()))
            params = TriggerMarkParams(n, dim, classes, low, high, digests)
        else:
            n, dim, classes = r.u32(), r.u32(), r.u32()
            digests = tuple(r.take(32) for _ in range(r.u16()))
            generator = AtgfGenerator.read_canonical(r)
            params = AtgfMarkParams(n, dim, classes, digests, generator)
        r.done()
        return cls(scheme_id=scheme, threshold=threshold, params=params)


# ---------------------------------------------------------------------------
# Weight marks
# ---------------------------------------------------------------------------

WEIGHTMARK_TOLERANCE = 1e-3
WEIGHTMARK_THRESHOLD = 0.9


def embed_weightmark(
    model: ToyModel,
    key: Key,
    n_marked: int = 20,
    tolerance: float = WEIGHTMARK_TOLERANCE,
    threshold: float = WEIGHTMARK_THRESHOLD,
) -> tuple[ToyModel, VerifierSpec]:
    """Overwrite ``n_marked`` key-selected parameters with key-derived values."""
    if model.num_params <= n_marked:
        raise ModelTooSmall(
            f"model has {model.num_params} params, need more than {n_marked}"
        )
    idx = prf_indices(key.seed, b"wm/idx", n_marked, model.num_params)
    vals = prf_floats(key.seed, b"wm/val", n_marked, -0.5, 0.5)
    params = model.params.copy()
    params[idx] = vals
    spec = VerifierSpec(
        scheme_id=SchemeId.WEIGHTMARK,
        threshold=threshold,
        params=WeightMarkParams(
            n_marked=n_marked, tolerance=tolerance, param_count=model.num_params
        ),
    )
    return model.with_params(params), spec


def verify_weightmark(model: ToyModel, key: Key, spec: VerifierSpec) -> bool:
    if spec.scheme_id is not SchemeId.WEIGHTMARK:
        raise SchemeMismatch(f"expected weightmark spec, got {spec.scheme_id}")
    p = spec.params
    if model.num_params != p.param_count:
        return False
    idx = prf_indices(key.seed, b"wm/idx", p.n_marked, p.param_count)
    vals = prf_floats(key.seed, b"wm/val", p.n_marked, -0.5, 0.5)
    hits = np.abs(model.params[idx] - vals) <= p.tolerance
    return bool(np.mean(hits) >= spec.threshold)


# ---------------------------------------------------------------------------
# Random-pattern trigger marks
# ---------------------------------------------------------------------------

TRIGGER_THRESHOLD = 0.8
TRIGGER_LOW = -4.0
TRIGGER_HIGH = 4.0
# Confidence the tuned model must reach on each trigger before embedding
# stops; plain argmax fit leaves margins too thin to survive later tuning.
TRIGGER_FIT_CONFIDENCE = 0.6


def make_random_triggers(
    key: Key,
    n_triggers: int,
    input_dim: int,
    num_classes: int,
    low: float = TRIGGER_LOW,
    high: float = TRIGGER_HIGH,
) -> tuple[np.ndarray, np.ndarray]:
    inputs = prf_floats(
        key.seed, b"trig/x", n_triggers * input_dim, low, high
    ).reshape(n_triggers, input_dim)
    labels = prf_ints(key.seed, b"trig/y", n_triggers, num_classes)
    return inputs, labels


def trigger_digests(inputs: np.ndarray, labels: np.ndarray) -> tuple[bytes, ...]:
    return tuple(
        hash0(b"trigger" + x.astype("<f8").tobytes() + int(y).to_bytes(4, "little"))
        for x, y in zip(inputs, labels)
    )


def fit_triggers(
    model: ToyModel,
    inputs: np.ndarray,
    labels: np.ndarray,
    replay: Dataset | None,
    epochs: int,
    lr: float,
    confidence: float = TRIGGER_FIT_CONFIDENCE,
) -> tuple[ToyModel, bool]:
    """Gradient steps until every trigger is confidently classified.

    Returns (tuned model, fitted flag).  With a replay set, its gradient is
    added so the primary task is rehearsed while the triggers are learned.
    """
    trig = Dataset(inputs, labels.astype(np.int64))
    current = model
    rows = np.arange(len(labels))
    for _ in range(epochs):
        probs = current.forward(inputs)
        assigned = probs[rows, labels]
        if (np.argmax(probs, axis=1) == labels).all() and (
            assigned >= confidence
        ).all():
            return current, True
        grad = local_gradient(current, trig)
        if replay is not None:
            grad = grad + local_gradient(current, replay)
        current = current.with_params(current.params - lr * grad)
    probs = current.forward(inputs)
    fitted = bool(
        (np.argmax(probs, axis=1) == labels).all()
        and (probs[rows, labels] >= confidence).all()
    )
    return current, fitted


def _trigger_fraction(model: ToyModel, inputs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(model.predict(inputs) == labels))


def embed_triggermark(
    model: ToyModel,
    key: Key,
    n_triggers: int = 5,
    tune_epochs: int = 200,
    lr: float = 0.1,
    replay: Dataset | None = None,
    threshold: float = TRIGGER_THRESHOLD,
    low: float = TRIGGER_LOW,
    high: float = TRIGGER_HIGH,
) -> tuple[ToyModel, VerifierSpec]:
    """Tune the model to classify key-derived random patterns as assigned."""
    inputs, labels = make_random_triggers(
        key, n_triggers, model.input_dim, model.num_classes, low, high
    )
    tuned, _ = fit_triggers(model, inputs, labels, replay, tune_epochs, lr)
    if _trigger_fraction(tuned, inputs, labels) < threshold:
        raise EmbedFailed(
            f"trigger accuracy below {threshold} after {tune_epochs} epochs"
        )
    spec = VerifierSpec(
        scheme_id=SchemeId.TRIGGERMARK,
        threshold=threshold,
        params=TriggerMarkParams(
            n_triggers=n_triggers,
            input_dim=model.input_dim,
            num_classes=model.num_classes,
            low=low,
            high=high,
            trigger_digests=trigger_digests(inputs, labels),
        ),
    )
    return tuned, spec


def verify_triggermark(model: ToyModel, key: Key, spec: VerifierSpec) -> bool:
    if spec.scheme_id is not SchemeId.TRIGGERMARK:
        raise SchemeMismatch(f"expected triggermark spec, got {spec.scheme_id}")
    p = spec.params
    inputs, labels = make_random_triggers(
        key, p.n_triggers, p.input_dim, p.num_classes, p.low, p.high
    )
    # The spec commits to the triggers; a key that derives different ones
    # cannot be the key this spec was issued for.
    if trigger_digests(inputs, labels) != p.trigger_digests:
        return False
    if model.input_dim != p.input_dim or model.num_classes != p.num_classes:
        return False
    return _trigger_fraction(model, inputs, labels) >= spec.threshold


# ---------------------------------------------------------------------------
# Autoencoder-generated triggers
# ---------------------------------------------------------------------------

AE_DIMS = (16, 8, 4, 8, 16)
ATGF_CODE_LOW = 0.0
ATGF_CODE_HIGH = 2.0


def _mlp_forward(
    params: np.ndarray, dims: tuple[int, ...], x: np.ndarray, relu_last: bool
) -> np.ndarray:
    offset = 0
    n_layers = len(dims) - 1
    for i in range(n_layers):
        fan_in, fan_out = dims[i], dims[i + 1]
        w = params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        x = x @ w + b
        if i < n_layers - 1 or relu_last:
            x = np.maximum(x, 0.0)
    return x


def _mlp_param_count(dims: tuple[int, ...]) -> int:
    return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


@dataclass(frozen=True)
class Autoencoder:
    """Hourglass MLP with rectified hidden layers and a linear output."""

    layer_dims: tuple[int, ...]
    params: np.ndarray

    @property
    def bottleneck_pos(self) -> int:
        return int(np.argmin(self.layer_dims))

    @property
    def bottleneck_dim(self) -> int:
        return min(self.layer_dims)

    def split_params(self) -> tuple[np.ndarray, np.ndarray]:
        enc_dims = self.layer_dims[: self.bottleneck_pos + 1]
        cut = _mlp_param_count(enc_dims)
        return self.params[:cut], self.params[cut:]

    def encode(self, x: np.ndarray) -> np.ndarray:
        enc, _ = self.split_params()
        return _mlp_forward(
            enc, self.layer_dims[: self.bottleneck_pos + 1], x, relu_last=True
        )

    def decode(self, z: np.ndarray) -> np.ndarray:
        _, dec = self.split_params()
        return _mlp_forward(dec, self.layer_dims[self.bottleneck_pos :], z, relu_last=False)

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        return self.decode(self.encode(x))


def _ae_gradient(ae: Autoencoder, x: np.ndarray) -> np.ndarray:
    """Backprop of mean squared reconstruction error over the flat params."""
    dims = ae.layer_dims
    n_layers = len(dims) - 1
    weights, biases, acts = [], [], [x]
    offset = 0
    h = x
    for i in range(n_layers):
        fan_in, fan_out = dims[i], dims[i + 1]
        w = ae.params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = ae.params[offset : offset + fan_out]
        offset += fan_out
        weights.append(w)
        biases.append(b)
        h = h @ w + b
        if i < n_layers - 1:
            h = np.maximum(h, 0.0)
        acts.append(h)

    n = len(x)
    delta = 2.0 * (acts[-1] - x) / (n * dims[-1])
    grads: list[np.ndarray] = [np.empty(0)] * n_layers
    for i in range(n_layers - 1, -1, -1):
        gw = acts[i].T @ delta
        gb = delta.sum(axis=0)
        grads[i] = np.concatenate([gw.ravel(), gb])
        if i > 0:
            delta = (delta @ weights[i].T) * (acts[i] > 0)
    return np.concatenate(grads)


def train_autoencoder(
    inputs: np.ndarray,
    layer_dims: tuple[int, ...] = AE_DIMS,
    epochs: int = 800,
    lr: float = 0.1,
    seed: int | np.random.Generator = 0,
) -> Autoencoder:
    """Full-batch reconstruction training from a seed-determined init.

    Authors that share the init seed stay in the same basin, so their
    trained parameters average into a working autoencoder.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    chunks = []
    for i in range(len(layer_dims) - 1):
        fan_in, fan_out = layer_dims[i], layer_dims[i + 1]
        chunks.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), fan_in * fan_out))
        # small positive biases keep rectified units alive early on
        chunks.append(np.full(fan_out, 0.1))
    ae = Autoencoder(layer_dims, np.concatenate(chunks))
    for _ in range(epochs):
        ae = Autoencoder(layer_dims, ae.params - lr * _ae_gradient(ae, inputs))
    return ae


@dataclass(frozen=True)
class AtgfGenerator:
    """Averaged autoencoder whose decoder maps key material to triggers."""

    layer_dims: tuple[int, ...]
    encoder_params: np.ndarray
    decoder_params: np.ndarray
    label_map_seed: bytes

    @property
    def bottleneck_pos(self) -> int:
        return int(np.argmin(self.layer_dims))

    @property
    def bottleneck_dim(self) -> int:
        return min(self.layer_dims)

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def decode(self, z: np.ndarray) -> np.ndarray:
        return _mlp_forward(
            self.decoder_params,
            self.layer_dims[self.bottleneck_pos :],
            z,
            relu_last=False,
        )

    def canonical_bytes(self) -> bytes:
        out = [_u16(len(self.layer_dims))]
        out += [_u32(d) for d in self.layer_dims]
        for arr in (self.encoder_params, self.decoder_params):
            out.append(_u32(len(arr)))
            out.append(arr.astype("<f8").tobytes())
        out.append(self.label_map_seed)
        return b"".join(out)

    @classmethod
    def read_canonical(cls, r: _Reader) -> "AtgfGenerator":
        dims = tuple(r.u32() for _ in range(r.u16()))
        enc = np.frombuffer(r.take(r.u32() * 8), dtype="<f8").astype(np.float64)
        dec = np.frombuffer(r.take(r.u32() * 8), dtype="<f8").astype(np.float64)
        seed = r.take(32)
        return cls(
            layer_dims=dims, encoder_params=enc, decoder_params=dec, label_map_seed=seed
        )


def build_atgf_generator(
    author_autoencoders: list[np.ndarray],
    layer_dims: tuple[int, ...] = AE_DIMS,
    label_map_seed: bytes | None = None,
) -> AtgfGenerator:
    """Element-wise mean of the authors' autoencoder parameter vectors."""
    if not author_autoencoders:
        raise EmptyList("need at least one autoencoder")
    first_len = len(author_autoencoders[0])
    if any(len(v) != first_len for v in author_autoencoders):
        raise ShapeMismatch("autoencoder parameter vectors differ in length")
    if first_len != _mlp_param_count(layer_dims):
        raise ShapeMismatch("parameter vectors do not match the declared layout")
    mean = np.mean(np.stack(author_autoencoders), axis=0)
    if label_map_seed is None:
        label_map_seed = hash0(b"atgf/label-seed" + mean.astype("<f8").tobytes())
    ae = Autoencoder(layer_dims, mean)
    enc, dec = ae.split_params()
    return AtgfGenerator(
        layer_dims=layer_dims,
        encoder_params=enc.copy(),
        decoder_params=dec.copy(),
        label_map_seed=label_map_seed,
    )


def atgf_trigger(
    generator: AtgfGenerator, key: Key, n_triggers: int, num_classes: int
) -> tuple[np.ndarray, np.ndarray]:
    """Key -> bottleneck codes -> decoder outputs, labels from the label map."""
    codes = prf_floats(
        key.seed,
        b"atgf/z",
        n_triggers * generator.bottleneck_dim,
        ATGF_CODE_LOW,
        ATGF_CODE_HIGH,
    ).reshape(n_triggers, generator.bottleneck_dim)
    inputs = generator.decode(codes)
    labels = prf_ints(
        generator.label_map_seed + key.seed, b"atgf/y", n_triggers, num_classes
    )
    return inputs, labels


def embed_atgfmark(
    model: ToyModel,
    generator: AtgfGenerator,
    key: Key,
    n_triggers: int = 5,
    tune_epochs: int = 200,
    lr: float = 0.1,
    replay: Dataset | None = None,
    threshold: float = TRIGGER_THRESHOLD,
) -> tuple[ToyModel, VerifierSpec]:
    """Trigger embedding with decoder-generated patterns."""
    if generator.output_dim != model.input_dim:
        raise DimMismatch(
            f"generator emits dim {generator.output_dim}, model wants {model.input_dim}"
        )
    inputs, labels = atgf_trigger(generator, key, n_triggers, model.num_classes)
    tuned, _ = fit_triggers(model, inputs, labels, replay, tune_epochs, lr)
    if _trigger_fraction(tuned, inputs, labels) < threshold:
        raise EmbedFailed(
            f"trigger accuracy below {threshold} after {tune_epochs} epochs"
        )
    spec = VerifierSpec(
        scheme_id=SchemeId.ATGFMARK,
        threshold=threshold,
        params=AtgfMarkParams(
            n_triggers=n_triggers,
            input_dim=model.input_dim,
            num_classes=model.num_classes,
            trigger_digests=trigger_digests(inputs, labels),
            generator=generator,
        ),
    )
    return tuned, spec


def verify_atgfmark(model: ToyModel, key: Key, spec: VerifierSpec) -> bool:
    if spec.scheme_id is not SchemeId.ATGFMARK:
        raise SchemeMismatch(f"expected atgfmark spec, got {spec.scheme_id}")
    p = spec.params
    inputs, labels = atgf_trigger(p.generator, key, p.n_triggers, p.num_classes)
    if trigger_digests(inputs, labels) != p.trigger_digests:
        return False
    if model.input_dim != p.input_dim or model.num_classes != p.num_classes:
        return False
    return _trigger_fraction(model, inputs, labels) >= spec.threshold


# ---------------------------------------------------------------------------
# Uniform dispatch and orchestration bundles
# ---------------------------------------------------------------------------


def verify_watermark(model: ToyModel, key: Key, spec: VerifierSpec) -> bool:
    """Scheme-generic verification, dispatched on the spec itself."""
    if spec.scheme_id is SchemeId.WEIGHTMARK:
        return verify_weightmark(model, key, spec)
    if spec.scheme_id is SchemeId.TRIGGERMARK:
        return verify_triggermark(model, key, spec)
    return verify_atgfmark(model, key, spec)


@dataclass(frozen=True)
class WeightMarkScheme:
    n_marked: int = 20
    tolerance: float = WEIGHTMARK_TOLERANCE
    threshold: float = WEIGHTMARK_THRESHOLD

    scheme_id = SchemeId.WEIGHTMARK

    def embed(self, model: ToyModel, key: Key) -> tuple[ToyModel, VerifierSpec]:
        return embed_weightmark(
            model, key, self.n_marked, self.tolerance, self.threshold
        )

    def verify(self, model: ToyModel, key: Key, spec: VerifierSpec) -> bool:
        return verify_weightmark(model, key, spec)


@dataclass(frozen=True)
class TriggerMarkScheme:
    n_triggers: int = 5
    tune_epochs: int = 200
    lr: float = 0.1
    threshold: float = TRIGGER_THRESHOLD
    low: float = TRIGGER_LOW
    high: float = TRIGGER_HIGH
    replay: Dataset | None = None

    scheme_id = SchemeId.TRIGGERMARK

    def embed(self, model: ToyModel, key: Key) -> tuple[ToyModel, VerifierSpec]:
        return embed_triggermark(
            model,
            key,
            self.n_triggers,
            self.tune_epochs,
            self.lr,
            self.replay,
            self.threshold,
            self.low,
            self.high,
        )

    def verify(self, model: ToyModel, key: Key, spec: VerifierSpec) -> bool:
        return verify_triggermark(model, key, spec)


@dataclass(frozen=True)
class AtgfMarkScheme:
    generator: AtgfGenerator
    n_triggers: int = 5
    tune_epochs: int = 200
    lr: float = 0.1
    threshold: float = TRIGGER_THRESHOLD
    replay: Dataset | None = None

    scheme_id = SchemeId.ATGFMARK

    def embed(self, model: ToyModel, key: Key) -> tuple[ToyModel, VerifierSpec]:
        return embed_atgfmark(
            model,
            self.generator,
            key,
            self.n_triggers,
            self.tune_epochs,
            self.lr,
            self.replay,
            self.threshold,
        )

    def verify(self, model: ToyModel, key: Key, spec: VerifierSpec) -> bool:
        return verify_atgfmark(model, key, spec)


Scheme = WeightMarkScheme | TriggerMarkScheme | AtgfMarkScheme
