"""Compact CNN classifier built from a declarative config.

The network is a stack of conv blocks (conv -> relu -> optional 2x2 max
pool) closed by a mandatory global-average-pool + single affine head.
That head shape is what turns the attribution sum identity into an exact
test, so it is not configurable.

Layer names are "conv1".."convN" and "head". Capture hooks address the
post-relu activation of a conv block by name.
"""

import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, Tape
from .errors import CheckpointError, LayerError, ShapeError

CHECKPOINT_MAGIC = b"XCNN"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ConvBlock:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1
    use_pool: bool = True


@dataclass(frozen=True)
class ModelConfig:
    """Declarative layer stack; parameter count is a pure function of this."""

    num_classes: int
    input_size: int = 64
    input_channels: int = 3
    blocks: tuple = field(
        default=(ConvBlock(16), ConvBlock(32), ConvBlock(64))
    )
    seed: int = 0

    def __post_init__(self):
        if not self.blocks:
            raise ShapeError("model needs at least one conv block")
        if self.num_classes < 2:
            raise ShapeError(f"num_classes must be >= 2, got {self.num_classes}")
        object.__setattr__(self, "blocks", tuple(
            b if isinstance(b, ConvBlock) else ConvBlock(**b) for b in self.blocks
        ))
        self.spatial_trace()  # validates geometry

    def spatial_trace(self):
        """Spatial sizes after each block; raises if any stage collapses below 1."""
        s = self.input_size
        sizes = []
        for i, b in enumerate(self.blocks):
            s = (s + 2 * b.padding - b.kernel) // b.stride + 1
            if b.use_pool:
                s = (s - 2) // 2 + 1
            if s < 1:
                raise ShapeError(
                    f"block {i + 1} collapses the spatial extent to {s} "
                    f"(input {self.input_size}, kernel {b.kernel}, stride {b.stride}, "
                    f"padding {b.padding})"
                )
            sizes.append(s)
        return sizes

    def param_count(self) -> int:
        n = 0
        cin = self.input_channels
        for b in self.blocks:
            n += b.out_channels * cin * b.kernel * b.kernel + b.out_channels
            cin = b.out_channels
        n += self.num_classes * cin + self.num_classes
        return n

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "input_size": self.input_size,
            "input_channels": self.input_channels,
            "blocks": [vars(b).copy() for b in self.blocks],
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        d["blocks"] = tuple(ConvBlock(**b) for b in d["blocks"])
        return ModelConfig(**d)


@dataclass
class ActivationRecord:
    """Captured activation of one layer plus, after a backward pass, its gradient."""

    layer: str
    tensor: Tensor

    @property
    def activation(self) -> np.ndarray:
        return self.tensor.data

    @property
    def gradient(self):
        return self.tensor.grad


class Model:
    """Named parameter tensors plus the forward pass over them."""

    def __init__(self, config: ModelConfig, labels, params: dict):
        self.config = config
        self.labels = list(labels)
        self.params = params
        self.meta = {}

    @property
    def conv_layer_names(self):
        return [f"conv{i + 1}" for i in range(len(self.config.blocks))]

    @property
    def layer_names(self):
        return self.conv_layer_names + ["head"]

    @property
    def last_conv_name(self) -> str:
        return self.conv_layer_names[-1]

    def parameters(self):
        return list(self.params.items())

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def num_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def forward(self, x: Tensor, capture=()):
        """Run the network; returns (logits tensor, {name: ActivationRecord}).

        Capture is non-invasive: it only keeps references to activations
        already produced by the pass, so logits are bit-identical with and
        without it.
        """
        capture = list(capture)
        unknown = [c for c in capture if c not in self.conv_layer_names]
        if unknown:
            raise LayerError(
                f"unknown capture layer(s) {unknown}; valid: {self.conv_layer_names}"
            )
        if x.ndim != 4 or x.shape[2] != self.config.input_size or x.shape[3] != self.config.input_size:
            raise ShapeError(
                f"batch shape {x.shape} does not match model input "
                f"{self.config.input_channels}x{self.config.input_size}x{self.config.input_size}"
            )
        records = {}
        for i, blk in enumerate(self.config.blocks):
            name = f"conv{i + 1}"
            x = ad.conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"],
                          stride=blk.stride, padding=blk.padding)
            x = ad.relu(x)
            if name in capture:
                records[name] = ActivationRecord(name, x)
            if blk.use_pool:
                x = ad.max_pool2d(x, 2, 2)
        x = ad.global_avg_pool(x)
        logits = ad.affine(x, self.params["head.weight"], self.params["head.bias"])
        return logits, records


def build_model(config: ModelConfig, labels=None) -> Model:
    """Initialize parameters with seeded He-style fan-in scaling.

    The same (config, seed, dtype) always reproduces bit-identical arrays.
    """
    if labels is not None and len(labels) != config.num_classes:
        raise ShapeError(
            f"{len(labels)} labels for {config.num_classes} classes"
        )
    labels = list(labels) if labels is not None else [str(i) for i in range(config.num_classes)]
    rng = np.random.default_rng(config.seed)
    dtype = ad.get_default_dtype()
    params = {}
    cin = config.input_channels
    for i, b in enumerate(config.blocks):
        fan_in = cin * b.kernel * b.kernel
        w = rng.standard_normal((b.out_channels, cin, b.kernel, b.kernel), dtype=dtype)
        w *= dtype.type(np.sqrt(2.0 / fan_in))
        params[f"conv{i + 1}.weight"] = Tensor(w, requires_grad=True, dtype=dtype)
        params[f"conv{i + 1}.bias"] = Tensor(np.zeros(b.out_channels, dtype=dtype),
                                             requires_grad=True, dtype=dtype)
        cin = b.out_channels
    w = rng.standard_normal((config.num_classes, cin), dtype=dtype)
    w *= dtype.type(np.sqrt(1.0 / cin))
    params["head.weight"] = Tensor(w, requires_grad=True, dtype=dtype)
    params["head.bias"] = Tensor(np.zeros(config.num_classes, dtype=dtype),
                                 requires_grad=True, dtype=dtype)
    return Model(config, labels, params)


def predict(model: Model, batch: np.ndarray, capture=()):
    """Forward a raw NCHW array; returns (logits ndarray, activation records).

    Gradients in the records stay empty until an explanation backward pass
    fills them; plain prediction does not build a tape unless capturing.
    """
    if capture:
        tape = Tape()
        x = tape.leaf(batch)
    else:
        x = Tensor(batch)
    logits, records = model.forward(x, capture=capture)
    if capture:
        tape.release()
    return logits.data.copy(), records


def save_checkpoint(model: Model, path, extra_meta: dict = None) -> None:
    """Write a versioned checkpoint: magic, header JSON, raw little-endian payload."""
    names = sorted(model.params)
    dtype = next(iter(model.params.values())).data.dtype
    header = {
        "config": model.config.to_dict(),
        "labels": model.labels,
        "dtype": dtype.name,
        "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
        "meta": dict(model.meta, **(extra_meta or {})),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(CHECKPOINT_VERSION.to_bytes(4, "little"))
    buf.write(len(blob).to_bytes(4, "little"))
    buf.write(blob)
    le = np.dtype(dtype).newbyteorder("<")
    for n in names:
        buf.write(model.params[n].data.astype(le, copy=False).tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path) -> Model:
    """Read a checkpoint; parameters round-trip bit-exactly."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 12 or raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not an xcnn checkpoint")
    version = int.from_bytes(raw[4:8], "little")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )
    hlen = int.from_bytes(raw[8:12], "little")
    if len(raw) < 12 + hlen:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    config = ModelConfig.from_dict(header["config"])
    dtype = np.dtype(header["dtype"])
    le = dtype.newbyteorder("<")
    params = {}
    off = 12 + hlen
    for spec in header["params"]:
        shape = tuple(spec["shape"])
        nbytes = int(np.prod(shape)) * dtype.itemsize
        if off + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated payload at parameter {spec['name']}")
        arr = np.frombuffer(raw[off:off + nbytes], dtype=le).astype(dtype).reshape(shape)
        params[spec["name"]] = Tensor(arr, requires_grad=True, dtype=dtype)
        off += nbytes
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes")
    model = Model(config, header["labels"], params)
    model.meta = dict(header.get("meta", {}))
    return model
