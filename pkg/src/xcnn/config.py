"""Run configuration: a small TOML file drives every command.

One top-level seed feeds every random component through a fixed
derivation: dataset split uses seed, parameter init uses seed + 1, the
training shuffle uses seed + 2. Reproducing a run therefore takes one
number plus the config file.

Unknown keys are rejected rather than ignored so a typo like
`learing_rate` fails loudly instead of silently training with defaults.
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .model import ConvBlock, ModelConfig
from .train import Hyperparams

SPLIT_SEED_OFFSET = 0
MODEL_SEED_OFFSET = 1
SHUFFLE_SEED_OFFSET = 2


@dataclass(frozen=True)
class DataSection:
    root: str = ""
    input_size: int = 64
    normalization: str = "unit"


@dataclass(frozen=True)
class ModelSection:
    blocks: tuple = (16, 32, 64)
    kernel: int = 3


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 150
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_schedule: str = "constant"
    checkpoint_every: int = 0


@dataclass(frozen=True)
class EvalSection:
    split: str = "test"


@dataclass(frozen=True)
class ExplainSection:
    images: tuple = ()
    method: str = "hirescam"
    layer: str = ""          # empty means the last conv layer
    class_name: str = ""     # empty means the argmax prediction
    alpha: float = 0.45


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    output_dir: str = "runs/out"
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    explain: ExplainSection = field(default_factory=ExplainSection)

    @property
    def split_seed(self) -> int:
        return self.seed + SPLIT_SEED_OFFSET

    def model_config(self, num_classes: int) -> ModelConfig:
        blocks = tuple(ConvBlock(out_channels=c, kernel=self.model.kernel)
                       for c in self.model.blocks)
        return ModelConfig(
            num_classes=num_classes,
            input_size=self.data.input_size,
            blocks=blocks,
            seed=self.seed + MODEL_SEED_OFFSET,
        )

    def hyperparams(self) -> Hyperparams:
        t = self.train
        return Hyperparams(
            epochs=t.epochs,
            batch_size=t.batch_size,
            learning_rate=t.learning_rate,
            momentum=t.momentum,
            weight_decay=t.weight_decay,
            seed=self.seed + SHUFFLE_SEED_OFFSET,
            checkpoint_every=t.checkpoint_every,
            lr_schedule=t.lr_schedule,
        )


def _check_keys(table: dict, allowed, where: str) -> None:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(
            f"unknown config key {where}{unknown[0]!r} "
            f"(allowed: {', '.join(sorted(allowed))})"
        )


def _get(table, key, kind, where, default):
    if key not in table:
        return default
    v = table[key]
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)  # TOML `1` is an int even where we want a float
    if not isinstance(v, kind) or isinstance(v, bool) and kind is not bool:
        raise ConfigError(f"config key {where}{key} must be {kind.__name__}, "
                          f"got {type(v).__name__}")
    return v


def _section(d: dict, name: str) -> dict:
    v = d.get(name, {})
    if not isinstance(v, dict):
        raise ConfigError(f"config section [{name}] must be a table")
    return v


def config_from_dict(d: dict) -> RunConfig:
    _check_keys(d, {"seed", "output_dir", "data", "model", "train", "eval",
                    "explain"}, "")
    data = _section(d, "data")
    _check_keys(data, {"root", "input_size", "normalization"}, "data.")
    model = _section(d, "model")
    _check_keys(model, {"blocks", "kernel"}, "model.")
    train = _section(d, "train")
    _check_keys(train, {"epochs", "batch_size", "learning_rate", "momentum",
                        "weight_decay", "lr_schedule", "checkpoint_every"},
                "train.")
    ev = _section(d, "eval")
    _check_keys(ev, {"split"}, "eval.")
    ex = _section(d, "explain")
    _check_keys(ex, {"images", "method", "layer", "class", "alpha"},
                "explain.")

    blocks = model.get("blocks", [16, 32, 64])
    if (not isinstance(blocks, list) or not blocks
            or not all(isinstance(b, int) and not isinstance(b, bool) and b > 0
                       for b in blocks)):
        raise ConfigError("model.blocks must be a non-empty list of positive "
                          "channel counts")
    images = ex.get("images", [])
    if not isinstance(images, list) or not all(isinstance(p, str) for p in images):
        raise ConfigError("explain.images must be a list of paths")

    return RunConfig(
        seed=_get(d, "seed", int, "", 0),
        output_dir=_get(d, "output_dir", str, "", "runs/out"),
        data=DataSection(
            root=_get(data, "root", str, "data.", ""),
            input_size=_get(data, "input_size", int, "data.", 64),
            normalization=_get(data, "normalization", str, "data.", "unit"),
        ),
        model=ModelSection(
            blocks=tuple(blocks),
            kernel=_get(model, "kernel", int, "model.", 3),
        ),
        train=TrainSection(
            epochs=_get(train, "epochs", int, "train.", 150),
            batch_size=_get(train, "batch_size", int, "train.", 32),
            learning_rate=_get(train, "learning_rate", float, "train.", 0.05),
            momentum=_get(train, "momentum", float, "train.", 0.9),
            weight_decay=_get(train, "weight_decay", float, "train.", 5e-4),
            lr_schedule=_get(train, "lr_schedule", str, "train.", "constant"),
            checkpoint_every=_get(train, "checkpoint_every", int, "train.", 0),
        ),
        eval=EvalSection(split=_get(ev, "split", str, "eval.", "test")),
        explain=ExplainSection(
            images=tuple(images),
            method=_get(ex, "method", str, "explain.", "hirescam"),
            layer=_get(ex, "layer", str, "explain.", ""),
            class_name=_get(ex, "class", str, "explain.", ""),
            alpha=_get(ex, "alpha", float, "explain.", 0.45),
        ),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML: {e}") from e
    cfg = config_from_dict(raw)
    if cfg.eval.split not in ("train", "val", "test"):
        raise ConfigError(f"eval.split must be train, val or test, "
                          f"got {cfg.eval.split!r}")
    if cfg.explain.method not in ("hirescam", "gradcam"):
        raise ConfigError(f"explain.method must be hirescam or gradcam, "
                          f"got {cfg.explain.method!r}")
    return cfg
