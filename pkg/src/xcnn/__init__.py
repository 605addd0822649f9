"""Explainable CNN image classification: tensors, training, metrics, CAMs.

Everything runs on dense numpy arrays; the convolution/pooling/resize
kernels use numba when available (XCNN_BACKEND=auto|numba|numpy).
"""

__version__ = "1.0.0"

from . import autodiff
from .autodiff import (
    Tape,
    Tensor,
    get_default_dtype,
    precision,
    set_default_dtype,
)
from .backend import backend_name
from .cam import CamMap, FeatureGrid, feature_grid, gradcam, hirescam
from .config import RunConfig, load_config
from .data import (
    DatasetIndex,
    SplitManifest,
    load_image,
    read_manifest,
    scan_dataset,
    split_counts,
    stratified_split,
    write_manifest,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    EngineError,
    ImageDecodeError,
    LayerError,
    ManifestError,
    ShapeError,
    TapeError,
    TrainingError,
)
from .metrics import (
    ConfusionMatrix,
    MetricsReport,
    confusion_matrix,
    f1_score,
    normalize_rows,
    per_class_metrics,
)
from .model import (
    ConvBlock,
    Model,
    ModelConfig,
    build_model,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from . import train
from .train import SGD, EpochLog, Hyperparams, topk_accuracy

__all__ = [
    "autodiff",
    "Tape",
    "Tensor",
    "get_default_dtype",
    "precision",
    "set_default_dtype",
    "backend_name",
    "CamMap",
    "FeatureGrid",
    "feature_grid",
    "gradcam",
    "hirescam",
    "RunConfig",
    "load_config",
    "DatasetIndex",
    "SplitManifest",
    "load_image",
    "read_manifest",
    "scan_dataset",
    "split_counts",
    "stratified_split",
    "write_manifest",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "EngineError",
    "ImageDecodeError",
    "LayerError",
    "ManifestError",
    "ShapeError",
    "TapeError",
    "TrainingError",
    "ConfusionMatrix",
    "MetricsReport",
    "confusion_matrix",
    "f1_score",
    "normalize_rows",
    "per_class_metrics",
    "ConvBlock",
    "Model",
    "ModelConfig",
    "build_model",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
    "SGD",
    "EpochLog",
    "Hyperparams",
    "topk_accuracy",
    "train",
]
