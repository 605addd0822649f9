"""Gradient-based class activation maps and feature-map grids.

Both methods backpropagate from the pre-softmax logit of the target
class to a named conv layer's activation A (post-relu) and combine A
with the gradient G = d logit / dA:

    hirescam: raw[h, w] = sum_f G[f, h, w] * A[f, h, w]   (no pooling of G)
    gradcam:  raw[h, w] = sum_f mean_hw(G[f]) * A[f, h, w]

The raw signed map is kept as produced; rectification (negatives clamped)
and min-max normalization happen only in the display pipeline, with
constant maps degrading to all-zeros instead of dividing by zero.

With the mandatory GAP + affine head, the spatial sum of the hirescam raw
map at the last conv layer telescopes to logit minus its bias, which is
the faithfulness identity the test suite checks.
"""

import csv
from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np

from . import backend as K
from .autodiff import Tape
from .errors import LayerError, ShapeError
from .model import Model


@dataclass
class CamMap:
    layer: str
    class_index: int
    raw: np.ndarray                  # H x W, signed
    display: np.ndarray              # H x W in [0, 1]
    logit: float                     # s_c at the explained class
    upsampled: np.ndarray = None     # S x S display, filled by upsample_cam


@dataclass
class FeatureGrid:
    layer: str
    tiles: np.ndarray                # F x H x W, each tile min-max normalized
    rows: int
    cols: int
    constant_channels: list = field(default_factory=list)


def normalize_display(raw: np.ndarray) -> np.ndarray:
    """Rectify then min-max normalize to [0, 1]; constant input maps to zeros."""
    r = np.maximum(raw, 0)
    lo, hi = float(r.min()), float(r.max())
    if hi <= lo:
        return np.zeros_like(r)
    return (r - lo) / (hi - lo)


def _explain(model: Model, image: np.ndarray, class_index, layer):
    img = np.asarray(image)
    if img.ndim == 3:
        img = img[None]
    if img.ndim != 4 or img.shape[0] != 1:
        raise ShapeError(f"explanations take a single CHW image, got shape {image.shape}")
    if layer is None:
        layer = model.last_conv_name
    if layer not in model.conv_layer_names:
        raise LayerError(f"unknown layer {layer!r}; valid: {model.conv_layer_names}")
    tape = Tape()
    x = tape.leaf(img)
    logits, records = model.forward(x, capture=[layer])
    c = model.config.num_classes
    if class_index is None:
        class_index = int(np.argmax(logits.data[0]))
    if not 0 <= class_index < c:
        raise LayerError(f"class index {class_index} out of range [0, {c})")
    from .autodiff import pick

    score = pick(logits, (0, class_index))
    tape.backward(score)
    rec = records[layer]
    acts = rec.activation[0]
    grads = rec.gradient[0]
    logit = float(score.item())
    tape.release()
    return layer, class_index, acts, grads, logit


def hirescam(model: Model, image: np.ndarray, class_index=None, layer=None) -> CamMap:
    """Elementwise gradient * activation, summed over channels."""
    layer, c, acts, grads, logit = _explain(model, image, class_index, layer)
    raw = (grads * acts).sum(axis=0)
    return CamMap(layer, c, raw, normalize_display(raw), logit)


def gradcam(model: Model, image: np.ndarray, class_index=None, layer=None) -> CamMap:
    """Channels weighted by their spatially averaged gradient, then summed."""
    layer, c, acts, grads, logit = _explain(model, image, class_index, layer)
    alpha = grads.mean(axis=(1, 2))
    raw = np.tensordot(alpha, acts, axes=(0, 0))
    return CamMap(layer, c, raw, normalize_display(raw), logit)


def upsample_cam(cam: CamMap, size: int) -> CamMap:
    """Bilinearly upsample the display map to size x size (values stay in [0, 1])."""
    cam.upsampled = K.resize_bilinear(cam.display[None], size, size)[0]
    return cam


def overlay(cam: CamMap, original: np.ndarray, alpha: float) -> np.ndarray:
    """Blend pixel = (1-alpha)*original + alpha*colormap(display), rounded.

    `original` is HxWx3 uint8 and must match the upsampled map's extent.
    """
    from .render import colormap

    if cam.upsampled is None:
        raise ShapeError("overlay needs upsample_cam to run first")
    orig = np.asarray(original)
    if orig.ndim != 3 or orig.shape[2] != 3:
        raise ShapeError(f"original must be HxWx3, got shape {orig.shape}")
    if orig.shape[:2] != cam.upsampled.shape:
        raise ShapeError(
            f"original {orig.shape[:2]} does not match cam map {cam.upsampled.shape}"
        )
    if not 0.0 <= alpha <= 1.0:
        raise ShapeError(f"alpha must lie in [0, 1], got {alpha}")
    heat = colormap(cam.upsampled).astype(np.float64)
    blend = (1.0 - alpha) * orig.astype(np.float64) + alpha * heat
    return np.rint(blend).astype(np.uint8)


def feature_grid(model: Model, image: np.ndarray, layer: str, png_path=None) -> FeatureGrid:
    """Per-channel activation tiles, each min-max normalized independently.

    Layout is near-square: cols = ceil(sqrt(F)). Optionally renders the
    grid to png_path.
    """
    img = np.asarray(image)
    if img.ndim == 3:
        img = img[None]
    if layer not in model.conv_layer_names:
        raise LayerError(f"unknown layer {layer!r}; valid: {model.conv_layer_names}")
    from .model import predict

    _, records = predict(model, img, capture=[layer])
    acts = records[layer].activation[0]
    f = acts.shape[0]
    tiles = np.empty_like(acts)
    constant = []
    for i in range(f):
        a = acts[i]
        lo, hi = float(a.min()), float(a.max())
        if hi <= lo:
            tiles[i] = 0.0
            constant.append(i)
        else:
            tiles[i] = (a - lo) / (hi - lo)
    cols = ceil(sqrt(f))
    rows = ceil(f / cols)
    grid = FeatureGrid(layer, tiles, rows, cols, constant)
    if png_path is not None:
        from .render import grid_png

        grid_png(tiles, cols, png_path)
    return grid


def write_cam_csv(cam: CamMap, path) -> None:
    """Raw signed map as a plain numeric CSV, full float precision."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        for row in cam.raw:
            writer.writerow([repr(float(v)) for v in row])
