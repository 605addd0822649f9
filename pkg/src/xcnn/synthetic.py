"""Synthetic shape corpus for desk-scale end-to-end runs.

Four classes (circle, cross, square, triangle), one directory per class,
each image a single filled shape at a random position/size/color over a
noisy dark background. Good enough to train the default model to high
accuracy in a couple of minutes on a CPU, which is exactly what the
acceptance suite needs.
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image

CLASSES = ("circle", "cross", "square", "triangle")


def _shape_mask(kind, size, cy, cx, r, rng):
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == "circle":
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    if kind == "square":
        return (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)
    if kind == "triangle":
        # upright filled triangle: width grows linearly from apex to base
        rel = yy - (cy - r)
        return (rel >= 0) & (yy <= cy + r) & (np.abs(xx - cx) * 2 <= rel)
    if kind == "cross":
        t = max(2, r // 3)
        horiz = (np.abs(yy - cy) <= t) & (np.abs(xx - cx) <= r)
        vert = (np.abs(xx - cx) <= t) & (np.abs(yy - cy) <= r)
        return horiz | vert
    raise ValueError(f"unknown shape {kind!r}")


def render_image(kind, size, rng) -> np.ndarray:
    bg = rng.integers(10, 80, size=3)
    fg = rng.integers(140, 255, size=3)
    img = np.empty((size, size, 3), dtype=np.float64)
    img[:] = bg
    img += rng.normal(0.0, 10.0, size=(size, size, 3))
    r = int(rng.integers(size // 6, size // 3))
    cy = int(rng.integers(r + 1, size - r - 1))
    cx = int(rng.integers(r + 1, size - r - 1))
    mask = _shape_mask(kind, size, cy, cx, r, rng)
    img[mask] = fg
    return np.clip(img, 0, 255).astype(np.uint8)


def make_shape_corpus(root, total: int = 600, size: int = 64, seed: int = 0) -> Path:
    """Write total/4 PNGs per class under root/<class>/ and return root."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    per_class = total // len(CLASSES)
    for kind in CLASSES:
        d = root / kind
        d.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            arr = render_image(kind, size, rng)
            Image.fromarray(arr).save(d / f"{kind}_{i:04d}.png", format="PNG")
    return root


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="generate the synthetic shape corpus")
    parser.add_argument("root", help="output directory")
    parser.add_argument("--images", type=int, default=600, help="total image count")
    parser.add_argument("--size", type=int, default=64, help="square image size")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    make_shape_corpus(args.root, args.images, args.size, args.seed)
    print(f"wrote {args.images // len(CLASSES)} images per class to {args.root}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
