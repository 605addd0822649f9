"""Pixel rendering helpers shared by the evaluator and explain modules.

The colormap is a fixed blue-to-red lookup (piecewise-linear through
cyan, green, yellow), evaluated per channel with np.interp:

    v=0.00 -> (0,   0, 255)    v=0.25 -> (0, 255, 255)
    v=0.50 -> (0, 255,   0)    v=0.75 -> (255, 255, 0)
    v=1.00 -> (255,  0,   0)

All PNG output goes through Pillow; pixel payloads are deterministic.
"""

import numpy as np
from PIL import Image

_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_RED = np.array([0.0, 0.0, 0.0, 255.0, 255.0])
_GREEN = np.array([0.0, 255.0, 255.0, 255.0, 0.0])
_BLUE = np.array([255.0, 255.0, 0.0, 0.0, 0.0])


def colormap(values: np.ndarray) -> np.ndarray:
    """Map an array of values in [0, 1] to uint8 RGB with a trailing axis."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    rgb = np.stack([
        np.interp(v, _STOPS, _RED),
        np.interp(v, _STOPS, _GREEN),
        np.interp(v, _STOPS, _BLUE),
    ], axis=-1)
    return np.rint(rgb).astype(np.uint8)


def save_png(array: np.ndarray, path) -> None:
    """Save a HW (grayscale) or HWC (RGB) uint8 array."""
    Image.fromarray(array).save(path, format="PNG")


def heatmap_png(matrix01: np.ndarray, path, cell_size: int = 32, margin: int = 8) -> None:
    """Render a matrix of [0, 1] values as a colormapped cell grid.

    Output is square-celled: (rows*cell + 2*margin) x (cols*cell + 2*margin),
    margin filled white.
    """
    mat = np.asarray(matrix01, dtype=np.float64)
    cells = colormap(mat)
    big = np.kron(cells, np.ones((cell_size, cell_size, 1), dtype=np.uint8))
    h, w = big.shape[:2]
    canvas = np.full((h + 2 * margin, w + 2 * margin, 3), 255, dtype=np.uint8)
    canvas[margin:margin + h, margin:margin + w] = big
    save_png(canvas, path)


def grid_png(tiles: np.ndarray, cols: int, path, pad: int = 2, upscale: int = 4) -> None:
    """Lay out F normalized HxW tiles row-major into a grayscale grid PNG.

    Tiles are nearest-neighbour upscaled for visibility; gaps are white.
    """
    f, h, w = tiles.shape
    rows = -(-f // cols)
    th, tw = h * upscale, w * upscale
    canvas = np.full((rows * (th + pad) + pad, cols * (tw + pad) + pad), 255, dtype=np.uint8)
    for i in range(f):
        r, c = divmod(i, cols)
        tile = np.rint(np.clip(tiles[i], 0.0, 1.0) * 255).astype(np.uint8)
        tile = np.kron(tile, np.ones((upscale, upscale), dtype=np.uint8))
        y = pad + r * (th + pad)
        x = pad + c * (tw + pad)
        canvas[y:y + th, x:x + tw] = tile
    save_png(canvas, path)
