"""Pure-numpy kernels for the hot inner loops.

Fallback backend used when XCNN_BACKEND=numpy or numba is unavailable.
Same signatures and numerical contracts as kernels_numba; summation order
may differ between the two, so results agree only to float tolerance,
but each backend is deterministic run to run.

Convolution kernels operate on an already zero-padded input `xp`.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_forward(xp, w, bias, stride):
    """Cross-correlate padded NCHW input with OIKK weights, add bias."""
    kh, kw = w.shape[2], w.shape[3]
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # N,OH,OW,O
    out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
    return np.ascontiguousarray(out)


def conv2d_backward_input(g, w, stride, hp, wp):
    """Gradient w.r.t. the padded input, shape (N, CI, hp, wp)."""
    n, _, oh, ow = g.shape
    _, ci, kh, kw = w.shape
    dxp = np.zeros((n, ci, hp, wp), dtype=g.dtype)
    for ky in range(kh):
        for kx in range(kw):
            contrib = np.tensordot(g, w[:, :, ky, kx], axes=([1], [0]))  # N,OH,OW,CI
            dxp[:, :, ky:ky + stride * oh:stride, kx:kx + stride * ow:stride] += (
                contrib.transpose(0, 3, 1, 2)
            )
    return dxp


def conv2d_backward_weights(g, xp, kh, kw, stride):
    """Gradient w.r.t. the OIKK weights."""
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    dw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))  # O,CI,KH,KW
    return np.ascontiguousarray(dw)


def maxpool_forward(x, window, stride):
    """Per-window maximum plus the flat H*W index of the winning cell.

    argmax of the row-major flattened window returns the first occurrence,
    which fixes the tie-break rule.
    """
    n, c, h, w = x.shape
    win = sliding_window_view(x, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = win.shape[2], win.shape[3]
    flat = win.reshape(n, c, oh, ow, window * window)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    ay = arg // window + (np.arange(oh, dtype=np.int64) * stride)[None, None, :, None]
    ax = arg % window + (np.arange(ow, dtype=np.int64) * stride)[None, None, None, :]
    return np.ascontiguousarray(out), ay * w + ax


def maxpool_backward(g, argmax, h, w):
    """Scatter upstream gradient to each window's argmax cell."""
    n, c, oh, ow = g.shape
    dx = np.zeros((n, c, h * w), dtype=g.dtype)
    ni = np.arange(n)[:, None, None]
    ci = np.arange(c)[None, :, None]
    np.add.at(dx, (ni, ci, argmax.reshape(n, c, oh * ow)), g.reshape(n, c, oh * ow))
    return dx.reshape(n, c, h, w)


def _axis_coords(out_size, in_size, dtype):
    # half-pixel centers: src = (dst + 0.5) * in/out - 0.5, edges clamped
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    lo = np.floor(src)
    t = (src - lo).astype(dtype)
    i0 = np.clip(lo, 0, in_size - 1).astype(np.int64)
    i1 = np.clip(lo + 1, 0, in_size - 1).astype(np.int64)
    return i0, i1, t


def resize_bilinear(img, out_h, out_w):
    """Bilinear resize of a CHW image, half-pixel-centered sampling."""
    c, h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    y0, y1, ty = _axis_coords(out_h, h, img.dtype)
    x0, x1, tx = _axis_coords(out_w, w, img.dtype)
    a = img[:, y0[:, None], x0[None, :]]
    b = img[:, y0[:, None], x1[None, :]]
    d = img[:, y1[:, None], x0[None, :]]
    e = img[:, y1[:, None], x1[None, :]]
    ty = ty[None, :, None]
    tx = tx[None, None, :]
    top = a + (b - a) * tx
    bot = d + (e - d) * tx
    return np.ascontiguousarray(top + (bot - top) * ty)
