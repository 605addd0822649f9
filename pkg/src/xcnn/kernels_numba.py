"""Numba-jitted kernels for the hot inner loops.

Default backend. Loops are arranged so the innermost trip runs over the
contiguous output/input row (a saxpy or dot), which LLVM vectorizes.
All loops are serial, so results are bit-stable across runs.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def conv2d_forward(xp, w, bias, stride):
    n, ci, hp, wp = xp.shape
    co, _, kh, kw = w.shape
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    out = np.empty((n, co, oh, ow), dtype=xp.dtype)
    for ni in range(n):
        for oi in range(co):
            bv = bias[oi]
            for yy in range(oh):
                for xx in range(ow):
                    out[ni, oi, yy, xx] = bv
            for c in range(ci):
                for ky in range(kh):
                    for kx in range(kw):
                        wv = w[oi, c, ky, kx]
                        for yy in range(oh):
                            row = xp[ni, c, yy * stride + ky]
                            orow = out[ni, oi, yy]
                            if stride == 1:
                                for xx in range(ow):
                                    orow[xx] += wv * row[xx + kx]
                            else:
                                for xx in range(ow):
                                    orow[xx] += wv * row[xx * stride + kx]
    return out


@njit(cache=True)
def conv2d_backward_input(g, w, stride, hp, wp):
    n, co, oh, ow = g.shape
    _, ci, kh, kw = w.shape
    dxp = np.zeros((n, ci, hp, wp), dtype=g.dtype)
    for ni in range(n):
        for oi in range(co):
            for c in range(ci):
                for ky in range(kh):
                    for kx in range(kw):
                        wv = w[oi, c, ky, kx]
                        for yy in range(oh):
                            grow = g[ni, oi, yy]
                            drow = dxp[ni, c, yy * stride + ky]
                            if stride == 1:
                                for xx in range(ow):
                                    drow[xx + kx] += wv * grow[xx]
                            else:
                                for xx in range(ow):
                                    drow[xx * stride + kx] += wv * grow[xx]
    return dxp


@njit(cache=True)
def conv2d_backward_weights(g, xp, kh, kw, stride):
    n, co, oh, ow = g.shape
    ci = xp.shape[1]
    dw = np.zeros((co, ci, kh, kw), dtype=g.dtype)
    for ni in range(n):
        for oi in range(co):
            for c in range(ci):
                for ky in range(kh):
                    for kx in range(kw):
                        acc = dw[oi, c, ky, kx]
                        for yy in range(oh):
                            grow = g[ni, oi, yy]
                            row = xp[ni, c, yy * stride + ky]
                            if stride == 1:
                                for xx in range(ow):
                                    acc += grow[xx] * row[xx + kx]
                            else:
                                for xx in range(ow):
                                    acc += grow[xx] * row[xx * stride + kx]
                        dw[oi, c, ky, kx] = acc
    return dw


@njit(cache=True)
def maxpool_forward(x, window, stride):
    n, c, h, w = x.shape
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1
    out = np.empty((n, c, oh, ow), dtype=x.dtype)
    argmax = np.empty((n, c, oh, ow), dtype=np.int64)
    for ni in range(n):
        for ci in range(c):
            for yy in range(oh):
                for xx in range(ow):
                    y0 = yy * stride
                    x0 = xx * stride
                    best = x[ni, ci, y0, x0]
                    bidx = y0 * w + x0
                    for ky in range(window):
                        for kx in range(window):
                            v = x[ni, ci, y0 + ky, x0 + kx]
                            # strict > keeps the first row-major maximum
                            if v > best:
                                best = v
                                bidx = (y0 + ky) * w + (x0 + kx)
                    out[ni, ci, yy, xx] = best
                    argmax[ni, ci, yy, xx] = bidx
    return out, argmax


@njit(cache=True)
def maxpool_backward(g, argmax, h, w):
    n, c, oh, ow = g.shape
    dx = np.zeros((n, c, h * w), dtype=g.dtype)
    for ni in range(n):
        for ci in range(c):
            for yy in range(oh):
                for xx in range(ow):
                    dx[ni, ci, argmax[ni, ci, yy, xx]] += g[ni, ci, yy, xx]
    return dx.reshape(n, c, h, w)


@njit(cache=True)
def resize_bilinear(img, out_h, out_w):
    c, h, w = img.shape
    if h == out_h and w == out_w:
        return img.copy()
    out = np.empty((c, out_h, out_w), dtype=img.dtype)
    for yy in range(out_h):
        sy = (yy + 0.5) * (h / out_h) - 0.5
        y0f = np.floor(sy)
        ty = sy - y0f
        y0 = min(max(int(y0f), 0), h - 1)
        y1 = min(max(int(y0f) + 1, 0), h - 1)
        for xx in range(out_w):
            sx = (xx + 0.5) * (w / out_w) - 0.5
            x0f = np.floor(sx)
            tx = sx - x0f
            x0 = min(max(int(x0f), 0), w - 1)
            x1 = min(max(int(x0f) + 1, 0), w - 1)
            for ci in range(c):
                a = img[ci, y0, x0]
                b = img[ci, y0, x1]
                d = img[ci, y1, x0]
                e = img[ci, y1, x1]
                top = a + (b - a) * tx
                bot = d + (e - d) * tx
                out[ci, yy, xx] = top + (bot - top) * ty
    return out
