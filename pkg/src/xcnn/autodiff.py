"""Dense tensors with reverse-mode automatic differentiation.

A `Tensor` wraps a 1- to 4-d numpy array. Operations executed on tensors
that are bound to a `Tape` are recorded eagerly; `backward(tape, root)`
replays the tape in reverse and accumulates gradients into every recorded
tensor (and into tape-less leaves such as model parameters that have
`requires_grad=True`). Tensors without a tape run plain forward math,
which is how inference avoids recording overhead.

The engine computes in a single global dtype, float32 by default.
`set_default_dtype` / the `precision` context manager switch to float64,
which the gradient-check suites use for tight finite-difference
tolerances.
"""

from contextlib import contextmanager

import numpy as np

from . import backend as K
from .errors import ShapeError, TapeError

_default_dtype = np.dtype(np.float32)


def set_default_dtype(dtype) -> None:
    """Set the engine-wide floating dtype (float32 or float64)."""
    global _default_dtype
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype!r}; use float32 or float64")
    _default_dtype = dt


def get_default_dtype() -> np.dtype:
    return _default_dtype


@contextmanager
def precision(dtype):
    """Temporarily switch the engine dtype, e.g. ``with precision('float64'):``."""
    prev = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(prev)


class Tensor:
    """Dense real array, optionally carrying a gradient of identical shape."""

    __slots__ = ("data", "grad", "requires_grad", "tape")

    def __init__(self, data, requires_grad: bool = False, tape=None, dtype=None):
        arr = np.asarray(data, dtype=dtype if dtype is not None else _default_dtype)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if not 1 <= arr.ndim <= 4:
            raise ShapeError(f"tensors are 1-4 dimensional, got shape {arr.shape}")
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.tape = tape

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, k):
        return scale(self, k)

    __rmul__ = __mul__

    def sum(self):
        return tensor_sum(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, tape={self.tape is not None})"


class TapeNode:
    """One recorded operation: kind, inputs, output and a backward closure."""

    __slots__ = ("op", "inputs", "output", "backward_fn")

    def __init__(self, op, inputs, output, backward_fn):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of operations, in execution (hence topological) order."""

    def __init__(self):
        self.nodes = []
        self._consumed = False
        self._released = False

    def leaf(self, data, requires_grad: bool = False, dtype=None) -> Tensor:
        """Create a tensor bound to this tape so downstream ops record onto it."""
        return Tensor(data, requires_grad=requires_grad, tape=self, dtype=dtype)

    def record(self, op, inputs, output, backward_fn) -> None:
        self.nodes.append(TapeNode(op, tuple(inputs), output, backward_fn))

    def backward(self, root: Tensor) -> None:
        backward(self, root)

    def reset(self) -> None:
        """Clear every gradient the tape produced and allow backward again."""
        for node in self.nodes:
            node.output.grad = None
            for t in node.inputs:
                t.grad = None
        self._consumed = False

    def release(self) -> None:
        """Drop the recorded graph so intermediates free by refcount.

        Nodes hold their output tensors and every tensor points back at
        the tape, so a finished tape is a reference cycle that lingers
        until the cycle collector runs. Training builds one tape per
        batch; releasing each keeps peak memory at one batch's working
        set instead of a whole epoch's. A released tape cannot run
        backward (or reset) again; build a new one.
        """
        self.nodes.clear()
        self._released = True


def _tape_of(*tensors):
    tapes = {t.tape for t in tensors if t.tape is not None}
    if len(tapes) > 1:
        raise TapeError("operation mixes tensors from different tapes")
    return tapes.pop() if tapes else None


def _result(op, data, inputs, backward_fn):
    tape = _tape_of(*inputs)
    out = Tensor(data, tape=tape, dtype=data.dtype)
    out.requires_grad = any(t.requires_grad for t in inputs)
    if tape is not None:
        tape.record(op, inputs, out, backward_fn)
    return out


def backward(tape: Tape, root: Tensor) -> None:
    """Accumulate gradients of `root` into every tracked tensor on the tape.

    `root` must be a single-element tensor produced on (or bound to) the
    tape. Calling backward twice without `tape.reset()` raises, because the
    second pass would silently double-count into already-seeded gradients.
    """
    if tape._released:
        raise TapeError("tape was released; build a new tape")
    if tape._consumed:
        raise TapeError("backward already ran on this tape; call reset() first")
    if root.tape is not tape:
        raise TapeError("root tensor is not on this tape")
    if root.size != 1:
        raise TapeError(f"backward root must be scalar, got shape {root.shape}")
    root.grad = np.ones_like(root.data)
    for node in reversed(tape.nodes):
        gout = node.output.grad
        if gout is None:
            continue
        grads = node.backward_fn(gout)
        for t, g in zip(node.inputs, grads):
            if g is None or not (t.requires_grad or t.tape is not None):
                continue
            if t.grad is None:
                t.grad = g
            else:
                t.grad += g
    tape._consumed = True


# ---------------------------------------------------------------------------
# operations


def conv2d(x: Tensor, weights: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-d cross-correlation of an NCHW batch with OIKK weights plus bias.

    Output spatial extent is floor((in + 2*padding - k) / stride) + 1.
    """
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be NCHW, got shape {x.shape}")
    if weights.ndim != 4:
        raise ShapeError(f"conv2d weights must be OIKK, got shape {weights.shape}")
    if bias.ndim != 1 or bias.shape[0] != weights.shape[0]:
        raise ShapeError(
            f"conv2d bias length {bias.shape} must match output channels {weights.shape[0]}"
        )
    if x.shape[1] != weights.shape[1]:
        raise ShapeError(
            f"conv2d input channels {x.shape[1]} != weight input channels {weights.shape[1]}"
        )
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d needs stride >= 1 and padding >= 0, got {stride}, {padding}")
    n, ci, h, w = x.shape
    co, _, kh, kw = weights.shape
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ShapeError(
            f"kernel {kh}x{kw} does not fit padded input {h + 2 * padding}x{w + 2 * padding}"
        )
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out = K.conv2d_forward(xp, weights.data, bias.data, stride)
    wdata = weights.data
    hp, wp = xp.shape[2], xp.shape[3]

    def bwd(g):
        g = np.ascontiguousarray(g)
        dxp = K.conv2d_backward_input(g, wdata, stride, hp, wp)
        if padding:
            dx = np.ascontiguousarray(dxp[:, :, padding:padding + h, padding:padding + w])
        else:
            dx = dxp
        dw = K.conv2d_backward_weights(g, xp, kh, kw, stride)
        db = g.sum(axis=(0, 2, 3))
        return dx, dw, db

    return _result("conv2d", out, (x, weights, bias), bwd)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(x, 0); the derivative at exactly 0 is defined as 0."""
    out = np.maximum(x.data, 0)
    mask = x.data > 0

    def bwd(g):
        return (g * mask,)

    return _result("relu", out, (x,), bwd)


def max_pool2d(x: Tensor, window: int, stride: int = None) -> Tensor:
    """Per-window maximum over an NCHW batch.

    Backward routes the gradient to the first row-major maximum of each
    window, which makes tie handling deterministic.
    """
    if x.ndim != 4:
        raise ShapeError(f"max_pool2d input must be NCHW, got shape {x.shape}")
    if stride is None:
        stride = window
    if window < 1 or stride < 1:
        raise ShapeError(f"max_pool2d needs window, stride >= 1, got {window}, {stride}")
    n, c, h, w = x.shape
    if window > h or window > w:
        raise ShapeError(f"pool window {window} larger than input {h}x{w}")
    out, argmax = K.maxpool_forward(x.data, window, stride)

    def bwd(g):
        return (K.maxpool_backward(np.ascontiguousarray(g), argmax, h, w),)

    return _result("max_pool2d", out, (x,), bwd)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial dims of NCHW, yielding NC."""
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool input must be NCHW, got shape {x.shape}")
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))
    inv = 1.0 / (h * w)

    def bwd(g):
        dx = np.empty((n, c, h, w), dtype=g.dtype)
        dx[:] = (g * inv)[:, :, None, None]
        return (dx,)

    return _result("global_avg_pool", out, (x,), bwd)


def affine(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """x @ weights.T + bias for NC input and (C_out, C_in) weights."""
    if x.ndim != 2 or weights.ndim != 2:
        raise ShapeError(
            f"affine needs 2-d input and weights, got shapes {x.shape}, {weights.shape}"
        )
    if x.shape[1] != weights.shape[1]:
        raise ShapeError(
            f"affine inner dims disagree: input {x.shape[1]} vs weights {weights.shape[1]}"
        )
    if bias.ndim != 1 or bias.shape[0] != weights.shape[0]:
        raise ShapeError(
            f"affine bias length {bias.shape} must match output width {weights.shape[0]}"
        )
    out = x.data @ weights.data.T + bias.data
    xdata, wdata = x.data, weights.data

    def bwd(g):
        g = np.ascontiguousarray(g)
        return g @ wdata, g.T @ xdata, g.sum(axis=0)

    return _result("affine", out, (x, weights, bias), bwd)


def softmax_cross_entropy(logits: Tensor, labels) -> tuple:
    """Mean negative log-softmax of the labelled class, plus probabilities.

    Softmax is computed with max subtraction so huge logits do not overflow.
    Returns (scalar loss tensor, detached N x C probability tensor).
    """
    if logits.ndim != 2:
        raise ShapeError(f"logits must be N x C, got shape {logits.shape}")
    y = np.asarray(labels)
    n, c = logits.shape
    if y.shape != (n,):
        raise ShapeError(f"labels shape {y.shape} does not match batch size {n}")
    if y.size and (y.min() < 0 or y.max() >= c):
        bad = y[(y < 0) | (y >= c)][0]
        raise ShapeError(f"label {bad} out of range [0, {c})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ez = np.exp(z)
    denom = ez.sum(axis=1, keepdims=True)
    probs = ez / denom
    logsm = z - np.log(denom)
    loss = -logsm[np.arange(n), y].mean(dtype=logits.data.dtype)

    def bwd(g):
        d = probs.copy()
        d[np.arange(n), y] -= 1
        d *= g.reshape(-1)[0] / n
        return (d,)

    out = _result("softmax_cross_entropy", np.asarray([loss], dtype=logits.data.dtype),
                  (logits,), bwd)
    return out, Tensor(probs, dtype=probs.dtype)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two same-shape tensors (no broadcasting)."""
    if a.shape != b.shape:
        raise ShapeError(f"add shapes disagree: {a.shape} vs {b.shape}")
    out = a.data + b.data

    def bwd(g):
        return g.copy(), g.copy()

    return _result("add", out, (a, b), bwd)


def scale(a: Tensor, k: float) -> Tensor:
    """Multiply by a python scalar."""
    k = float(k)
    out = a.data * k

    def bwd(g):
        return (g * k,)

    return _result("scale", out, (a,), bwd)


def tensor_sum(a: Tensor) -> Tensor:
    """Sum all elements into a single-element tensor."""
    out = np.asarray([a.data.sum()], dtype=a.data.dtype)
    shape = a.shape

    def bwd(g):
        dx = np.empty(shape, dtype=g.dtype)
        dx[:] = g.reshape(-1)[0]
        return (dx,)

    return _result("sum", out, (a,), bwd)


def pick(a: Tensor, index: tuple) -> Tensor:
    """Extract one element as a scalar tensor; backward scatters into place."""
    idx = tuple(int(i) for i in index)
    if len(idx) != a.ndim:
        raise ShapeError(f"pick index {idx} does not address shape {a.shape}")
    out = np.asarray([a.data[idx]], dtype=a.data.dtype)
    shape = a.shape

    def bwd(g):
        dx = np.zeros(shape, dtype=g.dtype)
        dx[idx] = g.reshape(-1)[0]
        return (dx,)

    return _result("pick", out, (a,), bwd)
