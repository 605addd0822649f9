"""Kernel backend selection.

The hot kernels (convolution, max pooling, bilinear resize) exist twice:
a numba-jitted build and a pure-numpy fallback. The XCNN_BACKEND
environment variable picks one at import time:

    XCNN_BACKEND=auto    prefer numba, fall back to numpy (default)
    XCNN_BACKEND=numba   require numba, fail loudly if missing
    XCNN_BACKEND=numpy   force the pure-numpy path

Run benchmarks/bench_kernels.py to compare the two on training-sized shapes.
"""

import os

from . import kernels_numpy
from .errors import ConfigError

_requested = os.environ.get("XCNN_BACKEND", "auto").strip().lower() or "auto"
if _requested not in ("auto", "numba", "numpy"):
    raise ConfigError(
        f"XCNN_BACKEND={_requested!r} is not one of auto, numba, numpy"
    )

if _requested == "numpy":
    _impl = kernels_numpy
    _name = "numpy"
else:
    try:
        from . import kernels_numba as _impl  # noqa: F401

        _name = "numba"
    except ImportError as exc:
        if _requested == "numba":
            raise ConfigError(f"XCNN_BACKEND=numba but numba is unavailable: {exc}")
        _impl = kernels_numpy
        _name = "numpy"

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_weights = _impl.conv2d_backward_weights
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
resize_bilinear = _impl.resize_bilinear


def backend_name() -> str:
    """Name of the active kernel backend, 'numba' or 'numpy'."""
    return _name
