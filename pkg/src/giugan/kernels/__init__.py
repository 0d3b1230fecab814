"""Neighborhood-gather kernels behind conv, transposed conv and involution.

The compiled extension is used when importable; ``GIUGAN_PURE_PYTHON=1``
forces the numpy fallback.  ``BACKEND`` names the active implementation.
"""

import os

import numpy as np

from . import _fallback

if os.environ.get("GIUGAN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _ext as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"


def out_extent(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def im2col(x: np.ndarray, k: int, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Gather K x K patches of ``x`` (N, C, H, W) into (N, Ho, Wo, C, K, K)."""
    if x.ndim != 4:
        raise ValueError(f"im2col expects a 4-d array, got shape {x.shape}")
    if out_extent(x.shape[2], k, stride, pad) < 1 or out_extent(x.shape[3], k, stride, pad) < 1:
        raise ValueError(f"kernel {k} with pad {pad} does not fit input {x.shape[2:]}")
    return _impl.im2col(np.ascontiguousarray(x, dtype=np.float64), k, stride, pad)


def col2im(cols: np.ndarray, h: int, w: int, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add columns back onto an (N, C, h, w) grid."""
    if cols.ndim != 6:
        raise ValueError(f"col2im expects a 6-d array, got shape {cols.shape}")
    return _impl.col2im(np.ascontiguousarray(cols, dtype=np.float64), h, w, stride, pad)


__all__ = ["BACKEND", "col2im", "im2col", "out_extent"]
