"""Pure numpy im2col / col2im, used when the compiled extension is missing."""

import numpy as np


def im2col(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    n, c, h, w = x.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.empty((n, ho, wo, c, k, k))
    for u in range(k):
        for v in range(k):
            patch = xp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride]
            out[:, :, :, :, u, v] = patch.transpose(0, 2, 3, 1)
    return out


def col2im(cols: np.ndarray, h: int, w: int, stride: int, pad: int) -> np.ndarray:
    n, ho, wo, c, k, _ = cols.shape
    hp, wp = h + 2 * pad, w + 2 * pad
    # extra stride-1 margin keeps every strided slice in range
    out = np.zeros((n, c, hp + stride - 1, wp + stride - 1))
    for u in range(k):
        for v in range(k):
            out[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += cols[
                :, :, :, :, u, v
            ].transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out[:, :, pad : pad + h, pad : pad + w])
