"""Slow, loop-based reference implementations.

Nothing here calls into the autodiff engine or the layer code; these are
the independent side of every numerical comparison.
"""

from __future__ import annotations

import math

import numpy as np


def matmul_loops(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def conv2d_loops(x, w, b=None, stride=1, pad=0) -> np.ndarray:
    """Direct cross-correlation: out[n,o,i,j] = sum_{c,u,v} w[o,c,u,v] x[n,c,i*s+u-p,j*s+v-p]."""
    n, c, h, wd = x.shape
    co, ci, k, _ = w.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((n, co, ho, wo))
    for bn in range(n):
        for o in range(co):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0 if b is None else float(b[o])
                    for ch in range(c):
                        for u in range(k):
                            for v in range(k):
                                y, xx = i * stride + u - pad, j * stride + v - pad
                                if 0 <= y < h and 0 <= xx < wd:
                                    acc += w[o, ch, u, v] * x[bn, ch, y, xx]
                    out[bn, o, i, j] = acc
    return out


def conv_transpose2d_loops(x, w, b=None, stride=1, pad=0) -> np.ndarray:
    """Scatter form: each input pixel stamps w[c, o] into the (uncropped) output."""
    n, ci, h, wd = x.shape
    _, co, k, _ = w.shape
    full_h, full_w = (h - 1) * stride + k, (wd - 1) * stride + k
    full = np.zeros((n, co, full_h, full_w))
    for bn in range(n):
        for c in range(ci):
            for i in range(h):
                for j in range(wd):
                    for o in range(co):
                        for u in range(k):
                            for v in range(k):
                                full[bn, o, i * stride + u, j * stride + v] += x[bn, c, i, j] * w[c, o, u, v]
    out = full[:, :, pad : full_h - pad, pad : full_w - pad]
    if b is not None:
        out = out + np.asarray(b).reshape(1, -1, 1, 1)
    return out


def conv_matrix(w: np.ndarray, in_shape: tuple[int, int, int], stride=1, pad=0) -> np.ndarray:
    """Dense matrix M with vec(conv(x)) = M vec(x) for one sample."""
    c, h, wd = in_shape
    cols = []
    for idx in range(c * h * wd):
        e = np.zeros(c * h * wd)
        e[idx] = 1.0
        cols.append(conv2d_loops(e.reshape(1, c, h, wd), w, None, stride, pad).reshape(-1))
    return np.stack(cols, axis=1)


def unfold_loops(x: np.ndarray, k: int) -> np.ndarray:
    """N x C x K^2 x H x W neighborhoods with zero padding k // 2."""
    n, c, h, w = x.shape
    r = k // 2
    out = np.zeros((n, c, k * k, h, w))
    for bn in range(n):
        for ch in range(c):
            for u in range(k):
                for v in range(k):
                    for i in range(h):
                        for j in range(w):
                            y, xx = i + u - r, j + v - r
                            if 0 <= y < h and 0 <= xx < w:
                                out[bn, ch, u * k + v, i, j] = x[bn, ch, y, xx]
    return out


def involution_loops(x: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """out[n,c,i,j] = sum_{u,v} H[n, g(c), u, v, i, j] * x[n, c, i+u-r, j+v-r] with g(c) = c // (C/G)."""
    n, c, h, w = x.shape
    _, g, kk, _, _ = kernels.shape
    k = int(round(math.sqrt(kk)))
    r = k // 2
    per = c // g
    out = np.zeros_like(x)
    for bn in range(n):
        for ch in range(c):
            grp = ch // per
            for i in range(h):
                for j in range(w):
                    acc = 0.0
                    for u in range(k):
                        for v in range(k):
                            y, xx = i + u - r, j + v - r
                            if 0 <= y < h and 0 <= xx < w:
                                acc += kernels[bn, grp, u * k + v, i, j] * x[bn, ch, y, xx]
                    out[bn, ch, i, j] = acc
    return out


def involution_kernel_pixel(x_pix: np.ndarray, w0: np.ndarray, w1: np.ndarray, k: int, g: int) -> np.ndarray:
    """Kernel for one pixel with a ReLU-only middle: W1 relu(W0 x), read as K x K x G -> G x K^2."""
    hidden = np.maximum(matmul_loops(w0, x_pix.reshape(-1, 1)), 0.0)
    flat = matmul_loops(w1, hidden).reshape(-1)
    out = np.zeros((g, k * k))
    for u in range(k):
        for v in range(k):
            for gi in range(g):
                out[gi, u * k + v] = flat[(u * k + v) * g + gi]
    return out


def kl_loops(p: np.ndarray, q: np.ndarray) -> float:
    total = 0.0
    for a, b in zip(p, q):
        if a > 0:
            total += a * math.log(a / b)
    return total


def inception_score_loops(probs: np.ndarray, splits: int = 10) -> tuple[float, float]:
    n = len(probs)
    scores = []
    bounds = [n * s // splits for s in range(splits + 1)]
    for s in range(splits):
        part = probs[bounds[s] : bounds[s + 1]]
        marginal = [sum(row[j] for row in part) / len(part) for j in range(probs.shape[1])]
        kls = [kl_loops(row, marginal) for row in part]
        scores.append(math.exp(sum(kls) / len(kls)))
    mean = sum(scores) / splits
    std = math.sqrt(sum((s - mean) ** 2 for s in scores) / splits)
    return mean, std


def frechet_distance_mpmath(mu1, cov1, mu2, cov2, dps: int = 40) -> float:
    """||mu1-mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2}) in extended precision."""
    import mpmath

    with mpmath.workdps(dps):
        m1, m2 = mpmath.matrix(list(mu1)), mpmath.matrix(list(mu2))
        s1, s2 = mpmath.matrix(cov1.tolist()), mpmath.matrix(cov2.tolist())
        diff = m1 - m2
        d2 = sum(diff[i] ** 2 for i in range(len(mu1)))
        root = mpmath.sqrtm(s1 * s2)
        tr = sum(s1[i, i] + s2[i, i] - 2 * root[i, i] for i in range(s1.rows))
        return float(mpmath.re(d2 + tr))


def batch_norm_loops(x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Training-mode standardization of N x C x H x W with biased batch variance."""
    n, c, h, w = x.shape
    out = np.empty_like(x)
    cnt = n * h * w
    for ch in range(c):
        vals = [x[a, ch, i, j] for a in range(n) for i in range(h) for j in range(w)]
        mu = sum(vals) / cnt
        var = sum((v - mu) ** 2 for v in vals) / cnt
        out[:, ch] = (x[:, ch] - mu) / math.sqrt(var + eps)
    return out


def largest_singular_value(mat: np.ndarray, eig=None) -> float:
    """sqrt of the top eigenvalue of M^T M, via the supplied symmetric eigensolver or numpy."""
    gram = mat.T @ mat
    gram = 0.5 * (gram + gram.T)
    vals = eig(gram)[0] if eig is not None else np.linalg.eigvalsh(gram)
    return float(math.sqrt(max(float(np.max(vals)), 0.0)))


def finite_difference(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar f at x (x is restored)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return g


def mlp_critic_np(x: np.ndarray, w1: np.ndarray, w2: np.ndarray, slope: float = 0.1) -> np.ndarray:
    """Tiny critic used for penalty checks: w2 @ leaky(w1 @ x) per row."""
    h = x @ w1.T
    h = np.where(h > 0, h, slope * h)
    return (h @ w2.T).reshape(-1)


def penalty_fd(x_hat: np.ndarray, w1: np.ndarray, w2: np.ndarray, lam: float,
               eps: float = 1e-6, slope: float = 0.1) -> float:
    """Penalty with the input gradient taken by finite differences per sample."""
    norms = []
    for row in x_hat:
        g = finite_difference(lambda r: float(mlp_critic_np(r[None], w1, w2, slope)[0]), row.copy(), eps)
        norms.append(math.sqrt(float(np.sum(g * g))))
    return lam * float(np.mean([(n - 1.0) ** 2 for n in norms]))
