"""Frechet distance between Gaussian fits of two feature sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import psd_sqrt, symmetric_eigendecomp

EIG_CLIP = 1e-10


@dataclass
class GaussianFit:
    mean: np.ndarray
    covariance: np.ndarray

    @classmethod
    def from_features(cls, feats: np.ndarray) -> "GaussianFit":
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError(f"features must be N x F, got {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite values")
        n, f = feats.shape
        if n < f + 1:
            raise ValueError(f"need at least {f + 1} samples for {f} features, got {n}")
        mean = feats.mean(axis=0)
        centered = feats - mean
        cov = centered.T @ centered / (n - 1)
        return cls(mean, 0.5 * (cov + cov.T))


def frechet_distance(a: GaussianFit, b: GaussianFit) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The trace of the matrix root is taken from the eigenvalues of the
    symmetric product S_a^(1/2) S_b S_a^(1/2).
    """
    d = a.mean - b.mean
    root_a = psd_sqrt(a.covariance, EIG_CLIP)
    m = root_a @ b.covariance @ root_a
    w, _ = symmetric_eigendecomp(0.5 * (m + m.T))
    w = np.where(w < EIG_CLIP, 0.0, w)
    tr = np.trace(a.covariance) + np.trace(b.covariance) - 2.0 * np.sqrt(w).sum()
    return float(d @ d + tr)


def fid(real_feats: np.ndarray, fake_feats: np.ndarray) -> float:
    return frechet_distance(GaussianFit.from_features(real_feats), GaussianFit.from_features(fake_feats))
