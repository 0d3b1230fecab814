"""Inception score over class posteriors."""

from __future__ import annotations

import numpy as np


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    nz = p > 0
    qb = np.broadcast_to(q, p.shape)
    out[nz] = p[nz] * (np.log(p[nz]) - np.log(qb[nz]))
    return out.sum(axis=1)


def inception_score_from_probs(probs: np.ndarray, splits: int = 10) -> tuple[float, float]:
    """exp(E_x KL(p(y|x) || p(y))) per split; returns (mean, std) across splits."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ValueError(f"posteriors must be N x L, got {probs.shape}")
    if splits < 1 or probs.shape[0] < 2 * splits:
        raise ValueError(f"need at least {2 * splits} images for {splits} splits, got {probs.shape[0]}")
    scores = []
    for part in np.array_split(probs, splits):
        marginal = part.mean(axis=0, keepdims=True)
        scores.append(np.exp(_kl_rows(part, marginal).mean()))
    scores = np.asarray(scores)
    return float(scores.mean()), float(scores.std())


def inception_score(images, fe, splits: int = 10) -> tuple[float, float]:
    return inception_score_from_probs(softmax(fe.logits(images)), splits)
