"""Ranking and contrastive losses with analytic gradients.

All contrastive losses operate on cosine similarity of projected rows; their
gradients are returned with respect to the raw (unnormalized) rows so they can
be chained straight into the projection head backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.2
    lambda_l2: float = 1e-4
    denominator: str = "negatives"  # or "all" (SupCon-style) for ablation

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.lambda_l2 < 0:
            raise ValueError("lambda_l2 must be nonnegative")
        if self.denominator not in ("negatives", "all"):
            raise ValueError(f"unknown denominator mode {self.denominator!r}")


@dataclass
class ContrastBatch:
    """2N projected rows (two views per anchor node, interleaved) plus the
    positive / valid-negative pair masks.

    Masks are boolean 2N x 2N with false diagonals; the positive mask is
    symmetric, the two masks are disjoint, and together with the diagonal they
    cover every pair.
    """

    z: np.ndarray
    positive_mask: np.ndarray
    valid_negative_mask: np.ndarray

    def __post_init__(self):
        n = self.z.shape[0]
        if n % 2 != 0:
            raise ValueError("z must hold an even number of rows (two views per anchor)")
        for name, mask in (("positive_mask", self.positive_mask),
                           ("valid_negative_mask", self.valid_negative_mask)):
            if mask.shape != (n, n):
                raise ValueError(f"{name} shape {mask.shape} != ({n}, {n})")
            if mask.diagonal().any():
                raise ValueError(f"{name} has true diagonal entries")
        if (self.positive_mask & self.valid_negative_mask).any():
            raise ValueError("positive and negative masks overlap")
        if not (self.positive_mask | self.valid_negative_mask | np.eye(n, dtype=bool)).all():
            raise ValueError("masks plus diagonal must cover all pairs")
        if not (self.positive_mask == self.positive_mask.T).all():
            raise ValueError("positive_mask must be symmetric")


def bpr_loss(y_pos: np.ndarray, y_neg: np.ndarray, params_sq_norm: float, lambda_l2: float):
    """Pairwise ranking loss over sampled triples.

    loss = sum_t softplus(-(y_pos - y_neg)) + lambda * params_sq_norm.
    Returns (loss, grad_y_pos, grad_y_neg); the regularizer's gradient lives
    with the caller who owns the parameters.
    """
    y_pos = np.asarray(y_pos, dtype=np.float64)
    y_neg = np.asarray(y_neg, dtype=np.float64)
    if y_pos.shape != y_neg.shape:
        raise ValueError("score sequences must have equal length")
    margin = y_pos - y_neg
    loss = float(np.logaddexp(0.0, -margin).sum() + lambda_l2 * params_sq_norm)
    g = -expit(-margin)  # d/dy_pos of softplus(-margin)
    return loss, g, -g


def _normalize_rows(z: np.ndarray):
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm row: cosine similarity undefined")
    return z / norms[:, None], norms


def _cosine_backward(grad_s: np.ndarray, z_hat: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Chain dL/dS (S = Z_hat Z_hat^T) back to the unnormalized rows."""
    grad_hat = (grad_s + grad_s.T) @ z_hat
    radial = (grad_hat * z_hat).sum(axis=1, keepdims=True)
    return (grad_hat - radial * z_hat) / norms[:, None]


def info_nce(z: np.ndarray, tau: float):
    """NT-Xent over interleaved co-view pairs: rows 2t and 2t+1 are partners.

    Mean over all 2N ordered pairs of -log softmax(sim(i, partner) / tau) with
    the softmax running over all k != i. Returns (loss, grad_z).
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if n < 2 or n % 2 != 0:
        raise ValueError("need an even number >= 2 of rows")
    z_hat, norms = _normalize_rows(z)
    s = (z_hat @ z_hat.T) / tau
    np.fill_diagonal(s, -np.inf)
    partner = np.arange(n) ^ 1
    row_max = s.max(axis=1, keepdims=True)
    ex = np.exp(s - row_max)
    denom = ex.sum(axis=1, keepdims=True)
    p = ex / denom  # softmax over k != i (diagonal holds exact zeros)
    losses = -(s[np.arange(n), partner] - row_max.ravel() - np.log(denom.ravel()))
    loss = float(losses.mean())
    grad_s = p.copy()
    grad_s[np.arange(n), partner] -= 1.0
    grad_s /= n * tau
    return loss, _cosine_backward(grad_s, z_hat, norms)


def s_info_nce(batch: ContrastBatch, tau: float, denominator: str = "negatives"):
    """Supervised contrastive loss: per anchor, log of (sum over positives) over
    (sum over valid negatives), as a mean over all 2N anchors.

    denominator="negatives" excludes positives from the denominator (the
    printed form; the loss can go negative). denominator="all" uses every
    k != i instead. Returns (loss, grad_z).
    """
    if denominator not in ("negatives", "all"):
        raise ValueError(f"unknown denominator mode {denominator!r}")
    z = np.asarray(batch.z, dtype=np.float64)
    n = z.shape[0]
    if not batch.positive_mask.any(axis=1).all():
        raise ValueError("every anchor needs at least one positive")
    neg_mask = batch.valid_negative_mask if denominator == "negatives" \
        else ~np.eye(n, dtype=bool)
    if not neg_mask.any(axis=1).all():
        raise ValueError("anchor with empty denominator")
    z_hat, norms = _normalize_rows(z)
    s = (z_hat @ z_hat.T) / tau

    def masked_lse(mask):
        masked = np.where(mask, s, -np.inf)
        m = masked.max(axis=1, keepdims=True)
        ex = np.exp(masked - m)
        total = ex.sum(axis=1, keepdims=True)
        return (m + np.log(total)).ravel(), ex / total  # logsumexp and softmax

    lse_pos, p_pos = masked_lse(batch.positive_mask)
    lse_neg, p_neg = masked_lse(neg_mask)
    loss = float((lse_neg - lse_pos).mean())
    grad_s = (p_neg - p_pos) / (n * tau)
    return loss, _cosine_backward(grad_s, z_hat, norms)


# Naive double-loop references; oracles for the vectorized losses.

def info_nce_reference(z: np.ndarray, tau: float) -> float:
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    z_hat = z / np.linalg.norm(z, axis=1)[:, None]
    total = 0.0
    for i in range(n):
        j = i ^ 1
        num = np.exp(z_hat[i] @ z_hat[j] / tau)
        den = sum(np.exp(z_hat[i] @ z_hat[k] / tau) for k in range(n) if k != i)
        total += -np.log(num / den)
    return total / n


def s_info_nce_reference(batch: ContrastBatch, tau: float,
                         denominator: str = "negatives") -> float:
    z = np.asarray(batch.z, dtype=np.float64)
    n = z.shape[0]
    z_hat = z / np.linalg.norm(z, axis=1)[:, None]
    total = 0.0
    for i in range(n):
        num = sum(np.exp(z_hat[i] @ z_hat[j] / tau)
                  for j in range(n) if batch.positive_mask[i, j])
        if denominator == "negatives":
            den = sum(np.exp(z_hat[i] @ z_hat[k] / tau)
                      for k in range(n) if batch.valid_negative_mask[i, k])
        else:
            den = sum(np.exp(z_hat[i] @ z_hat[k] / tau) for k in range(n) if k != i)
        total += -np.log(num / den)
    return total / n
