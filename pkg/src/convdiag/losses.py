"""Training losses with analytic gradients.

The classification loss is a per-class binary cross-entropy summed over
all classes of the softmax output (not the usual categorical form): for
every class j the indicator-weighted log p_j is joined by a
(1 - indicator)-weighted log(1 - p_j), and the whole double sum carries
a leading -1/q. Its gradient is returned with respect to the logits,
i.e. already pushed through the softmax Jacobian.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

CLAMP_EPS = 1e-12  # probabilities are clamped to [eps, 1-eps] before logs


def cross_entropy_loss(probs: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Loss and d(loss)/d(logits) for a batch of softmax outputs.

    probs is [q, N] with rows summing to 1; labels is a length-q vector
    of class indices in [0, N).
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    q, n_classes = probs.shape
    if labels.shape[0] != q:
        raise DataError(f"{q} probability rows but {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes}), got range "
                        f"[{labels.min()}, {labels.max()}]")
    row_sums = probs.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-6):
        worst = int(np.abs(row_sums - 1.0).argmax())
        raise DataError(f"probability row {worst} sums to {row_sums[worst]!r}, not 1")

    onehot = np.zeros_like(probs)
    onehot[np.arange(q), labels] = 1.0
    clamped = np.clip(probs, CLAMP_EPS, 1.0 - CLAMP_EPS)
    terms = onehot * np.log(clamped) + (1.0 - onehot) * np.log1p(-clamped)
    loss = -float(terms.sum()) / q

    # d(loss)/dz_k = -p_k (a_k - sum_j a_j p_j) / q  with
    # a_j = y_j / p_j - (1 - y_j) / (1 - p_j); the softmax Jacobian
    # p_j (delta_jk - p_k) is folded in analytically.
    a = onehot / clamped - (1.0 - onehot) / (1.0 - clamped)
    s = (a * probs).sum(axis=1, keepdims=True)
    grad_logits = -(probs * (a - s)) / q
    return loss, grad_logits


def least_squares_loss(estimates, targets) -> tuple[float, np.ndarray]:
    """Mean squared error (1/q) sum (y - y_est)^2 and d/d(estimates)."""
    estimates = np.asarray(estimates, dtype=np.float64).reshape(-1)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if estimates.shape != targets.shape:
        raise DataError(f"{estimates.size} estimates but {targets.size} targets")
    if estimates.size == 0:
        raise DataError("least-squares loss needs at least one sample")
    q = estimates.size
    residual = targets - estimates
    loss = float(residual @ residual) / q
    grad = -2.0 * residual / q
    return loss, grad
