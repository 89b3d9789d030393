"""Shared test utilities: finite-difference gradients and independent
brute-force oracles.

The oracles are deliberately naive (pure-Python loops, direct sums) so
they share no code path with the implementations they check.
"""

import math

import numpy as np

from convdiag.losses import cross_entropy_loss, least_squares_loss


def rel_err(a, b) -> float:
    """Norm-based relative error between two arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def central_difference(f, arrays, h=1e-5):
    """Numerical gradient of the scalar f() with respect to each array,
    via central differences with in-place perturbation."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat, gflat = arr.ravel(), g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def model_batch_loss(model, xs, ys) -> float:
    if model.task == "classification":
        probs = np.stack([model.forward(x) for x in xs])
        loss, _ = cross_entropy_loss(probs, ys)
    else:
        estimates = [model.forward(x) for x in xs]
        loss, _ = least_squares_loss(estimates, ys)
    return loss


def model_analytic_grads(model, xs, ys) -> dict:
    """Batch parameter gradients via per-sample backward accumulation,
    exactly as the training loop computes them."""
    accum = {k: np.zeros_like(v) for k, v in model.parameters().items()}
    q = len(xs)
    for x, y in zip(xs, ys):
        out = model.forward(x, cache=True)
        if model.task == "classification":
            _, grad = cross_entropy_loss(out[None, :], [y])
            model.backward(grad[0] / q)
        else:
            _, grad = least_squares_loss([out], [y])
            model.backward(grad[0] / q)
        for k, g in model.gradients().items():
            accum[k] += g
    return accum


def model_fd_grads(model, xs, ys, h=1e-5) -> dict:
    params = model.parameters()
    names = list(params)
    grads = central_difference(lambda: model_batch_loss(model, xs, ys),
                               [params[n] for n in names], h=h)
    return dict(zip(names, grads))


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------

def conv1d_oracle(x, kernels, biases, stride):
    """Direct summation: S_i = sum_c sum_j x[c, j + i*d] * K[f, c, j] + b_f."""
    channels, k = x.shape
    num_filters, _, m = kernels.shape
    out_len = (k - m) // stride + 1
    out = np.zeros((num_filters, out_len))
    for f in range(num_filters):
        for i in range(out_len):
            acc = biases[f]
            for c in range(channels):
                for j in range(m):
                    acc += x[c, j + i * stride] * kernels[f, c, j]
            out[f, i] = acc
    return out


def maxpool_oracle(x, pool_size, stride):
    """Window scan: M_i = max of x[l + i*e] for l in 0..p-1, per channel."""
    channels, length = x.shape
    out_len = (length - pool_size) // stride + 1
    out = np.zeros((channels, out_len))
    for c in range(channels):
        for i in range(out_len):
            best = x[c, i * stride]
            for l in range(1, pool_size):
                v = x[c, l + i * stride]
                if v > best:
                    best = v
            out[c, i] = best
    return out


def matmul_oracle(a, b):
    r, s = a.shape
    s2, t = b.shape
    assert s == s2
    out = np.zeros((r, t))
    for i in range(r):
        for j in range(t):
            acc = 0.0
            for k in range(s):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def counting_metrics_oracle(predictions, labels, positive):
    """Element-by-element one-vs-rest counting."""
    tp = fp = fn = tn = 0
    for p, y in zip(predictions, labels):
        if p == positive and y == positive:
            tp += 1
        elif p == positive and y != positive:
            fp += 1
        elif p != positive and y == positive:
            fn += 1
        else:
            tn += 1
    q = len(labels)
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    accuracy = (tp + tn) / q
    return tp, fp, fn, tn, precision, recall, accuracy


def regression_oracle(estimates, targets):
    q = len(targets)
    se = [(y - e) ** 2 for y, e in zip(targets, estimates)]
    ae = [abs(y - e) for y, e in zip(targets, estimates)]
    mse = sum(se) / q
    mae = sum(ae) / q
    mean = sum(targets) / q
    ss_tot = sum((y - mean) ** 2 for y in targets)
    r2 = 1.0 - sum(se) / ss_tot if ss_tot > 0 else None
    return mse, mae, r2, math.sqrt(mse)


def periodogram_energy(signal, frequency, sample_rate) -> float:
    """|X(f)|^2 via direct correlation with the complex exponential."""
    n = len(signal)
    t = np.arange(n) / sample_rate
    c = np.sum(signal * np.cos(2 * np.pi * frequency * t))
    s = np.sum(signal * np.sin(2 * np.pi * frequency * t))
    return float(c * c + s * s) / n
