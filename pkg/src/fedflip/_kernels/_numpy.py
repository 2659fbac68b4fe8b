"""Pure NumPy implementations of the hot kernels.

This is the fallback backend; the Cython module ``_core`` implements the
same functions with identical semantics. Both operate on raw float64
arrays so the rest of the package stays backend-agnostic.

Model parameter layout (flat vector, forward order, weights then biases,
weight matrices row-major):

* ``hidden_dim == 0``: ``W (input_dim x num_classes), b (num_classes)``
* ``hidden_dim  > 0``: ``W1 (input_dim x hidden_dim), b1 (hidden_dim),
  W2 (hidden_dim x num_classes), b2 (num_classes)``
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def _unpack(params: np.ndarray, input_dim: int, hidden_dim: int, num_classes: int):
    if hidden_dim == 0:
        k = input_dim * num_classes
        return [params[:k].reshape(input_dim, num_classes), params[k:]]
    k1 = input_dim * hidden_dim
    k2 = k1 + hidden_dim
    k3 = k2 + hidden_dim * num_classes
    return [
        params[:k1].reshape(input_dim, hidden_dim),
        params[k1:k2],
        params[k2:k3].reshape(hidden_dim, num_classes),
        params[k3:],
    ]


def logits(params, input_dim, hidden_dim, num_classes, X):
    """Class scores for every row of X, shape (n, num_classes)."""
    if hidden_dim == 0:
        W, b = _unpack(params, input_dim, hidden_dim, num_classes)
        return X @ W + b
    W1, b1, W2, b2 = _unpack(params, input_dim, hidden_dim, num_classes)
    hidden = np.maximum(X @ W1 + b1, 0.0)
    return hidden @ W2 + b2


def softmax_xent(scores, y):
    """Mean cross-entropy of logit rows against integer labels."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    return float((lse - shifted[np.arange(len(y)), y]).mean())


def loss_and_grad(params, input_dim, hidden_dim, num_classes, X, y):
    """Mean cross-entropy loss and its gradient w.r.t. the flat params."""
    n = len(y)
    rows = np.arange(n)
    if hidden_dim == 0:
        W, b = _unpack(params, input_dim, hidden_dim, num_classes)
        scores = X @ W + b
        shifted = scores - scores.max(axis=1, keepdims=True)
        expz = np.exp(shifted)
        probs = expz / expz.sum(axis=1, keepdims=True)
        loss = float((np.log(expz.sum(axis=1)) - shifted[rows, y]).mean())
        delta = probs
        delta[rows, y] -= 1.0
        delta /= n
        return loss, np.concatenate([(X.T @ delta).ravel(), delta.sum(axis=0)])

    W1, b1, W2, b2 = _unpack(params, input_dim, hidden_dim, num_classes)
    pre = X @ W1 + b1
    hidden = np.maximum(pre, 0.0)
    scores = hidden @ W2 + b2
    shifted = scores - scores.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    loss = float((np.log(expz.sum(axis=1)) - shifted[rows, y]).mean())
    delta2 = probs
    delta2[rows, y] -= 1.0
    delta2 /= n
    delta1 = (delta2 @ W2.T) * (pre > 0)
    return loss, np.concatenate(
        [
            (X.T @ delta1).ravel(),
            delta1.sum(axis=0),
            (hidden.T @ delta2).ravel(),
            delta2.sum(axis=0),
        ]
    )


def weighted_average(stack, weights):
    """Convex combination of the rows of ``stack``; weights normalized here."""
    w = weights / weights.sum()
    return w @ stack


def coordinate_median(stack):
    """Per-coordinate median; even row counts average the two central values."""
    return np.median(stack, axis=0)


def trimmed_mean(stack, trim):
    """Per-coordinate mean after dropping the ``trim`` smallest and largest."""
    if trim == 0:
        return stack.mean(axis=0)
    ordered = np.sort(stack, axis=0)
    return ordered[trim : len(stack) - trim].mean(axis=0)


def krum_scores(stack, n_neighbors):
    """Sum of squared distances from each row to its n_neighbors nearest rows."""
    m = len(stack)
    diffs = stack[:, None, :] - stack[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diffs, diffs)
    scores = np.empty(m)
    for i in range(m):
        others = np.delete(d2[i], i)
        others.sort()
        scores[i] = others[:n_neighbors].sum()
    return scores
