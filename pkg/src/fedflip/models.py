"""Minimal differentiable classifiers over flat parameter vectors.

Two architectures share one parameter representation: plain softmax
regression (``hidden_dim == 0``) and a one-hidden-layer ReLU MLP. Parameters
live in a single flat float64 vector so server-side aggregators can operate
coordinate-wise without knowing the architecture.

Flat layout, in forward order, weights before biases, matrices row-major:

* softmax regression: ``W (input_dim x num_classes) | b (num_classes)``
* MLP: ``W1 (input_dim x hidden_dim) | b1 | W2 (hidden_dim x num_classes) | b2``
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import LabeledDataset

INIT_SCALE = 0.05  # weights drawn uniformly from [-INIT_SCALE, INIT_SCALE]


@dataclass(frozen=True)
class ModelArch:
    """Shape of the classifier; hidden_dim == 0 selects softmax regression."""

    input_dim: int
    hidden_dim: int
    num_classes: int

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.hidden_dim < 0:
            raise ValueError(f"hidden_dim must be >= 0, got {self.hidden_dim}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")

    @property
    def param_count(self) -> int:
        if self.hidden_dim == 0:
            return self.input_dim * self.num_classes + self.num_classes
        return (
            self.input_dim * self.hidden_dim
            + self.hidden_dim
            + self.hidden_dim * self.num_classes
            + self.num_classes
        )

    @property
    def arch_id(self) -> str:
        return f"{self.input_dim}x{self.hidden_dim}x{self.num_classes}"


@dataclass(frozen=True)
class SgdConfig:
    """Local training hyperparameters (E epochs of mini-batch SGD + momentum)."""

    learning_rate: float
    momentum: float = 0.0
    batch_size: int = 64
    local_epochs: int = 1

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.local_epochs < 1:
            raise ValueError(f"local_epochs must be >= 1, got {self.local_epochs}")


class ParamVector:
    """Flat float64 parameter vector bound to a ModelArch.

    Entries are validated to be finite on construction, which covers every
    training and aggregation step since those all build fresh vectors.
    Treat instances as immutable; ``values`` is not defensively copied.
    """

    __slots__ = ("values", "arch")

    def __init__(self, values, arch: ModelArch):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 1 or len(values) != arch.param_count:
            raise ValueError(
                f"expected {arch.param_count} parameters for arch {arch.arch_id}, "
                f"got shape {values.shape}"
            )
        if not np.isfinite(values).all():
            raise ValueError("parameter vector contains non-finite entries")
        self.values = values
        self.arch = arch

    @property
    def arch_id(self) -> str:
        return self.arch.arch_id

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ParamVector)
            and self.arch == other.arch
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"ParamVector(arch={self.arch_id}, n={len(self.values)})"


def init_params(arch: ModelArch, seed: int) -> ParamVector:
    """Deterministic initialization: small uniform weights, zero biases.

    Weight matrices are drawn layer by layer from U(-0.05, 0.05); the small
    symmetric scale keeps an untrained softmax near-uniform.
    """
    rng = np.random.default_rng(seed)
    if arch.hidden_dim == 0:
        blocks = [
            rng.uniform(-INIT_SCALE, INIT_SCALE, arch.input_dim * arch.num_classes),
            np.zeros(arch.num_classes),
        ]
    else:
        blocks = [
            rng.uniform(-INIT_SCALE, INIT_SCALE, arch.input_dim * arch.hidden_dim),
            np.zeros(arch.hidden_dim),
            rng.uniform(-INIT_SCALE, INIT_SCALE, arch.hidden_dim * arch.num_classes),
            np.zeros(arch.num_classes),
        ]
    return ParamVector(np.concatenate(blocks), arch)


def _check_batch(params: ParamVector, data: LabeledDataset):
    if len(data) == 0:
        raise ValueError("batch is empty")
    if data.features.shape[1] != params.arch.input_dim:
        raise ValueError(
            f"feature dim {data.features.shape[1]} does not match "
            f"arch input_dim {params.arch.input_dim}"
        )


def forward_loss_grad(params: ParamVector, batch: LabeledDataset) -> tuple[float, ParamVector]:
    """Mean cross-entropy over the batch and its gradient."""
    _check_batch(params, batch)
    a = params.arch
    loss, grad = _kernels.loss_and_grad(
        params.values, a.input_dim, a.hidden_dim, a.num_classes,
        batch.features, batch.labels,
    )
    return loss, ParamVector(grad, a)


def local_train(
    global_params: ParamVector,
    data: LabeledDataset,
    cfg: SgdConfig,
    seed: int,
) -> ParamVector:
    """Run E epochs of shuffled mini-batch SGD with momentum from the global model.

    Returns a fresh vector; the input is untouched. The momentum buffer
    starts at zero on every call (clients receive only the parameter vector,
    so optimizer state never crosses rounds). Update rule per step:
    ``v = momentum * v + g; p = p - lr * v``.
    """
    _check_batch(global_params, data)
    rng = np.random.default_rng(seed)
    a = global_params.arch
    params = global_params.values.copy()
    velocity = np.zeros_like(params)
    n = len(data)
    for _ in range(cfg.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grad = _kernels.loss_and_grad(
                params, a.input_dim, a.hidden_dim, a.num_classes,
                np.ascontiguousarray(data.features[idx]), data.labels[idx],
            )
            velocity *= cfg.momentum
            velocity += grad
            params -= cfg.learning_rate * velocity
    return ParamVector(params, a)


def evaluate(
    params: ParamVector,
    data: LabeledDataset,
    fraction: float = 1.0,
    seed: int = 0,
) -> tuple[float, float]:
    """Accuracy and mean cross-entropy on a seeded random subset of the data.

    The subset has ceil(fraction * len(data)) samples, so it is never empty;
    fraction 1.0 evaluates everything (the seed is then irrelevant).
    """
    _check_batch(params, data)
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n = len(data)
    k = math.ceil(fraction * n)
    if k == n:
        features, labels = data.features, data.labels
    else:
        idx = np.random.default_rng(seed).choice(n, size=k, replace=False)
        features = np.ascontiguousarray(data.features[idx])
        labels = data.labels[idx]
    a = params.arch
    scores = _kernels.logits(params.values, a.input_dim, a.hidden_dim, a.num_classes, features)
    accuracy = float((scores.argmax(axis=1) == labels).mean())
    return accuracy, _kernels.softmax_xent(scores, labels)
