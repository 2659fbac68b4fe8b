"""Reference robust aggregators: FedAvg, coordinate-wise median/trimmed mean, Multi-Krum."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .models import ParamVector

AGGREGATOR_KINDS = ("fedavg", "median", "trimmed_mean", "multi_krum")


@dataclass(frozen=True)
class AggregatorSpec:
    """Which baseline aggregator to run and its static parameters.

    trim_ratio applies to trimmed_mean; num_byzantine (f) and num_selected
    (m) apply to multi_krum. Participant-count constraints for multi_krum
    are checked at call time, when the round size is known.
    """

    kind: str
    trim_ratio: float = 0.2
    num_byzantine: int = 0
    num_selected: int = 1

    def __post_init__(self):
        if self.kind not in AGGREGATOR_KINDS:
            raise ValueError(
                f"unknown aggregator {self.kind!r}; valid kinds: {', '.join(AGGREGATOR_KINDS)}"
            )
        if not 0 <= self.trim_ratio < 0.5:
            raise ValueError(f"trim_ratio must be in [0, 0.5), got {self.trim_ratio}")
        if self.num_byzantine < 0:
            raise ValueError(f"num_byzantine must be >= 0, got {self.num_byzantine}")
        if self.num_selected < 1:
            raise ValueError(f"num_selected must be >= 1, got {self.num_selected}")


def _stack(models: list[ParamVector]) -> np.ndarray:
    if not models:
        raise ValueError("no models to aggregate")
    arch = models[0].arch
    for i, m in enumerate(models):
        if m.arch != arch:
            raise ValueError(f"model {i} arch {m.arch_id} != {arch.arch_id}")
    return np.stack([m.values for m in models])


def fedavg(models: list[ParamVector], weights: list[float]) -> ParamVector:
    """Sample-count-weighted coordinate-wise mean (the FL default)."""
    stack = _stack(models)
    if len(weights) != len(models):
        raise ValueError(f"{len(weights)} weights for {len(models)} models")
    w = np.asarray(weights, dtype=np.float64)
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("weights must be non-negative with positive sum")
    return ParamVector(_kernels.weighted_average(stack, w), models[0].arch)


def coordinate_median(models: list[ParamVector]) -> ParamVector:
    """Per-coordinate median; even counts average the two central values."""
    stack = _stack(models)
    return ParamVector(_kernels.coordinate_median(stack), models[0].arch)


def trimmed_mean(models: list[ParamVector], trim_ratio: float) -> ParamVector:
    """Per-coordinate mean after dropping floor(ratio*n) extremes on each side."""
    stack = _stack(models)
    if not 0 <= trim_ratio < 0.5:
        raise ValueError(f"trim_ratio must be in [0, 0.5), got {trim_ratio}")
    trim = math.floor(trim_ratio * len(models))
    if len(models) - 2 * trim < 1:
        raise ValueError(
            f"trimming {trim} per side leaves nothing of {len(models)} models"
        )
    return ParamVector(_kernels.trimmed_mean(stack, trim), models[0].arch)


def multi_krum(models: list[ParamVector], num_byzantine: int, num_selected: int) -> ParamVector:
    """Mean of the num_selected lowest-scoring models under Krum scoring.

    A model's score is the summed squared Euclidean distance to its
    n - f - 2 nearest peers; score ties break toward the lower client index.
    Requires n - f - 2 >= 1 and 1 <= num_selected <= n - f.
    """
    stack = _stack(models)
    n = len(models)
    n_neighbors = n - num_byzantine - 2
    if n_neighbors < 1:
        raise ValueError(
            f"need at least {num_byzantine + 3} participants for f={num_byzantine}, got {n}"
        )
    if not 1 <= num_selected <= n - num_byzantine:
        raise ValueError(
            f"num_selected must be in [1, {n - num_byzantine}], got {num_selected}"
        )
    scores = _kernels.krum_scores(stack, n_neighbors)
    chosen = sorted(range(n), key=lambda i: (scores[i], i))[:num_selected]
    selected = stack[np.array(sorted(chosen))]
    return ParamVector(selected.mean(axis=0), models[0].arch)
