"""Datasets, client partitioning, and label-flipping transformations."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IdxCountMismatchError,
    IdxLabelError,
    IdxMagicError,
    IdxTruncatedError,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IDX_NUM_CLASSES = 10  # de-facto MNIST encoding: label bytes 0..9


class LabeledDataset:
    """Feature matrix plus integer class labels.

    ``features`` is (n, input_dim) float64, ``labels`` is (n,) int64 with
    values in [0, num_classes). Instances are treated as immutable; arrays
    are not defensively copied.
    """

    __slots__ = ("features", "labels", "num_classes")

    def __init__(self, features, labels, num_classes: int):
        features = np.ascontiguousarray(features, dtype=np.float64)
        labels = np.ascontiguousarray(labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        if labels.ndim != 1 or len(labels) != len(features):
            raise ValueError(
                f"labels shape {labels.shape} does not match {len(features)} feature rows"
            )
        if num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {num_classes}")
        if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
            raise ValueError(f"labels outside [0, {num_classes})")
        self.features = features
        self.labels = labels
        self.num_classes = num_classes

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset(self.features[indices], self.labels[indices], self.num_classes)

    def __repr__(self) -> str:
        return f"LabeledDataset(n={len(self)}, dim={self.input_dim}, classes={self.num_classes})"


@dataclass(frozen=True)
class FlipMap:
    """Targeted label flips: every source class is relabeled to its target.

    ``pairs`` maps source -> target; distinct sources are enforced by the
    mapping itself and a source never equals its target.
    """

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        sources = [s for s, _ in self.pairs]
        if len(set(sources)) != len(sources):
            raise ValueError("flip sources must be distinct")
        for s, t in self.pairs:
            if s == t:
                raise ValueError(f"flip source {s} equals its target")
            if s < 0 or t < 0:
                raise ValueError("flip classes must be non-negative")
        object.__setattr__(self, "pairs", tuple(sorted(self.pairs)))

    @classmethod
    def from_mapping(cls, mapping) -> "FlipMap":
        return cls(tuple((int(s), int(t)) for s, t in dict(mapping).items()))

    @classmethod
    def rotation(cls, num_classes: int) -> "FlipMap":
        """All-classes rotation s -> (s + 1) mod num_classes."""
        return cls(tuple((s, (s + 1) % num_classes) for s in range(num_classes)))

    @property
    def max_class(self) -> int:
        return max((max(s, t) for s, t in self.pairs), default=-1)


@dataclass(frozen=True)
class AttackSchedule:
    """When malicious clients poison: always, from a start round, or periodically."""

    kind: str  # "constant" | "delayed" | "periodic"
    start_round: int = 1
    period: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "delayed", "periodic"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.start_round < 1:
            raise ValueError(f"start_round must be >= 1, got {self.start_round}")
        if self.period < 1:
            raise ValueError(f"period must be >= 1, got {self.period}")

    @classmethod
    def constant(cls) -> "AttackSchedule":
        return cls("constant")

    @classmethod
    def delayed(cls, start_round: int) -> "AttackSchedule":
        return cls("delayed", start_round=start_round)

    @classmethod
    def periodic(cls, period: int) -> "AttackSchedule":
        return cls("periodic", period=period)


@dataclass(frozen=True)
class AttackPlan:
    """Which clients are adversarial, how they flip, and when."""

    malicious_ids: frozenset[int]
    flip_map: FlipMap
    schedule: AttackSchedule = field(default_factory=AttackSchedule.constant)

    def __post_init__(self):
        object.__setattr__(self, "malicious_ids", frozenset(self.malicious_ids))
        if any(i < 0 for i in self.malicious_ids):
            raise ValueError("client ids must be non-negative")

    @classmethod
    def benign(cls) -> "AttackPlan":
        return cls(frozenset(), FlipMap(()))


@dataclass(frozen=True)
class PartitionSpec:
    """How training data is split across clients."""

    kind: str  # "iid" | "dirichlet"
    num_clients: int
    concentration: float = 1.0  # Dirichlet parameter; ignored for iid

    def __post_init__(self):
        if self.kind not in ("iid", "dirichlet"):
            raise ValueError(f"unknown partition kind {self.kind!r}")
        if self.num_clients < 2:
            raise ValueError(f"num_clients must be >= 2, got {self.num_clients}")
        if self.concentration <= 0:
            raise ValueError(f"concentration must be > 0, got {self.concentration}")


def _simplex_means(num_classes: int, input_dim: int) -> np.ndarray:
    """Class means: unit-simplex vertices embedded in R^(C-1), scaled by 4.

    The embedding maps the standard basis vectors isometrically onto the
    zero-sum hyperplane (Helmert basis), so pairwise mean distance is
    4 * sqrt(2) regardless of class count. Needs input_dim >= num_classes - 1.
    """
    if input_dim < num_classes - 1:
        raise ValueError(
            f"input_dim {input_dim} cannot separate {num_classes} classes; "
            f"need at least {num_classes - 1}"
        )
    helmert = np.zeros((num_classes - 1, num_classes))
    for k in range(1, num_classes):
        scale = 1.0 / np.sqrt(k * (k + 1))
        helmert[k - 1, :k] = scale
        helmert[k - 1, k] = -k * scale
    means = np.zeros((num_classes, input_dim))
    means[:, : num_classes - 1] = 4.0 * helmert.T
    return means


def gen_synthetic(
    num_classes: int,
    samples_per_class: int,
    input_dim: int,
    spread: float,
    seed: int,
) -> LabeledDataset:
    """Class-balanced Gaussian blobs, one isotropic blob per class.

    Blob centers sit 4*sqrt(2) apart, so any spread <= 0.5 leaves the task
    comfortably linearly separable. Deterministic per seed.
    """
    if num_classes < 1 or samples_per_class < 1 or input_dim < 1:
        raise ValueError("num_classes, samples_per_class, and input_dim must be >= 1")
    if spread <= 0:
        raise ValueError(f"spread must be > 0, got {spread}")
    rng = np.random.default_rng(seed)
    means = _simplex_means(num_classes, input_dim)
    features = np.vstack(
        [rng.normal(means[c], spread, size=(samples_per_class, input_dim))
         for c in range(num_classes)]
    )
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    return LabeledDataset(features, labels, num_classes)


def _read_idx_bytes(path) -> bytes:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_header(raw: bytes, path, expected_magic: int, num_dims: int) -> tuple[int, ...]:
    header_len = 4 * (1 + num_dims)
    if len(raw) < header_len:
        raise IdxTruncatedError(f"{path}: file shorter than its {header_len}-byte header")
    fields = struct.unpack(f">{1 + num_dims}I", raw[:header_len])
    if fields[0] != expected_magic:
        raise IdxMagicError(
            f"{path}: bad magic 0x{fields[0]:08x}, expected 0x{expected_magic:08x}"
        )
    return fields[1:]


def load_idx(images_path, labels_path, limit: int | None = None) -> LabeledDataset:
    """Load an IDX image/label file pair (the de-facto MNIST binary format).

    Pixels are scaled to [0, 1] and images flattened to rows. Files ending
    in .gz are decompressed transparently. ``limit`` truncates the sample
    count after validation.
    """
    img_raw = _read_idx_bytes(images_path)
    n_img, rows, cols = _parse_header(img_raw, images_path, IDX_IMAGES_MAGIC, 3)
    pixels = np.frombuffer(img_raw, dtype=np.uint8, offset=16)
    if len(pixels) < n_img * rows * cols:
        raise IdxTruncatedError(
            f"{images_path}: header declares {n_img}x{rows}x{cols} pixels, "
            f"found {len(pixels)} bytes"
        )

    lab_raw = _read_idx_bytes(labels_path)
    (n_lab,) = _parse_header(lab_raw, labels_path, IDX_LABELS_MAGIC, 1)
    label_bytes = np.frombuffer(lab_raw, dtype=np.uint8, offset=8)
    if len(label_bytes) < n_lab:
        raise IdxTruncatedError(
            f"{labels_path}: header declares {n_lab} labels, found {len(label_bytes)} bytes"
        )

    if n_img != n_lab:
        raise IdxCountMismatchError(
            f"{images_path} has {n_img} images but {labels_path} has {n_lab} labels"
        )

    n = n_img if limit is None else min(limit, n_img)
    labels = label_bytes[:n].astype(np.int64)
    if len(labels) and labels.max() >= IDX_NUM_CLASSES:
        raise IdxLabelError(
            f"{labels_path}: label byte {labels.max()} outside [0, {IDX_NUM_CLASSES})"
        )
    features = pixels[: n * rows * cols].reshape(n, rows * cols).astype(np.float64) / 255.0
    return LabeledDataset(features, labels, IDX_NUM_CLASSES)


def partition(data: LabeledDataset, spec: PartitionSpec, seed: int) -> list[LabeledDataset]:
    """Split a dataset into one disjoint shard per client (union is exact).

    iid: a random permutation cut into equal parts, any remainder going to
    the lowest client ids. dirichlet: for each class, client proportions are
    drawn from Dirichlet(concentration) and the class samples split at the
    cumulative cuts, the usual non-IID construction.
    """
    n, k = len(data), spec.num_clients
    if n < k:
        raise ValueError(f"cannot split {n} samples across {k} clients")
    rng = np.random.default_rng(seed)
    if spec.kind == "iid":
        shards = np.array_split(rng.permutation(n), k)
    else:
        per_client: list[list[np.ndarray]] = [[] for _ in range(k)]
        for cls in range(data.num_classes):
            cls_idx = rng.permutation(np.flatnonzero(data.labels == cls))
            if len(cls_idx) == 0:
                continue
            props = rng.dirichlet(np.full(k, spec.concentration))
            cuts = (np.cumsum(props)[:-1] * len(cls_idx)).astype(int)
            for client, part in enumerate(np.split(cls_idx, cuts)):
                per_client[client].append(part)
        shards = [
            np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
            for parts in per_client
        ]
    return [data.subset(idx) for idx in shards]


def apply_flip(data: LabeledDataset, flips: FlipMap) -> LabeledDataset:
    """Relabel every sample whose label is a flip source; features shared.

    All pairs are applied against the original labels simultaneously, so
    swap maps like {0->1, 1->0} exchange the two classes.
    """
    if flips.max_class >= data.num_classes:
        raise ValueError(
            f"flip map references class {flips.max_class} "
            f"but data has {data.num_classes} classes"
        )
    labels = data.labels.copy()
    for source, target in flips.pairs:
        labels[data.labels == source] = target
    return LabeledDataset(data.features, labels, data.num_classes)


def is_attacking(schedule: AttackSchedule, round_num: int) -> bool:
    """Whether poisoning is active in the given 1-based round."""
    if round_num < 1:
        raise ValueError(f"rounds are 1-based, got {round_num}")
    if schedule.kind == "constant":
        return True
    if schedule.kind == "delayed":
        return round_num >= schedule.start_round
    return round_num % schedule.period == 0
