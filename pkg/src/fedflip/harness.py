"""End-to-end round loop: distribute, train/evaluate, filter, aggregate, record.

Every source of randomness derives from the experiment's master seed through
fixed stream tags, so a run is a pure function of its config. Per-client
work uses per-(round, client) seeds and all reductions iterate clients in
ascending id, which keeps results identical no matter how client work would
be scheduled.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .baselines import (
    AggregatorSpec,
    coordinate_median,
    fedavg,
    multi_krum,
    trimmed_mean,
)
from .data import (
    AttackPlan,
    LabeledDataset,
    PartitionSpec,
    apply_flip,
    gen_synthetic,
    is_attacking,
    load_idx,
    partition,
)
from .defense import DefenseConfig, TrustState, init_trust, mal_node_filter, weighted_aggregate
from .errors import AggregationStarvedError
from .models import ModelArch, ParamVector, SgdConfig, evaluate, init_params, local_train

# Stream tags for seed derivation; values are part of the on-disk determinism
# contract (changing them changes every emitted metric).
STREAM_TRAIN_DATA = 0
STREAM_TEST_DATA = 1
STREAM_PARTITION = 2
STREAM_INIT = 3
STREAM_SAMPLE = 4
STREAM_EVAL = 5
STREAM_LOCAL = 6


def derive_seed(master_seed: int, *key: int) -> int:
    """Stable child seed for a (stream, round, client, ...) key."""
    return int(np.random.SeedSequence([master_seed, *key]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class DataSpec:
    """Where training/test data comes from: synthetic blobs or IDX files."""

    kind: str = "synthetic"  # "synthetic" | "idx"
    num_classes: int = 10
    samples_per_class: int = 200
    input_dim: int = 16
    spread: float = 0.5
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    limit: int = 0  # 0 means no limit (idx only)
    test_limit: int = 0

    def __post_init__(self):
        if self.kind not in ("synthetic", "idx"):
            raise ValueError(f"unknown data kind {self.kind!r}")
        if self.kind == "synthetic":
            if min(self.num_classes, self.samples_per_class, self.input_dim) < 1:
                raise ValueError("synthetic counts must be >= 1")
            if self.spread <= 0:
                raise ValueError(f"spread must be > 0, got {self.spread}")
        else:
            for name in ("train_images", "train_labels", "test_images", "test_labels"):
                if not getattr(self, name):
                    raise ValueError(f"idx data requires {name}")


def build_datasets(spec: DataSpec, master_seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Training data and a clean held-out test set for a master seed."""
    if spec.kind == "synthetic":
        train = gen_synthetic(
            spec.num_classes, spec.samples_per_class, spec.input_dim, spec.spread,
            derive_seed(master_seed, STREAM_TRAIN_DATA),
        )
        test = gen_synthetic(
            spec.num_classes, spec.samples_per_class, spec.input_dim, spec.spread,
            derive_seed(master_seed, STREAM_TEST_DATA),
        )
        return train, test
    train = load_idx(spec.train_images, spec.train_labels, spec.limit or None)
    test = load_idx(spec.test_images, spec.test_labels, spec.test_limit or None)
    return train, test


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; two runs with equal configs emit equal metrics."""

    arch: ModelArch
    sgd: SgdConfig
    data: DataSpec
    partition: PartitionSpec
    attack: AttackPlan
    defense: DefenseConfig | AggregatorSpec
    total_rounds: int = 50
    clients_per_round: int = 0  # 0 means full participation
    eval_fraction: float = 1.0
    master_seed: int = 0

    def __post_init__(self):
        if self.total_rounds < 1:
            raise ValueError(f"total_rounds must be >= 1, got {self.total_rounds}")
        n = self.partition.num_clients
        cpr = self.clients_per_round or n
        if not 1 <= cpr <= n:
            raise ValueError(
                f"clients_per_round must be in [1, {n}], got {self.clients_per_round}"
            )
        if not 0 < self.eval_fraction <= 1:
            raise ValueError(f"eval_fraction must be in (0, 1], got {self.eval_fraction}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be >= 0, got {self.master_seed}")
        bad = [i for i in self.attack.malicious_ids if i >= n]
        if bad:
            raise ValueError(f"malicious ids {sorted(bad)} exceed client range [0, {n})")
        if isinstance(self.defense, DefenseConfig) and self.defense.num_clients != n:
            raise ValueError(
                f"defense num_clients {self.defense.num_clients} != partition num_clients {n}"
            )

    @property
    def num_clients(self) -> int:
        return self.partition.num_clients

    @property
    def active_per_round(self) -> int:
        return self.clients_per_round or self.partition.num_clients

    @property
    def defense_kind(self) -> str:
        return "antiflipper" if isinstance(self.defense, DefenseConfig) else self.defense.kind


@dataclass(frozen=True)
class RoundRecord:
    """Per-round metrics snapshot."""

    round: int
    global_accuracy: float
    test_error: float
    local_accuracies: dict[int, float]
    trust_snapshot: dict[int, float]
    beta_snapshot: frozenset[int]
    aggregation_time_ns: int
    participants: frozenset[int]


@dataclass(frozen=True)
class DetectionReport:
    """Final exclusion set scored against the ground-truth attack plan."""

    detected: frozenset[int]
    true_positives: int
    false_positives: int
    false_negatives: int
    first_detection_round: int | None
    last_detection_round: int | None


@dataclass(frozen=True)
class SuiteRow:
    """One comparison-table row."""

    label: str
    final_accuracy: float
    final_test_error: float
    mean_aggregation_time_ns: float


def _check_dims(cfg: ExperimentConfig, train: LabeledDataset, test: LabeledDataset):
    for name, ds in (("training", train), ("test", test)):
        if ds.input_dim != cfg.arch.input_dim:
            raise ValueError(
                f"{name} data dim {ds.input_dim} != arch input_dim {cfg.arch.input_dim}"
            )
        if ds.num_classes != cfg.arch.num_classes:
            raise ValueError(
                f"{name} data has {ds.num_classes} classes, arch expects {cfg.arch.num_classes}"
            )
    if cfg.attack.malicious_ids and cfg.attack.flip_map.max_class >= cfg.arch.num_classes:
        raise ValueError("flip map references a class outside the task")


def _baseline_aggregate(
    spec: AggregatorSpec, models: list[ParamVector], sizes: list[int]
) -> ParamVector:
    if spec.kind == "fedavg":
        return fedavg(models, sizes)
    if spec.kind == "median":
        return coordinate_median(models)
    if spec.kind == "trimmed_mean":
        return trimmed_mean(models, spec.trim_ratio)
    return multi_krum(models, spec.num_byzantine, spec.num_selected)


def run_experiment(
    cfg: ExperimentConfig,
    test_set: LabeledDataset,
) -> tuple[list[RoundRecord], DetectionReport, ParamVector]:
    """Simulate the full federated run and return metrics, detection, final model.

    Each round: sample participants among non-excluded clients, let each
    evaluate the received global model on its own (possibly flipped) shard
    and then train on it, run the configured defense or baseline aggregator,
    and score the new global model on the clean test set. Only the
    aggregation call itself is timed.
    """
    train, _ = build_datasets(cfg.data, cfg.master_seed)
    _check_dims(cfg, train, test_set)
    shards = partition(train, cfg.partition, derive_seed(cfg.master_seed, STREAM_PARTITION))
    flipped = {
        j: apply_flip(shards[j], cfg.attack.flip_map)
        for j in cfg.attack.malicious_ids
        if cfg.attack.flip_map.pairs
    }
    empty = [j for j, s in enumerate(shards) if len(s) == 0]
    if empty:
        raise ValueError(
            f"clients {empty} received empty shards; use more data or fewer clients"
        )

    global_params = init_params(cfg.arch, derive_seed(cfg.master_seed, STREAM_INIT))
    is_trust_defense = isinstance(cfg.defense, DefenseConfig)
    state = init_trust(cfg.num_clients) if is_trust_defense else None
    detection_rounds: dict[int, int] = {}
    records: list[RoundRecord] = []

    for round_num in range(1, cfg.total_rounds + 1):
        excluded = state.malicious if is_trust_defense else frozenset()
        eligible = [j for j in range(cfg.num_clients) if j not in excluded]
        if not eligible:
            raise AggregationStarvedError(f"round {round_num}: every client is excluded")
        take = min(cfg.active_per_round, len(eligible))
        rng = np.random.default_rng(derive_seed(cfg.master_seed, STREAM_SAMPLE, round_num))
        participants = sorted(rng.choice(len(eligible), size=take, replace=False))
        participants = [eligible[i] for i in participants]

        attacking = cfg.attack.malicious_ids and is_attacking(cfg.attack.schedule, round_num)
        accuracies: dict[int, float] = {}
        models: dict[int, ParamVector] = {}
        sizes: dict[int, int] = {}
        for j in participants:
            shard = flipped[j] if (attacking and j in flipped) else shards[j]
            accuracies[j], _ = evaluate(
                global_params, shard, cfg.eval_fraction,
                derive_seed(cfg.master_seed, STREAM_EVAL, round_num, j),
            )
            models[j] = local_train(
                global_params, shard, cfg.sgd,
                derive_seed(cfg.master_seed, STREAM_LOCAL, round_num, j),
            )
            sizes[j] = len(shard)

        if is_trust_defense:
            state = mal_node_filter(state, accuracies, cfg.defense, set(participants))
            for j in sorted(state.malicious):
                detection_rounds.setdefault(j, round_num)
            start = time.perf_counter_ns()
            global_params = weighted_aggregate(models, state, cfg.defense)
            agg_ns = time.perf_counter_ns() - start
        else:
            ordered = [models[j] for j in participants]
            ordered_sizes = [sizes[j] for j in participants]
            start = time.perf_counter_ns()
            global_params = _baseline_aggregate(cfg.defense, ordered, ordered_sizes)
            agg_ns = time.perf_counter_ns() - start

        global_accuracy, test_error = evaluate(global_params, test_set)
        records.append(
            RoundRecord(
                round=round_num,
                global_accuracy=global_accuracy,
                test_error=test_error,
                local_accuracies=dict(accuracies),
                trust_snapshot=dict(state.trust) if is_trust_defense else {},
                beta_snapshot=state.malicious if is_trust_defense else frozenset(),
                aggregation_time_ns=agg_ns,
                participants=frozenset(participants),
            )
        )

    detected = state.malicious if is_trust_defense else frozenset()
    truth = cfg.attack.malicious_ids
    report = DetectionReport(
        detected=detected,
        true_positives=len(detected & truth),
        false_positives=len(detected - truth),
        false_negatives=len(truth - detected),
        first_detection_round=min(detection_rounds.values(), default=None),
        last_detection_round=max(detection_rounds.values(), default=None),
    )
    return records, report, global_params


def run_suite(
    configs: list[ExperimentConfig],
    test_set: LabeledDataset,
    master_seed: int | None = None,
) -> list[SuiteRow]:
    """Run several configs under one shared master seed; one row per config."""
    if not configs:
        return []
    seed = configs[0].master_seed if master_seed is None else master_seed
    rows = []
    for cfg in configs:
        records, _, _ = run_experiment(replace(cfg, master_seed=seed), test_set)
        rows.append(
            SuiteRow(
                label=cfg.defense_kind,
                final_accuracy=records[-1].global_accuracy,
                final_test_error=records[-1].test_error,
                mean_aggregation_time_ns=float(
                    np.mean([r.aggregation_time_ns for r in records])
                ),
            )
        )
    return rows
