"""Shared fixtures: the reference scenario and a memoized run cache."""

import pytest

from fedflip import (
    AttackPlan,
    AttackSchedule,
    DataSpec,
    DefenseConfig,
    AggregatorSpec,
    ExperimentConfig,
    FlipMap,
    ModelArch,
    PartitionSpec,
    SgdConfig,
    build_datasets,
    run_experiment,
)

NUM_CLIENTS = 10
NUM_MALICIOUS = 4


def reference_config(
    defense: str = "antiflipper",
    schedule: AttackSchedule | None = None,
    attack: bool = True,
    seed: int = 0,
    rounds: int = 50,
) -> ExperimentConfig:
    """The 10-class blob task: 10 clients, 4 rotation-flipping attackers."""
    if attack:
        plan = AttackPlan(
            frozenset(range(NUM_MALICIOUS)),
            FlipMap.rotation(10),
            schedule or AttackSchedule.constant(),
        )
    else:
        plan = AttackPlan.benign()
    if defense == "antiflipper":
        defense_obj: DefenseConfig | AggregatorSpec = DefenseConfig(num_clients=NUM_CLIENTS)
    else:
        defense_obj = AggregatorSpec(
            kind=defense, num_byzantine=NUM_MALICIOUS, num_selected=NUM_CLIENTS - NUM_MALICIOUS
        )
    return ExperimentConfig(
        arch=ModelArch(16, 32, 10),
        sgd=SgdConfig(learning_rate=0.05, momentum=0.9, batch_size=64, local_epochs=3),
        data=DataSpec(kind="synthetic", num_classes=10, samples_per_class=200,
                      input_dim=16, spread=0.5),
        partition=PartitionSpec("iid", NUM_CLIENTS),
        attack=plan,
        defense=defense_obj,
        total_rounds=rounds,
        master_seed=seed,
    )


class RunCache:
    """Memoized reference runs so acceptance criteria can share executions."""

    def __init__(self):
        self._runs = {}

    def run(self, defense="antiflipper", schedule_kind="constant", attack=True,
            seed=0, rounds=50):
        key = (defense, schedule_kind, attack, seed, rounds)
        if key not in self._runs:
            if schedule_kind == "constant":
                schedule = AttackSchedule.constant()
            elif schedule_kind == "delayed":
                schedule = AttackSchedule.delayed(max(1, rounds // 2))
            else:
                schedule = AttackSchedule.periodic(15)
            cfg = reference_config(defense, schedule, attack, seed, rounds)
            _, test_set = build_datasets(cfg.data, cfg.master_seed)
            self._runs[key] = run_experiment(cfg, test_set)
        return self._runs[key]


@pytest.fixture(scope="session")
def run_cache():
    return RunCache()
