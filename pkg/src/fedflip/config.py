"""Experiment config files: a small TOML schema with defaults and overrides.

Grammar: TOML sections, one per subsystem, scalar values only (plus two
integer-list shapes for attack plans). Precedence is command-line overrides
over file values over built-in defaults. A section whose value is a bare
string is shorthand for its ``kind`` key, so the minimal useful config is
one line: ``defense = "antiflipper"``.

The README documents every key; ``dump_config`` emits a fully-resolved echo
that parses back to an equal config.
"""

from __future__ import annotations

import json

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .baselines import AGGREGATOR_KINDS, AggregatorSpec
from .data import AttackPlan, AttackSchedule, FlipMap, PartitionSpec
from .defense import DefenseConfig
from .errors import ConfigError
from .harness import DataSpec, ExperimentConfig
from .models import ModelArch, SgdConfig

DEFENSE_KINDS = ("antiflipper",) + AGGREGATOR_KINDS

# section -> key -> (type tag, default). Type tags: int, float, str,
# int_list, pair_list. Defaults marked None are resolved contextually.
_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "experiment": {
        "total_rounds": ("int", 50),
        "clients_per_round": ("int", 0),  # 0 = every client participates
        "eval_fraction": ("float", 1.0),
        "master_seed": ("int", 0),
    },
    "model": {
        "hidden_dim": ("int", 32),
    },
    "sgd": {
        "learning_rate": ("float", 0.05),
        "momentum": ("float", 0.9),
        "batch_size": ("int", 64),
        "local_epochs": ("int", 3),
    },
    "data": {
        "kind": ("str", "synthetic"),
        "num_classes": ("int", None),  # synthetic: 10; idx: must be 10
        "samples_per_class": ("int", 200),
        "input_dim": ("int", None),  # synthetic: 16; idx: 784
        "spread": ("float", 0.5),
        "train_images": ("str", ""),
        "train_labels": ("str", ""),
        "test_images": ("str", ""),
        "test_labels": ("str", ""),
        "limit": ("int", 0),
        "test_limit": ("int", 0),
    },
    "partition": {
        "kind": ("str", "iid"),
        "num_clients": ("int", 10),
        "concentration": ("float", 1.0),
    },
    "attack": {
        "malicious_fraction": ("float", 0.4),
        "malicious_ids": ("int_list", None),  # explicit ids beat the fraction
        "flip": ("str", "rotation"),
        "pairs": ("pair_list", None),  # explicit pairs beat the flip keyword
        "schedule": ("str", "constant"),
        "start_round": ("int", 0),  # 0 = total_rounds // 2 for delayed
        "period": ("int", 15),
    },
    "defense": {
        "kind": ("str", "antiflipper"),
        "trust_lr": ("float", 1.0),
        "k_factor": ("int", 2),
        "cnt_max": ("int", 3),
        "trim_ratio": ("float", 0.2),
        "num_byzantine": ("int", None),  # default: the attack plan's count
        "num_selected": ("int", None),  # default: participants - num_byzantine
    },
}


def _check_type(section: str, key: str, value, tag: str):
    path = f"{section}.{key}"
    if tag == "int":
        if type(value) is not int:
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tag == "float":
        if type(value) is bool or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tag == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if tag == "int_list":
        if not isinstance(value, list) or any(type(v) is not int for v in value):
            raise ConfigError(f"{path}: expected a list of integers, got {value!r}")
        return [int(v) for v in value]
    if tag == "pair_list":
        ok = isinstance(value, list) and all(
            isinstance(p, list) and len(p) == 2 and all(type(v) is int for v in p)
            for p in value
        )
        if not ok:
            raise ConfigError(f"{path}: expected a list of [source, target] pairs, got {value!r}")
        return [(int(s), int(t)) for s, t in value]
    raise AssertionError(tag)


def _bare_key_section(key: str) -> str:
    hits = [sec for sec, keys in _SCHEMA.items() if key in keys]
    if not hits:
        raise ConfigError(f"{key}: unknown config key")
    if len(hits) > 1:
        raise ConfigError(
            f"{key}: ambiguous; qualify as one of "
            + ", ".join(f"{sec}.{key}" for sec in hits)
        )
    return hits[0]


def _parse_override(item: str) -> tuple[str, str, object]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if "." in key:
        section, name = key.split(".", 1)
        if section not in _SCHEMA or name not in _SCHEMA[section]:
            raise ConfigError(f"{key}: unknown config key")
    else:
        name = key
        section = _bare_key_section(name)
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()  # bare words are strings
    return section, name, value


def _load_file(path) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc

    explicit: dict[str, dict[str, object]] = {}
    for section, content in doc.items():
        if section not in _SCHEMA:
            raise ConfigError(f"{section}: unknown config section")
        if isinstance(content, str) and "kind" in _SCHEMA[section]:
            content = {"kind": content}  # shorthand: defense = "antiflipper"
        if not isinstance(content, dict):
            raise ConfigError(f"{section}: expected a section, got {content!r}")
        for key, value in content.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown config key")
            explicit.setdefault(section, {})[key] = value
    return explicit


class _Resolved:
    """Explicit file/override values typed against the schema, with defaults."""

    def __init__(self, explicit: dict[str, dict[str, object]]):
        self.values: dict[str, dict[str, object]] = {}
        for section, keys in explicit.items():
            for key, value in keys.items():
                tag, _ = _SCHEMA[section][key]
                self.values.setdefault(section, {})[key] = _check_type(
                    section, key, value, tag
                )

    def has(self, section: str, key: str) -> bool:
        return key in self.values.get(section, {})

    def get(self, section: str, key: str, default=None):
        if self.has(section, key):
            return self.values[section][key]
        _, schema_default = _SCHEMA[section][key]
        return schema_default if schema_default is not None else default


def _build(res: _Resolved) -> ExperimentConfig:
    total_rounds = res.get("experiment", "total_rounds")
    clients_per_round = res.get("experiment", "clients_per_round")

    data_kind = res.get("data", "kind")
    if data_kind == "idx":
        num_classes = res.get("data", "num_classes", 10)
        if num_classes != 10:
            raise ConfigError("data.num_classes: idx data always has 10 classes")
        input_dim = res.get("data", "input_dim", 784)
    else:
        num_classes = res.get("data", "num_classes", 10)
        input_dim = res.get("data", "input_dim", 16)

    def construct(section, factory, **kwargs):
        try:
            return factory(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"{section}: {exc}") from exc

    data = construct(
        "data", DataSpec,
        kind=data_kind,
        num_classes=num_classes,
        samples_per_class=res.get("data", "samples_per_class"),
        input_dim=input_dim,
        spread=res.get("data", "spread"),
        train_images=res.get("data", "train_images"),
        train_labels=res.get("data", "train_labels"),
        test_images=res.get("data", "test_images"),
        test_labels=res.get("data", "test_labels"),
        limit=res.get("data", "limit"),
        test_limit=res.get("data", "test_limit"),
    )
    part = construct(
        "partition", PartitionSpec,
        kind=res.get("partition", "kind"),
        num_clients=res.get("partition", "num_clients"),
        concentration=res.get("partition", "concentration"),
    )
    arch = construct(
        "model", ModelArch,
        input_dim=input_dim,
        hidden_dim=res.get("model", "hidden_dim"),
        num_classes=num_classes,
    )
    sgd = construct(
        "sgd", SgdConfig,
        learning_rate=res.get("sgd", "learning_rate"),
        momentum=res.get("sgd", "momentum"),
        batch_size=res.get("sgd", "batch_size"),
        local_epochs=res.get("sgd", "local_epochs"),
    )

    if res.has("attack", "malicious_ids"):
        malicious_ids = frozenset(res.get("attack", "malicious_ids"))
    else:
        fraction = res.get("attack", "malicious_fraction")
        if not 0 <= fraction < 1:
            raise ConfigError(
                f"attack.malicious_fraction: must be in [0, 1), got {fraction}"
            )
        malicious_ids = frozenset(range(round(fraction * part.num_clients)))

    if res.has("attack", "pairs"):
        flip_map = construct("attack", FlipMap, pairs=tuple(res.get("attack", "pairs")))
    else:
        keyword = res.get("attack", "flip")
        if keyword == "rotation":
            flip_map = FlipMap.rotation(num_classes)
        elif keyword == "none":
            flip_map = FlipMap(())
        else:
            raise ConfigError(
                f"attack.flip: unknown flip {keyword!r}; use rotation, none, or explicit pairs"
            )

    schedule_kind = res.get("attack", "schedule")
    start_round = res.get("attack", "start_round")
    if schedule_kind == "delayed" and start_round == 0:
        start_round = max(1, total_rounds // 2)
    schedule = construct(
        "attack", AttackSchedule,
        kind=schedule_kind,
        start_round=max(1, start_round),
        period=res.get("attack", "period"),
    )
    attack = construct(
        "attack", AttackPlan,
        malicious_ids=malicious_ids, flip_map=flip_map, schedule=schedule,
    )

    defense_kind = res.get("defense", "kind")
    if defense_kind == "antiflipper":
        defense: DefenseConfig | AggregatorSpec = construct(
            "defense", DefenseConfig,
            num_clients=part.num_clients,
            trust_lr=res.get("defense", "trust_lr"),
            k_factor=res.get("defense", "k_factor"),
            cnt_max=res.get("defense", "cnt_max"),
        )
    elif defense_kind in AGGREGATOR_KINDS:
        per_round = clients_per_round or part.num_clients
        num_byz = res.get("defense", "num_byzantine", len(malicious_ids))
        num_sel = res.get("defense", "num_selected", max(1, per_round - num_byz))
        defense = construct(
            "defense", AggregatorSpec,
            kind=defense_kind,
            trim_ratio=res.get("defense", "trim_ratio"),
            num_byzantine=num_byz,
            num_selected=num_sel,
        )
        if defense_kind == "multi_krum" and per_round - num_byz - 2 < 1:
            raise ConfigError(
                f"defense.num_byzantine: multi_krum needs at least {num_byz + 3} "
                f"participants per round, got {per_round}"
            )
    else:
        raise ConfigError(
            f"defense.kind: unknown defense {defense_kind!r}; "
            f"valid kinds: {', '.join(DEFENSE_KINDS)}"
        )

    return construct(
        "experiment", ExperimentConfig,
        arch=arch, sgd=sgd, data=data, partition=part, attack=attack,
        defense=defense,
        total_rounds=total_rounds,
        clients_per_round=clients_per_round,
        eval_fraction=res.get("experiment", "eval_fraction"),
        master_seed=res.get("experiment", "master_seed"),
    )


def parse_config(path, overrides: tuple[str, ...] = ()) -> ExperimentConfig:
    """Load a config file and apply key=value overrides (flags beat file)."""
    explicit = _load_file(path)
    for item in overrides:
        section, key, value = _parse_override(item)
        explicit.setdefault(section, {})[key] = value
    return _build(_Resolved(explicit))


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)  # repr round-trips and always has . or e
    if isinstance(value, str):
        return json.dumps(value)  # JSON string escaping is valid TOML
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {value!r}")


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Canonical fully-resolved form of a config (the echo format)."""
    doc: dict[str, dict] = {
        "experiment": {
            "total_rounds": cfg.total_rounds,
            "clients_per_round": cfg.clients_per_round,
            "eval_fraction": cfg.eval_fraction,
            "master_seed": cfg.master_seed,
        },
        "model": {"hidden_dim": cfg.arch.hidden_dim},
        "sgd": {
            "learning_rate": cfg.sgd.learning_rate,
            "momentum": cfg.sgd.momentum,
            "batch_size": cfg.sgd.batch_size,
            "local_epochs": cfg.sgd.local_epochs,
        },
        "data": {"kind": cfg.data.kind},
        "partition": {
            "kind": cfg.partition.kind,
            "num_clients": cfg.partition.num_clients,
            "concentration": cfg.partition.concentration,
        },
        "attack": {
            "malicious_ids": sorted(cfg.attack.malicious_ids),
            "pairs": [list(p) for p in cfg.attack.flip_map.pairs],
            "schedule": cfg.attack.schedule.kind,
            "start_round": cfg.attack.schedule.start_round,
            "period": cfg.attack.schedule.period,
        },
    }
    if cfg.data.kind == "synthetic":
        doc["data"].update(
            num_classes=cfg.data.num_classes,
            samples_per_class=cfg.data.samples_per_class,
            input_dim=cfg.data.input_dim,
            spread=cfg.data.spread,
        )
    else:
        doc["data"].update(
            input_dim=cfg.data.input_dim,
            train_images=cfg.data.train_images,
            train_labels=cfg.data.train_labels,
            test_images=cfg.data.test_images,
            test_labels=cfg.data.test_labels,
            limit=cfg.data.limit,
            test_limit=cfg.data.test_limit,
        )
    if isinstance(cfg.defense, DefenseConfig):
        doc["defense"] = {
            "kind": "antiflipper",
            "trust_lr": cfg.defense.trust_lr,
            "k_factor": cfg.defense.k_factor,
            "cnt_max": cfg.defense.cnt_max,
        }
    else:
        doc["defense"] = {
            "kind": cfg.defense.kind,
            "trim_ratio": cfg.defense.trim_ratio,
            "num_byzantine": cfg.defense.num_byzantine,
            "num_selected": cfg.defense.num_selected,
        }
    return doc


def dump_config(cfg: ExperimentConfig) -> str:
    """Render a config as TOML; parse_config on the result reproduces it."""
    lines = []
    for section, keys in config_to_dict(cfg).items():
        lines.append(f"[{section}]")
        for key, value in keys.items():
            lines.append(f"{key} = {_toml_scalar(value)}")
        lines.append("")
    return "\n".join(lines)
