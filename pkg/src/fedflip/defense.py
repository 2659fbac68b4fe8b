"""Trust-based defense: anomaly-guided filtering and trust-weighted aggregation.

The server keeps one trust score per client, nudges it every round by the
squared deviation of the client's self-reported accuracy from the round
average, flags clients whose trust falls to 1/(k*n), and permanently
excludes a client once it has been flagged cnt_max times. Surviving trust
scores weight the model average.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import AggregationStarvedError, DegenerateTrustError
from .models import ParamVector


@dataclass(frozen=True)
class DefenseConfig:
    """Knobs of the trust engine for a population of num_clients clients."""

    num_clients: int
    trust_lr: float = 1.0
    k_factor: int = 2
    cnt_max: int = 3

    def __post_init__(self):
        if self.num_clients < 2:
            raise ValueError(f"num_clients must be >= 2, got {self.num_clients}")
        if self.trust_lr <= 0:
            raise ValueError(f"trust_lr must be > 0, got {self.trust_lr}")
        if self.k_factor <= 1:
            raise ValueError(f"k_factor must exceed 1, got {self.k_factor}")
        if self.cnt_max < 1:
            raise ValueError(f"cnt_max must be >= 1, got {self.cnt_max}")

    @property
    def trust_threshold(self) -> float:
        return 1.0 / (self.k_factor * self.num_clients)


@dataclass(frozen=True)
class TrustState:
    """The server's entire defense memory.

    trust: per-client score, normalized to sum to 1 over non-malicious
    clients. flags: how many rounds each client's trust sat at or below the
    threshold (never reset). malicious: permanently excluded client ids.
    """

    trust: dict[int, float]
    flags: dict[int, int]
    malicious: frozenset[int] = field(default_factory=frozenset)

    def active_ids(self) -> list[int]:
        return sorted(j for j in self.trust if j not in self.malicious)


def init_trust(num_clients: int) -> TrustState:
    """Uniform trust 1/n, zero flags, nobody excluded."""
    if num_clients < 2:
        raise ValueError(f"num_clients must be >= 2, got {num_clients}")
    share = 1.0 / num_clients
    return TrustState(
        trust={j: share for j in range(num_clients)},
        flags={j: 0 for j in range(num_clients)},
    )


def sq_deviation(acc: float, acc_avg: float) -> float:
    """Squared deviation of a client accuracy from the round average."""
    return (acc - acc_avg) ** 2


def normalize_trust(state: TrustState) -> TrustState:
    """Rescale non-malicious trust to sum to 1; malicious entries untouched.

    Negative scores (possible after a large penalty) clamp to zero first so
    the output stays in [0, 1]. If every non-malicious score clamps to zero
    the state is unusable and we fail loudly rather than resetting trust.
    """
    active = state.active_ids()
    if not active:
        raise DegenerateTrustError("no non-malicious clients left to normalize")
    clamped = {j: max(state.trust[j], 0.0) for j in active}
    total = sum(clamped.values())
    if total <= 0:
        raise DegenerateTrustError(
            "all non-malicious trust collapsed to zero; check trust_lr"
        )
    trust = dict(state.trust)
    for j in active:
        trust[j] = clamped[j] / total
    return TrustState(trust=trust, flags=dict(state.flags), malicious=state.malicious)


def mal_node_filter(
    state: TrustState,
    accuracies: dict[int, float],
    cfg: DefenseConfig,
    participants: set[int] | None = None,
) -> TrustState:
    """One round of trust updates, flagging, and exclusion.

    In this order: average the reported accuracies of non-excluded clients;
    reward clients at or above the average by trust_lr * sq_deviation and
    penalize those below; flag anyone whose updated trust is <= 1/(k*n) and
    add them to the malicious set at cnt_max flags; renormalize survivors.

    ``participants`` limits the round to a subset of clients (partial
    participation); by default every non-malicious client must report.
    Clients added to the malicious set here still counted toward this
    round's average; they are excluded from the next call on.
    """
    required = set(participants) if participants is not None else set(state.trust) - state.malicious
    reported = set(accuracies)
    if reported & state.malicious:
        raise ValueError(
            f"accuracy reported for excluded clients {sorted(reported & state.malicious)}"
        )
    missing = required - state.malicious - reported
    if missing:
        raise ValueError(f"missing accuracies for clients {sorted(missing)}")
    unknown = reported - set(state.trust)
    if unknown:
        raise ValueError(f"accuracies for unknown clients {sorted(unknown)}")

    active = sorted(required - state.malicious)
    acc_avg = float(np.mean([accuracies[j] for j in active]))

    trust = dict(state.trust)
    flags = dict(state.flags)
    malicious = set(state.malicious)
    for j in active:
        dev = sq_deviation(accuracies[j], acc_avg)
        if accuracies[j] < acc_avg:
            trust[j] -= cfg.trust_lr * dev
        else:
            trust[j] += cfg.trust_lr * dev
        if trust[j] <= cfg.trust_threshold:
            flags[j] += 1
            if flags[j] >= cfg.cnt_max:
                malicious.add(j)

    return normalize_trust(TrustState(trust=trust, flags=flags, malicious=frozenset(malicious)))


def weighted_aggregate(
    models: dict[int, ParamVector],
    state: TrustState,
    cfg: DefenseConfig,
) -> ParamVector:
    """Trust-weighted model average over eligible contributors.

    A client contributes only if it is not excluded and its trust strictly
    exceeds the flag threshold; weights are its trust over the contributors'
    total. Summation runs in ascending client id for a fixed floating-point
    order.
    """
    unknown = set(models) - set(state.trust)
    if unknown:
        raise ValueError(f"models from unknown clients {sorted(unknown)}")
    contributors = sorted(
        j for j in models
        if j not in state.malicious and state.trust[j] > cfg.trust_threshold
    )
    if not contributors:
        raise AggregationStarvedError(
            "every model was excluded or below the trust threshold"
        )
    arch = models[contributors[0]].arch
    for j in contributors:
        if models[j].arch != arch:
            raise ValueError(
                f"client {j} model arch {models[j].arch_id} != {arch.arch_id}"
            )
    stack = np.stack([models[j].values for j in contributors])
    weights = np.array([state.trust[j] for j in contributors])
    return ParamVector(_kernels.weighted_average(stack, weights), arch)


def compute_overhead_estimate(local_epochs: int, eval_fraction: float) -> float:
    """Relative cost of local evaluation versus local training.

    Training costs about 3*E forward-equivalents per sample (backward is
    roughly twice a forward); evaluating a fraction f of the data adds f
    forward passes, for a ratio of f / (3 * E).
    """
    if local_epochs < 1:
        raise ValueError(f"local_epochs must be >= 1, got {local_epochs}")
    if not 0 < eval_fraction <= 1:
        raise ValueError(f"eval_fraction must be in (0, 1], got {eval_fraction}")
    return eval_fraction / (3 * local_epochs)
