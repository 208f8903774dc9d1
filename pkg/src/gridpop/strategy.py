"""Replica add/remove engine driven by the metric M = forecast / n_replicas.

Removal repeatedly takes one replica from the dataset with the lowest M,
never touching a dataset's last replica. Addition repeatedly gives one
replica to the dataset with the highest M that still fits. Both recompute M
after every step. A separate long-term purge drops the last replica of
datasets whose predicted access probability is below a threshold; those
datasets stay recoverable from tape.

Tie-breaks: removal prefers (lower M, larger size, smaller id); addition
prefers (higher M, larger forecast, smaller size, smaller id).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from .features import FeatureVector

REMOVE = "remove_replica"
ADD = "add_replica"
PURGE = "purge"
RESTORE = "restore"
ACTIONS = (REMOVE, ADD, PURGE, RESTORE)


class StrategyError(ValueError):
    pass


def metric_m(forecast: float, n_replicas: int) -> float:
    """Predicted next-week accesses per replica."""
    if n_replicas < 1:
        raise StrategyError(f"metric needs at least one replica, got {n_replicas}")
    return forecast / n_replicas


@dataclass
class StorageState:
    """Disk replicas per dataset against a byte capacity.

    A dataset with zero replicas is not on disk (purged, or not yet
    created); it takes no part in removal or addition.
    """

    capacity_bytes: int
    sizes: dict[str, int]
    replicas: dict[str, int]
    forecasts: dict[str, float] = field(default_factory=dict)
    used_bytes: int = -1

    def __post_init__(self) -> None:
        missing = set(self.replicas) - set(self.sizes)
        if missing:
            raise StrategyError(f"replica counts for datasets without size: {sorted(missing)[:3]}")
        for ds, n in self.replicas.items():
            if n < 0:
                raise StrategyError(f"negative replica count for {ds!r}")
        if self.used_bytes < 0:
            self.used_bytes = self.recompute_used()

    @classmethod
    def from_items(
        cls,
        capacity_bytes: int,
        items: Iterable[tuple[str, int, int, float]],
    ) -> StorageState:
        """Build from ``(dataset_id, size_bytes, n_replicas, forecast)`` tuples."""
        sizes, reps, fc = {}, {}, {}
        for ds, size, n, f in items:
            sizes[ds], reps[ds], fc[ds] = size, n, float(f)
        return cls(capacity_bytes, sizes, reps, fc)

    def copy(self) -> StorageState:
        return StorageState(
            self.capacity_bytes, dict(self.sizes), dict(self.replicas), dict(self.forecasts), self.used_bytes
        )

    def recompute_used(self) -> int:
        return sum(n * self.sizes[ds] for ds, n in self.replicas.items())

    @property
    def free_bytes(self) -> int:
        return self.capacity_bytes - self.used_bytes

    def forecast(self, ds: str) -> float:
        return self.forecasts.get(ds, 0.0)

    def metric(self, ds: str) -> float:
        return metric_m(self.forecast(ds), self.replicas[ds])

    def metrics(self) -> dict[str, float]:
        return {ds: self.metric(ds) for ds, n in self.replicas.items() if n >= 1}

    def on_disk(self) -> list[str]:
        return sorted(ds for ds, n in self.replicas.items() if n >= 1)


@dataclass(frozen=True)
class ActionRecord:
    week: int
    dataset_id: str
    action: str
    bytes_delta: int


class Outcome(NamedTuple):
    state: StorageState
    log: list[ActionRecord]
    bytes_changed: int


def apply_action(state: StorageState, rec: ActionRecord) -> None:
    """Apply one logged action to ``state`` in place."""
    ds = rec.dataset_id
    size = state.sizes[ds]
    n = state.replicas.get(ds, 0)
    if rec.action in (ADD, RESTORE):
        if rec.action == RESTORE and n != 0:
            raise StrategyError(f"restore of {ds!r} which is on disk")
        state.replicas[ds] = n + 1
        expected = size
    elif rec.action == REMOVE:
        if n < 1:
            raise StrategyError(f"remove from {ds!r} which has no replica")
        state.replicas[ds] = n - 1
        expected = -size
    elif rec.action == PURGE:
        state.replicas[ds] = 0
        expected = -n * size
    else:
        raise StrategyError(f"unknown action {rec.action!r}")
    if rec.bytes_delta != expected:
        raise StrategyError(f"bytes_delta {rec.bytes_delta} does not match {rec.action} of {ds!r}")
    state.used_bytes += rec.bytes_delta


def replay(initial: StorageState, log: Iterable[ActionRecord]) -> StorageState:
    state = initial.copy()
    for rec in log:
        apply_action(state, rec)
    return state


def _removal_key(state: StorageState, ds: str) -> tuple:
    return (state.metric(ds), -state.sizes[ds], ds)


def _addition_key(state: StorageState, ds: str) -> tuple:
    return (-state.metric(ds), -state.forecast(ds), state.sizes[ds], ds)


def free_space(
    state: StorageState,
    target_bytes: int,
    week: int = 0,
    ranking: Sequence[str] | None = None,
) -> Outcome:
    """Remove replicas until ``target_bytes`` are freed or nothing is removable.

    Without ``ranking`` the lowest-M dataset loses a replica first; with a
    ranking (e.g. from :func:`rank_lru`) datasets are drained in that order.
    A dataset's last replica is never removed.
    """
    if target_bytes < 0:
        raise StrategyError("target_bytes must be >= 0")
    state = state.copy()
    log: list[ActionRecord] = []
    if target_bytes == 0:
        return Outcome(state, log, 0)
    if ranking is None:
        key: Callable[[str], tuple] = lambda ds: _removal_key(state, ds)
    else:
        pos = {ds: i for i, ds in enumerate(ranking)}
        key = lambda ds: (pos.get(ds, len(pos)), ds)

    heap = [(key(ds), ds) for ds, n in state.replicas.items() if n >= 2]
    heapq.heapify(heap)
    freed = 0
    while heap and freed < target_bytes:
        _, ds = heapq.heappop(heap)
        size = state.sizes[ds]
        rec = ActionRecord(week, ds, REMOVE, -size)
        apply_action(state, rec)
        log.append(rec)
        freed += size
        if state.replicas[ds] >= 2:
            heapq.heappush(heap, (key(ds), ds))
    return Outcome(state, log, freed)


def fill_space(
    state: StorageState,
    max_replicas: int,
    week: int = 0,
    ranking: Sequence[str] | None = None,
) -> Outcome:
    """Add replicas while some candidate fits in the free capacity.

    Without ``ranking`` the highest-M dataset with a positive forecast gains a
    replica first; with a removal ranking, datasets are filled in reverse
    ranking order. Datasets not on disk and datasets at ``max_replicas`` are
    skipped.
    """
    if max_replicas < 1:
        raise StrategyError("max_replicas must be >= 1")
    state = state.copy()
    log: list[ActionRecord] = []
    if ranking is None:
        key: Callable[[str], tuple] = lambda ds: _addition_key(state, ds)
        eligible = lambda ds: state.forecast(ds) > 0
    else:
        pos = {ds: i for i, ds in enumerate(ranking)}
        key = lambda ds: (-pos.get(ds, -1), ds)
        eligible = lambda ds: True

    heap = [
        (key(ds), ds)
        for ds, n in state.replicas.items()
        if 1 <= n < max_replicas and eligible(ds)
    ]
    heapq.heapify(heap)
    added = 0
    while heap:
        _, ds = heapq.heappop(heap)
        size = state.sizes[ds]
        if size > state.free_bytes:
            # free space only shrinks during a fill, so this one never fits again
            continue
        rec = ActionRecord(week, ds, ADD, size)
        apply_action(state, rec)
        log.append(rec)
        added += size
        if state.replicas[ds] < max_replicas:
            heapq.heappush(heap, (key(ds), ds))
    return Outcome(state, log, added)


def long_term_purge(
    state: StorageState, probabilities: Mapping[str, float], threshold: float, week: int = 0
) -> Outcome:
    """Drop every disk replica of datasets with access probability below ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise StrategyError("threshold must lie in [0, 1]")
    state = state.copy()
    log: list[ActionRecord] = []
    freed = 0
    for ds in state.on_disk():
        if ds not in probabilities:
            raise StrategyError(f"no probability for stored dataset {ds!r}")
        if probabilities[ds] < threshold:
            rec = ActionRecord(week, ds, PURGE, -state.replicas[ds] * state.sizes[ds])
            apply_action(state, rec)
            log.append(rec)
            freed -= rec.bytes_delta
    return Outcome(state, log, freed)


def restore(state: StorageState, dataset_id: str, week: int = 0) -> Outcome:
    """Bring a dataset with no disk replica back from tape as one replica."""
    state = state.copy()
    rec = ActionRecord(week, dataset_id, RESTORE, state.sizes[dataset_id])
    apply_action(state, rec)
    return Outcome(state, [rec], rec.bytes_delta)


def _feature_map(features: Mapping[str, FeatureVector] | Iterable[FeatureVector]) -> Mapping[str, FeatureVector]:
    if isinstance(features, Mapping):
        return features
    return {f.dataset_id: f for f in features}


def rank_lru(state: StorageState, features) -> list[str]:
    """On-disk datasets ordered for removal: least recently used first."""
    fmap = _feature_map(features)
    _require(state, fmap)
    return sorted(state.on_disk(), key=lambda ds: (-fmap[ds].recency, ds))


def rank_lfu(state: StorageState, features) -> list[str]:
    """On-disk datasets ordered for removal: least frequently used first."""
    fmap = _feature_map(features)
    _require(state, fmap)
    return sorted(state.on_disk(), key=lambda ds: (fmap[ds].frequency, ds))


def _require(state: StorageState, fmap: Mapping[str, FeatureVector]) -> None:
    missing = [ds for ds in state.on_disk() if ds not in fmap]
    if missing:
        raise StrategyError(f"no features for datasets {missing[:3]}")
