"""Week-by-week replay of a trace against a storage policy.

Each simulated week ``w`` runs, in order:

1. arrivals: datasets created in week ``w`` land on disk with their
   initial replica count;
2. long-term purge (``metric_m`` policy with a model, every
   ``purge_every`` weeks from the start week) using features of the
   weeks before ``w``;
3. accesses of week ``w``: a dataset with no disk replica is restored from
   tape, which counts as a mistake;
4. new forecasts or rankings from history up to and including ``w``;
5. removals down to capacity, then additions into any free capacity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .features import extract_features, feature_matrix
from .forest import ForestModel
from .smoothing import ALPHA_GRID, aligned_history, alpha_grid, fit_alpha_batch
from .strategy import (
    ADD,
    ActionRecord,
    StorageState,
    apply_action,
    fill_space,
    free_space,
    long_term_purge,
    rank_lfu,
    rank_lru,
    restore,
)
from .trace import Trace

log = logging.getLogger(__name__)

POLICIES = ("metric_m", "lru", "lfu")


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    policy: str = "metric_m"
    # explicit capacity wins over capacity_fraction
    capacity_bytes: int | None = None
    # fraction of the bytes all datasets would occupy at their initial replica counts
    capacity_fraction: float = 0.6
    max_replicas: int = 4
    purge_threshold: float = 0.1
    purge_every: int = 26
    start_week: int = 104
    alpha_step: float = 0.01


@dataclass
class SimulationResult:
    initial: StorageState
    final: StorageState
    log: list[ActionRecord]
    restores: int
    weekly_used: list[int] = field(default_factory=list)


def _capacity(trace: Trace, cfg: SimConfig) -> int:
    if cfg.capacity_bytes is not None:
        return int(cfg.capacity_bytes)
    total = sum(m.size_bytes * m.initial_replicas for m in trace.metas)
    return int(cfg.capacity_fraction * total)


def forecasts_at(trace: Trace, end: int, alphas: np.ndarray = ALPHA_GRID) -> dict[str, float]:
    """Fitted next-week forecast for every dataset created before ``end``."""
    creation = np.asarray(trace.creation_weeks)
    keep = np.flatnonzero(creation < end)
    if len(keep) == 0:
        return {}
    Y, lengths = aligned_history(trace.counts[keep], creation[keep], end)
    _, nxt, _ = fit_alpha_batch(Y, lengths, alphas)
    ids = trace.dataset_ids
    return {ids[i]: float(v) for i, v in zip(keep, nxt)}


def simulate(trace: Trace, cfg: SimConfig, model: ForestModel | None = None) -> SimulationResult:
    if cfg.policy not in POLICIES:
        raise SimulationError(f"unknown policy {cfg.policy!r}; expected one of {POLICIES}")
    if not 0 < cfg.start_week < trace.horizon_weeks:
        raise SimulationError(f"start_week must lie in (0, {trace.horizon_weeks})")
    if cfg.purge_every < 1:
        raise SimulationError("purge_every must be >= 1")

    sizes = {m.dataset_id: m.size_bytes for m in trace.metas}
    replicas = {
        m.dataset_id: (m.initial_replicas if m.creation_week < cfg.start_week else 0) for m in trace.metas
    }
    initial = StorageState(_capacity(trace, cfg), sizes, replicas)
    state = initial.copy()
    actions: list[ActionRecord] = []
    restores = 0
    weekly_used = []
    counts = trace.counts
    alphas = alpha_grid(cfg.alpha_step)

    for week in range(cfg.start_week, trace.horizon_weeks):
        for m in trace.metas:
            if m.creation_week == week:
                for _ in range(m.initial_replicas):
                    rec = ActionRecord(week, m.dataset_id, ADD, m.size_bytes)
                    apply_action(state, rec)
                    actions.append(rec)

        if cfg.policy == "metric_m" and model is not None and (week - cfg.start_week) % cfg.purge_every == 0:
            feats = extract_features(trace, week)
            probs = dict(zip((f.dataset_id for f in feats), model.predict_proba_matrix(feature_matrix(feats))))
            # datasets created this week have no history yet and are kept
            probs.update({ds: 1.0 for ds in state.on_disk() if ds not in probs})
            state, out_log, freed = long_term_purge(state, probs, cfg.purge_threshold, week)
            actions += out_log
            log.debug("week %d: purged %d datasets (%d bytes)", week, len(out_log), freed)

        for i in np.flatnonzero(counts[:, week]):
            ds = trace.metas[i].dataset_id
            if state.replicas[ds] == 0:
                state, out_log, _ = restore(state, ds, week)
                actions += out_log
                restores += 1

        ranking = None
        if cfg.policy == "metric_m":
            state.forecasts = forecasts_at(trace, week + 1, alphas)
        else:
            feats = extract_features(trace, week + 1)
            ranking = rank_lru(state, feats) if cfg.policy == "lru" else rank_lfu(state, feats)

        if state.used_bytes > state.capacity_bytes:
            state, out_log, _ = free_space(state, state.used_bytes - state.capacity_bytes, week, ranking)
            actions += out_log
        state, out_log, _ = fill_space(state, cfg.max_replicas, week, ranking)
        actions += out_log
        weekly_used.append(state.used_bytes)

    return SimulationResult(initial, state, actions, restores, weekly_used)
