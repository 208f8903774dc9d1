"""Quality views for popularity predictions and storage policies.

* saved-space curve: remove datasets in ascending score order and track the
  fraction of bytes freed against the fraction of removed datasets that are
  accessed in the label window ("mistakes");
* forecast correlation: pooled Pearson correlation of walk-forward
  one-step-ahead forecasts with the observed weekly counts;
* occupancy CDF: share of used bytes held by datasets with at most k
  replicas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .features import FeatureVector, LabeledExample, extract_features, label_examples
from .smoothing import ALPHA_GRID, aligned_history, fit_alpha_batch
from .strategy import StorageState
from .trace import Trace

FORECAST_MODELS = ("brown", "static", "average")
MATCH_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5)


class EvaluationError(ValueError):
    pass


class Windows(NamedTuple):
    train: list[LabeledExample]
    validation: list[LabeledExample]


class CurvePoint(NamedTuple):
    saved_space_fraction: float
    mistake_rate: float
    policy: str


class CdfPoint(NamedTuple):
    n_replicas: int
    cumulative_space_fraction: float


@dataclass
class EvaluationReport:
    curve_points: list[CurvePoint]
    forecast_correlation: dict[str, float]
    cdf_points: list[CdfPoint]
    metadata: dict[str, str] = field(default_factory=dict)


def rolling_windows(trace: Trace, train_end: int = 78, valid_end: int = 104, label_weeks: int = 26) -> Windows:
    """Training and validation examples from two consecutive feature/label splits."""
    if label_weeks < 1:
        raise EvaluationError("label_weeks must be >= 1")
    if train_end < 1 or train_end + label_weeks > valid_end:
        raise EvaluationError(
            f"training labels [{train_end}, {train_end + label_weeks}) must end by valid_end {valid_end}"
        )
    if valid_end + label_weeks > trace.horizon_weeks:
        raise EvaluationError(
            f"validation labels [{valid_end}, {valid_end + label_weeks}) overrun horizon {trace.horizon_weeks}"
        )
    train = label_examples(extract_features(trace, train_end), trace, train_end, label_weeks)
    valid = label_examples(extract_features(trace, valid_end), trace, valid_end, label_weeks)
    return Windows(train, valid)


def removal_curve(
    order: Sequence[str], truth: Mapping[str, int], sizes: Mapping[str, int], policy: str = ""
) -> list[CurvePoint]:
    """Sweep removals in ``order``; one point per removed dataset."""
    if set(order) != set(truth) or set(truth) != set(sizes):
        raise EvaluationError("order, truth and sizes must cover the same datasets")
    total = sum(sizes.values())
    if total <= 0:
        raise EvaluationError("total size must be positive")
    points = []
    removed_bytes = 0
    mistakes = 0
    for k, ds in enumerate(order, start=1):
        removed_bytes += sizes[ds]
        mistakes += int(truth[ds])
        points.append(CurvePoint(removed_bytes / total, mistakes / k, policy))
    return points


def saved_space_curve(
    probabilities: Mapping[str, float],
    truth: Mapping[str, int],
    sizes: Mapping[str, int],
    policy: str = "forest",
) -> list[CurvePoint]:
    """Curve for removal in ascending probability order (ties by dataset id)."""
    if set(probabilities) != set(truth) or set(truth) != set(sizes):
        raise EvaluationError("probabilities, truth and sizes must share the same keys")
    order = sorted(probabilities, key=lambda ds: (probabilities[ds], ds))
    return removal_curve(order, truth, sizes, policy)


def lru_order(features: Iterable[FeatureVector]) -> list[str]:
    return [f.dataset_id for f in sorted(features, key=lambda f: (-f.recency, f.dataset_id))]


def lfu_order(features: Iterable[FeatureVector]) -> list[str]:
    return [f.dataset_id for f in sorted(features, key=lambda f: (f.frequency, f.dataset_id))]


def mistake_rate_at(curve: Sequence[CurvePoint], fraction: float) -> float:
    """Mistake rate at the first point that saves at least ``fraction`` of the space."""
    for p in curve:
        if p.saved_space_fraction >= fraction - 1e-12:
            return p.mistake_rate
    raise EvaluationError(f"curve never reaches saved fraction {fraction}")


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise EvaluationError("need at least two paired values")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if syy == 0:
        raise EvaluationError("truth has zero variance")
    if sxx == 0:
        raise EvaluationError("predictions have zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def walk_forward_pairs(
    trace: Trace, model: str, eval_weeks: Iterable[int], alphas: np.ndarray = ALPHA_GRID
) -> tuple[np.ndarray, np.ndarray]:
    """One-step-ahead predictions and observed counts for each evaluated week.

    Each week ``w`` refits on the weeks ``[creation, w)`` of every dataset
    with at least two weeks of history; other datasets are skipped.
    """
    if model not in FORECAST_MODELS:
        raise EvaluationError(f"unknown forecast model {model!r}")
    creation = np.asarray(trace.creation_weeks)
    counts = trace.counts
    preds, truth = [], []
    for w in eval_weeks:
        if not 0 < w < trace.horizon_weeks:
            raise EvaluationError(f"evaluated week {w} outside the trace")
        keep = np.flatnonzero(creation <= w - 2)
        if len(keep) == 0:
            continue
        Y, lengths = aligned_history(counts[keep], creation[keep], w)
        if model == "brown":
            _, p, _ = fit_alpha_batch(Y, lengths, alphas)
        elif model == "static":
            p = Y[np.arange(len(keep)), lengths - 1]
        else:
            p = Y.sum(axis=1) / lengths
        preds.append(p)
        truth.append(counts[keep, w].astype(float))
    if not preds:
        raise EvaluationError("no dataset has enough history in the evaluated weeks")
    return np.concatenate(preds), np.concatenate(truth)


def forecast_correlation(
    trace: Trace, model: str, eval_weeks: Iterable[int], alphas: np.ndarray = ALPHA_GRID
) -> float:
    """Pooled Pearson correlation of walk-forward forecasts with observed counts."""
    pred, truth = walk_forward_pairs(trace, model, eval_weeks, alphas)
    return pearson(pred, truth)


def occupancy_cdf(state: StorageState) -> list[CdfPoint]:
    """Cumulative share of used bytes by datasets with at most k replicas, k = 1..max."""
    if not state.replicas:
        raise EvaluationError("empty storage state")
    by_k: dict[int, int] = {}
    for ds, n in state.replicas.items():
        if n >= 1:
            by_k[n] = by_k.get(n, 0) + n * state.sizes[ds]
    total = sum(by_k.values())
    if total == 0:
        raise EvaluationError("storage state holds no bytes")
    points, acc = [], 0
    for k in range(1, max(by_k) + 1):
        acc += by_k.get(k, 0)
        points.append(CdfPoint(k, acc / total))
    return points


def compare_curves(
    candidate: Sequence[CurvePoint], baseline: Sequence[CurvePoint], fractions: Sequence[float] = MATCH_FRACTIONS
) -> list[tuple[float, float, float]]:
    """``(fraction, candidate_rate, baseline_rate)`` at each matched saved-space fraction."""
    return [(f, mistake_rate_at(candidate, f), mistake_rate_at(baseline, f)) for f in fractions]
