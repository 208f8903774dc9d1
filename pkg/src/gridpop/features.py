"""Per-dataset feature vectors and popularity labels over rolling windows.

The feature window is ``[0, window_end)``. Temporal features are ages in
weeks measured back from ``window_end``; any feature that is undefined
because the dataset had too few accesses takes the window length as a
sentinel, so "never accessed" orders as staler than any real access.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import Sequence

import numpy as np

from .trace import Trace

FEATURE_NAMES = (
    "recency",
    "reuse_distance",
    "first_access_age",
    "creation_age",
    "frequency",
    "dtype",
    "extension",
    "size_bytes",
)
RECENCY = FEATURE_NAMES.index("recency")
FREQUENCY = FEATURE_NAMES.index("frequency")


class WindowError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class FeatureVector:
    dataset_id: str
    recency: int
    reuse_distance: int
    first_access_age: int
    creation_age: int
    frequency: float
    dtype: int
    extension: int
    size_bytes: int

    def values(self) -> tuple[float, ...]:
        return astuple(self)[1:]


@dataclass(frozen=True, slots=True)
class LabeledExample:
    features: FeatureVector
    label: int

    @property
    def dataset_id(self) -> str:
        return self.features.dataset_id


def extract_features(trace: Trace, window_end: int) -> list[FeatureVector]:
    """One feature vector per dataset created before ``window_end``, ordered by id.

    Only events with week < ``window_end`` are looked at.
    """
    if not 0 < window_end <= trace.horizon_weeks:
        raise WindowError(f"window_end {window_end} outside (0, {trace.horizon_weeks}]")
    w = window_end
    keep = np.flatnonzero(trace.creation_weeks < w)
    counts = trace.counts[keep, :w]
    hit = counts > 0
    any_hit = hit.any(axis=1)

    weeks = np.arange(w)
    # index of last access, -1 if none
    last = np.where(hit, weeks, -1).max(axis=1)
    second = np.where(hit & (weeks < last[:, None]), weeks, -1).max(axis=1)
    first = np.where(hit, weeks, w).min(axis=1)

    recency = np.where(any_hit, w - last, w)
    reuse = np.where(second >= 0, last - second, w)
    first_age = np.where(any_hit, w - first, w)
    freq = counts.sum(axis=1) / w

    out = []
    for j, i in enumerate(keep):
        m = trace.metas[i]
        out.append(
            FeatureVector(
                m.dataset_id,
                int(recency[j]),
                int(reuse[j]),
                int(first_age[j]),
                w - m.creation_week,
                float(freq[j]),
                m.dtype,
                m.extension,
                m.size_bytes,
            )
        )
    return out


def label_examples(
    features: Sequence[FeatureVector], trace: Trace, label_start: int, label_weeks: int = 26
) -> list[LabeledExample]:
    """Label 1 iff the dataset has an access in ``[label_start, label_start + label_weeks)``."""
    if label_weeks < 1:
        raise WindowError("label window must span at least one week")
    if label_start < 0 or label_start + label_weeks > trace.horizon_weeks:
        raise WindowError(
            f"label window [{label_start}, {label_start + label_weeks}) overruns "
            f"horizon {trace.horizon_weeks}"
        )
    block = trace.counts[:, label_start : label_start + label_weeks]
    popular = block.any(axis=1)
    index = trace.index
    return [LabeledExample(f, int(popular[index[f.dataset_id]])) for f in features]


def feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Stack feature vectors into an ``(n, 8)`` float array in ``FEATURE_NAMES`` order."""
    if not vectors:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.array([v.values() for v in vectors], dtype=float)


def example_arrays(examples: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    X = feature_matrix([e.features for e in examples])
    y = np.array([e.label for e in examples], dtype=np.int64)
    return X, y
