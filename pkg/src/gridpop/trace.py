"""Access-trace data model and CSV import/export.

A trace is a set of weekly access tallies per dataset plus static dataset
metadata. Weeks are integer indices starting at 0.
"""

from __future__ import annotations

import csv
import io
import re
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

EVENTS_HEADER = ("dataset_id", "week", "count")
METAS_HEADER = (
    "dataset_id",
    "creation_week",
    "dtype",
    "extension",
    "size_bytes",
    "initial_replicas",
)


class TraceError(ValueError):
    """Raised for malformed or inconsistent trace data."""


@dataclass(frozen=True, slots=True)
class AccessEvent:
    dataset_id: str
    week: int
    count: int


@dataclass(frozen=True, slots=True)
class DatasetMeta:
    dataset_id: str
    creation_week: int
    dtype: int
    extension: int
    size_bytes: int
    initial_replicas: int


@dataclass(frozen=True)
class Trace:
    """Validated, normalized access trace.

    Events are merged on (dataset_id, week) and sorted by that key; metas are
    sorted by dataset_id. ``classes`` optionally carries the latent class of
    synthetic datasets and takes no part in equality or CSV export.
    """

    events: tuple[AccessEvent, ...]
    metas: tuple[DatasetMeta, ...]
    horizon_weeks: int
    classes: Mapping[str, str] | None = field(default=None, compare=False)

    @classmethod
    def build(
        cls,
        events: Iterable[AccessEvent],
        metas: Iterable[DatasetMeta],
        horizon_weeks: int | None = None,
        classes: Mapping[str, str] | None = None,
    ) -> Trace:
        """Normalize and validate; horizon defaults to max event week + 1."""
        metas = sorted(metas, key=lambda m: m.dataset_id)
        by_id: dict[str, DatasetMeta] = {}
        for m in metas:
            if m.dataset_id in by_id:
                raise TraceError(f"duplicate dataset_id {m.dataset_id!r}")
            _check_meta(m)
            by_id[m.dataset_id] = m

        merged: dict[tuple[str, int], int] = defaultdict(int)
        for ev in events:
            meta = by_id.get(ev.dataset_id)
            if meta is None:
                raise TraceError(f"event for unknown dataset {ev.dataset_id!r}")
            if ev.week < 0:
                raise TraceError(f"negative week {ev.week} for {ev.dataset_id!r}")
            if ev.count < 1:
                raise TraceError(f"count must be >= 1, got {ev.count} for {ev.dataset_id!r}")
            if ev.week < meta.creation_week:
                raise TraceError(
                    f"event at week {ev.week} before creation week "
                    f"{meta.creation_week} of {ev.dataset_id!r}"
                )
            merged[(ev.dataset_id, ev.week)] += ev.count

        max_week = max((w for _, w in merged), default=-1)
        if horizon_weeks is None:
            horizon_weeks = max_week + 1
        if horizon_weeks < 1:
            raise TraceError("trace horizon must be at least one week")
        if max_week >= horizon_weeks:
            raise TraceError(f"event at week {max_week} outside horizon {horizon_weeks}")

        normalized = tuple(AccessEvent(d, w, c) for (d, w), c in sorted(merged.items()))
        return cls(normalized, tuple(metas), horizon_weeks, classes)

    @property
    def dataset_ids(self) -> list[str]:
        return [m.dataset_id for m in self.metas]

    @cached_property
    def index(self) -> dict[str, int]:
        return {m.dataset_id: i for i, m in enumerate(self.metas)}

    @cached_property
    def meta_by_id(self) -> dict[str, DatasetMeta]:
        return {m.dataset_id: m for m in self.metas}

    @cached_property
    def counts(self) -> np.ndarray:
        """Dense (n_datasets, horizon_weeks) matrix of weekly access counts."""
        mat = np.zeros((len(self.metas), self.horizon_weeks), dtype=np.int64)
        if self.events:
            rows = np.fromiter((self.index[e.dataset_id] for e in self.events), dtype=np.int64)
            cols = np.fromiter((e.week for e in self.events), dtype=np.int64)
            vals = np.fromiter((e.count for e in self.events), dtype=np.int64)
            mat[rows, cols] = vals
        mat.setflags(write=False)
        return mat

    @cached_property
    def creation_weeks(self) -> np.ndarray:
        arr = np.array([m.creation_week for m in self.metas], dtype=np.int64)
        arr.setflags(write=False)
        return arr

    def series(self, dataset_id: str, end: int | None = None) -> np.ndarray:
        """Weekly counts of one dataset from its creation week up to ``end`` (exclusive)."""
        i = self.index[dataset_id]
        end = self.horizon_weeks if end is None else end
        return self.counts[i, self.metas[i].creation_week : end].astype(float)


def _check_meta(m: DatasetMeta) -> None:
    if m.creation_week < 0:
        raise TraceError(f"negative creation_week for {m.dataset_id!r}")
    if m.size_bytes <= 0:
        raise TraceError(f"size_bytes must be > 0 for {m.dataset_id!r}")
    if m.initial_replicas < 1:
        raise TraceError(f"initial_replicas must be >= 1 for {m.dataset_id!r}")


_HORIZON_RE = re.compile(r"\bhorizon_weeks=(\d+)")


def _split_lines(handle: io.TextIOBase) -> tuple[list[str], list[tuple[int, str]]]:
    # '#' lines carry provenance comments (digest, seed, horizon).
    comments, numbered = [], []
    for lineno, line in enumerate(handle, start=1):
        if line.startswith("#"):
            comments.append(line)
        elif line.strip():
            numbered.append((lineno, line))
    return comments, numbered


def _read_rows(
    path: Path, header: tuple[str, ...]
) -> tuple[list[str], list[tuple[int, list[str]]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        comments, numbered = _split_lines(fh)
    if not numbered:
        raise TraceError(f"{path}: missing header")
    reader = csv.reader(line for _, line in numbered)
    rows = list(reader)
    got = tuple(c.strip() for c in rows[0])
    if got != header:
        raise TraceError(f"{path}:{numbered[0][0]}: expected header {','.join(header)}")
    out = []
    for (lineno, _), row in zip(numbered[1:], rows[1:]):
        if len(row) != len(header):
            raise TraceError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        out.append((lineno, row))
    return comments, out


def _int(value: str, path: Path, lineno: int, name: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise TraceError(f"{path}:{lineno}: {name} is not an integer: {value!r}") from None


def read_metas(path: str | Path) -> list[DatasetMeta]:
    path = Path(path)
    metas = []
    _, rows = _read_rows(path, METAS_HEADER)
    for lineno, row in rows:
        ds, *rest = row
        vals = [_int(v, path, lineno, name) for v, name in zip(rest, METAS_HEADER[1:])]
        meta = DatasetMeta(ds, *vals)
        try:
            _check_meta(meta)
        except TraceError as exc:
            raise TraceError(f"{path}:{lineno}: {exc}") from None
        metas.append(meta)
    return metas


def read_events(path: str | Path) -> tuple[list[AccessEvent], int | None]:
    """Parse an events CSV; also returns the horizon recorded in its comments, if any."""
    path = Path(path)
    comments, rows = _read_rows(path, EVENTS_HEADER)
    events = []
    for lineno, (ds, week, count) in rows:
        events.append(
            AccessEvent(ds, _int(week, path, lineno, "week"), _int(count, path, lineno, "count"))
        )
    horizon = None
    for line in comments:
        m = _HORIZON_RE.search(line)
        if m:
            horizon = int(m.group(1))
    return events, horizon


def import_trace(
    events_path: str | Path, metas_path: str | Path, horizon_weeks: int | None = None
) -> Trace:
    """Load and validate a trace from the events and metas CSV files.

    The horizon is taken from the argument, else from a ``horizon_weeks=N``
    comment in the events file, else max event week + 1.
    """
    events, recorded = read_events(events_path)
    if horizon_weeks is None:
        horizon_weeks = recorded
    return Trace.build(events, read_metas(metas_path), horizon_weeks)


def export_trace(
    trace: Trace, events_path: str | Path, metas_path: str | Path, comment: str | None = None
) -> None:
    """Write ``trace`` in the import format. ``comment`` becomes a leading '#' line."""
    with open(events_path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(f"# horizon_weeks={trace.horizon_weeks}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENTS_HEADER)
        for e in trace.events:
            w.writerow((e.dataset_id, e.week, e.count))
    with open(metas_path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METAS_HEADER)
        for m in trace.metas:
            w.writerow(
                (m.dataset_id, m.creation_week, m.dtype, m.extension, m.size_bytes, m.initial_replicas)
            )
