"""Brown's simple exponential smoothing of weekly access counts.

The level starts at the mean of the whole series and is updated as

    level <- level + alpha * (y_t - level)

written here as ``(1 - alpha) * level + alpha * y_t`` so that alpha = 0 and
alpha = 1 reproduce the average and static forecasts bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ALPHA_GRID = np.arange(101) / 100.0


def alpha_grid(step: float = 0.01) -> np.ndarray:
    """Grid ``0, step, 2*step, ..., 1``; ``1/step`` must be a whole number."""
    n = round(1.0 / step)
    if n < 1 or abs(n * step - 1.0) > 1e-9:
        raise SmoothingError(f"alpha step must divide 1 evenly, got {step}")
    return np.arange(n + 1) / n


class SmoothingError(ValueError):
    pass


@dataclass(frozen=True)
class SmoothingFit:
    alpha: float
    initial_level: float
    next_forecast: float
    sse: float


def _as_series(series: Sequence[float], min_len: int = 1) -> list[float]:
    values = [float(v) for v in series]
    if len(values) < min_len:
        raise SmoothingError(f"series needs at least {min_len} value(s), got {len(values)}")
    return values


def _mean(values: list[float]) -> float:
    return math.fsum(values) / len(values)


def static_forecast(series: Sequence[float]) -> float:
    return _as_series(series)[-1]


def average_forecast(series: Sequence[float]) -> float:
    return _mean(_as_series(series))


def brown_forecast(series: Sequence[float], alpha: float) -> SmoothingFit:
    """Run the smoothing recurrence over ``series`` at a fixed ``alpha``.

    Returns the level one step past the end and the in-sample squared error
    of the one-step predictions.
    """
    values = _as_series(series)
    if not 0.0 <= alpha <= 1.0:
        raise SmoothingError(f"alpha must lie in [0, 1], got {alpha}")
    init = _mean(values)
    level, sse, keep = init, 0.0, 1.0 - alpha
    for y in values:
        err = level - y
        sse += err * err
        level = keep * level + alpha * y
    return SmoothingFit(alpha, init, level, sse)


def sse_grid(
    Y: np.ndarray,
    lengths: np.ndarray | None = None,
    alphas: np.ndarray = ALPHA_GRID,
    init: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """SSE and final level for every row of ``Y`` at every alpha.

    Row ``i`` is the series ``Y[i, :lengths[i]]`` (left-aligned, right
    padding ignored). Returns two ``(n_rows, n_alphas)`` arrays. Rows are
    processed longest first so each step works on a contiguous prefix.
    """
    Y = np.asarray(Y, dtype=float)
    n, width = Y.shape
    lengths = np.full(n, width) if lengths is None else np.asarray(lengths)
    if (lengths < 1).any() or (lengths > width).any():
        raise SmoothingError("series lengths must lie in [1, width]")
    order = np.argsort(-lengths, kind="stable")
    Ys, ls = Y[order], lengths[order]
    if init is None:
        cols = np.arange(width)
        init = np.where(cols[None, :] < ls[:, None], Ys, 0.0).sum(axis=1) / ls
    else:
        init = np.asarray(init, dtype=float)[order]
    a = np.asarray(alphas, dtype=float)[None, :]
    keep = 1.0 - a
    level = np.repeat(init[:, None], a.shape[1], axis=1)
    sse = np.zeros_like(level)
    # active[t] = number of rows whose series extends past t
    active = np.searchsorted(-ls, -np.arange(width), side="left")
    for t in range(width):
        k = active[t]
        if k == 0:
            break
        y = Ys[:k, t : t + 1]
        lv = level[:k]
        err = lv - y
        sse[:k] += err * err
        level[:k] = keep * lv + a * y
    out_sse, out_level = np.empty_like(sse), np.empty_like(level)
    out_sse[order], out_level[order] = sse, level
    return out_sse, out_level


def fit_alpha(series: Sequence[float], alphas: np.ndarray = ALPHA_GRID) -> SmoothingFit:
    """Grid-search alpha in {0, 0.01, ..., 1} for minimum SSE; ties go to smaller alpha."""
    values = _as_series(series, min_len=2)
    sse, _ = sse_grid(np.array([values]), alphas=alphas, init=np.array([_mean(values)]))
    best = int(np.argmin(sse[0]))
    return brown_forecast(values, float(alphas[best]))


def fit_alpha_batch(
    Y: np.ndarray, lengths: np.ndarray, alphas: np.ndarray = ALPHA_GRID
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised ``fit_alpha`` over left-aligned rows.

    Returns ``(alpha, next_forecast, sse)`` per row. Rows shorter than two
    weeks fall back to the series average with alpha reported as 0.
    """
    lengths = np.asarray(lengths)
    n = len(lengths)
    alpha = np.zeros(n)
    nxt = np.zeros(n)
    sse_out = np.zeros(n)
    has = lengths >= 1
    if has.any():
        sse, level = sse_grid(Y[has], lengths[has], alphas)
        best = np.argmin(sse, axis=1)
        rows = np.arange(len(best))
        short = lengths[has] < 2
        best = np.where(short, 0, best)
        alpha[has] = alphas[best]
        nxt[has] = level[rows, best]
        sse_out[has] = sse[rows, best]
    return alpha, nxt, sse_out


def forecast_horizon(fit: SmoothingFit, weeks: int) -> float:
    """Total forecast accesses over the next ``weeks`` (flat extrapolation)."""
    if weeks < 1:
        raise SmoothingError("horizon must be at least one week")
    return weeks * fit.next_forecast


def forecast_series(series: Sequence[float], alphas: np.ndarray = ALPHA_GRID) -> SmoothingFit:
    """Fitted forecast, falling back to the average for series under two weeks."""
    values = _as_series(series)
    if len(values) < 2:
        avg = average_forecast(values)
        return SmoothingFit(0.0, avg, avg, 0.0)
    return fit_alpha(values, alphas)


def aligned_history(counts: np.ndarray, start: np.ndarray, end: int) -> tuple[np.ndarray, np.ndarray]:
    """Left-align each row's weeks ``[start[i], end)`` of ``counts``.

    Returns the padded float matrix and the per-row lengths (0 when the row
    starts at or after ``end``).
    """
    start = np.asarray(start)
    lengths = np.clip(end - start, 0, None)
    width = max(1, int(lengths.max(initial=0)))
    cols = start[:, None] + np.arange(width)[None, :]
    valid = np.arange(width)[None, :] < lengths[:, None]
    safe = np.clip(cols, 0, counts.shape[1] - 1)
    Y = np.where(valid, counts[np.arange(len(start))[:, None], safe], 0).astype(float)
    return Y, lengths
