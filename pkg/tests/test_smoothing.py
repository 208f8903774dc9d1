import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridpop.smoothing import (
    SmoothingError,
    SmoothingFit,
    aligned_history,
    alpha_grid,
    average_forecast,
    brown_forecast,
    fit_alpha,
    fit_alpha_batch,
    forecast_horizon,
    forecast_series,
    static_forecast,
)


def oracle_sse(series, alpha):
    """Textbook recurrence, level <- level + alpha * (y - level), from the series mean."""
    level = sum(series) / len(series)
    sse = 0.0
    for y in series:
        sse += (level - y) ** 2
        level = level + alpha * (y - level)
    return sse, level


def oracle_fit(series):
    best = None
    for k in range(101):
        sse, level = oracle_sse(series, k / 100)
        if best is None or sse < best[1]:
            best = (k / 100, sse, level)
    return best


def test_constant_series():
    for a in (0.0, 0.3, 1.0):
        fit = brown_forecast([5, 5, 5], a)
        assert fit.next_forecast == 5 and fit.sse == 0


def test_extremes():
    assert brown_forecast([1, 2, 3], 1.0).next_forecast == 3
    assert brown_forecast([2, 4, 6], 0.0).next_forecast == 4


def test_hand_recurrence():
    fit = brown_forecast([0, 4], 0.5)
    assert fit.initial_level == 2
    # level after y0 is 1, after y1 is 2.5; errors 2 and -3
    assert fit.next_forecast == 2.5
    assert fit.sse == 4 + 9


@pytest.mark.parametrize("bad", [[], None])
def test_empty_series(bad):
    with pytest.raises((SmoothingError, TypeError)):
        brown_forecast(bad, 0.5)


@pytest.mark.parametrize("alpha", [-0.1, 1.01])
def test_alpha_range(alpha):
    with pytest.raises(SmoothingError):
        brown_forecast([1, 2], alpha)


def test_fit_constant_ties_to_zero():
    fit = fit_alpha([3, 3, 3, 3])
    assert fit.alpha == 0.0 and fit.sse == 0


def test_fit_single_jump_series_follows_oracle():
    # Starting from the mean (6), alpha = 1 pays (1 - 7)^2 at the second
    # step, so the brute-force optimum is alpha = 0 with SSE 25 + 5 = 30.
    fit = fit_alpha([1, 7, 7, 7, 7, 7])
    assert (fit.alpha, fit.sse) == (0.0, 30.0)
    assert oracle_fit([1, 7, 7, 7, 7, 7])[:2] == (0.0, 30.0)


@pytest.mark.parametrize(
    "series, sse",
    [
        ([1, 1, 1, 7, 7, 7, 7, 7, 7, 7], 53.64),
        ([0, 0, 0, 0] + [10] * 8, 144.44444444444446),
    ],
)
def test_fit_level_shift_with_long_persistence_picks_alpha_one(series, sse):
    fit = fit_alpha(series)
    assert fit.alpha == 1.0
    assert fit.sse == pytest.approx(sse, rel=1e-12)
    assert fit.next_forecast == series[-1]


def test_fit_iid_noise_prefers_small_alpha():
    rng = np.random.default_rng(123)
    series = list(rng.poisson(10, 60).astype(float))
    fit = fit_alpha(series)
    assert fit.alpha <= 0.5
    assert fit.sse <= brown_forecast(series, 1.0).sse
    assert fit.alpha == oracle_fit(series)[0]


def test_fit_needs_two_points():
    with pytest.raises(SmoothingError):
        fit_alpha([4])


def test_forecast_horizon():
    assert forecast_horizon(SmoothingFit(0.3, 1.0, 2.5, 0.0), 4) == 10.0
    assert forecast_horizon(SmoothingFit(0.3, 0.0, 0.0, 0.0), 9) == 0
    assert forecast_horizon(brown_forecast([3, 3, 3], 0.4), 4) == 12.0
    with pytest.raises(SmoothingError):
        forecast_horizon(SmoothingFit(0, 0, 1, 0), 0)


def test_static_and_average():
    assert static_forecast([1, 2, 9]) == 9
    assert average_forecast([1, 2, 9]) == 4
    with pytest.raises(SmoothingError):
        static_forecast([])


def test_short_series_fallback():
    assert forecast_series([6]).next_forecast == 6


series_st = st.lists(st.floats(0, 1e4, allow_nan=False), min_size=1, max_size=40)


@settings(max_examples=200, deadline=None)
@given(series=series_st)
def test_extreme_identities_exact(series):
    assert brown_forecast(series, 1.0).next_forecast == static_forecast(series)
    assert brown_forecast(series, 0.0).next_forecast == average_forecast(series)


@settings(max_examples=100, deadline=None)
@given(series=st.lists(st.integers(0, 200), min_size=2, max_size=40))
def test_fit_matches_oracle_and_beats_extremes(series):
    fit = fit_alpha(series)
    alpha, sse, level = oracle_fit(series)
    assert fit.sse == pytest.approx(sse, rel=1e-9, abs=1e-9)
    if fit.alpha != alpha:
        # only allowed on floating-point ties
        assert oracle_sse(series, fit.alpha)[0] == pytest.approx(sse, rel=1e-12, abs=1e-9)
    assert fit.sse <= brown_forecast(series, 0.0).sse + 1e-9
    assert fit.sse <= brown_forecast(series, 1.0).sse + 1e-9
    assert fit.next_forecast >= 0


@settings(max_examples=50, deadline=None)
@given(rows=st.lists(st.lists(st.integers(0, 30), min_size=1, max_size=15), min_size=1, max_size=8))
def test_batch_matches_scalar(rows):
    width = max(map(len, rows))
    Y = np.array([r + [0] * (width - len(r)) for r in rows], dtype=float)
    lengths = np.array([len(r) for r in rows])
    alpha, nxt, sse = fit_alpha_batch(Y, lengths)
    for i, r in enumerate(rows):
        ref = forecast_series(r)
        assert alpha[i] == ref.alpha
        assert nxt[i] == pytest.approx(ref.next_forecast, rel=1e-12, abs=1e-12)
        assert sse[i] == pytest.approx(ref.sse, rel=1e-12, abs=1e-12)


def test_aligned_history():
    counts = np.array([[1, 2, 3, 4], [0, 0, 5, 6]])
    Y, lengths = aligned_history(counts, np.array([0, 2]), 4)
    np.testing.assert_array_equal(lengths, [4, 2])
    np.testing.assert_array_equal(Y, [[1, 2, 3, 4], [5, 6, 0, 0]])
    _, lengths = aligned_history(counts, np.array([0, 3]), 3)
    np.testing.assert_array_equal(lengths, [3, 0])


def test_alpha_grid():
    np.testing.assert_array_equal(alpha_grid(0.01), np.arange(101) / 100)
    assert len(alpha_grid(0.25)) == 5
    with pytest.raises(SmoothingError):
        alpha_grid(0.3)
