"""Indicator unit tests: closed-form cases, frozen oracle values, properties."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coindbn import indicators as ti
from coindbn.errors import TooShort, ZeroClose

import oracles

CLOSES20 = [100.0, 102.0, 101.0, 105.0, 107.0, 106.0, 110.0, 108.0, 111.0, 115.0,
            113.0, 112.0, 116.0, 118.0, 117.0, 121.0, 119.0, 122.0, 125.0, 124.0]
HIGHS20 = [101.0, 103.5, 102.0, 106.0, 108.5, 107.0, 111.0, 109.5, 112.0, 116.0,
           114.5, 113.0, 117.0, 119.5, 118.0, 122.0, 120.5, 123.0, 126.0, 125.5]
LOWS20 = [99.0, 100.5, 99.5, 103.0, 105.5, 104.5, 108.0, 106.5, 109.0, 113.0,
          111.5, 110.0, 114.0, 116.5, 115.0, 119.0, 117.5, 120.0, 123.0, 122.5]
VOLS20 = [1000.0, 1500.0, 1200.0, 1800.0, 2000.0, 1300.0, 2100.0, 1700.0, 1600.0,
          2500.0, 1400.0, 1100.0, 1900.0, 2200.0, 1250.0, 2300.0, 1350.0, 2050.0,
          2400.0, 1450.0]
MACD_SRC = [t + 5 * math.sin(t / 3.0) for t in range(60)]


def assert_close_at(series, frozen, rel=1e-12):
    for idx, expected in frozen.items():
        assert series[idx] == pytest.approx(expected, rel=rel)


def assert_matches_replay(series, replay, rel=1e-12):
    assert len(series) == len(replay)
    for got, want in zip(series, replay):
        if math.isnan(want):
            assert math.isnan(got)
        else:
            assert got == pytest.approx(want, rel=rel)


class TestSma:
    def test_one_to_ten(self):
        out = ti.sma(np.arange(1.0, 11.0), 10)
        assert out[9] == pytest.approx(5.5)
        assert np.isnan(out[:9]).all()

    def test_constant_series(self):
        out = ti.sma(np.full(15, 42.0), 4)
        assert np.allclose(out[3:], 42.0)

    def test_small_window(self):
        out = ti.sma([2.0, 4.0, 6.0], 2)
        assert np.isnan(out[0])
        assert out[1] == pytest.approx(3.0)
        assert out[2] == pytest.approx(5.0)

    def test_too_short(self):
        with pytest.raises(TooShort):
            ti.sma([1.0, 2.0], 3)


class TestEma:
    def test_constant_is_fixed_point(self):
        out = ti.ema(np.full(20, 7.5), 10)
        assert np.allclose(out[9:], 7.5)
        assert np.isnan(out[:9]).all()

    def test_alpha_definition(self):
        # after the SMA seed, one step with alpha = 2/11
        out = ti.ema(CLOSES20, 10)
        alpha = 2.0 / 11.0
        assert out[10] == pytest.approx(alpha * CLOSES20[10] + (1 - alpha) * out[9])

    def test_hand_series_frozen(self):
        out = ti.ema(CLOSES20, 10)
        assert_close_at(out, {9: 106.5, 10: 107.68181818181817,
                              14: 112.3534191032654, 19: 118.89279200146981})
        assert_matches_replay(out, oracles.ema_replay(CLOSES20, 10))


class TestRsi:
    def test_strictly_increasing_is_100(self):
        out = ti.rsi(np.arange(30.0), 14)
        assert np.allclose(out[14:], 100.0)

    def test_constant_is_50(self):
        out = ti.rsi(np.full(30, 9.0), 14)
        assert np.allclose(out[14:], 50.0)

    def test_strictly_decreasing_is_0(self):
        out = ti.rsi(-np.arange(30.0), 14)
        assert np.allclose(out[14:], 0.0)

    def test_hand_series_frozen(self):
        out = ti.rsi(CLOSES20, 14)
        assert_close_at(out, {14: 75.75757575757575, 15: 78.55670103092784,
                              17: 76.20811602111384, 19: 75.9136939781093})
        assert_matches_replay(out, oracles.rsi_replay(CLOSES20, 14))


class TestMacd:
    def test_constant_series_is_zero(self):
        line, sig = ti.macd(np.full(40, 3.0))
        assert np.allclose(line[25:], 0.0)
        assert np.allclose(sig[33:], 0.0)

    def test_rising_series_positive(self):
        line, _ = ti.macd(np.arange(80.0))
        assert (line[40:] > 0).all()

    def test_hand_series_frozen(self):
        line, sig = ti.macd(MACD_SRC)
        assert_close_at(line, {25: 8.215683509685821, 33: 6.1102717388392485,
                               40: 7.048562545955782, 59: 7.111529918177453})
        assert_close_at(sig, {33: 7.3904751662226245, 40: 6.621197254025758,
                              59: 6.559832699306124})
        replay_line, replay_sig = oracles.macd_replay(MACD_SRC)
        assert_matches_replay(line, replay_line)
        assert_matches_replay(sig, replay_sig)


class TestBbands:
    def test_constant_series_collapses(self):
        upper, mid, lower = ti.bbands(np.full(10, 5.0), 5, 2.0)
        assert np.allclose(upper[4:], 5.0)
        assert np.allclose(mid[4:], 5.0)
        assert np.allclose(lower[4:], 5.0)

    def test_single_window(self):
        upper, mid, lower = ti.bbands([1.0, 2.0, 3.0, 4.0, 5.0], 5, 2.0)
        assert mid[4] == pytest.approx(3.0)
        assert upper[4] == pytest.approx(3.0 + 2.0 * math.sqrt(2.0))
        assert lower[4] == pytest.approx(3.0 - 2.0 * math.sqrt(2.0))

    def test_hand_series_frozen(self):
        upper, mid, lower = ti.bbands(CLOSES20, 5, 2.0)
        assert_close_at(upper, {4: 108.21536192416212, 10: 116.23321838943784,
                                19: 126.47083130081253})
        assert_close_at(mid, {4: 103.0, 10: 111.4, 19: 122.2})
        assert_close_at(lower, {4: 97.78463807583788, 10: 106.56678161056217,
                                19: 117.92916869918747})
        ru, rm, rl = oracles.bbands_replay(CLOSES20, 5, 2.0)
        assert_matches_replay(upper, ru)
        assert_matches_replay(mid, rm)
        assert_matches_replay(lower, rl)


class TestNatr:
    def test_flat_bars_are_zero(self):
        flat = np.full(20, 10.0)
        out = ti.natr(flat, flat, flat, 14)
        assert np.allclose(out[14:], 0.0)

    def test_true_range_uses_previous_close(self):
        # bar 1: high 12, low 8, prev close 9 -> TR = max(4, 3, 1) = 4
        highs = [9.0, 12.0]
        lows = [9.0, 8.0]
        closes = [9.0, 10.0]
        out = ti.natr(highs, lows, closes, 1)
        assert out[1] == pytest.approx(100.0 * 4.0 / 10.0)

    def test_hand_series_frozen(self):
        out = ti.natr(HIGHS20, LOWS20, CLOSES20, 14)
        assert_close_at(out, {14: 3.2051282051282053, 16: 3.2059252272337506,
                              19: 3.0487830021621174})
        assert_matches_replay(out, oracles.natr_replay(HIGHS20, LOWS20, CLOSES20, 14))

    def test_zero_close_rejected(self):
        closes = list(CLOSES20)
        closes[15] = 0.0
        with pytest.raises(ZeroClose):
            ti.natr(HIGHS20, LOWS20, closes, 14)


class TestObv:
    def test_rising_closes_accumulate(self):
        out = ti.obv([1.0, 2.0, 3.0], [5.0, 7.0, 11.0])
        assert list(out) == [0.0, 7.0, 18.0]

    def test_tie_leaves_obv_unchanged(self):
        out = ti.obv([5.0, 5.0, 5.0], [10.0, 20.0, 30.0])
        assert list(out) == [0.0, 0.0, 0.0]

    def test_mixed(self):
        out = ti.obv([10.0, 11.0, 10.0], [5.0, 3.0, 2.0])
        assert list(out) == [0.0, 3.0, 1.0]


class TestAd:
    def test_close_at_high_accumulates_volume(self):
        highs = [10.0, 11.0]
        lows = [8.0, 9.0]
        out = ti.ad(highs, lows, highs, [100.0, 50.0])
        assert list(out) == [100.0, 150.0]

    def test_midpoint_close_stays_zero(self):
        out = ti.ad([10.0, 12.0], [8.0, 10.0], [9.0, 11.0], [100.0, 50.0])
        assert list(out) == [0.0, 0.0]

    def test_zero_range_bar_contributes_nothing(self):
        out = ti.ad([10.0], [10.0], [10.0], [999.0])
        assert list(out) == [0.0]


class TestStoch:
    def test_close_at_window_high(self):
        closes = np.arange(1.0, 21.0)
        out = ti.stoch(closes, closes - 0.5, closes, 14)
        # close == rolling high every bar, so raw and smoothed %K are 100
        assert np.allclose(out[15:], 100.0)

    def test_flat_window_is_50(self):
        flat = np.full(20, 4.0)
        out = ti.stoch(flat, flat, flat, 14)
        assert np.allclose(out[15:], 50.0)

    def test_hand_series_frozen(self):
        out = ti.stoch(HIGHS20, LOWS20, CLOSES20, 14)
        assert_close_at(out, {15: 91.91282746160795, 17: 91.45355882197987,
                              19: 93.22900718249555})
        assert_matches_replay(out, oracles.stoch_replay(HIGHS20, LOWS20, CLOSES20, 14))


class TestSharedFixtureOracle:
    """All nine indicators against the brute-force replay on one walk."""

    def test_random_walk_fixture(self):
        opens, highs, lows, closes, volumes = oracles.random_walk_bars(60)
        rel = 1e-9
        assert_matches_replay(ti.sma(closes, 10), oracles.sma_replay(closes, 10), rel)
        assert_matches_replay(ti.ema(closes, 10), oracles.ema_replay(closes, 10), rel)
        assert_matches_replay(ti.rsi(closes, 14), oracles.rsi_replay(closes, 14), rel)
        line, sig = ti.macd(closes)
        rline, rsig = oracles.macd_replay(closes)
        assert_matches_replay(line, rline, rel)
        assert_matches_replay(sig, rsig, rel)
        for got, want in zip(ti.bbands(closes, 5, 2.0),
                             oracles.bbands_replay(closes, 5, 2.0)):
            assert_matches_replay(got, want, rel)
        assert_matches_replay(ti.natr(highs, lows, closes, 14),
                              oracles.natr_replay(highs, lows, closes, 14), rel)
        assert_matches_replay(ti.obv(closes, volumes),
                              oracles.obv_replay(closes, volumes), rel)
        assert_matches_replay(ti.ad(highs, lows, closes, volumes),
                              oracles.ad_replay(highs, lows, closes, volumes), rel)
        assert_matches_replay(ti.stoch(highs, lows, closes, 14),
                              oracles.stoch_replay(highs, lows, closes, 14), rel)


price_series = st.lists(st.floats(min_value=1.0, max_value=1000.0,
                                  allow_nan=False, allow_infinity=False),
                        min_size=20, max_size=60)


class TestProperties:
    @given(price_series)
    @settings(max_examples=60, deadline=None)
    def test_rsi_bounded(self, closes):
        out = ti.rsi(closes, 14)
        defined = out[~np.isnan(out)]
        assert ((defined >= 0.0) & (defined <= 100.0)).all()

    @given(price_series)
    @settings(max_examples=60, deadline=None)
    def test_stoch_bounded_and_bands_ordered(self, closes):
        x = np.asarray(closes)
        highs, lows = x + 1.0, x - 1.0
        out = ti.stoch(highs, lows, x, 14)
        defined = out[~np.isnan(out)]
        assert ((defined >= 0.0) & (defined <= 100.0)).all()
        upper, mid, lower = ti.bbands(x, 5, 2.0)
        ok = ~np.isnan(mid)
        assert (lower[ok] <= mid[ok] + 1e-12).all()
        assert (mid[ok] <= upper[ok] + 1e-12).all()

    @given(price_series, st.floats(min_value=-50.0, max_value=50.0,
                                   allow_nan=False))
    @settings(max_examples=60, deadline=None)
    def test_shift_equivariance(self, closes, shift):
        x = np.asarray(closes)
        shifted = x + shift
        base = ti.sma(x, 10)
        moved = ti.sma(shifted, 10)
        ok = ~np.isnan(base)
        assert np.allclose(moved[ok] - base[ok], shift, atol=1e-8)
        base_e = ti.ema(x, 10)
        moved_e = ti.ema(shifted, 10)
        assert np.allclose(moved_e[ok] - base_e[ok], shift, atol=1e-8)

    def test_natr_nonnegative_on_fixture(self):
        _, highs, lows, closes, _ = oracles.random_walk_bars(80, seed=11)
        out = ti.natr(highs, lows, closes, 14)
        assert (out[~np.isnan(out)] >= 0).all()


class TestPanel:
    def test_panel_columns_and_warmup(self):
        from datetime import date, timedelta
        from coindbn.ingest import TimeSeriesTable

        opens, highs, lows, closes, volumes = oracles.random_walk_bars(60)
        dates = [date(2021, 1, 1) + timedelta(days=i) for i in range(60)]
        table = TimeSeriesTable(dates, {
            "open": np.array(opens), "high": np.array(highs),
            "low": np.array(lows), "close": np.array(closes),
            "volume": np.array(volumes)}, "ohlcv")
        panel = ti.compute_panel(table)
        assert set(panel.columns) == set(ti.PANEL_COLUMNS)
        # the macd line is the slowest column: defined from index slow - 1
        assert panel.warm_up["macd"] == 25
        assert panel.defined_mask()[:25].sum() == 0
        assert panel.defined_mask()[25:].all()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ti.IndicatorConfig(macd_fast=26, macd_slow=12)
        with pytest.raises(ValueError):
            ti.IndicatorConfig(sma_window=0)
