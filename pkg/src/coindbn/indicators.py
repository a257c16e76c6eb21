"""The nine technical indicators computed on raw OHLCV candles.

Every function returns a float array aligned to the input, with NaN for
warm-up entries that are not yet defined (never zero-filled). Smoothed
averages of gains/losses and true ranges use Wilder's recursion
(avg = (prev * (window - 1) + current) / window). Degenerate-bar
conventions keep flat, stablecoin-like series flowing through the
pipeline: RSI with zero gains and losses is 50, a flat stochastic window
is 50, and a zero-range bar contributes CLV 0 to AD.

Feature columns carried into the aligned table are prefixed ``ti.``; the
stochastic column is slow %K (a 3-period SMA of raw %K) and MACD
contributes its line only, with the signal line kept internal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .errors import TooShort, ZeroClose
from .ingest import AlignedTable, TimeSeriesTable

STOCH_SMOOTH = 3  # raw %K -> slow %K


@dataclass(frozen=True)
class IndicatorConfig:
    sma_window: int = 10
    ema_window: int = 10
    rsi_window: int = 14
    bband_window: int = 5
    bband_k: float = 2.0
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9
    natr_window: int = 14
    stoch_window: int = 14

    def __post_init__(self):
        windows = (self.sma_window, self.ema_window, self.rsi_window,
                   self.bband_window, self.macd_fast, self.macd_slow,
                   self.macd_signal, self.natr_window, self.stoch_window)
        if any(w < 1 for w in windows):
            raise ValueError("all windows must be >= 1")
        if self.macd_fast >= self.macd_slow:
            raise ValueError("macd_fast must be < macd_slow")


@dataclass
class IndicatorPanel:
    """All indicator columns for one coin, keyed by short name."""

    dates: list[date]
    columns: dict[str, np.ndarray]
    warm_up: dict[str, int] = field(default_factory=dict)

    def defined_mask(self) -> np.ndarray:
        mask = np.ones(len(self.dates), dtype=bool)
        for values in self.columns.values():
            mask &= ~np.isnan(values)
        return mask


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _first_valid(x: np.ndarray) -> int:
    defined = np.flatnonzero(~np.isnan(x))
    if defined.size == 0:
        return len(x)
    return int(defined[0])


def sma(close, window: int) -> np.ndarray:
    """Rolling arithmetic mean; first window-1 entries undefined."""
    x = _as_array(close)
    if len(x) < window:
        raise TooShort(f"sma needs >= {window} points, got {len(x)}")
    out = np.full(len(x), np.nan)
    kernel = np.ones(window) / window
    out[window - 1:] = np.convolve(x, kernel, mode="valid")
    return out


def ema(close, window: int) -> np.ndarray:
    """Exponentially weighted mean, alpha = 2/(window+1), SMA-seeded.

    Leading NaNs are tolerated so EMAs can be chained (MACD signal line);
    the seed is the SMA over the first ``window`` defined points.
    """
    x = _as_array(close)
    start = _first_valid(x)
    if len(x) - start < window:
        raise TooShort(f"ema needs >= {window} defined points")
    out = np.full(len(x), np.nan)
    alpha = 2.0 / (window + 1)
    seed_at = start + window - 1
    out[seed_at] = x[start:seed_at + 1].mean()
    for t in range(seed_at + 1, len(x)):
        out[t] = alpha * x[t] + (1 - alpha) * out[t - 1]
    return out


def rsi(close, window: int = 14) -> np.ndarray:
    """Relative strength index with Wilder-smoothed average gain/loss."""
    x = _as_array(close)
    if len(x) < window + 1:
        raise TooShort(f"rsi needs >= {window + 1} points, got {len(x)}")
    deltas = np.diff(x)
    gains = np.where(deltas > 0, deltas, 0.0)
    losses = np.where(deltas < 0, -deltas, 0.0)
    out = np.full(len(x), np.nan)
    avg_gain = gains[:window].mean()
    avg_loss = losses[:window].mean()
    for t in range(window, len(x)):
        if t > window:
            avg_gain = (avg_gain * (window - 1) + gains[t - 1]) / window
            avg_loss = (avg_loss * (window - 1) + losses[t - 1]) / window
        if avg_loss == 0.0 and avg_gain == 0.0:
            out[t] = 50.0
        elif avg_loss == 0.0:
            out[t] = 100.0
        elif avg_gain == 0.0:
            out[t] = 0.0
        else:
            out[t] = 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    return out


def macd(close, fast: int = 12, slow: int = 26, signal: int = 9):
    """MACD line (fast EMA - slow EMA) and its signal-line EMA."""
    x = _as_array(close)
    if len(x) < slow + signal:
        raise TooShort(f"macd needs >= {slow + signal} points, got {len(x)}")
    macd_line = ema(x, fast) - ema(x, slow)
    signal_line = ema(macd_line, signal)
    return macd_line, signal_line


def bbands(close, window: int = 5, k: float = 2.0):
    """Bollinger bands: SMA middle, +/- k population standard deviations."""
    x = _as_array(close)
    if len(x) < window:
        raise TooShort(f"bbands needs >= {window} points, got {len(x)}")
    mid = np.full(len(x), np.nan)
    dev = np.full(len(x), np.nan)
    for t in range(window - 1, len(x)):
        chunk = x[t - window + 1:t + 1]
        m = chunk.mean()
        mid[t] = m
        dev[t] = k * np.sqrt(np.mean((chunk - m) ** 2))
    return mid + dev, mid, mid - dev


def natr(high, low, close, window: int = 14) -> np.ndarray:
    """Normalised ATR: 100 * Wilder-smoothed true range / close."""
    h, lo, c = _as_array(high), _as_array(low), _as_array(close)
    if len(c) < window + 1:
        raise TooShort(f"natr needs >= {window + 1} points, got {len(c)}")
    prev_close = c[:-1]
    tr = np.maximum(h[1:] - lo[1:],
                    np.maximum(np.abs(h[1:] - prev_close),
                               np.abs(lo[1:] - prev_close)))
    out = np.full(len(c), np.nan)
    atr = tr[:window].mean()
    for t in range(window, len(c)):
        if t > window:
            atr = (atr * (window - 1) + tr[t - 1]) / window
        if c[t] == 0.0:
            raise ZeroClose(f"close is 0 at index {t}")
        out[t] = 100.0 * atr / c[t]
    return out


def obv(close, volume) -> np.ndarray:
    """On-balance volume: signed cumulative volume, starting at 0."""
    c, v = _as_array(close), _as_array(volume)
    if len(c) < 2:
        raise TooShort("obv needs >= 2 points")
    signs = np.sign(np.diff(c))
    out = np.empty(len(c))
    out[0] = 0.0
    out[1:] = np.cumsum(signs * v[1:])
    return out


def ad(high, low, close, volume) -> np.ndarray:
    """Accumulation/distribution line: cumulative CLV-weighted volume."""
    h, lo, c, v = (_as_array(a) for a in (high, low, close, volume))
    if len(c) < 1:
        raise TooShort("ad needs >= 1 point")
    span = h - lo
    clv = np.zeros(len(c))
    nonzero = span != 0
    clv[nonzero] = ((c - lo) - (h - c))[nonzero] / span[nonzero]
    return np.cumsum(clv * v)


def stoch(high, low, close, window: int = 14) -> np.ndarray:
    """Slow %K: 3-period SMA of raw %K over the rolling high/low range."""
    h, lo, c = _as_array(high), _as_array(low), _as_array(close)
    if len(c) < window:
        raise TooShort(f"stoch needs >= {window} points, got {len(c)}")
    raw = np.full(len(c), np.nan)
    for t in range(window - 1, len(c)):
        hh = h[t - window + 1:t + 1].max()
        ll = lo[t - window + 1:t + 1].min()
        raw[t] = 50.0 if hh == ll else 100.0 * (c[t] - ll) / (hh - ll)
    out = np.full(len(c), np.nan)
    first = window - 1 + STOCH_SMOOTH - 1
    if first >= len(c):
        raise TooShort("stoch needs enough points for %K smoothing")
    for t in range(first, len(c)):
        out[t] = raw[t - STOCH_SMOOTH + 1:t + 1].mean()
    return out


PANEL_COLUMNS = ("ad", "obv", "sma", "ema", "rsi", "macd",
                 "bband_upper", "bband_mid", "bband_lower", "natr", "stoch")


def compute_panel(table: TimeSeriesTable, config: IndicatorConfig | None = None) -> IndicatorPanel:
    """Evaluate all nine indicators on one OHLCV table."""
    if table.source_kind != "ohlcv":
        raise ValueError("indicator panel requires an ohlcv table")
    cfg = config or IndicatorConfig()
    h, lo = table.columns["high"], table.columns["low"]
    c, v = table.columns["close"], table.columns["volume"]

    macd_line, _signal = macd(c, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal)
    upper, mid, lower = bbands(c, cfg.bband_window, cfg.bband_k)
    columns = {
        "ad": ad(h, lo, c, v),
        "obv": obv(c, v),
        "sma": sma(c, cfg.sma_window),
        "ema": ema(c, cfg.ema_window),
        "rsi": rsi(c, cfg.rsi_window),
        "macd": macd_line,
        "bband_upper": upper,
        "bband_mid": mid,
        "bband_lower": lower,
        "natr": natr(h, lo, c, cfg.natr_window),
        "stoch": stoch(h, lo, c, cfg.stoch_window),
    }
    warm_up = {name: _first_valid(vals) for name, vals in columns.items()}
    return IndicatorPanel(list(table.dates), columns, warm_up)


def attach_panel(aligned: AlignedTable, panel: IndicatorPanel) -> AlignedTable:
    """Join ti.* columns onto an aligned table.

    Rows where any indicator is still warming up (or missing from the
    panel's date range) are dropped, so downstream labelling only ever
    sees fully observed rows.
    """
    defined = panel.defined_mask()
    panel_index = {d: i for i, d in enumerate(panel.dates) if defined[i]}
    keep = [i for i, d in enumerate(aligned.dates) if d in panel_index]
    if not keep:
        raise TooShort("no aligned rows with fully defined indicators")
    sel_aligned = np.array(keep, dtype=int)
    sel_panel = np.array([panel_index[aligned.dates[i]] for i in keep], dtype=int)

    columns = {name: vals[sel_aligned] for name, vals in aligned.columns.items()}
    for name, vals in panel.columns.items():
        columns[f"ti.{name}"] = vals[sel_panel]
    dates = [aligned.dates[i] for i in keep]
    diagnostics = list(aligned.diagnostics)
    dropped = len(aligned) - len(keep)
    if dropped:
        diagnostics.append(f"WARN indicators:- {dropped} warm-up rows dropped")
    return AlignedTable(dates, columns, diagnostics)
