"""Per-coin, per-feature-group evaluation with the precision metric.

One unified table is assembled per coin (candles, optional macro assets
and tweet counts, optional indicator columns). Each feature group selects
a column subset of that table, so every group sees the same rows. The
close-direction matrix is split 67/33 chronologically, a 2TBN is learned
on the training part, and every stride-1 window of the test part yields
one prediction. ARIMA and SVR forecast the raw close series and are
scored on exactly the same test days.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .dbn import DEFAULT_T, TwoSliceBn, learn_2tbn, predict_direction, unroll
from .errors import NoPositivePredictions, TooFewRows, TooShort
from .indicators import IndicatorConfig, attach_panel, compute_panel
from .ingest import (
    DOWN,
    UP,
    AlignedTable,
    DirectionMatrix,
    align,
    label_directions,
    load_csv,
)

DEFAULT_TRAIN_FRACTION = 0.67
MIN_SPLIT_ROWS = 10
TARGET_COLUMN = "price.close"

OHLCV_PREFIX = "price."
EXTERNAL_PREFIXES = ("macro.", "social.")
INDICATOR_PREFIX = "ti."


@dataclass(frozen=True)
class FeatureGroupSpec:
    """Column-selection recipe for one ablation row of the comparison table."""

    id: int
    include_external: bool
    include_indicators: bool
    paper_feature_count: int
    include_ohlcv: bool = True

    def selects(self, column: str) -> bool:
        if column.startswith(OHLCV_PREFIX):
            return True
        if column.startswith(EXTERNAL_PREFIXES):
            return self.include_external
        if column.startswith(INDICATOR_PREFIX):
            return self.include_indicators
        return False


FEATURE_GROUPS = {
    1: FeatureGroupSpec(1, include_external=False, include_indicators=False,
                        paper_feature_count=5),
    2: FeatureGroupSpec(2, include_external=True, include_indicators=False,
                        paper_feature_count=11),
    3: FeatureGroupSpec(3, include_external=False, include_indicators=True,
                        paper_feature_count=15),
    4: FeatureGroupSpec(4, include_external=True, include_indicators=True,
                        paper_feature_count=23),
}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def windows(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def precision(counts: ConfusionCounts) -> float:
    """Share of Up predictions that were correct, in percent."""
    positives = counts.tp + counts.fp
    if positives == 0:
        raise NoPositivePredictions("no Up predictions were made")
    return 100.0 * counts.tp / positives


@dataclass(frozen=True)
class GroupResult:
    spec: FeatureGroupSpec
    feature_count: int
    counts: ConfusionCounts
    model: TwoSliceBn
    model_path: str

    @property
    def precision_or_none(self) -> float | None:
        try:
            return precision(self.counts)
        except NoPositivePredictions:
            return None


@dataclass(frozen=True)
class BaselineResult:
    name: str
    params: dict
    counts: ConfusionCounts

    @property
    def precision_or_none(self) -> float | None:
        try:
            return precision(self.counts)
        except NoPositivePredictions:
            return None


@dataclass(frozen=True)
class BacktestReport:
    coin: str
    rows: int
    groups: tuple[GroupResult, ...]
    arima: BaselineResult
    svr: BaselineResult
    notes: tuple[str, ...] = ()

    @property
    def best_performing(self) -> int | None:
        best = None
        for result in self.groups:
            p = result.precision_or_none
            if p is None:
                continue
            if best is None or p > best[0]:
                best = (p, result.spec.id)
        return best[1] if best else None

    def to_document(self) -> dict:
        def pct(value):
            return "N/A" if value is None else value

        return {
            "coin": self.coin,
            "rows": self.rows,
            "groups": [
                {
                    "id": g.spec.id,
                    "features": g.feature_count,
                    "precision": pct(g.precision_or_none),
                    "tp": g.counts.tp,
                    "fp": g.counts.fp,
                    "tn": g.counts.tn,
                    "fn": g.counts.fn,
                    "windows": g.counts.windows,
                    "model_path": g.model_path,
                }
                for g in self.groups
            ],
            "baselines": {
                "arima": {"order": list(self.arima.params["order"]),
                          "precision": pct(self.arima.precision_or_none)},
                "svr": {"params": {k: v for k, v in self.svr.params.items()},
                        "precision": pct(self.svr.precision_or_none)},
            },
            "best_performing": (self.best_performing
                                if self.best_performing is not None else "N/A"),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=2) + "\n"

    def to_text(self) -> str:
        def pct(value):
            return "N/A" if value is None else f"{value:.2f}"

        headers = ["Coin"]
        row = [self.coin]
        for g in self.groups:
            headers.append(f"DBN({g.spec.id})")
            row.append(pct(g.precision_or_none))
        headers.append("Best")
        best = self.best_performing
        row.append(f"({best})" if best is not None else "N/A")
        headers.append("ARIMA")
        row.append(pct(self.arima.precision_or_none))
        headers.append("SVR")
        row.append(pct(self.svr.precision_or_none))

        widths = [max(len(h), len(v)) for h, v in zip(headers, row)]
        lines = [
            "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
            "  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip(),
            "",
            f"rows: {self.rows}",
        ]
        p, d, q = self.arima.params["order"]
        lines.append(f"arima order: ({p},{d},{q})")
        svr_params = self.svr.params
        lines.append("svr params: kernel={kernel} c={c} epsilon={epsilon} "
                     "gamma={gamma}".format(**svr_params))
        for g in self.groups:
            c = g.counts
            lines.append(
                f"group {g.spec.id}: features={g.feature_count} "
                f"windows={c.windows} tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn}")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CoinDataset:
    """Unified per-coin table plus flags describing what went into it."""

    coin: str
    table: AlignedTable
    tweets_available: bool
    has_indicators: bool


def assemble_dataset(coin: str, ohlcv_path, macro_paths=(), tweets_path=None,
                     with_indicators: bool = True,
                     indicator_config: IndicatorConfig | None = None) -> CoinDataset:
    """Load, align, and optionally extend the coin's table with indicators."""
    ohlcv = load_csv(Path(ohlcv_path), "ohlcv")
    tables = [ohlcv]
    for path in macro_paths:
        tables.append(load_csv(Path(path), "macro"))
    tweets_available = tweets_path is not None
    if tweets_available:
        tables.append(load_csv(Path(tweets_path), "tweets"))
    aligned = align(tables)
    if with_indicators:
        # indicators run on the coin's own uninterrupted daily history,
        # then join the aligned rows by date
        panel = compute_panel(ohlcv, indicator_config)
        aligned = attach_panel(aligned, panel)
    return CoinDataset(coin=coin, table=aligned,
                       tweets_available=tweets_available,
                       has_indicators=with_indicators)


def group_matrix(dataset: CoinDataset, spec: FeatureGroupSpec) -> DirectionMatrix:
    """Direction matrix over the columns the feature group selects."""
    table = dataset.table
    keep = {name: values for name, values in table.columns.items()
            if spec.selects(name)}
    subset = AlignedTable(dates=table.dates, columns=keep,
                          diagnostics=table.diagnostics)
    return label_directions(subset, target_column=TARGET_COLUMN)


def split(matrix: DirectionMatrix,
          train_fraction: float = DEFAULT_TRAIN_FRACTION):
    """Chronological split at floor(train_fraction * n); no shuffling."""
    n = len(matrix.dates)
    if n < MIN_SPLIT_ROWS:
        raise TooFewRows(f"need >= {MIN_SPLIT_ROWS} rows to split, got {n}")
    cut = int(np.floor(train_fraction * n))
    return matrix.slice_rows(0, cut), matrix.slice_rows(cut, n)


def windows(test: DirectionMatrix, t_slices: int = DEFAULT_T):
    """Stride-1 windows of t_slices rows; actual = target state at the end."""
    n = len(test.dates)
    if n < t_slices:
        raise TooShort(f"test segment has {n} rows, need >= {t_slices}")
    target = test.target_index
    out = []
    for start in range(n - t_slices + 1):
        block = test.slice_rows(start, start + t_slices)
        out.append((block, int(block.states[-1, target])))
    return out


def tally(predictions, actuals) -> ConfusionCounts:
    """Positive class is an Up prediction."""
    tp = fp = tn = fn = 0
    for predicted, actual in zip(predictions, actuals, strict=True):
        if predicted not in (DOWN, UP) or actual not in (DOWN, UP):
            raise ValueError(f"directions must be {DOWN} or {UP}, "
                             f"got {predicted!r} vs {actual!r}")
        if predicted == UP:
            if actual == UP:
                tp += 1
            else:
                fp += 1
        else:
            if actual == DOWN:
                tn += 1
            else:
                fn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def _evaluate_group(dataset, spec, *, t_slices, train_fraction, seed,
                    max_parents, restarts, alpha):
    matrix = group_matrix(dataset, spec)
    train, test = split(matrix, train_fraction)
    model = learn_2tbn(train, feature_group=spec.id, t_slices=t_slices,
                       max_parents=max_parents, restarts=restarts,
                       seed=seed, alpha=alpha)
    network = unroll(model)
    predictions, actuals = [], []
    for window, actual in windows(test, t_slices):
        prediction = predict_direction(model, window, network)
        predictions.append(prediction.direction)
        actuals.append(actual)
    counts = tally(predictions, actuals)
    return GroupResult(spec=spec, feature_count=len(matrix.variables),
                       counts=counts, model=model,
                       model_path=f"model_g{spec.id}.json"), matrix, actuals


def _baseline_inputs(dataset: CoinDataset, matrix: DirectionMatrix,
                     train_fraction: float, t_slices: int):
    """Close prices plus the aligned-row index of the first evaluated day."""
    closes = np.asarray(dataset.table.columns[TARGET_COLUMN], dtype=float)
    n = len(matrix.dates)
    cut = int(np.floor(train_fraction * n))
    first_eval = cut + t_slices  # aligned-row index of the first test window end
    return closes, cut, first_eval


def _run_arima(closes, cut, first_eval, actuals, grids):
    train = closes[:cut + 1]
    if grids is None:
        model = baselines.fit_arima(train)
    else:
        model = baselines.fit_arima(train, *grids)
    forecasts = baselines.arima_one_step_forecasts(model, closes, first_eval)
    directions = baselines.directions_from_forecasts(
        forecasts, closes[first_eval - 1:-1])
    counts = tally(directions.tolist(), actuals)
    return BaselineResult("arima", {"order": model.order}, counts)


def _run_svr(closes, cut, first_eval, actuals, grids):
    lo = float(closes[:cut + 1].min())
    hi = float(closes[:cut + 1].max())
    z = (closes - lo) / (hi - lo) if hi > lo else np.full_like(closes, 0.5)
    x_train, y_train = baselines.lagged_features(z[:cut + 1])
    if grids is None:
        model = baselines.fit_svr(x_train, y_train)
    else:
        model = baselines.fit_svr(x_train, y_train, c_grid=grids[0],
                                  epsilon_grid=grids[1], gamma_grid=grids[2])
    lags = baselines.SVR_LAGS
    features = np.column_stack(
        [z[first_eval - k - 1:len(z) - k - 1] for k in range(lags)])
    forecasts = baselines.svr_predict_batch(model, features)
    directions = baselines.directions_from_forecasts(
        forecasts, z[first_eval - 1:-1])
    counts = tally(directions.tolist(), actuals)
    params = {"kernel": model.kernel, "c": model.c,
              "epsilon": model.epsilon, "gamma": model.gamma}
    return BaselineResult("svr", params, counts)


def run_backtest(dataset: CoinDataset, groups=(1, 2, 3, 4), *,
                 t_slices: int = DEFAULT_T,
                 train_fraction: float = DEFAULT_TRAIN_FRACTION,
                 seed: int = 0, max_parents: int = 3, restarts: int = 8,
                 alpha: float = 1.0, arima_grids=None,
                 svr_grids=None) -> BacktestReport:
    group_ids = sorted(set(groups))
    if not group_ids:
        raise ValueError("at least one feature group required")
    for gid in group_ids:
        if gid not in FEATURE_GROUPS:
            raise ValueError(f"unknown feature group {gid}")

    notes = []
    if not dataset.tweets_available and any(
            FEATURE_GROUPS[g].include_external for g in group_ids):
        affected = [g for g in group_ids if FEATURE_GROUPS[g].include_external]
        notes.append("tweet counts unavailable; groups "
                     + ",".join(str(g) for g in affected)
                     + " exclude the tweet column")

    results = []
    matrix = None
    actuals = None
    for gid in group_ids:
        result, matrix, actuals = _evaluate_group(
            dataset, FEATURE_GROUPS[gid], t_slices=t_slices,
            train_fraction=train_fraction, seed=seed,
            max_parents=max_parents, restarts=restarts, alpha=alpha)
        results.append(result)

    closes, cut, first_eval = _baseline_inputs(dataset, matrix,
                                               train_fraction, t_slices)
    arima = _run_arima(closes, cut, first_eval, actuals, arima_grids)
    svr = _run_svr(closes, cut, first_eval, actuals, svr_grids)

    return BacktestReport(coin=dataset.coin, rows=len(matrix.dates),
                          groups=tuple(results), arima=arima, svr=svr,
                          notes=tuple(notes))
