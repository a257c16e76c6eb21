"""CSV ingestion, alignment, normalisation, and direction labelling.

The pipeline here turns raw daily series (candles, macro assets, tweet
counts) into a fully binary Up/Down matrix:

    load_csv -> align -> [attach indicators] -> min_max_normalize
             -> label_directions

Direction labelling compares each value with the previous day's: strictly
lower means Down, otherwise (including ties) Up. Min-max scaling is
strictly monotone on non-constant columns, so labels are invariant under
normalisation; the normalisation step exists to keep the learned models'
inputs on a common scale and is fitted on the training segment only.

State encoding used everywhere downstream: 0 = Down, 1 = Up.
"""

from __future__ import annotations

import csv
import math
import re
import sys
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .errors import (
    DuplicateColumn,
    DuplicateDate,
    EmptyIntersection,
    EmptyTable,
    MissingColumn,
    TooFewRows,
)

DOWN = 0
UP = 1
STATE_NAMES = ("Down", "Up")

OHLCV_COLUMNS = ("open", "high", "low", "close", "volume")
TWEETS_COLUMN = "tweet_count"

SOURCE_PREFIX = {"ohlcv": "price", "macro": "macro", "tweets": "social"}

# Interior gaps longer than this are not forward-filled; the row is dropped.
MAX_FFILL_GAP = 3

_ISO_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def _warn(diagnostics: list[str], context: str, line_no, reason: str) -> None:
    msg = f"WARN {context}:{line_no} {reason}"
    diagnostics.append(msg)
    print(msg, file=sys.stderr)


@dataclass
class TimeSeriesTable:
    """Date-indexed continuous series from one source file."""

    dates: list[date]
    columns: dict[str, np.ndarray]
    source_kind: str  # ohlcv | macro | tweets
    diagnostics: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name, values in self.columns.items():
            if len(values) != len(self.dates):
                raise ValueError(f"column {name!r} length != date count")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DuplicateDate("dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass
class AlignedTable:
    """Merged table over the dates common to all sources."""

    dates: list[date]
    columns: dict[str, np.ndarray]
    diagnostics: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.dates)

    def with_columns(self, extra: dict[str, np.ndarray]) -> "AlignedTable":
        merged = dict(self.columns)
        for name, values in extra.items():
            if name in merged:
                raise DuplicateColumn(f"column {name!r} already present")
            if len(values) != len(self.dates):
                raise ValueError(f"column {name!r} length != date count")
            merged[name] = values
        return AlignedTable(list(self.dates), merged, list(self.diagnostics))


@dataclass
class DirectionMatrix:
    """Binary Up/Down states per date per variable; the training substrate."""

    dates: list[date]
    variables: list[str]
    states: np.ndarray  # shape (rows, len(variables)), int8, 0=Down 1=Up
    target_name: str

    def __post_init__(self):
        if self.states.shape != (len(self.dates), len(self.variables)):
            raise ValueError("states shape mismatch")
        if self.states.size and not np.isin(self.states, (DOWN, UP)).all():
            raise ValueError("states must be 0 (Down) or 1 (Up)")
        if self.target_name not in self.variables:
            raise ValueError(f"target {self.target_name!r} not a variable")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def target_index(self) -> int:
        return self.variables.index(self.target_name)

    def slice_rows(self, start: int, stop: int) -> "DirectionMatrix":
        return DirectionMatrix(
            self.dates[start:stop],
            list(self.variables),
            self.states[start:stop],
            self.target_name,
        )


def _required_columns(kind: str, header: list[str]) -> list[str]:
    """Data columns to keep for a source kind, validated against the header."""
    if kind == "ohlcv":
        missing = [c for c in OHLCV_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"ohlcv file missing columns {missing}")
        return list(OHLCV_COLUMNS)
    if kind == "tweets":
        if TWEETS_COLUMN not in header:
            raise MissingColumn(f"tweets file missing column {TWEETS_COLUMN!r}")
        return [TWEETS_COLUMN]
    if kind == "macro":
        asset_cols = [c for c in header if c != "date"]
        if not asset_cols:
            raise MissingColumn("macro file has no asset column")
        return asset_cols
    raise ValueError(f"unknown source kind {kind!r}")


def load_csv(path, kind: str) -> TimeSeriesTable:
    """Parse one CSV into a validated, date-sorted TimeSeriesTable.

    Rows with unparseable dates or numerics are dropped with a WARN
    diagnostic on stderr. Empty cells count as interior gaps and are
    forward-filled up to MAX_FFILL_GAP consecutive days; longer gaps drop
    the row. OHLCV rows whose high/low do not bracket open/close are
    rejected. Duplicate dates are a hard error.
    """
    path = str(path)
    diagnostics: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyTable(f"{path}: file is empty") from None
        if "date" not in header:
            raise MissingColumn(f"{path}: no 'date' column in header")
        keep = _required_columns(kind, header)
        if len(set(header)) != len(header):
            raise DuplicateColumn(f"{path}: repeated column name in header")
        extra = [c for c in header if c != "date" and c not in keep]
        if extra:
            _warn(diagnostics, path, 1, f"ignoring extra columns {extra}")
        col_idx = {name: header.index(name) for name in keep}
        date_idx = header.index("date")

        rows: list[tuple[date, list[float], int]] = []
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                _warn(diagnostics, path, line_no, "wrong field count, row dropped")
                continue
            token = raw[date_idx].strip()
            if not _ISO_DATE.match(token):
                _warn(diagnostics, path, line_no,
                      f"unparseable date {token!r}, row dropped")
                continue
            try:
                row_date = date.fromisoformat(token)
            except ValueError:
                _warn(diagnostics, path, line_no,
                      f"invalid calendar date {token!r}, row dropped")
                continue
            values = []
            bad = None
            for name in keep:
                cell = raw[col_idx[name]].strip()
                if cell == "":
                    values.append(math.nan)  # interior gap, may forward-fill
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    bad = f"unparseable numeric {cell!r} in {name!r}"
                    break
            if bad is not None:
                _warn(diagnostics, path, line_no, f"{bad}, row dropped")
                continue
            rows.append((row_date, values, line_no))

    if not rows:
        raise EmptyTable(f"{path}: zero valid rows")

    rows.sort(key=lambda r: r[0])
    seen_dates = [r[0] for r in rows]
    for a, b in zip(seen_dates, seen_dates[1:]):
        if a == b:
            raise DuplicateDate(f"{path}: duplicate date {a.isoformat()}")

    data = np.array([r[1] for r in rows], dtype=float)
    line_nos = [r[2] for r in rows]

    # Forward-fill short interior gaps column by column, then drop any row
    # that still has a gap (leading gaps or runs longer than MAX_FFILL_GAP).
    for j in range(data.shape[1]):
        run = 0
        for i in range(data.shape[0]):
            if math.isnan(data[i, j]):
                run += 1
                if i - run >= 0 and run <= MAX_FFILL_GAP:
                    data[i, j] = data[i - 1, j]
            else:
                run = 0
    keep_mask = ~np.isnan(data).any(axis=1)
    for i in np.flatnonzero(~keep_mask):
        _warn(diagnostics, path, line_nos[i], "unfilled gap, row dropped")
    data = data[keep_mask]
    dates = [d for d, ok in zip(seen_dates, keep_mask) if ok]
    line_nos = [ln for ln, ok in zip(line_nos, keep_mask) if ok]

    if kind == "ohlcv":
        o, h, lo, c = (data[:, keep.index(k)] for k in ("open", "high", "low", "close"))
        valid = (lo <= np.minimum(o, c)) & (h >= np.maximum(o, c))
        for i in np.flatnonzero(~valid):
            _warn(diagnostics, path, line_nos[i],
                  "high/low do not bracket open/close, row rejected")
        data = data[valid]
        dates = [d for d, ok in zip(dates, valid) if ok]

    if not dates:
        raise EmptyTable(f"{path}: zero valid rows after validation")

    columns = {name: data[:, j].copy() for j, name in enumerate(keep)}
    return TimeSeriesTable(dates, columns, kind, diagnostics)


def align(tables: list[TimeSeriesTable]) -> AlignedTable:
    """Inner-join tables on their common dates, prefixing columns by source.

    When a macro source participates, weekend dates are excluded even if
    every source happened to report them.
    """
    if not tables:
        raise ValueError("align requires at least one table")
    for t in tables:
        if len(t) == 0:
            raise EmptyTable("cannot align an empty table")

    common = set(tables[0].dates)
    for t in tables[1:]:
        common &= set(t.dates)
    if any(t.source_kind == "macro" for t in tables):
        common = {d for d in common if d.weekday() < 5}
    if not common:
        raise EmptyIntersection("no dates common to all sources")
    dates = sorted(common)

    diagnostics: list[str] = []
    columns: dict[str, np.ndarray] = {}
    for t in tables:
        prefix = SOURCE_PREFIX[t.source_kind]
        index = {d: i for i, d in enumerate(t.dates)}
        sel = np.array([index[d] for d in dates], dtype=int)
        for name, values in t.columns.items():
            full_name = f"{prefix}.{name}"
            if full_name in columns:
                raise DuplicateColumn(f"column {full_name!r} from two sources")
            columns[full_name] = values[sel]
        diagnostics.extend(t.diagnostics)
    return AlignedTable(dates, columns, diagnostics)


def min_max_normalize(table: AlignedTable, train_rows: int | None = None) -> AlignedTable:
    """Scale each column by (x - min) / (max - min).

    Statistics come from the first ``train_rows`` rows only (all rows when
    None), so test rows may land outside [0, 1]. Constant columns cannot be
    scaled and map to 0.5 everywhere, with a diagnostic.
    """
    n = len(table)
    if train_rows is None:
        train_rows = n
    if not 0 < train_rows <= n:
        raise ValueError(f"train_rows {train_rows} out of range (1..{n})")

    diagnostics = list(table.diagnostics)
    columns: dict[str, np.ndarray] = {}
    for name, values in table.columns.items():
        lo = values[:train_rows].min()
        hi = values[:train_rows].max()
        if hi > lo:
            columns[name] = (values - lo) / (hi - lo)
        else:
            columns[name] = np.full(n, 0.5)
            _warn(diagnostics, name, "-", "constant column scaled to 0.5")
    return AlignedTable(list(table.dates), columns, diagnostics)


def label_directions(table: AlignedTable, target_column: str = "price.close") -> DirectionMatrix:
    """Label every column Up/Down against the previous day and drop row 0.

    A value strictly lower than the previous day's is Down; anything else,
    ties included, is Up.
    """
    if len(table) < 2:
        raise TooFewRows("need at least 2 rows to label directions")
    if target_column not in table.columns:
        raise MissingColumn(f"target column {target_column!r} not present")

    variables = list(table.columns)
    states = np.empty((len(table) - 1, len(variables)), dtype=np.int8)
    for j, name in enumerate(variables):
        values = table.columns[name]
        states[:, j] = np.where(values[1:] < values[:-1], DOWN, UP)
    return DirectionMatrix(table.dates[1:], variables, states, target_column)
