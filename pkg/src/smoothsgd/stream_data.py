"""Hourly load series: CSV I/O, a seasonal generator, calendar features, chunking.

The canonical CSV has a ``hour,value`` header followed by one row per hour,
hours consecutive from 0, LF line endings. :func:`write_csv` emits floats
with ``repr`` so files it writes round-trip byte for byte.

Calendar features use a simplified clock: hour 0 is midnight on day 0,
weeks have 7 days and months 30 days.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .numeric import Rng

__all__ = [
    "FEATURE_DIM",
    "Chunk",
    "DataError",
    "SeriesPoint",
    "chunk_stream",
    "convert_gefcom",
    "encode_features",
    "load_csv",
    "series_values",
    "synth_series",
    "write_csv",
]

HOURS_PER_DAY = 24
DAYS_PER_WEEK = 7
DAYS_PER_MONTH = 30
MONTHS = 12
FEATURE_DIM = 1 + HOURS_PER_DAY + DAYS_PER_WEEK + MONTHS  # 44


class DataError(ValueError):
    """Malformed, gapped or empty series data."""


class SeriesPoint(NamedTuple):
    hour: int
    value: float


class Chunk(NamedTuple):
    index: int
    points: tuple[SeriesPoint, ...]

    @property
    def start(self) -> int:
        return self.points[0].hour

    @property
    def stop(self) -> int:
        return self.points[-1].hour + 1

    def __len__(self) -> int:
        return len(self.points)


def series_values(series) -> np.ndarray:
    if isinstance(series, np.ndarray):
        return series.astype(np.float64, copy=False)
    return np.array([p.value for p in series], dtype=np.float64)


def load_csv(path) -> list[SeriesPoint]:
    path = Path(path)
    points: list[SeriesPoint] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["hour", "value"]:
            raise DataError(f"{path}:1: expected header 'hour,value', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                hour, value = int(row[0]), float(row[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}:{lineno}: non-finite value")
            expected = len(points)
            if hour != expected:
                kind = "duplicate" if hour < expected else "gap"
                raise DataError(f"{path}:{lineno}: {kind} at hour {hour} (expected {expected})")
            points.append(SeriesPoint(hour, value))
    if not points:
        raise DataError(f"{path}: no data rows")
    return points


def write_csv(series, path) -> None:
    path = Path(path)
    values = series_values(series)
    with path.open("w", newline="") as fh:
        fh.write("hour,value\n")
        for h, v in enumerate(values.tolist()):
            fh.write(f"{h},{v!r}\n")


def convert_gefcom(src, dst, column: str = "LOAD") -> int:
    """Convert a GEFCom2014-style load ``train.csv`` into the canonical format.

    Rows with an empty load column (the temperature-only history) are
    dropped; the remaining rows are renumbered from hour 0 in file order.
    Returns the number of rows written.
    """
    values = []
    with Path(src).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise DataError(f"{src}: no {column!r} column")
        for lineno, row in enumerate(reader, start=2):
            raw = (row.get(column) or "").strip()
            if not raw:
                continue
            try:
                values.append(float(raw))
            except ValueError:
                raise DataError(f"{src}:{lineno}: bad load value {raw!r}") from None
    if not values:
        raise DataError(f"{src}: no load values")
    write_csv(np.array(values), dst)
    return len(values)


def synth_series(length_hours: int, daily_amp: float = 1.0, weekly_amp: float = 0.5, trend: float = 0.0,
                 noise_sd: float = 0.0, seed: int = 0, base: float = 0.0) -> list[SeriesPoint]:
    """``base + daily*sin(2πh/24) + weekly*sin(2πh/168) + trend*h + noise``."""
    if length_hours < 1:
        raise ValueError("length_hours must be >= 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    h = np.arange(length_hours, dtype=np.float64)
    values = (
        base
        + daily_amp * np.sin(2.0 * np.pi * h / HOURS_PER_DAY)
        + weekly_amp * np.sin(2.0 * np.pi * h / (HOURS_PER_DAY * DAYS_PER_WEEK))
        + trend * h
    )
    if noise_sd > 0:
        values = values + Rng(seed).normal(length_hours, 0.0, noise_sd)
    return [SeriesPoint(i, v) for i, v in enumerate(values.tolist())]


def calendar_rows(hours: np.ndarray) -> np.ndarray:
    """One-hot hour-of-day, day-of-week and month blocks for each hour index."""
    hours = np.asarray(hours, dtype=np.int64)
    day = hours // HOURS_PER_DAY
    rows = np.zeros((hours.size, FEATURE_DIM - 1))
    r = np.arange(hours.size)
    rows[r, hours % HOURS_PER_DAY] = 1.0
    rows[r, HOURS_PER_DAY + day % DAYS_PER_WEEK] = 1.0
    rows[r, HOURS_PER_DAY + DAYS_PER_WEEK + (day // DAYS_PER_MONTH) % MONTHS] = 1.0
    return rows


def encode_features(series, t: int, window: int) -> np.ndarray:
    """Feature matrix for hours ``t - window .. t - 1``.

    Row layout: ``[value, hour one-hot (24), weekday one-hot (7), month one-hot (12)]``.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    values = series_values(series)
    if t < window:
        raise IndexError(f"need {window} hours of history before hour {t}")
    if t > values.size:
        raise IndexError(f"hour {t} is beyond the series end ({values.size})")
    hours = np.arange(t - window, t)
    return np.hstack([values[t - window: t, None], calendar_rows(hours)])


def chunk_stream(series: Sequence[SeriesPoint], chunk_hours: int) -> list[Chunk]:
    if chunk_hours < 1:
        raise ValueError("chunk_hours must be >= 1")
    points = list(series)
    if points and not isinstance(points[0], SeriesPoint):
        points = [SeriesPoint(i, float(v)) for i, v in enumerate(points)]
    return [
        Chunk(i, tuple(points[start: start + chunk_hours]))
        for i, start in enumerate(range(0, len(points), chunk_hours))
    ]
