"""Dated log-price series and CSV input/output."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

__all__ = ["LogPricePath", "load_prices", "write_prices"]


@dataclass(frozen=True, eq=False)
class LogPricePath:
    """Log-prices ``x`` on an ordinal day index.

    ``labels`` keeps the original dates (ISO strings) when loaded from a file.
    Non-trading gaps in the calendar are ignored: consecutive rows are
    consecutive days.
    """

    x: np.ndarray
    labels: tuple = ()
    provenance: str = "real"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or len(x) < 2:
            raise ValueError("a log-price path needs at least 2 samples")
        if not np.all(np.isfinite(x)):
            raise ValueError("log-prices must be finite")
        if self.labels and len(self.labels) != len(x):
            raise ValueError("one label per sample")
        if self.provenance not in ("real", "synthetic"):
            raise ValueError("provenance must be 'real' or 'synthetic'")
        object.__setattr__(self, "x", x)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def dates(self) -> np.ndarray:
        return np.arange(len(self.x))

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.x)

    def lag_increment(self, lag: int) -> np.ndarray:
        """``x(t) - x(t - lag)`` for ``t = lag .. N-1``."""
        return self.x[lag:] - self.x[:-lag]

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(label) from None

    @property
    def closes(self) -> np.ndarray:
        return np.exp(self.x)


def load_prices(path) -> LogPricePath:
    """Read a ``date,close`` CSV (ISO dates, increasing, positive closes)."""
    labels, closes = [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["date", "close"]:
            raise ValueError(f"{path}: expected a 'date,close' header, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: malformed row {row}")
            try:
                day = dt.date.fromisoformat(row[0].strip())
                close = float(row[1])
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from None
            if not close > 0 or not np.isfinite(close):
                raise ValueError(f"{path}:{lineno}: close must be positive, got {close}")
            if labels and day <= labels[-1]:
                kind = "duplicate" if day == labels[-1] else "non-increasing"
                raise ValueError(f"{path}:{lineno}: {kind} date {day}")
            labels.append(day)
            closes.append(close)
    return LogPricePath(np.log(closes), tuple(d.isoformat() for d in labels))


def write_prices(path, prices: LogPricePath, start: str = "2000-01-03") -> None:
    """Write ``date,close``; synthetic paths without labels get consecutive business days."""
    labels = prices.labels
    if not labels:
        days, d = [], dt.date.fromisoformat(start)
        while len(days) < len(prices):
            if d.weekday() < 5:
                days.append(d.isoformat())
            d += dt.timedelta(days=1)
        labels = tuple(days)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["date", "close"])
        for label, close in zip(labels, np.exp(prices.x)):
            w.writerow([label, repr(float(close))])
