"""Realized-variance forecasting with Path Shadowing Monte-Carlo.

The target is the annualized realized variance over the next ``T`` days,
``q_T = (252 / T) * sum_{u=t+1}^{t+T} dx_u**2``. For a given date a single
shadow set serves every horizon.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dataset import PathDataset
from .embedding import EmbeddingConfig, embed
from .shadow import estimate, scan

__all__ = [
    "ANNUALIZATION",
    "ForecastReport",
    "calibrate_embedding",
    "in_model_experiment",
    "predict_benchmark",
    "predict_ps_mc",
    "realized_variance",
    "score_r2",
    "variance_functional",
]

ANNUALIZATION = 252


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "x", x), dtype=float)


def realized_variance(x, t: int, T: int) -> float:
    x = _values(x)
    if T < 1:
        raise ValueError("T must be at least 1")
    if t < 0 or t + T >= len(x):
        raise IndexError(f"window ({t}, {t + T}] outside a path of length {len(x)}")
    dx = np.diff(x[t : t + T + 1])
    return ANNUALIZATION / T * float(np.sum(dx * dx))


def predict_benchmark(x, t: int, T: int) -> float:
    """Realized variance over the ``T`` days ending at ``t``."""
    if t - T < 0:
        raise ValueError(f"need {T} days of history before t = {t}")
    return realized_variance(x, t - T, T)


def variance_functional(T: int):
    """``q_T`` as a vectorized functional of shadow futures ``(k, F + 1)``."""

    def q(futures):
        dx = np.diff(futures[:, : T + 1], axis=1)
        return ANNUALIZATION / T * np.sum(dx * dx, axis=1)

    return q


def predict_ps_mc(
    dataset: PathDataset,
    past,
    T,
    config: EmbeddingConfig = EmbeddingConfig(),
    k: int = 50_000,
    threads: int = 1,
):
    """PS-MC variance prediction for one horizon or a list of horizons.

    With a list, one scan is shared by all horizons and an array is returned.
    """
    Ts = np.atleast_1d(T).astype(int)
    if Ts.max() > dataset.window.future_length:
        raise ValueError(f"T = {Ts.max()} exceeds the window future length {dataset.window.future_length}")
    shadow = scan(dataset, embed(past, config), k, config, threads)
    out = np.array([estimate(shadow, variance_functional(int(h))) for h in Ts])
    return out if np.ndim(T) else float(out[0])


def score_r2(predictions, realized) -> float:
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(realized, dtype=float)
    if p.shape != y.shape or p.ndim != 1 or len(p) < 2:
        raise ValueError("need two equal-length 1-d arrays with at least 2 entries")
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        raise ValueError("realized series is constant; R^2 undefined")
    return float(1 - np.sum((y - p) ** 2) / ss_tot)


@dataclass
class ForecastReport:
    """Long-format forecasts: one row per (date, T, method)."""

    rows: list[tuple] = field(default_factory=list)

    def add(self, date, T: int, method: str, prediction: float, realized: float) -> None:
        self.rows.append((date, int(T), method, float(prediction), float(realized)))

    def series(self, method: str, T: int):
        sel = [(p, r) for _, h, m, p, r in self.rows if m == method and h == T]
        if not sel:
            raise KeyError((method, T))
        p, r = map(np.array, zip(*sel))
        return p, r

    @property
    def methods(self) -> list[str]:
        return sorted({r[2] for r in self.rows})

    @property
    def horizons(self) -> list[int]:
        return sorted({r[1] for r in self.rows})

    def r2(self, method: str, T: int, on: str = "variance") -> float:
        """R^2 on variance or on volatility (square roots)."""
        p, r = self.series(method, T)
        if on == "volatility":
            p, r = np.sqrt(np.maximum(p, 0)), np.sqrt(r)
        elif on != "variance":
            raise ValueError("on must be 'variance' or 'volatility'")
        return score_r2(p, r)

    def r2_table(self) -> dict:
        return {
            (m, T): {"variance": self.r2(m, T), "volatility": self.r2(m, T, "volatility")}
            for m in self.methods
            for T in self.horizons
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["date", "T", "method", "prediction", "realized"])
            for row in self.rows:
                w.writerow([row[0], row[1], row[2], repr(row[3]), repr(row[4])])


def _snippets(dataset: PathDataset, n_snippets: int, n_holdout: int, T_max: int, rng):
    """Held-out query paths and (path, t) snippet anchors drawn from them."""
    if n_holdout >= dataset.count:
        raise ValueError("need at least one non-held-out path to scan")
    held = rng.choice(dataset.count, size=n_holdout, replace=False)
    P = dataset.window.past_length
    lo, hi = max(P, T_max), dataset.N - 1 - T_max
    if hi < lo:
        raise ValueError("paths too short for the requested horizons")
    rows = rng.choice(held, size=n_snippets)
    ts = rng.integers(lo, hi + 1, size=n_snippets)
    scan_rows = np.setdiff1d(np.arange(dataset.count), held)
    return rows, ts, dataset.subset(scan_rows)


def in_model_experiment(
    dataset: PathDataset,
    config: EmbeddingConfig = EmbeddingConfig(),
    T_list=(7, 25, 75, 150),
    n_snippets: int = 1100,
    n_holdout: int | None = None,
    k: int = 50_000,
    seed: int = 0,
    threads: int = 1,
) -> ForecastReport:
    """Self-prediction: forecast held-out generated snippets from the rest.

    Snippets are taken from ``n_holdout`` paths that are removed from the
    scanned dataset, so no query can find itself. Both PS-MC and the
    previous-``T``-days benchmark are recorded.
    """
    rng = np.random.default_rng(seed)
    T_list = [int(T) for T in T_list]
    if n_holdout is None:
        n_holdout = max(1, dataset.count // 8)
    rows, ts, scan_set = _snippets(dataset, n_snippets, n_holdout, max(T_list), rng)
    P = dataset.window.past_length
    report = ForecastReport()
    for i, (r, t) in enumerate(zip(rows, ts)):
        x = np.asarray(dataset.paths[r])
        pred = predict_ps_mc(scan_set, x[t - P : t + 1], T_list, config, k, threads)
        for T, p in zip(T_list, pred):
            real = realized_variance(x, t, T)
            report.add(i, T, "ps-mc", p, real)
            report.add(i, T, "benchmark", predict_benchmark(x, t, T), real)
    return report


def calibrate_embedding(
    dataset: PathDataset,
    config_grid,
    T_list=(7, 25, 75, 150),
    n_snippets: int = 1100,
    k: int = 50_000,
    seed: int = 0,
    threads: int = 1,
) -> tuple[EmbeddingConfig, list[float]]:
    """Grid search maximizing the in-model R^2 (variance) averaged over ``T_list``.

    All grid points are scored on the same snippets. Returns the best config
    (first in grid order on ties) and the score of every grid point.
    """
    config_grid = list(config_grid)
    if not config_grid:
        raise ValueError("empty configuration grid")
    scores = []
    for cfg in config_grid:
        rep = in_model_experiment(dataset, cfg, T_list, n_snippets, k=k, seed=seed, threads=threads)
        scores.append(float(np.mean([rep.r2("ps-mc", T) for T in T_list])))
    best = int(np.argmax(scores))
    return config_grid[best], scores
