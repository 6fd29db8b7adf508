"""Exact nearest-window scan and the Path Shadowing Monte-Carlo estimator.

Every window of every dataset path is a candidate. The scan is exhaustive:
the dataset is split into shards of paths, each shard keeps its own top-k and
the partial results are merged. Candidates are ordered by
``(distance, path id, anchor)`` so the result does not depend on sharding or
on the number of threads.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import PathDataset
from .embedding import EmbeddedPast, EmbeddingConfig, embed, embed_windows, squared_distance, threshold

__all__ = [
    "ShadowSet",
    "WeightedSample",
    "estimate",
    "gaussian_weights",
    "predict_distribution",
    "scan",
    "scan_reference",
    "shadow_set_for_past",
]

# embedding entries held in memory per shard
_SHARD_BUDGET = 1 << 22


@dataclass(frozen=True, eq=False)
class ShadowSet:
    """Selected windows, nearest first.

    ``futures[i]`` holds ``x[t .. t + F]`` of window ``i`` (the present value
    followed by ``F`` future samples), so functionals can use the first
    future increment ``futures[i, 1] - futures[i, 0]``.
    """

    path_ids: np.ndarray
    anchors: np.ndarray
    distances: np.ndarray
    weights: np.ndarray
    futures: np.ndarray
    eta: float

    @property
    def k(self) -> int:
        return len(self.distances)

    def to_dict(self, include_futures: bool = False) -> dict:
        out = {
            "eta": self.eta,
            "path_ids": self.path_ids.tolist(),
            "anchors": self.anchors.tolist(),
            "distances": self.distances.tolist(),
            "weights": self.weights.tolist(),
        }
        if include_futures:
            out["futures"] = self.futures.tolist()
        return out

    def to_json(self, path, include_futures: bool = False) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(include_futures), f)


def gaussian_weights(distances: np.ndarray, eta: float) -> np.ndarray:
    """``exp(-d**2 / (2 eta**2))`` normalized to mean 1.

    Shifted by the smallest distance before exponentiating, which cancels in
    the normalization and avoids underflow when every ``d >> eta``.
    """
    d2 = np.asarray(distances, dtype=float) ** 2
    w = np.exp(-(d2 - d2.min()) / (2 * eta * eta))
    return w * (len(w) / w.sum())


def _top_k(d2, ids, anchors, k):
    if len(d2) > k:
        kth = np.partition(d2, k - 1)[k - 1]
        keep = d2 <= kth
        d2, ids, anchors = d2[keep], ids[keep], anchors[keep]
    order = np.lexsort((anchors, ids, d2))[:k]
    return d2[order], ids[order], anchors[order]


def _scan_shard(paths, rows, anchors, query, config, k):
    d2 = squared_distance(embed_windows(paths[rows], anchors, config), query).ravel()
    ids = np.repeat(rows, len(anchors))
    anc = np.tile(anchors, len(rows))
    return _top_k(d2, ids, anc, k)


def _shards(count: int, per_shard: int):
    return [np.arange(s, min(s + per_shard, count)) for s in range(0, count, per_shard)]


def _check(dataset: PathDataset, query: EmbeddedPast, k: int, config: EmbeddingConfig) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be at least 1")
    if dataset.count == 0:
        raise ValueError("dataset is empty")
    if config.horizon > dataset.window.past_length:
        raise ValueError(
            f"embedding horizon {config.horizon} exceeds the window past length {dataset.window.past_length}"
        )
    if query.dimension != config.dimension:
        raise ValueError(f"query dimension {query.dimension} does not match config ({config.dimension})")
    anchors = dataset.window.anchors(dataset.N)
    if dataset.count * len(anchors) < k:
        raise ValueError(f"only {dataset.count * len(anchors)} windows available, k = {k}")
    return anchors


def _assemble(dataset, query, config, d2, ids, anchors) -> ShadowSet:
    eta = threshold(query, config)
    F = dataset.window.future_length
    futures = np.stack([dataset.paths[i, t : t + F + 1] for i, t in zip(ids, anchors)])
    distances = np.sqrt(d2)
    return ShadowSet(ids.astype(int), anchors.astype(int), distances, gaussian_weights(distances, eta), futures, eta)


def scan(
    dataset: PathDataset,
    query: EmbeddedPast,
    k: int,
    config: EmbeddingConfig = EmbeddingConfig(),
    threads: int = 1,
) -> ShadowSet:
    """The ``k`` windows nearest to ``query``, with Gaussian shadowing weights."""
    anchors = _check(dataset, query, k, config)
    per_shard = max(1, _SHARD_BUDGET // (len(anchors) * config.dimension))
    shards = _shards(dataset.count, per_shard)
    q = query.vector

    def work(rows):
        return _scan_shard(dataset.paths, rows, anchors, q, config, k)

    if threads > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, shards))
    else:
        parts = [work(rows) for rows in shards]
    d2, ids, anc = (np.concatenate(p) for p in zip(*parts))
    return _assemble(dataset, query, config, *_top_k(d2, ids, anc, k))


def scan_reference(
    dataset: PathDataset, query: EmbeddedPast, k: int, config: EmbeddingConfig = EmbeddingConfig()
) -> ShadowSet:
    """Single-threaded exhaustive scan, one window at a time (slow; for checking)."""
    anchors = _check(dataset, query, k, config)
    P = dataset.window.past_length
    cands = []
    for i in range(dataset.count):
        for t in anchors:
            v = embed(dataset.paths[i, t - P : t + 1], config)
            cands.append((float(squared_distance(v.vector, query.vector)), i, int(t)))
    cands.sort()
    d2, ids, anc = (np.array(c) for c in zip(*cands[:k]))
    return _assemble(dataset, query, config, d2.astype(float), ids, anc)


def shadow_set_for_past(
    dataset: PathDataset, past, k: int, config: EmbeddingConfig = EmbeddingConfig(), threads: int = 1
) -> ShadowSet:
    return scan(dataset, embed(past, config), k, config, threads)


def _evaluate(shadow: ShadowSet, q) -> np.ndarray:
    values = np.asarray(q(shadow.futures), dtype=float)
    if values.shape != (shadow.k,):
        raise ValueError(f"functional must map the (k, F+1) futures array to shape ({shadow.k},), got {values.shape}")
    return values


def estimate(shadow: ShadowSet, q) -> float:
    """Nadaraya-Watson estimate ``(1/k) sum_i w_i q(future_i)``.

    ``q`` is vectorized: it receives all futures as a ``(k, F + 1)`` array and
    returns one value per row.
    """
    if shadow.k == 0:
        raise ValueError("empty shadow set")
    return float(np.mean(shadow.weights * _evaluate(shadow, q)))


@dataclass(frozen=True, eq=False)
class WeightedSample:
    values: np.ndarray
    weights: np.ndarray

    def mean(self) -> float:
        return float(np.sum(self.weights * self.values) / np.sum(self.weights))

    def quantile(self, p):
        """Smallest value whose cumulative normalized weight reaches ``p``."""
        p = np.asarray(p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise ValueError("quantile levels must lie in [0, 1]")
        order = np.argsort(self.values, kind="stable")
        v, cw = self.values[order], np.cumsum(self.weights[order])
        cw = cw / cw[-1]
        idx = np.searchsorted(cw, p * (1 - 1e-12), side="left")
        return v[np.minimum(idx, len(v) - 1)]

    def median(self) -> float:
        return float(self.quantile(0.5))

    def histogram(self, bins=20):
        return np.histogram(self.values, bins=bins, weights=self.weights / self.weights.sum())


def predict_distribution(shadow: ShadowSet, q) -> WeightedSample:
    if shadow.k == 0:
        raise ValueError("empty shadow set")
    return WeightedSample(_evaluate(shadow, q), shadow.weights.copy())
