"""Multi-scale embedding of a past path and the induced shadowing distance.

The embedding of a past ending at ``t`` stacks the increments
``(x(t) - x(t - l)) / l**beta`` over the lags ``l = floor(alpha**m)``,
``m = 1, 2, ...``, up to the horizon. Repeated lags (the floor maps several
``m`` to 1, 2, 3, 4) are kept, which puts extra weight on short lags.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "DegenerateQueryError",
    "EmbeddedPast",
    "EmbeddingConfig",
    "embed",
    "embed_windows",
    "shadow_distance",
    "squared_distance",
    "threshold",
]


class DegenerateQueryError(ValueError):
    """The query past is constant, so the relative threshold is zero."""


@dataclass(frozen=True)
class EmbeddingConfig:
    alpha: float = 1.15
    beta: float = 0.9
    eta_hat: float = 0.075
    horizon: int = 126

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1")
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")
        if not self.eta_hat > 0:
            raise ValueError("eta_hat must be > 0")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    @cached_property
    def lags(self) -> np.ndarray:
        lags = []
        m = 1
        while (lag := int(np.floor(self.alpha**m))) <= self.horizon:
            lags.append(lag)
            m += 1
        return np.array(lags, dtype=int)

    @cached_property
    def lag_weights(self) -> np.ndarray:
        return self.lags.astype(float) ** -self.beta

    @property
    def dimension(self) -> int:
        return len(self.lags)


@dataclass(frozen=True, eq=False)
class EmbeddedPast:
    vector: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.sqrt(squared_distance(self.vector, 0.0)))

    @property
    def dimension(self) -> int:
        return self.vector.shape[-1]


def embed(past, config: EmbeddingConfig = EmbeddingConfig()) -> EmbeddedPast:
    """Embed a past segment whose last sample is the present ``x(t)``.

    ``past`` needs at least ``horizon + 1`` samples (``horizon`` increments).
    """
    x = np.asarray(getattr(past, "x", past), dtype=float)
    if x.ndim != 1 or len(x) <= config.horizon:
        raise ValueError(f"past needs at least {config.horizon + 1} samples, got {x.shape}")
    t = len(x) - 1
    return EmbeddedPast((x[t] - x[t - config.lags]) * config.lag_weights)


def embed_windows(paths: np.ndarray, anchors: np.ndarray, config: EmbeddingConfig) -> np.ndarray:
    """Embeddings of every (path, anchor): array of shape (rows, len(anchors), M).

    Uses the same floating-point operations as :func:`embed`, so the results
    are bit-identical to embedding each window separately.
    """
    paths = np.asarray(paths, dtype=float)
    present = paths[:, anchors, None]
    lagged = paths[:, anchors[:, None] - config.lags[None, :]]
    return (present - lagged) * config.lag_weights


def squared_distance(a: np.ndarray, b) -> np.ndarray:
    """Squared Euclidean distance along the last axis, summed left to right.

    The fixed summation order makes single-window and batched evaluations
    agree to the last bit.
    """
    d = a - b
    acc = d[..., 0] * d[..., 0]
    for m in range(1, d.shape[-1]):
        acc = acc + d[..., m] * d[..., m]
    return acc


def shadow_distance(a: EmbeddedPast, b: EmbeddedPast) -> float:
    if a.dimension != b.dimension:
        raise ValueError(f"embedding dimensions differ: {a.dimension} vs {b.dimension}")
    return float(np.sqrt(squared_distance(a.vector, b.vector)))


def threshold(query: EmbeddedPast, config: EmbeddingConfig = EmbeddingConfig()) -> float:
    norm = query.norm
    if norm == 0:
        raise DegenerateQueryError("query past is constant; the shadowing threshold would be zero")
    return config.eta_hat * norm
