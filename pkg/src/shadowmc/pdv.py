"""Path-dependent volatility (PDV) baseline with exponential kernels.

Volatility is an affine function of two path features::

    sigma_t = beta0 + beta1 * R1_t + beta2 * sqrt(R2_t)
    R1_t = sum_{u <= t} K1(t - u) r_u
    R2_t = sum_{u <= t} K2(t - u) r_u**2

with ``K(s) = sum_i c_i exp(-lambda_i * s * dt)`` for a lag of ``s`` steps.
Rates are per unit of time (per year by default, ``dt = 1/252``) and sigma
is annualized, so a kernel with ``c_i = lambda_i`` integrates to one and
``R2`` is an annualized variance. Each exponential is one Markov factor,
updated recursively ``F_t = exp(-lambda dt) F_{t-1} + r_t``.

The returns ``r_t = S_t / S_{t-1} - 1 = exp(dx_t) - 1`` are simple (not log)
returns. They have zero mean under the simulated dynamics; log returns would
feed the ``-sigma**2 dt / 2`` drift into ``R1`` and, with ``beta1 < 0``,
make the volatility blow up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectra import ScatteringSpectra, compute_spectra, spectra_distance
from .volatility import ANNUALIZATION
from .wavelets import build_filter_bank

__all__ = [
    "ILLUSTRATIVE_KERNELS",
    "PdvBetas",
    "PdvExplosionError",
    "PdvKernels",
    "pdv_calibrate_regression",
    "pdv_calibrate_spectra",
    "pdv_features",
    "pdv_feature_series",
    "pdv_predict_vol",
    "pdv_simulate",
    "pdv_volatility",
    "simple_returns",
]


class PdvExplosionError(RuntimeError):
    """The simulated volatility left the admissible range."""


@dataclass(frozen=True)
class PdvKernels:
    k1_weights: tuple = (1.0,)
    k1_rates: tuple = (1.0,)
    k2_weights: tuple = (1.0,)
    k2_rates: tuple = (1.0,)
    dt: float = 1 / ANNUALIZATION

    def __post_init__(self):
        for w, r in ((self.k1_weights, self.k1_rates), (self.k2_weights, self.k2_rates)):
            if len(w) != len(r) or len(w) == 0:
                raise ValueError("each kernel needs as many weights as rates")
            if np.any(np.asarray(r, dtype=float) <= 0):
                raise ValueError("kernel rates must be positive")
        if np.any(np.asarray(self.k2_weights, dtype=float) < 0):
            raise ValueError("K2 weights must be non-negative so that R2 >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def kernel(self, which: int, lags) -> np.ndarray:
        """``K_which`` evaluated at integer lags (in steps)."""
        w, r = (self.k1_weights, self.k1_rates) if which == 1 else (self.k2_weights, self.k2_rates)
        s = np.asarray(lags, dtype=float)[..., None]
        return np.sum(np.asarray(w) * np.exp(-np.asarray(r) * s * self.dt), axis=-1)

    def to_dict(self) -> dict:
        return {
            "k1_weights": list(self.k1_weights),
            "k1_rates": list(self.k1_rates),
            "k2_weights": list(self.k2_weights),
            "k2_rates": list(self.k2_rates),
            "dt": self.dt,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PdvKernels":
        return cls(
            tuple(d["k1_weights"]),
            tuple(d["k1_rates"]),
            tuple(d["k2_weights"]),
            tuple(d["k2_rates"]),
            d.get("dt", 1 / ANNUALIZATION),
        )


# Illustrative two-exponential kernels, each normalized to unit integral
# (weights = theta_i * lambda_i). Not a calibrated set: supply your own for
# serious use.
ILLUSTRATIVE_KERNELS = PdvKernels(
    k1_weights=(0.6 * 30.0, 0.4 * 5.0),
    k1_rates=(30.0, 5.0),
    k2_weights=(0.5 * 30.0, 0.5 * 3.0),
    k2_rates=(30.0, 3.0),
)


@dataclass(frozen=True)
class PdvBetas:
    beta0: float
    beta1: float
    beta2: float

    def __post_init__(self):
        if self.beta2 < 0:
            raise ValueError("beta2 must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([self.beta0, self.beta1, self.beta2])


def pdv_volatility(betas: PdvBetas, R1, R2):
    """Annualized volatility, floored at 0."""
    return np.maximum(betas.beta0 + betas.beta1 * np.asarray(R1) + betas.beta2 * np.sqrt(R2), 0.0)


def _factor_states(dx: np.ndarray, rates, dt) -> np.ndarray:
    """Recursive exponential filters: array (len(dx), n_factors)."""
    decay = np.exp(-np.asarray(rates, dtype=float) * dt)
    out = np.empty((len(dx), len(decay)))
    state = np.zeros(len(decay))
    for t, v in enumerate(dx):
        state = decay * state + v
        out[t] = state
    return out


def simple_returns(x) -> np.ndarray:
    """``r_t = exp(x_t - x_{t-1}) - 1`` with ``r_0 = 0``."""
    x = np.asarray(getattr(x, "x", x), dtype=float)
    return np.concatenate([[0.0], np.expm1(np.diff(x))])


def pdv_feature_series(x, kernels: PdvKernels) -> tuple[np.ndarray, np.ndarray]:
    """``(R1_t, R2_t)`` for every t = 0..N-1 (the empty history at t = 0 gives 0).

    The return from ``t - 1`` to ``t`` is included in the features at ``t``.
    """
    r = simple_returns(x)
    R1 = _factor_states(r, kernels.k1_rates, kernels.dt) @ np.asarray(kernels.k1_weights, dtype=float)
    R2 = _factor_states(r * r, kernels.k2_rates, kernels.dt) @ np.asarray(kernels.k2_weights, dtype=float)
    return R1, np.maximum(R2, 0.0)


def pdv_features(x, kernels: PdvKernels, t: int) -> tuple[float, float]:
    x = np.asarray(getattr(x, "x", x), dtype=float)
    if not 0 <= t < len(x):
        raise IndexError(f"t = {t} outside a path of length {len(x)}")
    R1, R2 = pdv_feature_series(x[: t + 1], kernels)
    return float(R1[t]), float(R2[t])


def pdv_simulate(
    kernels: PdvKernels,
    betas: PdvBetas,
    N: int,
    seed: int = 0,
    burn_in: int = 1000,
    max_vol: float = 10.0,
) -> np.ndarray:
    """Log-price path of length N starting at 0, one step per ``dt``.

    ``x_{t+1} = x_t + sigma_t sqrt(dt) Z - sigma_t**2 dt / 2`` with
    ``sigma_t`` computed from features up to ``t``. The first ``burn_in``
    steps are discarded.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    rng = np.random.default_rng(seed)
    dt = kernels.dt
    w1, w2 = np.asarray(kernels.k1_weights, float), np.asarray(kernels.k2_weights, float)
    d1 = np.exp(-np.asarray(kernels.k1_rates, float) * dt)
    d2 = np.exp(-np.asarray(kernels.k2_rates, float) * dt)
    f1, f2 = np.zeros(len(w1)), np.zeros(len(w2))
    total = burn_in + N - 1
    z = rng.standard_normal(total)
    dx = np.empty(total)
    sq = np.sqrt(dt)
    for i in range(total):
        sigma = betas.beta0 + betas.beta1 * (w1 @ f1) + betas.beta2 * np.sqrt(max(w2 @ f2, 0.0))
        sigma = max(sigma, 0.0)
        if not sigma <= max_vol:
            raise PdvExplosionError(f"volatility {sigma:.3g} exceeded {max_vol} at step {i}")
        dx[i] = sigma * sq * z[i] - 0.5 * sigma * sigma * dt
        r = np.expm1(dx[i])
        f1 = d1 * f1 + r
        f2 = d2 * f2 + r * r
    return np.concatenate([[0.0], np.cumsum(dx[burn_in:])])


def pdv_predict_vol(x, kernels: PdvKernels, betas: PdvBetas, t: int, T: int | None = None) -> float:
    """Predicted annualized variance ``sigma(R1_t, R2_t)**2``.

    ``betas`` are those calibrated for the horizon ``T``; ``T`` itself does
    not enter the formula.
    """
    R1, R2 = pdv_features(x, kernels, t)
    return float(pdv_volatility(betas, R1, R2)) ** 2


@dataclass
class RegressionFit:
    betas: PdvBetas
    design: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)

    @property
    def residuals(self) -> np.ndarray:
        return self.target - self.design @ self.betas.as_array()


def pdv_calibrate_regression(x, kernels: PdvKernels, T: int, t_range=None, burn_in: int = 0) -> RegressionFit:
    """OLS of ``sqrt(q_T)`` on ``(1, R1_t, sqrt(R2_t))`` over the dates ``t_range``.

    By default every t with ``burn_in <= t`` and ``t + T`` inside the path is used.
    """
    x = np.asarray(getattr(x, "x", x), dtype=float)
    R1, R2 = pdv_feature_series(x, kernels)
    if t_range is None:
        t_range = range(burn_in, len(x) - T)
    ts = np.asarray(list(t_range), dtype=int)
    if len(ts) < 3:
        raise ValueError("need at least 3 (feature, target) pairs")
    dx2 = np.diff(x) ** 2
    csum = np.concatenate([[0.0], np.cumsum(dx2)])
    y = np.sqrt(ANNUALIZATION / T * (csum[ts + T] - csum[ts]))
    A = np.column_stack([np.ones(len(ts)), R1[ts], np.sqrt(R2[ts])])
    if np.linalg.matrix_rank(A) < 3:
        raise np.linalg.LinAlgError("design matrix (1, R1, sqrt R2) is rank deficient")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    b0, b1, b2 = coef
    if b2 < 0:
        raise ValueError(f"regression gave beta2 = {b2:.3g} < 0")
    return RegressionFit(PdvBetas(b0, b1, b2), A, y)


def pdv_calibrate_spectra(
    kernels: PdvKernels,
    beta_grid,
    target: ScatteringSpectra,
    N: int,
    n_realizations: int = 10,
    seed: int = 0,
    burn_in: int = 1000,
) -> tuple[PdvBetas, np.ndarray]:
    """Grid point whose simulations best match ``target`` on average.

    For each point, ``n_realizations`` paths of length ``N`` are simulated
    (the same seeds for every point) and their spectra averaged. Points whose
    simulation explodes get distance ``inf``. Returns the argmin (first on
    ties) and all distances. Simulations are divided by ``target.scale`` so
    they are compared in the target's units.
    """
    beta_grid = list(beta_grid)
    if not beta_grid:
        raise ValueError("empty beta grid")
    bank = build_filter_bank(N, target.index.J)
    dists = np.full(len(beta_grid), np.inf)
    for g, betas in enumerate(beta_grid):
        try:
            vals = [
                compute_spectra(pdv_simulate(kernels, betas, N, seed + r, burn_in) / target.scale, bank).values
                for r in range(n_realizations)
            ]
        except PdvExplosionError:
            continue
        mean = ScatteringSpectra(target.index, np.mean(vals, axis=0), target.scale)
        dists[g] = spectra_distance(mean, target)
    if not np.isfinite(dists).any():
        raise PdvExplosionError("every grid point exploded")
    return beta_grid[int(np.argmin(dists))], dists
