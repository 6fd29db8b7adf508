"""Black-Scholes utilities, Hedged Monte-Carlo pricing and smile metrics.

Maturities are given in trading days and converted to years with 252 days
per year. Rates are zero throughout.

Hedged Monte-Carlo works backwards over the daily grid. At each date the
option value ``C_t`` and the hedge ``phi_t`` are expanded on cubic B-splines
in log-moneyness ``y = ln(S_t / S_0)`` and fitted jointly by weighted least
squares on the one-step local risk::

    sum_k w_k (C_{t+1}(S_{t+1}^k) - C_t(S_t^k) - phi_t(S_t^k) (S_{t+1}^k - S_t^k))**2

The hedge uses the derivatives ``dB_i/dS`` of the value basis with its own
coefficients. The basis depends on the paths only, so one factorization per
date prices every strike at once.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.stats import norm

__all__ = [
    "HmcResult",
    "PricingJob",
    "SkewStickinessReport",
    "SmileSurface",
    "average_smile",
    "bs_delta",
    "bs_price",
    "hmc",
    "hmc_price",
    "implied_vol",
    "ps_hmc_smile",
    "skew_stickiness",
    "smile_from_ensemble",
    "smile_metrics",
    "snippets_from_futures",
]

DAYS_PER_YEAR = 252
S0 = 100.0


def _years(T_days) -> np.ndarray:
    return np.asarray(T_days, dtype=float) / DAYS_PER_YEAR


def bs_price(S, K, T, sigma, r: float = 0.0):
    """Black-Scholes call price; ``T`` in years."""
    S, K, T, sigma = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (S, K, T, sigma)))
    disc = np.exp(-r * T)
    intrinsic = np.maximum(S - K * disc, 0.0)
    vol = sigma * np.sqrt(T)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(S / K) + r * T) / vol + 0.5 * vol
        price = S * norm.cdf(d1) - K * disc * norm.cdf(d1 - vol)
    out = np.where(vol > 0, price, intrinsic)
    return out[()] if out.ndim == 0 else out


def bs_delta(S, K, T, sigma, r: float = 0.0):
    """Black-Scholes call delta; at ``T = 0`` or ``sigma = 0`` the step function."""
    S, K, T, sigma = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (S, K, T, sigma)))
    vol = sigma * np.sqrt(T)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(S / K) + r * T) / vol + 0.5 * vol
    out = np.where(vol > 0, norm.cdf(d1), (S > K * np.exp(-r * T)).astype(float))
    return out[()] if out.ndim == 0 else out


def implied_vol(price, S, K, T, r: float = 0.0, tol: float = 1e-12, max_iter: int = 100) -> float:
    """Invert :func:`bs_price` for sigma (``T`` in years).

    Newton steps on sigma, falling back to bisection whenever a step leaves
    the current bracket. A price at intrinsic value returns 0.
    """
    price, S, K, T = float(price), float(S), float(K), float(T)
    lower = max(S - K * np.exp(-r * T), 0.0)
    if not (lower - 1e-12 * S <= price <= S) or T <= 0:
        raise ValueError(f"price {price} outside the no-arbitrage range [{lower}, {S}]")
    if price <= lower + 1e-14 * S:
        return 0.0
    lo, hi = 0.0, 1.0
    while bs_price(S, K, T, hi, r) < price:
        hi *= 2
        if hi > 1e6:
            raise ValueError("implied volatility above 1e6")
    sigma = 0.5 * (lo + hi)
    for _ in range(max_iter):
        diff = float(bs_price(S, K, T, sigma, r)) - price
        if abs(diff) <= tol * max(price, 1e-300):
            return sigma
        if diff > 0:
            hi = sigma
        else:
            lo = sigma
        vol = sigma * np.sqrt(T)
        d1 = (np.log(S / K) + r * T) / vol + 0.5 * vol
        vega = S * norm.pdf(d1) * np.sqrt(T)
        step = sigma - diff / vega if vega > 0 else np.nan
        sigma = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-15 * hi:
            break
    return sigma


@dataclass(frozen=True, eq=False)
class PricingJob:
    """Price snippets (rows start at ``S0``) with per-path weights.

    Column ``t`` is the price after ``t`` days; maturity ``T`` uses columns
    ``0..T``.
    """

    paths: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        paths = np.atleast_2d(np.asarray(self.paths, dtype=float))
        if np.any(paths <= 0) or not np.all(np.isfinite(paths)):
            raise ValueError("prices must be finite and positive")
        w = np.ones(len(paths)) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (len(paths),) or np.any(w < 0) or not w.sum() > 0:
            raise ValueError("weights must be non-negative, one per path, not all zero")
        object.__setattr__(self, "paths", paths)
        object.__setattr__(self, "weights", w)

    @property
    def spot(self) -> float:
        return float(self.paths[0, 0])


@dataclass
class HmcResult:
    strikes: np.ndarray
    prices: np.ndarray
    ill_conditioned: bool = False


_N_BASIS = 12
_RIDGE = 1e-8


def _weighted_percentiles(y, w, qs):
    order = np.argsort(y, kind="stable")
    cw = np.cumsum(w[order])
    cw = cw / cw[-1]
    return np.interp(qs, cw, y[order])


def _spline_design(y, lo, hi, n_basis):
    """Values and y-derivatives of cubic B-splines on [lo, hi], linear outside."""
    inner = np.linspace(lo, hi, n_basis - 2)
    knots = np.concatenate([[lo] * 3, inner, [hi] * 3])
    spl = BSpline(knots, np.eye(n_basis), 3, extrapolate=False)
    d = spl.derivative()
    yc = np.clip(y, lo, hi)
    # evaluate just inside the right end so the last basis function is defined
    yc = np.minimum(yc, hi - 1e-12 * max(1.0, abs(hi)))
    B, dB = np.nan_to_num(spl(yc)), np.nan_to_num(d(yc))
    B = B + dB * (y - yc)[:, None]
    return B, dB


def _slice_basis(S_t, w, spot):
    """Design matrices for the value and the hedge at one date."""
    y = np.log(S_t / spot)
    pos = w > 0
    # Kish effective sample size, so concentrated weights get a coarser basis
    ess = w.sum() ** 2 / np.sum(w**2)
    lo, hi = _weighted_percentiles(y[pos], w[pos], [0.01, 0.99])
    n_basis = min(_N_BASIS, int(ess) // 10)
    if n_basis < 4 or hi - lo < 1e-10:
        # too few effective paths or a degenerate spread: constant value, constant hedge
        one = np.ones((len(y), 1))
        return one, one
    B, dB = _spline_design(y, lo, hi, n_basis)
    return B, dB / S_t[:, None]


def hmc(job: PricingJob, strikes, T: int) -> HmcResult:
    """Hedged Monte-Carlo call prices ``C_0(S0)`` for several strikes, maturity ``T`` days."""
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    T = int(T)
    if T < 1 or T >= job.paths.shape[1]:
        raise ValueError(f"maturity {T} outside the snippet length {job.paths.shape[1] - 1}")
    S = job.paths[:, : T + 1]
    w = job.weights / job.weights.sum()
    spot = job.spot
    values = np.maximum(S[:, T, None] - strikes[None, :], 0.0)
    ill = False
    for t in range(T - 1, -1, -1):
        dS = S[:, t + 1] - S[:, t]
        B, H = _slice_basis(S[:, t], w, spot)
        A = np.hstack([B, H * dS[:, None]])
        Aw = A * w[:, None]
        G = A.T @ Aw
        # ridge on the hedge block only, so a vanishing hedge term (flat
        # paths) does not bias the value coefficients
        nb = B.shape[1]
        scale = np.trace(G) / len(G)
        if scale <= 0:
            scale = 1.0
        idx = np.arange(nb, len(G))
        G[idx, idx] += _RIDGE * scale
        if np.linalg.cond(G) > 1e14:
            ill = True
            G[np.diag_indices_from(G)] += _RIDGE * scale
        coef = np.linalg.solve(G, Aw.T @ values)
        values = B @ coef[:nb]
    if ill:
        warnings.warn("hedged Monte-Carlo normal equations were ill-conditioned; ridge-regularized")
    # every path starts at spot, so the fitted value is the same on all of them
    prices = np.average(values, axis=0, weights=w)
    return HmcResult(strikes, prices, ill)


def hmc_price(job: PricingJob, K: float, T: int) -> float:
    return float(hmc(job, [K], T).prices[0])


def snippets_from_futures(futures: np.ndarray, spot: float = S0) -> np.ndarray:
    """Log-price futures ``(k, F + 1)`` to price snippets starting at ``spot``."""
    futures = np.asarray(futures, dtype=float)
    return spot * np.exp(futures - futures[:, :1])


def _json_list(a):
    """Nested list with NaN as None, so the output stays valid JSON."""
    a = np.asarray(a, dtype=float)
    return np.where(np.isfinite(a), a, None).tolist()


@dataclass
class SmileSurface:
    """Implied volatilities on a (maturity, rescaled moneyness) grid.

    ``strikes[i]`` and ``iv[i]`` belong to maturity ``maturities[i]`` (days);
    ``moneyness`` is ``ln(K / S0) / (atm_vol sqrt(T))`` with T in years.
    """

    maturities: np.ndarray
    moneyness: np.ndarray
    strikes: np.ndarray
    iv: np.ndarray
    atm_vol: np.ndarray
    prices: np.ndarray | None = None
    date: object = None

    def rows(self):
        for i, T in enumerate(self.maturities):
            for j, m in enumerate(self.moneyness):
                yield self.date, int(T), float(self.strikes[i, j]), float(m), float(self.iv[i, j])

    def to_csv(self, path, append: bool = False) -> None:
        with open(path, "a" if append else "w", newline="") as f:
            w = csv.writer(f)
            if not append:
                w.writerow(["date", "T", "K", "M", "iv"])
            for row in self.rows():
                w.writerow(row)

    def to_dict(self) -> dict:
        return {
            "date": self.date,
            "maturities": self.maturities.tolist(),
            "moneyness": self.moneyness.tolist(),
            "strikes": _json_list(self.strikes),
            "iv": _json_list(self.iv),
            "atm_vol": _json_list(self.atm_vol),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)


def _safe_iv(price, K, T_years):
    try:
        return implied_vol(price, S0, K, T_years)
    except ValueError:
        return np.nan


def smile_from_ensemble(
    job: PricingJob,
    T_list,
    moneyness,
    date=None,
    atm_vols=None,
) -> SmileSurface:
    """Smile on a constant-rescaled-moneyness grid.

    The ATM implied vol is computed first, then strikes are placed at
    ``K = S0 exp(M sigma_ATM sqrt(T))``. Passing ``atm_vols`` anchors the grid
    on given ATM vols instead (one per maturity).
    """
    if abs(job.spot - S0) > 1e-9 * S0:
        raise ValueError(f"snippets must start at {S0}")
    T_list = np.asarray(T_list, dtype=int)
    moneyness = np.asarray(moneyness, dtype=float)
    strikes = np.empty((len(T_list), len(moneyness)))
    iv = np.empty_like(strikes)
    prices = np.empty_like(strikes)
    atm = np.empty(len(T_list))
    for i, T in enumerate(T_list):
        Ty = T / DAYS_PER_YEAR
        own_atm = _safe_iv(hmc_price(job, S0, T), S0, Ty)
        atm[i] = own_atm if atm_vols is None else atm_vols[i]
        strikes[i] = S0 * np.exp(moneyness * atm[i] * np.sqrt(Ty))
        prices[i] = hmc(job, strikes[i], T).prices
        iv[i] = [_safe_iv(p, K, Ty) for p, K in zip(prices[i], strikes[i])]
    return SmileSurface(T_list, moneyness, strikes, iv, atm, prices, date)


def average_smile(log_paths, T_list, moneyness, snippet_length: int | None = None, stride: int = 1) -> SmileSurface:
    """Unconditional smile from overlapping snippets of log-price paths, uniform weights."""
    log_paths = np.atleast_2d(np.asarray(log_paths, dtype=float))
    L = int(max(T_list)) if snippet_length is None else snippet_length
    starts = np.arange(0, log_paths.shape[1] - L, stride)
    snips = np.concatenate([log_paths[:, s : s + L + 1] for s in starts])
    return smile_from_ensemble(PricingJob(snippets_from_futures(snips)), T_list, moneyness)


def ps_hmc_smile(dataset, past, T_list, moneyness, config=None, k: int = 50_000, threads: int = 1) -> SmileSurface:
    """Past-conditioned smile: HMC on the shadowing futures with their weights."""
    from .embedding import EmbeddingConfig
    from .shadow import shadow_set_for_past

    config = EmbeddingConfig() if config is None else config
    if max(T_list) > dataset.window.future_length:
        raise ValueError("maturity exceeds the window future length")
    shadow = shadow_set_for_past(dataset, past, k, config, threads)
    job = PricingJob(snippets_from_futures(shadow.futures), shadow.weights)
    return smile_from_ensemble(job, T_list, moneyness)


def smile_metrics(surface: SmileSurface, window: float = 1.0, weights=None) -> dict:
    """ATM vol, slope, curvature and skew per maturity.

    Fits ``sigma / sigma_ATM - 1 = S M + kappa M**2`` by (weighted) least
    squares over ``|M| <= window``; ``Skew_T = S_T / sqrt(T)`` with T in years.
    """
    M = surface.moneyness
    sel = np.abs(M) <= window + 1e-12
    out = {"T": surface.maturities.copy(), "atm_vol": surface.atm_vol.copy()}
    slope, curv = np.empty(len(surface.maturities)), np.empty(len(surface.maturities))
    for i in range(len(surface.maturities)):
        ok = sel & np.isfinite(surface.iv[i])
        if ok.sum() < 3 or len(np.unique(M[ok])) < 3:
            raise ValueError("need at least 3 distinct strikes with |M| <= window")
        A = np.column_stack([M[ok], M[ok] ** 2])
        y = surface.iv[i, ok] / surface.atm_vol[i] - 1
        if weights is not None:
            sw = np.sqrt(np.asarray(weights, dtype=float)[ok])
            A, y = A * sw[:, None], y * sw
        (slope[i], curv[i]), *_ = np.linalg.lstsq(A, y, rcond=None)
    out["slope"] = slope
    out["curvature"] = curv
    out["skew"] = slope / np.sqrt(_years(surface.maturities))
    return out


@dataclass
class SkewStickinessReport:
    maturities: np.ndarray
    ratio: np.ndarray
    n_dates: int = 0
    extra: dict = field(default_factory=dict)


def skew_stickiness(atm_vols, skews, dx, maturities=None) -> SkewStickinessReport:
    """Skew-stickiness ratio per maturity.

    ``atm_vols`` and ``skews`` are ``(n_dates, n_T)``; ``dx[d]`` is the log
    return from date ``d`` to ``d + 1``. Regresses (no intercept)
    ``sigma_ATM(d + 1) - sigma_ATM(d)`` on ``-Skew(d) * dx[d]``.
    """
    atm = np.asarray(atm_vols, dtype=float)
    sk = np.asarray(skews, dtype=float)
    dx = np.asarray(dx, dtype=float)
    if atm.ndim == 1:
        atm, sk = atm[:, None], sk[:, None]
    n = atm.shape[0] - 1
    if n < 30:
        raise ValueError("need at least 30 date pairs")
    dx = dx[:n]
    ratios = np.empty(atm.shape[1])
    for i in range(atm.shape[1]):
        reg = -sk[:n, i] * dx
        if not np.any(reg != 0):
            raise ValueError("degenerate regressor (zero skew or zero returns)")
        ratios[i] = np.dot(reg, np.diff(atm[:, i])) / np.dot(reg, reg)
    T = np.arange(atm.shape[1]) if maturities is None else np.asarray(maturities)
    return SkewStickinessReport(T, ratios, n)
