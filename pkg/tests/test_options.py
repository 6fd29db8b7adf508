import numpy as np
import pytest

from shadowmc.options import (
    S0,
    PricingJob,
    SmileSurface,
    average_smile,
    bs_price,
    hmc,
    hmc_price,
    implied_vol,
    smile_from_ensemble,
    smile_metrics,
    skew_stickiness,
    snippets_from_futures,
)
from oracles import gbm_log_paths


def gbm_job(rng, n=20_000, T=30, sigma=0.2):
    return PricingJob(snippets_from_futures(gbm_log_paths(n, T, sigma, rng)))


def test_bs_reference_value():
    assert bs_price(100, 100, 1.0, 0.2) == pytest.approx(7.9656, abs=1e-4)
    assert bs_price(100, 90, 0.0, 0.2) == pytest.approx(10.0)


@pytest.mark.parametrize("K,T,sigma", [(100, 1.0, 0.2), (80, 0.1, 0.5), (130, 2.0, 0.1), (100, 7 / 252, 0.35)])
def test_implied_vol_round_trip(K, T, sigma):
    assert implied_vol(bs_price(100, K, T, sigma), 100, K, T) == pytest.approx(sigma, abs=1e-8)


def test_implied_vol_bounds():
    assert implied_vol(10.0, 100, 90, 0.5) == 0.0
    with pytest.raises(ValueError):
        implied_vol(9.0, 100, 90, 0.5)
    with pytest.raises(ValueError):
        implied_vol(101.0, 100, 90, 0.5)


def test_flat_paths():
    job = PricingJob(np.full((10, 6), S0))
    assert hmc_price(job, 100, 5) == pytest.approx(0.0, abs=1e-10)
    assert hmc_price(job, 90, 5) == pytest.approx(10.0, abs=1e-10)


def test_gbm_atm_matches_black_scholes(rng):
    job = gbm_job(rng)
    assert hmc_price(job, 100, 30) == pytest.approx(bs_price(100, 100, 30 / 252, 0.2), rel=0.01)


def test_weight_conventions(rng):
    paths = snippets_from_futures(gbm_log_paths(200, 10, 0.2, rng))
    w = rng.uniform(0.5, 2, 200)
    a = hmc(PricingJob(paths, w), [95, 100, 105], 10).prices
    b = hmc(PricingJob(paths, 7.3 * w), [95, 100, 105], 10).prices
    assert np.allclose(a, b, rtol=1e-9)
    single = hmc_price(PricingJob(paths[:1]), 97, 10)
    two = hmc_price(PricingJob(paths[:2], np.array([2.0, 0.0])), 97, 10)
    assert two == pytest.approx(single, abs=1e-9)
    assert single == pytest.approx(max(paths[0, -1] - 97, 0), abs=1e-9)


def test_monotone_convex_in_strike(rng):
    job = gbm_job(rng, n=5000, T=20)
    K = np.linspace(85, 115, 13)
    p = hmc(job, K, 20).prices
    assert np.all(np.diff(p) < 0)
    assert np.all(np.diff(p, 2) > -1e-6)


def test_put_call_parity_of_fitted_prices(rng):
    # the hedged fit of (S_T - K) is exactly S_0 - K, so C(K1) - C(K2) stays
    # within the bound K2 - K1 and the zero-strike call recovers the forward
    job = gbm_job(rng, n=5000, T=20)
    p = hmc(job, [1e-8, 95, 105], 20).prices
    assert p[0] == pytest.approx(S0, rel=1e-6)
    assert 0 < p[1] - p[2] < 10


def test_invalid_jobs():
    with pytest.raises(ValueError):
        PricingJob(np.array([[100.0, -1.0]]))
    with pytest.raises(ValueError):
        PricingJob(np.full((2, 3), 100.0), np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        hmc(PricingJob(np.full((2, 3), 100.0)), [100], 3)


def _surface(iv, M, atm=None):
    iv = np.atleast_2d(iv)
    atm = iv[:, np.argmin(np.abs(M))] if atm is None else atm
    return SmileSurface(np.array([7] * len(iv)), M, np.zeros_like(iv), iv, np.asarray(atm, dtype=float))


def test_smile_metrics_quadratic_recovery():
    M = np.linspace(-1, 1, 9)
    iv = 0.2 * (1 + (-0.1) * M + 0.05 * M**2)
    m = smile_metrics(_surface(iv, M))
    assert m["slope"][0] == pytest.approx(-0.1, abs=1e-10)
    assert m["curvature"][0] == pytest.approx(0.05, abs=1e-10)
    assert m["skew"][0] == pytest.approx(-0.1 / np.sqrt(7 / 252), abs=1e-9)
    flat = smile_metrics(_surface(np.full(9, 0.2), M))
    assert abs(flat["slope"][0]) < 1e-12 and abs(flat["curvature"][0]) < 1e-12


def test_smile_metrics_noisy_matches_lstsq(rng):
    M = np.linspace(-1.5, 1.5, 13)
    iv = 0.2 * (1 - 0.2 * M + 0.1 * M**2) + 0.002 * rng.standard_normal(13)
    m = smile_metrics(_surface(iv, M, [0.2]), window=1.0)
    sel = np.abs(M) <= 1.0
    coef, *_ = np.linalg.lstsq(np.column_stack([M[sel], M[sel] ** 2]), iv[sel] / 0.2 - 1, rcond=None)
    assert np.allclose([m["slope"][0], m["curvature"][0]], coef, atol=1e-12)
    with pytest.raises(ValueError):
        smile_metrics(_surface(iv, M, [0.2]), window=0.2)


def test_skew_stickiness_constructed(rng):
    n = 200
    skew = -0.5 + 0.05 * rng.standard_normal(n)
    dx = 0.01 * rng.standard_normal(n)
    atm = np.empty(n)
    atm[0] = 0.2
    for d in range(n - 1):
        atm[d + 1] = atm[d] + 1.5 * (-skew[d] * dx[d])
    assert skew_stickiness(atm, skew, dx).ratio[0] == pytest.approx(1.5, abs=1e-10)
    noise = 0.2 + 0.001 * rng.standard_normal(n)
    r = skew_stickiness(noise, skew, dx).ratio[0]
    reg = -skew[:-1] * dx[:-1]
    assert r == pytest.approx(np.dot(reg, np.diff(noise)) / np.dot(reg, reg), rel=1e-12)
    with pytest.raises(ValueError):
        skew_stickiness(atm[:20], skew[:20], dx[:20])


def test_gbm_conditional_smile_is_flat(rng):
    job = gbm_job(rng, n=20_000, T=25)
    M = np.linspace(-1, 1, 5)
    s = smile_from_ensemble(job, [7, 25], M)
    assert np.all(np.abs(s.iv / 0.2 - 1) < 0.02)
    assert np.allclose(s.strikes[:, 2], S0)


def test_average_smile_gbm(rng):
    x = gbm_log_paths(4, 4000, 0.2, rng)
    s = average_smile(x, [7], np.array([-0.5, 0.0, 0.5]), stride=1)
    assert s.atm_vol[0] == pytest.approx(0.2, rel=0.05)
    d = s.to_dict()
    assert d["maturities"] == [7] and len(d["iv"][0]) == 3
