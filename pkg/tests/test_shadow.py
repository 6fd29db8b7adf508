import json

import numpy as np
import pytest

from oracles import ar1_increments
from shadowmc.dataset import PathDataset, WindowSpec
from shadowmc.embedding import EmbeddingConfig, embed
from shadowmc.shadow import (
    ShadowSet,
    WeightedSample,
    estimate,
    gaussian_weights,
    predict_distribution,
    scan,
    scan_reference,
    shadow_set_for_past,
)

SMALL = EmbeddingConfig(horizon=20)
WIN = WindowSpec(past_length=20, future_length=5)


def walk_dataset(rng, count, N, window=WIN):
    return PathDataset.from_paths(np.cumsum(rng.standard_normal((count, N)), axis=1), window)


def assert_same(a: ShadowSet, b: ShadowSet):
    assert np.array_equal(a.path_ids, b.path_ids)
    assert np.array_equal(a.anchors, b.anchors)
    assert np.array_equal(a.distances, b.distances)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.futures, b.futures)


def test_scan_matches_reference(rng):
    ds = walk_dataset(rng, 10, 126)  # 10 * 100 = 1000 windows
    q = embed(np.cumsum(rng.standard_normal(21)), SMALL)
    assert_same(scan(ds, q, 10, SMALL), scan_reference(ds, q, 10, SMALL))


def test_scan_independent_of_threads_and_shards(rng, monkeypatch):
    import shadowmc.shadow as sh

    ds = walk_dataset(rng, 40, 150)
    q = embed(np.cumsum(rng.standard_normal(21)), SMALL)
    ref = scan(ds, q, 50, SMALL)
    monkeypatch.setattr(sh, "_SHARD_BUDGET", 1000)
    for threads in (1, 3):
        assert_same(scan(ds, q, 50, SMALL, threads), ref)


def test_ties_broken_by_path_then_anchor():
    # identical paths give identical distances; order must be (path id, anchor)
    path = np.cumsum(np.random.default_rng(3).standard_normal(60))
    ds = PathDataset.from_paths(np.stack([path, path, path]), WIN)
    q = embed(path[10:31], SMALL)
    s = scan(ds, q, 9, SMALL)
    assert np.all(np.diff(s.distances) >= 0)
    keys = list(zip(s.distances, s.path_ids, s.anchors))
    assert keys == sorted(keys)
    assert s.distances[0] == 0 and list(s.path_ids[:3]) == [0, 1, 2]


def test_exact_copy_ranks_first(rng):
    ds = walk_dataset(rng, 5, 200)
    past = np.asarray(ds.paths[3, 40:61])
    s = shadow_set_for_past(ds, past, 20, SMALL)
    assert (s.path_ids[0], s.anchors[0], s.distances[0]) == (3, 60, 0.0)
    assert s.weights[0] == s.weights.max()
    assert np.array_equal(s.futures[0], ds.paths[3, 60:66])


def test_weight_properties(rng):
    ds = walk_dataset(rng, 20, 200)
    q = embed(np.cumsum(rng.standard_normal(21)), SMALL)
    s = scan(ds, q, 300, SMALL)
    assert abs(s.weights.mean() - 1) < 1e-12
    assert np.all(s.weights > 0)
    assert np.all(np.diff(s.weights) <= 0)
    assert s.eta == pytest.approx(SMALL.eta_hat * q.norm, rel=1e-15)
    one = scan(ds, embed(np.cumsum(rng.standard_normal(21)), SMALL), 1, SMALL)
    assert one.weights.tolist() == [1.0]


def test_gaussian_weights_formula():
    d = np.array([0.1, 0.2, 0.5])
    w = gaussian_weights(d, 0.3)
    raw = np.exp(-(d**2) / (2 * 0.09))
    assert np.allclose(w, 3 * raw / raw.sum(), rtol=1e-14)
    far = gaussian_weights(np.array([100.0, 100.5]), 0.01)
    assert np.all(np.isfinite(far)) and far[0] == pytest.approx(2.0)


def test_scale_invariance(rng):
    ds = walk_dataset(rng, 8, 200)
    past = np.cumsum(rng.standard_normal(21))
    a = shadow_set_for_past(ds, past, 40, SMALL)
    b = shadow_set_for_past(ds.scaled(7.0), 7.0 * past, 40, SMALL)
    assert np.array_equal(a.path_ids, b.path_ids) and np.array_equal(a.anchors, b.anchors)
    assert np.allclose(a.distances / a.eta, b.distances / b.eta, rtol=1e-12)
    assert np.allclose(a.weights, b.weights, rtol=1e-10)


def test_scan_errors(rng):
    ds = walk_dataset(rng, 1, 30)
    q = embed(np.cumsum(rng.standard_normal(21)), SMALL)
    with pytest.raises(ValueError):
        scan(ds, q, 0, SMALL)
    with pytest.raises(ValueError):
        scan(ds, q, 1000, SMALL)
    with pytest.raises(ValueError):
        scan(ds, q, 1, EmbeddingConfig(horizon=30))


def _manual_set(weights, futures):
    k = len(weights)
    return ShadowSet(np.arange(k), np.arange(k), np.arange(k, dtype=float), np.asarray(weights, float),
                     np.asarray(futures, float), 1.0)


def test_estimate_examples():
    s = _manual_set([1, 1, 1], [[0, 1], [0, 2], [0, 3]])
    assert estimate(s, lambda f: np.ones(len(f))) == 1
    assert estimate(s, lambda f: f[:, 1]) == pytest.approx(2.0)
    s = _manual_set([2, 0], [[0, 5.0], [0, -3.0]])
    assert estimate(s, lambda f: f[:, 1] - f[:, 0]) == 5.0
    with pytest.raises(ValueError):
        estimate(s, lambda f: f)


def test_predict_distribution_examples(rng):
    single = predict_distribution(_manual_set([1], [[0, 4.0]]), lambda f: f[:, 1])
    assert single.median() == 4.0 and single.quantile(0.01) == 4.0 and single.quantile(1.0) == 4.0
    assert WeightedSample(np.array([3.0, 1.0, 2.0]), np.ones(3)).median() == 2.0
    v, w = rng.standard_normal(1000), rng.random(1000)
    order = np.argsort(v)
    cw = np.cumsum(w[order]) / w.sum()
    ref = v[order][np.argmax(cw >= 0.5)]
    assert WeightedSample(v, w).quantile(0.5) == ref
    assert WeightedSample(v, w).mean() == pytest.approx(np.average(v, weights=w))
    hist, _ = WeightedSample(v, w).histogram(10)
    assert hist.sum() == pytest.approx(1.0)


def test_shadow_set_json(tmp_path, rng):
    ds = walk_dataset(rng, 3, 100)
    s = scan(ds, embed(np.cumsum(rng.standard_normal(21)), SMALL), 5, SMALL)
    s.to_json(tmp_path / "s.json", include_futures=True)
    d = json.loads((tmp_path / "s.json").read_text())
    assert d["path_ids"] == s.path_ids.tolist() and len(d["futures"]) == 5


def test_ar1_conditional_mean_small_scale():
    rng = np.random.default_rng(0)
    rho = 0.5
    ds = PathDataset.from_paths(ar1_increments(200, 520, rho, rng), WindowSpec(20, 1))
    test = ar1_increments(100, 22, rho, rng)
    est, truth = [], []
    for path in test:
        s = shadow_set_for_past(ds, path[:21], 500, SMALL)
        est.append(estimate(s, lambda f: f[:, 1] - f[:, 0]))
        truth.append(rho * (path[20] - path[19]))
    est, truth = np.array(est), np.array(truth)
    # clearly informative: tracks the conditional mean far better than predicting 0
    assert np.corrcoef(est, truth)[0, 1] > 0.5
