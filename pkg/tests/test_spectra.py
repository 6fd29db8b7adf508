import json

import numpy as np
import pytest

from oracles import brute_force_spectra
from shadowmc.spectra import (
    COMPONENTS,
    DegenerateInputError,
    ScatteringSpectra,
    _forward,
    compute_spectra,
    gaussian_reference,
    load_spectra,
    normalized_spectra,
    perturb_spectra,
    save_spectra,
    spectra_distance,
    spectra_index,
)
from shadowmc.wavelets import build_filter_bank


def walk(rng, N):
    return np.cumsum(rng.standard_normal(N))


def test_index_counts_and_constraints():
    idx = spectra_index(5)
    c = idx.counts()
    assert c == {"phi1": 5, "phi2": 5, "phi3": 15, "phi4": 20, "sign": 5}
    assert len(set(idx.entries)) == len(idx)
    assert all(j >= jp for j, jp in idx.scales("phi3"))
    assert all(a <= b < c for a, b, c in idx.scales("phi4"))


def test_matches_brute_force_oracle(rng):
    bank = build_filter_bank(64, 3)
    x = walk(rng, 64)
    got = compute_spectra(x, bank).values
    ref = brute_force_spectra(x, bank)
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-10


def test_invariant_ranges(rng):
    phi = compute_spectra(walk(rng, 1024), J=7)
    assert np.all((phi["phi1"].real > 0) & (phi["phi1"].real <= 1))
    assert np.all(phi["phi2"].real >= 0)
    assert np.all((phi["sign"].real > 0) & (phi["sign"].real < 1))
    assert np.all(np.abs(phi["phi3"]) <= 1 + 1e-12)
    assert np.all(np.abs(phi["phi4"]) <= 1 + 1e-12)
    for kind in ("phi1", "phi2", "sign"):
        assert np.all(phi[kind].imag == 0)


def test_diagonal_phi4_is_real_positive(rng):
    phi = compute_spectra(walk(rng, 512), J=6)
    sc = phi.index.scales("phi4")
    diag = phi["phi4"][sc[:, 0] == sc[:, 1]]
    assert np.all(diag.real > 0)
    assert np.max(np.abs(diag.imag)) < 1e-12


def test_constant_input_is_degenerate():
    with pytest.raises(DegenerateInputError):
        compute_spectra(np.ones(256), J=4)


def test_scaling_covariance(rng):
    x = walk(rng, 1024)
    a, b = compute_spectra(x, J=7), compute_spectra(3.5 * x, J=7)
    assert np.allclose(b["phi2"], 3.5**2 * a["phi2"], rtol=1e-12)
    for kind in ("phi1", "phi3", "phi4"):
        assert np.allclose(b[kind], a[kind], rtol=1e-10, atol=1e-13)


def test_negation_flips_phi3(rng):
    x = walk(rng, 1024)
    a, b = compute_spectra(x, J=7), compute_spectra(-x, J=7)
    assert np.allclose(b["phi3"], -a["phi3"], rtol=1e-12, atol=1e-15)
    for kind in ("phi1", "phi2", "phi4"):
        assert np.allclose(b[kind], a[kind], rtol=1e-12, atol=1e-15)


def test_constant_modulus_kills_phi4_numerator():
    # a single grid frequency gives |W_j x| constant in time for every j
    N = 1024
    t = np.arange(N)
    x = np.cos(2 * np.pi * 40 * (t - (N - 1) / 2) / N)
    _, fw = _forward(x, build_filter_bank(N, 6))
    assert np.max(np.abs(fw.num4)) < 1e-10 * np.max(fw.P)


def test_time_reversal_imaginary_parts_vanish():
    rng = np.random.default_rng(7)
    bank = build_filter_bank(1024, 5)
    ims = np.array([compute_spectra(walk(rng, 1024), bank)["phi3"].imag for _ in range(50)])
    se = ims.std(axis=0, ddof=1) / np.sqrt(len(ims))
    assert np.all(np.abs(ims.mean(axis=0)) < 3 * se)


def test_distance_examples(rng):
    a = compute_spectra(walk(rng, 256), J=4)
    assert spectra_distance(a, a) == 0
    v = a.values.copy()
    v[3] += 0.25
    assert spectra_distance(a, ScatteringSpectra(a.index, v)) == pytest.approx(0.25, rel=1e-12)
    b = ScatteringSpectra(a.index, a.values + (rng.standard_normal(len(v)) + 1j * rng.standard_normal(len(v))))
    d = b.values - a.values
    assert spectra_distance(a, b) == pytest.approx(np.sqrt(sum(z.real**2 + z.imag**2 for z in d)), rel=1e-12)
    with pytest.raises(ValueError):
        spectra_distance(a, compute_spectra(walk(rng, 256), J=5))


def test_perturbation_examples(rng):
    bank = build_filter_bank(512, 5)
    target = compute_spectra(walk(rng, 512), bank)
    ref = gaussian_reference(target, bank, n_realizations=4)
    for comp in COMPONENTS:
        out = perturb_spectra(target, ref, comp, 1.0)
        assert np.allclose(out.values, target.values, rtol=0, atol=1e-15)
    assert np.all(perturb_spectra(target, ref, "phi3_modulus", 0.0)["phi3"] == 0)
    assert np.allclose(perturb_spectra(target, ref, "phi1", 0.0)["phi1"], np.pi / 4)
    re = perturb_spectra(target, ref, "imaginary_parts", 0.0)
    assert np.all(re.values.imag == 0)
    assert np.allclose(re.values.real, target.values.real)
    only = perturb_spectra(target, ref, "phi1", 0.5)
    keep = ~target.index.mask("phi1")
    assert np.array_equal(only.values[keep], target.values[keep])
    with pytest.raises(ValueError):
        perturb_spectra(target, ref, "phi2", 0.5)
    with pytest.raises(ValueError):
        perturb_spectra(target, ref, "phi1", -1)


def test_json_round_trip(tmp_path, rng):
    phi = normalized_spectra(walk(rng, 512), J=5)
    save_spectra(phi, tmp_path / "phi.json")
    back = load_spectra(tmp_path / "phi.json")
    assert np.array_equal(back.values, phi.values)
    assert back.scale == phi.scale
    doc = json.loads((tmp_path / "phi.json").read_text())
    assert doc["format"] == "scattering-spectra"
    assert doc["entries"][0] == {"kind": "phi1", "scales": [1], "re": phi.values[0].real, "im": 0.0}
    doc["entries"] = doc["entries"][:-1]
    with pytest.raises(ValueError):
        ScatteringSpectra.from_dict(doc)


def test_normalized_spectra_units(rng):
    x = 0.01 * walk(rng, 1024)
    phi = normalized_spectra(x, J=6)
    assert phi.scale == pytest.approx(np.std(np.diff(x)))
    assert np.allclose(phi.values, compute_spectra(x / phi.scale, J=6).values)
