import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from shadowmc.cli import main
from shadowmc.config import DEFAULTS, RunConfig, load_config
from shadowmc.paths import LogPricePath, load_prices, write_prices
from shadowmc.pdv import ILLUSTRATIVE_KERNELS, PdvBetas, pdv_simulate

SMALL = {
    "window": {"past_length": 40, "future_length": 30},
    "embedding": {"horizon": 20, "eta_hat": 0.5},
    "vol_horizons": [7, 25],
    "option_maturities": [7, 25],
    "synthesis": {"max_iterations": 200},
    "k": 200,
}


def write_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["date", "close"])
        w.writerows(rows)


def test_two_row_file(tmp_path):
    p = tmp_path / "p.csv"
    write_csv(p, [("2020-01-02", 100), ("2020-01-03", 101)])
    path = load_prices(p)
    assert path.increments[0] == pytest.approx(np.log(1.01), rel=1e-15)
    assert path.labels == ("2020-01-02", "2020-01-03")


def test_random_file_vs_manual_parse(tmp_path, rng):
    closes = 100 * np.exp(np.cumsum(0.01 * rng.standard_normal(10)))
    p = tmp_path / "p.csv"
    write_csv(p, [(f"2021-03-{d + 1:02d}", repr(float(c))) for d, c in enumerate(closes)])
    manual = [float(line.split(",")[1]) for line in open(p).read().splitlines()[1:]]
    assert np.array_equal(load_prices(p).x, np.log(manual))


def test_round_trip(tmp_path, rng):
    orig = LogPricePath(np.cumsum(0.01 * rng.standard_normal(50)) + np.log(100))
    p = tmp_path / "p.csv"
    write_prices(p, orig)
    back = load_prices(p)
    assert np.allclose(back.x, orig.x, rtol=0, atol=1e-13)
    write_prices(tmp_path / "q.csv", back)
    assert open(p).read() == open(tmp_path / "q.csv").read()


@pytest.mark.parametrize(
    "rows",
    [
        [("2020-01-02", 100), ("2020-01-02", 101)],
        [("2020-01-03", 100), ("2020-01-02", 101)],
        [("2020-01-02", 100), ("2020-01-03", 0)],
        [("2020-01-02", 100), ("2020-01-03", -5)],
        [("2020-01-02", 100), ("not-a-date", 101)],
    ],
)
def test_invalid_files(tmp_path, rows):
    p = tmp_path / "p.csv"
    write_csv(p, rows)
    with pytest.raises(ValueError):
        load_prices(p)


def test_config_defaults_and_validation(tmp_path):
    cfg = load_config()
    assert cfg.seed == DEFAULTS["seed"] and cfg.embedding.alpha == 1.15
    assert cfg.betas(7) == PdvBetas(0.050, -0.13, 0.56)
    with pytest.raises(jsonschema.ValidationError):
        RunConfig({"unknown": 1})
    with pytest.raises(jsonschema.ValidationError):
        RunConfig({"embedding": {"alpha": 0.5}})
    with pytest.raises(ValueError):
        RunConfig({"window": {"past_length": 50}})  # horizon 126 > past length
    with pytest.raises(ValueError):
        RunConfig({"window": {"future_length": 20}})
    p = tmp_path / "c.json"
    RunConfig(dict(SMALL)).to_json(p)
    assert load_config(p).window.past_length == 40


def test_unknown_subcommand_and_missing_file(tmp_path):
    r = subprocess.run([sys.executable, "-m", "shadowmc.cli", "frobnicate"], capture_output=True, text=True)
    assert r.returncode != 0 and "usage" in r.stderr
    assert main(["spectra", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o.json")]) == 1


@pytest.fixture(scope="module")
def price_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    x = pdv_simulate(ILLUSTRATIVE_KERNELS, PdvBetas(0.05, -0.13, 0.56), 512, seed=5) + np.log(100)
    write_prices(d / "prices.csv", LogPricePath(x))
    with open(d / "cfg.json", "w") as f:
        json.dump(SMALL, f)
    return d


def test_spectra_cli(price_file):
    out = price_file / "phi.json"
    assert main(["spectra", "--in", str(price_file / "prices.csv"), "--J", "5", "--out", str(out)]) == 0
    d = json.load(open(out))
    assert d["J"] == 5 and d["scale"] > 0 and len(d["entries"]) > 0


def test_generate_then_predict_vol(price_file):
    cfg, prices = str(price_file / "cfg.json"), str(price_file / "prices.csv")
    ds = price_file / "ds.bin"
    assert main(["generate", "--config", cfg, "--in", prices, "--J", "5", "--count", "4", "--N", "256", "--out", str(ds)]) == 0
    out = price_file / "vol.csv"
    argv = ["predict-vol", "--config", cfg, "--in", prices, "--dataset", str(ds), "--every", "50", "--out", str(out)]
    assert main(argv) == 0
    rows = list(csv.DictReader(open(out)))
    assert {r["method"] for r in rows} == {"ps-mc", "benchmark"}
    assert all(np.isfinite(float(r["prediction"])) for r in rows)


def test_determinism(price_file, tmp_path):
    cfg, prices = str(price_file / "cfg.json"), str(price_file / "prices.csv")
    outs = []
    for i in range(2):
        out = tmp_path / f"ds{i}.bin"
        assert main(["generate", "--config", cfg, "--in", prices, "--J", "4", "--count", "2", "--N", "128", "--seed", "3", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
