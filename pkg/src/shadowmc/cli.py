"""Command-line interface.

Subcommands: spectra, generate, predict-vol, price-smile, trade-game,
calibrate. All randomness comes from the config seed (``--seed`` overrides
it), so identical invocations give identical outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .config import load_config
from .dataset import load_dataset
from .embedding import EmbeddingConfig
from .game import load_quotes, model_vs_model_game, run_game
from .options import _json_list, average_smile, ps_hmc_smile, smile_metrics
from .paths import load_prices
from .pdv import PdvBetas, pdv_calibrate_regression, pdv_calibrate_spectra, pdv_predict_vol
from .spectra import compute_spectra, load_spectra, normalized_spectra, save_spectra
from .synthesis import generate_dataset
from .volatility import ForecastReport, calibrate_embedding, predict_benchmark, predict_ps_mc, realized_variance
from .wavelets import build_filter_bank

log = logging.getLogger("shadowmc")


def _embedding(args, cfg) -> EmbeddingConfig:
    emb = cfg.embedding
    overrides = {k: getattr(args, k) for k in ("alpha", "beta", "eta_hat") if getattr(args, k, None) is not None}
    return replace(emb, **overrides) if overrides else emb


def _date_range(path, args, lo: int, hi: int) -> list[int]:
    """Indices in [lo, hi] restricted to --start/--end (ISO labels) and --every."""
    start = path.index_of(args.start) if args.start else lo
    end = path.index_of(args.end) if args.end else hi
    return list(range(max(start, lo), min(end, hi) + 1, args.every))


def cmd_spectra(args, cfg) -> int:
    prices = load_prices(args.input)
    J = args.J if args.J is not None else cfg.J
    spectra = compute_spectra if args.raw else normalized_spectra
    phi = spectra(prices.x, build_filter_bank(len(prices), J))
    save_spectra(phi, args.out)
    log.info("wrote %d statistics to %s", len(phi.values), args.out)
    return 0


def cmd_generate(args, cfg) -> int:
    if args.target:
        target = load_spectra(args.target)
    else:
        prices = load_prices(args.input)
        J = args.J if args.J is not None else cfg.J
        target = normalized_spectra(prices.x, build_filter_bank(len(prices), J))
    N = args.N
    ds = generate_dataset(target, args.count, N, cfg.synthesis, out_path=args.out, workers=args.threads)
    log.info("%d/%d paths converged; written to %s", int(ds.converged.sum()), ds.count, args.out)
    return 0


def cmd_predict_vol(args, cfg) -> int:
    prices = load_prices(args.input)
    x = prices.x
    T_list = args.T or cfg["vol_horizons"]
    emb = _embedding(args, cfg)
    window = replace(cfg.window, future_length=max(cfg.window.future_length, max(T_list)))
    methods = args.method
    ds = load_dataset(args.dataset, window=window) if "ps-mc" in methods else None
    k = args.k or cfg["k"]
    if ds is not None:
        k = min(k, ds.num_windows)
    Tmax = max(T_list)
    lo = max(emb.horizon, Tmax, ds.window.past_length if ds is not None else 0)
    dates = _date_range(prices, args, lo, len(x) - 1 - Tmax)
    report = ForecastReport()
    for t in dates:
        realized = {T: realized_variance(x, t, T) for T in T_list}
        label = prices.labels[t] if prices.labels else t
        if ds is not None:
            pred = predict_ps_mc(ds, x[t - ds.window.past_length : t + 1], T_list, emb, k, args.threads)
            for T, p in zip(T_list, pred):
                report.add(label, T, "ps-mc", p, realized[T])
        if "benchmark" in methods:
            for T in T_list:
                report.add(label, T, "benchmark", predict_benchmark(x, t, T), realized[T])
        if "pdv" in methods:
            for T in T_list:
                report.add(label, T, "pdv", pdv_predict_vol(x, cfg.kernels, cfg.betas(T), t, T), realized[T])
    report.to_csv(args.out)
    if len(dates) >= 2:
        for (m, T), r2 in report.r2_table().items():
            print(f"{m:10s} T={T:4d}  R2(var)={r2['variance']:.4f}  R2(vol)={r2['volatility']:.4f}")
    return 0


def cmd_price_smile(args, cfg) -> int:
    T_list = args.T or cfg["option_maturities"]
    M = np.asarray(args.moneyness or cfg["moneyness"], dtype=float)
    if args.average:
        prices = load_prices(args.input)
        surface = average_smile(prices.x, T_list, M, stride=args.every)
        surfaces = [surface]
    else:
        prices = load_prices(args.input)
        window = replace(cfg.window, future_length=max(cfg.window.future_length, max(T_list)))
        ds = load_dataset(args.dataset, window=window)
        emb = _embedding(args, cfg)
        k = min(args.k or cfg["k"], ds.num_windows)
        P = ds.window.past_length
        dates = _date_range(prices, args, P, len(prices) - 1)
        surfaces = []
        for t in dates:
            s = ps_hmc_smile(ds, prices.x[t - P : t + 1], T_list, M, emb, k, args.threads)
            s.date = prices.labels[t] if prices.labels else t
            surfaces.append(s)
    for i, s in enumerate(surfaces):
        s.to_csv(args.out, append=i > 0)
    if args.json:
        with open(args.json, "w") as f:
            payload = []
            for s in surfaces:
                d = s.to_dict()
                try:
                    d["metrics"] = {k: _json_list(v) for k, v in smile_metrics(s).items()}
                except ValueError as e:
                    log.warning("no smile metrics for %s: %s", s.date, e)
                    d["metrics"] = None
                payload.append(d)
            json.dump(payload, f, indent=1)
    return 0


def cmd_trade_game(args, cfg) -> int:
    prices = load_prices(args.input)
    model, cp = load_quotes(args.model), load_quotes(args.counterparty)
    T_list = args.T or cfg["option_maturities"]
    M = args.moneyness or cfg["moneyness"]
    index = {label: i for i, label in enumerate(prices.labels)}
    dates = sorted((d for d in model.dates() if d in index), key=index.get)
    anchor = args.anchor or cfg["strike_anchor"]
    kw = dict(anchor=anchor, hedge_vol=cfg["hedge_vol"], dates_index=index)
    if args.model_vs_model:
        ledger, other = model_vs_model_game(model, cp, prices.x, dates, T_list, M, **kw)
    else:
        ledger = run_game(model, cp, prices.x, dates, T_list, M, **kw)
    ledger.to_csv(args.out)
    if args.json:
        ledger.to_json(args.json)
    print(f"{len(ledger.trades)} trades, mean P&L {ledger.grand_mean():.6f}, skipped {ledger.skipped}")
    if args.model_vs_model:
        stem = os.path.splitext(args.out)[0]
        other.to_csv(stem + ".counterparty.csv")
        print(f"counterparty mean P&L {other.grand_mean():.6f} ({stem}.counterparty.csv)")
    return 0


def cmd_calibrate(args, cfg) -> int:
    out = {}
    if args.what == "embedding":
        ds = load_dataset(args.dataset, window=cfg.window)
        grid = [
            EmbeddingConfig(a, b, e, cfg.embedding.horizon)
            for a in (args.alpha_grid or [cfg.embedding.alpha])
            for b in (args.beta_grid or [cfg.embedding.beta])
            for e in (args.eta_grid or [cfg.embedding.eta_hat])
        ]
        T_list = args.T or cfg["vol_horizons"]
        best, scores = calibrate_embedding(
            ds, grid, T_list, args.snippets, min(args.k or cfg["k"], ds.num_windows), cfg.seed, args.threads
        )
        out = {
            "best": {"alpha": best.alpha, "beta": best.beta, "eta_hat": best.eta_hat},
            "grid": [{"alpha": g.alpha, "beta": g.beta, "eta_hat": g.eta_hat, "r2": s} for g, s in zip(grid, scores)],
        }
    elif args.what == "pdv-regression":
        prices = load_prices(args.input)
        T_list = args.T or cfg["vol_horizons"]
        out = {
            str(T): pdv_calibrate_regression(prices.x, cfg.kernels, T, burn_in=cfg["pdv"]["burn_in"]).betas.as_array().tolist()
            for T in T_list
        }
    else:
        target = load_spectra(args.target)
        grid = [
            PdvBetas(b0, b1, b2)
            for b0 in args.beta0_grid
            for b1 in args.beta1_grid
            for b2 in args.beta2_grid
        ]
        best, dists = pdv_calibrate_spectra(cfg.kernels, grid, target, args.N, seed=cfg.seed, burn_in=cfg["pdv"]["burn_in"])
        out = {"best": best.as_array().tolist(), "distances": [None if not np.isfinite(d) else d for d in dists]}
    with open(args.out, "w") as f:
        json.dump(out, f, indent=2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="maximum worker count")
    common.add_argument("-v", "--verbose", action="store_true")

    scan = argparse.ArgumentParser(add_help=False)
    scan.add_argument("--k", type=int, help="number of shadowing windows")
    scan.add_argument("--alpha", type=float)
    scan.add_argument("--beta", type=float)
    scan.add_argument("--eta-hat", dest="eta_hat", type=float)

    dates = argparse.ArgumentParser(add_help=False)
    dates.add_argument("--start", help="first date (ISO, must be in the price file)")
    dates.add_argument("--end", help="last date (ISO)")
    dates.add_argument("--every", type=int, default=1, help="date stride")

    p = argparse.ArgumentParser(prog="shadowmc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectra", parents=[common], help="compute Scattering Spectra of a price file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--J", type=int)
    s.add_argument("--raw", action="store_true", help="do not normalize increments to unit variance")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_spectra)

    s = sub.add_parser("generate", parents=[common], help="synthesize a path dataset")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--target", help="spectra JSON")
    src.add_argument("--in", dest="input", help="price CSV to take the target spectra from")
    s.add_argument("--J", type=int)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("predict-vol", parents=[common, scan, dates], help="forecast realized variance")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--dataset")
    s.add_argument("--T", type=int, nargs="+")
    s.add_argument("--method", nargs="+", choices=["ps-mc", "benchmark", "pdv"], default=["ps-mc", "benchmark"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict_vol)

    s = sub.add_parser("price-smile", parents=[common, scan, dates], help="PS-HMC or average smiles")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--dataset")
    s.add_argument("--average", action="store_true", help="unconditional smile of the price file")
    s.add_argument("--T", type=int, nargs="+")
    s.add_argument("--moneyness", type=float, nargs="+")
    s.add_argument("--out", required=True)
    s.add_argument("--json")
    s.set_defaults(func=cmd_price_smile)

    s = sub.add_parser("trade-game", parents=[common], help="play model smiles against a counterparty")
    s.add_argument("--in", dest="input", required=True, help="underlying price CSV")
    s.add_argument("--model", required=True, help="model smiles CSV (date,T,K,iv)")
    s.add_argument("--counterparty", required=True, help="quotes CSV (date,T,K,mid_iv|mid_price|iv)")
    s.add_argument("--model-vs-model", action="store_true")
    s.add_argument("--anchor", choices=["model", "counterparty"])
    s.add_argument("--T", type=int, nargs="+")
    s.add_argument("--moneyness", type=float, nargs="+")
    s.add_argument("--out", required=True)
    s.add_argument("--json")
    s.set_defaults(func=cmd_trade_game)

    s = sub.add_parser("calibrate", parents=[common], help="calibrate embedding or PDV parameters")
    s.add_argument("what", choices=["embedding", "pdv-regression", "pdv-spectra"])
    s.add_argument("--dataset")
    s.add_argument("--in", dest="input")
    s.add_argument("--target")
    s.add_argument("--N", type=int, default=1024)
    s.add_argument("--T", type=int, nargs="+")
    s.add_argument("--k", type=int)
    s.add_argument("--snippets", type=int, default=1100)
    s.add_argument("--alpha-grid", type=float, nargs="+")
    s.add_argument("--beta-grid", type=float, nargs="+")
    s.add_argument("--eta-grid", type=float, nargs="+")
    s.add_argument("--beta0-grid", type=float, nargs="+", default=[0.05])
    s.add_argument("--beta1-grid", type=float, nargs="+", default=[-0.13])
    s.add_argument("--beta2-grid", type=float, nargs="+", default=[0.56])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.raw["seed"] = args.seed
        return args.func(args, cfg)
    except (OSError, ValueError, KeyError) as e:
        print(f"shadowmc {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
