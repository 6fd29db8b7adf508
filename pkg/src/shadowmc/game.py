"""Delta-hedged option trading game between two smiles.

On each (date, maturity, rescaled moneyness) cell the trading model compares
its implied vol with the counterparty's: it buys the option at the
counterparty price when it finds it cheap and sells it when it finds it rich,
then delta-hedges daily with Black-Scholes deltas at a constant volatility.
Everything is expressed in units where the spot on the trade date is 100 and
the volume is 1, which is the same as trading ``v_t = 100 / S_t`` units.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .options import DAYS_PER_YEAR, S0, bs_delta, bs_price, implied_vol

__all__ = [
    "PnlLedger",
    "QuoteBook",
    "TradeSpec",
    "load_quotes",
    "model_vs_model_game",
    "run_game",
    "trade_pnl",
    "trade_pnl_components",
    "trade_signal",
]

HEDGE_VOL = 0.2
PERIOD_DAYS = 3 * DAYS_PER_YEAR


def trade_signal(sigma_mkt: float, sigma_model: float) -> int | None:
    """+1 (buy) if the counterparty vol is below the model's, -1 if above, None if equal."""
    if not (np.isfinite(sigma_mkt) and np.isfinite(sigma_model)) or sigma_mkt <= 0 or sigma_model <= 0:
        raise ValueError(f"vols must be finite and positive, got {sigma_mkt}, {sigma_model}")
    if sigma_mkt < sigma_model:
        return 1
    if sigma_mkt > sigma_model:
        return -1
    return None


@dataclass(frozen=True)
class TradeSpec:
    t: int
    T: int
    K: float
    epsilon: int
    volume: float = 1.0
    moneyness: float = float("nan")


def _rescaled_prices(x, t: int, T: int) -> np.ndarray:
    x = np.asarray(getattr(x, "x", x), dtype=float)
    if t < 0 or t + T >= len(x):
        raise IndexError(f"underlying does not cover [{t}, {t + T}]")
    seg = x[t : t + T + 1]
    if not np.all(np.isfinite(seg)):
        raise ValueError("gap in the underlying path")
    return S0 * np.exp(seg - seg[0])


def trade_pnl_components(spec: TradeSpec, x, C_mkt: float, hedge_vol: float = HEDGE_VOL) -> tuple[float, float]:
    """(un-hedged P&L, hedge P&L) of one trade."""
    S = _rescaled_prices(x, spec.t, spec.T)
    ev = spec.epsilon * spec.volume
    unhedged = ev * (max(S[-1] - spec.K, 0.0) - C_mkt)
    tau = (spec.T - np.arange(spec.T)) / DAYS_PER_YEAR
    delta = bs_delta(S[:-1], spec.K, tau, hedge_vol)
    hedge = -ev * float(np.sum(delta * np.diff(S)))
    return float(unhedged), hedge


def trade_pnl(spec: TradeSpec, x, C_mkt: float, hedge_vol: float = HEDGE_VOL) -> float:
    u, h = trade_pnl_components(spec, x, C_mkt, hedge_vol)
    return u + h


class QuoteBook:
    """Implied vols per (date, T), interpolated linearly in ln K.

    No extrapolation: strikes outside the quoted range return NaN.
    """

    def __init__(self):
        self._cells: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

    def add(self, date, T: int, strikes, ivs) -> None:
        K = np.asarray(strikes, dtype=float)
        iv = np.asarray(ivs, dtype=float)
        ok = np.isfinite(iv) & (iv > 0)
        order = np.argsort(K[ok])
        self._cells[(date, int(T))] = (np.log(K[ok][order]), iv[ok][order])

    @classmethod
    def from_surfaces(cls, surfaces: dict) -> "QuoteBook":
        book = cls()
        for date, s in surfaces.items():
            for i, T in enumerate(s.maturities):
                book.add(date, T, s.strikes[i], s.iv[i])
        return book

    def __contains__(self, key) -> bool:
        return key in self._cells

    def dates(self) -> list:
        return sorted({d for d, _ in self._cells}, key=str)

    def iv(self, date, T: int, K: float) -> float:
        cell = self._cells.get((date, int(T)))
        if cell is None or len(cell[0]) == 0:
            return float("nan")
        lk, iv = cell
        y = np.log(K)
        if y < lk[0] - 1e-12 or y > lk[-1] + 1e-12:
            return float("nan")
        return float(np.interp(y, lk, iv))

    def atm_vol(self, date, T: int) -> float:
        return self.iv(date, T, S0)


def load_quotes(path) -> QuoteBook:
    """CSV with columns date, T, K and one of mid_iv, iv or mid_price (spot = 100 units).

    ``iv`` is the column written by smile exports, so model smiles load the same way.
    """
    cells = defaultdict(lambda: ([], []))
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            T, K = int(row["T"]), float(row["K"])
            if row.get("mid_iv") not in (None, ""):
                iv = float(row["mid_iv"])
            elif row.get("iv") not in (None, ""):
                iv = float(row["iv"])
            else:
                iv = implied_vol(float(row["mid_price"]), S0, K, T / DAYS_PER_YEAR)
            ks, ivs = cells[(row["date"], T)]
            ks.append(K)
            ivs.append(iv)
    book = QuoteBook()
    for (date, T), (ks, ivs) in cells.items():
        book.add(date, T, ks, ivs)
    return book


@dataclass
class PnlLedger:
    """All trades of a game and their aggregates."""

    trades: list[dict] = field(default_factory=list)
    skipped: int = 0
    no_signal: int = 0

    def pnls(self) -> np.ndarray:
        return np.array([tr["pnl"] for tr in self.trades], dtype=float)

    def aggregates(self) -> dict:
        """Mean, std, win rate and count per (period, T, M)."""
        groups = defaultdict(list)
        for tr in self.trades:
            groups[(tr["period"], tr["T"], tr["M"])].append(tr["pnl"])
        out = {}
        for key, vals in sorted(groups.items()):
            v = np.array(vals)
            out[key] = {
                "mean": float(v.mean()),
                "std": float(v.std(ddof=1)) if len(v) > 1 else 0.0,
                "win_rate": float(np.mean(v > 0)),
                "count": len(v),
            }
        return out

    def grand_mean(self) -> float:
        return float(self.pnls().mean()) if self.trades else 0.0

    def cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        """Dates and cumulative P&L summed over all cells traded on each date."""
        daily = defaultdict(float)
        for tr in self.trades:
            daily[tr["t"]] += tr["pnl"]
        dates = np.array(sorted(daily))
        return dates, np.cumsum([daily[d] for d in dates])

    def to_csv(self, path) -> None:
        cols = ["date", "t", "period", "T", "M", "K", "epsilon", "price", "unhedged", "hedge", "pnl"]
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=cols)
            w.writeheader()
            for tr in self.trades:
                w.writerow({c: tr[c] for c in cols})

    def to_json(self, path) -> None:
        agg = [{"period": p, "T": T, "M": M, **v} for (p, T, M), v in self.aggregates().items()]
        dates, cum = self.cumulative()
        with open(path, "w") as f:
            json.dump(
                {
                    "n_trades": len(self.trades),
                    "skipped": self.skipped,
                    "no_signal": self.no_signal,
                    "grand_mean": self.grand_mean(),
                    "aggregates": agg,
                    "cumulative": {"t": dates.tolist(), "pnl": cum.tolist()},
                },
                f,
                indent=1,
            )


def _date_index(date, dates_index):
    return dates_index[date] if dates_index is not None else int(date)


def run_game(
    model: QuoteBook,
    counterparty: QuoteBook,
    underlying,
    dates,
    T_list,
    moneyness,
    anchor: str = "model",
    hedge_vol: float = HEDGE_VOL,
    dates_index: dict | None = None,
    period_days: int = PERIOD_DAYS,
) -> PnlLedger:
    """Play every (date, T, M) cell; the trading model is ``model``.

    ``dates`` are keys of the quote books; ``dates_index`` maps them to
    positions in ``underlying`` (identity if omitted). Strikes sit at
    ``K = 100 exp(M sigma_ATM sqrt(T))`` with the ATM vol of the model
    (``anchor="model"``) or of the counterparty. Cells with a missing quote
    or a short underlying are skipped and counted.
    """
    if anchor not in ("model", "counterparty"):
        raise ValueError("anchor must be 'model' or 'counterparty'")
    ledger = PnlLedger()
    dates = list(dates)
    if not dates:
        return ledger
    t0 = _date_index(dates[0], dates_index)
    n = len(np.asarray(getattr(underlying, "x", underlying)))
    for date in dates:
        t = _date_index(date, dates_index)
        for T in T_list:
            T = int(T)
            ref = model if anchor == "model" else counterparty
            atm = ref.atm_vol(date, T)
            for M in moneyness:
                if not np.isfinite(atm) or t + T >= n:
                    ledger.skipped += 1
                    continue
                K = S0 * np.exp(M * atm * np.sqrt(T / DAYS_PER_YEAR))
                s_model, s_cp = model.iv(date, T, K), counterparty.iv(date, T, K)
                if not (np.isfinite(s_model) and np.isfinite(s_cp)):
                    ledger.skipped += 1
                    continue
                eps = trade_signal(s_cp, s_model)
                if eps is None:
                    ledger.no_signal += 1
                    continue
                price = float(bs_price(S0, K, T / DAYS_PER_YEAR, s_cp))
                spec = TradeSpec(t, T, K, eps, 1.0, float(M))
                u, h = trade_pnl_components(spec, underlying, price, hedge_vol)
                ledger.trades.append(
                    {
                        "date": date,
                        "t": t,
                        "period": (t - t0) // period_days,
                        "T": T,
                        "M": float(M),
                        "K": K,
                        "epsilon": eps,
                        "price": price,
                        "unhedged": u,
                        "hedge": h,
                        "pnl": u + h,
                    }
                )
    return ledger


def model_vs_model_game(smiles_a: QuoteBook, smiles_b: QuoteBook, underlying, dates, T_list, moneyness, **kw):
    """A trades against B at B's prices; returns (ledger of A, ledger of B).

    B holds the opposite side of every trade and hedges it the same way, so
    its P&L is computed with the opposite signal and is exactly minus A's.
    """
    a = run_game(smiles_a, smiles_b, underlying, dates, T_list, moneyness, **kw)
    b = PnlLedger(skipped=a.skipped, no_signal=a.no_signal)
    for tr in a.trades:
        spec = TradeSpec(tr["t"], tr["T"], tr["K"], -tr["epsilon"], 1.0, tr["M"])
        u, h = trade_pnl_components(spec, underlying, tr["price"], kw.get("hedge_vol", HEDGE_VOL))
        b.trades.append({**tr, "epsilon": -tr["epsilon"], "unhedged": u, "hedge": h, "pnl": u + h})
    return a, b
