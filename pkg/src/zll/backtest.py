"""Historical backtest: arbitrage agents trading the pool over a price path.

At every sample the remaining term, the downside premium, and the marginal
strike are recomputed; whenever a signal is active the aggregated agent
executes the equilibrium-restoring trade.  At the end of the horizon every
open position settles at the terminal spot and the pool's return is compared
with passively holding the initial inventories.

A run is fully deterministic: identical config and price file produce a
bit-identical report.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone

from . import arbitrage, engine
from .core import (
    BORROW,
    LEND,
    DomainError,
    MarketParams,
    PoolState,
    PriceSeries,
    SECONDS_PER_YEAR,
    _require,
)
from .engine import SettlementReport
from .pricing import implied_rate_table, oblivious_put_price

log = logging.getLogger(__name__)

DAY_SECONDS = 86400.0

# Equilibrium trades smaller than this fraction of the pool's collateral are
# treated as noise and skipped.
MIN_TRADE_FRACTION = 1e-12


def _parse_timestamp(value: "float | str") -> float:
    """Epoch seconds from a number or an ISO-8601 UTC string."""
    if isinstance(value, (int, float)):
        return float(value)
    text = value.strip().replace("Z", "+00:00")
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


@dataclass(frozen=True)
class BacktestConfig:
    """One market run: pool bootstrap, price file, horizon, and sampling."""

    params: MarketParams
    initial_q_c: float
    initial_q_b: float
    price_file: str
    start: float
    term_days: int
    sample_interval: float = DAY_SECONDS

    def __post_init__(self) -> None:
        _require(self.term_days > 0, f"term_days must be > 0, got {self.term_days}")
        _require(self.initial_q_c > 0.0, "initial_q_c must be > 0")
        _require(self.initial_q_b > 0.0, "initial_q_b must be > 0")
        _require(self.sample_interval > 0.0, "sample_interval must be > 0")

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "initial_q_c": self.initial_q_c,
            "initial_q_b": self.initial_q_b,
            "price_file": self.price_file,
            "start": self.start,
            "term_days": self.term_days,
            "sample_interval": self.sample_interval,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BacktestConfig":
        return cls(
            params=MarketParams.from_dict(d["params"]),
            initial_q_c=d["initial_q_c"],
            initial_q_b=d["initial_q_b"],
            price_file=d["price_file"],
            start=_parse_timestamp(d["start"]),
            term_days=int(d["term_days"]),
            sample_interval=float(d.get("sample_interval", DAY_SECONDS)),
        )

    @classmethod
    def from_json_file(cls, path: str) -> "BacktestConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


SERIES_FIELDS = (
    "t",
    "spot",
    "marginal_strike",
    "borrow_rate",
    "deposit_rate",
    "q_c",
    "q_b",
    "cumulative_borrow_flow",
    "cumulative_lend_flow",
)


@dataclass(frozen=True)
class SeriesRow:
    """Post-trade market snapshot at one sample; flows are cumulative
    borrow-currency notionals traded by each agent side."""

    t: float
    spot: float
    marginal_strike: float
    borrow_rate: float
    deposit_rate: float
    q_c: float
    q_b: float
    cumulative_borrow_flow: float
    cumulative_lend_flow: float

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in SERIES_FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "SeriesRow":
        return cls(**d)


@dataclass(frozen=True)
class BacktestSummary:
    amm_roi: float
    hold_roi: float
    outperformance: float
    settlement: SettlementReport

    def to_dict(self) -> dict:
        return {
            "amm_roi": self.amm_roi,
            "hold_roi": self.hold_roi,
            "outperformance": self.outperformance,
            "settlement": self.settlement.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BacktestSummary":
        return cls(
            amm_roi=d["amm_roi"],
            hold_roi=d["hold_roi"],
            outperformance=d["outperformance"],
            settlement=SettlementReport.from_dict(d["settlement"]),
        )


@dataclass(frozen=True)
class BacktestReport:
    series: tuple[SeriesRow, ...]
    summary: BacktestSummary

    def to_dict(self) -> dict:
        return {
            "series": [row.to_dict() for row in self.series],
            "summary": self.summary.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BacktestReport":
        return cls(
            series=tuple(SeriesRow.from_dict(r) for r in d["series"]),
            summary=BacktestSummary.from_dict(d["summary"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def load_prices(path: str) -> PriceSeries:
    """Read a `timestamp,price` CSV (ISO-8601 UTC timestamps), sort it, and
    validate positivity and strict ordering.  Malformed rows raise with
    their line number."""
    points: list[tuple[float, float]] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "timestamp"):
                continue
            if len(row) != 2:
                raise DomainError(f"{path}:{lineno}: expected 'timestamp,price', got {row!r}")
            try:
                ts = _parse_timestamp(row[0])
                price = float(row[1])
            except (ValueError, TypeError) as exc:
                raise DomainError(f"{path}:{lineno}: malformed row {row!r}: {exc}") from exc
            if price <= 0.0:
                raise DomainError(f"{path}:{lineno}: nonpositive price {price}")
            points.append((ts, price))
    if not points:
        raise DomainError(f"{path}: no price rows")
    points.sort(key=lambda p: p[0])
    return PriceSeries([p[0] for p in points], [p[1] for p in points])


def _sample_times(start: float, expiry: float, interval: float) -> list[float]:
    times = []
    t = start
    while t < expiry:
        times.append(t)
        t += interval
    times.append(expiry)
    return times


def run_backtest(config: BacktestConfig) -> BacktestReport:
    """Simulate the market over [start, start + term_days] and settle it.

    RoI denominators use the inception inventory value at the starting spot;
    the hold benchmark marks the untouched initial inventories at the
    terminal spot.
    """
    params = config.params
    term_years = config.term_days / 365.0
    if abs(params.term_years - term_years) > 1e-9:
        raise DomainError(
            f"params.term_years={params.term_years} inconsistent with "
            f"term_days={config.term_days} ({term_years})"
        )
    prices = load_prices(config.price_file)
    expiry = config.start + config.term_days * DAY_SECONDS
    if not prices.covers(config.start, expiry):
        raise DomainError(
            f"price series [{prices.timestamps[0]}, {prices.timestamps[-1]}] "
            f"does not cover [{config.start}, {expiry}]"
        )

    pool = PoolState.at_inception(config.initial_q_c, config.initial_q_b)
    spot_0 = prices.as_of(config.start)
    rows: list[SeriesRow] = []
    cum_borrow = 0.0
    cum_lend = 0.0

    for t in _sample_times(config.start, expiry, config.sample_interval):
        pool.now_years = (t - config.start) / SECONDS_PER_YEAR
        tau = max(params.term_years - pool.now_years, 0.0)
        spot = prices.as_of(t)

        traded = _trade_to_equilibrium(pool, params, spot, tau)
        if traded is not None:
            if traded.side == BORROW:
                cum_borrow += traded.delta_q_b
            else:
                cum_lend += traded.delta_q_b

        solvency = engine.check_no_shortfall(pool)
        if not solvency.holds:  # execute() must have prevented this
            raise engine.ShortfallError(solvency.margin)

        x = oblivious_put_price(spot, params, tau)
        k_marginal = engine.marginal_strike(pool)
        rows.append(
            SeriesRow(
                t=t,
                spot=spot,
                marginal_strike=k_marginal,
                borrow_rate=implied_rate_table(x * (1.0 + params.s_ask), k_marginal),
                deposit_rate=implied_rate_table(x * (1.0 - params.s_bid), k_marginal),
                q_c=pool.q_c,
                q_b=pool.q_b,
                cumulative_borrow_flow=cum_borrow,
                cumulative_lend_flow=cum_lend,
            )
        )

    spot_t = prices.as_of(expiry)
    settlement = engine.settle_expiry(pool, spot_t, params)

    value_0 = config.initial_q_c * spot_0 + config.initial_q_b
    value_t = settlement.final_q_c * spot_t + settlement.final_q_b
    hold_t = config.initial_q_c * spot_t + config.initial_q_b
    amm_roi = (value_t - value_0) / value_0
    hold_roi = (hold_t - value_0) / value_0
    return BacktestReport(
        series=tuple(rows),
        summary=BacktestSummary(
            amm_roi=amm_roi,
            hold_roi=hold_roi,
            outperformance=amm_roi - hold_roi,
            settlement=settlement,
        ),
    )


def _trade_to_equilibrium(pool, params, spot, tau):
    """Run the active agent side, if any; returns the executed quote."""
    if arbitrage.borrower_arb_signal(pool, params, spot, tau).active:
        side = BORROW
    elif arbitrage.lender_arb_signal(pool, params, spot, tau).active:
        side = LEND
    else:
        return None
    trade = arbitrage.find_equilibrium_trade(pool, params, spot, tau, side)
    if trade.delta_q_c <= MIN_TRADE_FRACTION * pool.q_c:
        return None
    if trade.constrained:
        log.info(
            "%s trade truncated at feasibility cap: size %g at t=%gy",
            side,
            trade.delta_q_c,
            pool.now_years,
        )
    try:
        if side == BORROW:
            quote = engine.quote_borrow(pool, params, trade.delta_q_c, spot)
        else:
            quote = engine.quote_lend(pool, params, trade.delta_q_c, spot)
        engine.execute(pool, quote)
    except engine.EngineError as exc:
        log.warning("equilibrium %s trade rejected: %s", side, exc)
        return None
    return quote


def write_report_files(report: BacktestReport, out_dir: str) -> tuple[str, str]:
    """Write report.json and a plot-ready series.csv; returns the two paths."""
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "report.json")
    series_path = os.path.join(out_dir, "series.csv")
    with open(report_path, "w", encoding="utf-8") as f:
        f.write(report.to_json())
    with open(series_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SERIES_FIELDS)
        for row in report.series:
            writer.writerow([repr(getattr(row, name)) for name in SERIES_FIELDS])
    return report_path, series_path
