"""Command-line front door: quoting, table regeneration, payoff grids,
settlement, and backtests.

Exit codes: 0 success, 1 domain/engine error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import backtest as bt
from . import engine, fixtures, payoffs
from .core import BORROW, LEND, DomainError, MarketParams, PoolState

BORROW_SIZES = (1.0, 5.0, 10.0, 20.0)
LEND_CASH_AMOUNTS = (100.0, 500.0, 1000.0, 10000.0, 100000.0)


def _load_params(path: str | None) -> MarketParams | None:
    """Accept a bare MarketParams JSON or a full market fixture."""
    if path is None:
        path = os.environ.get("ZLL_CONFIG")
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as f:
        d = json.load(f)
    if "params" in d:
        return MarketParams.from_dict(d["params"])
    return MarketParams.from_dict(d)


def _load_pool(path: str | None) -> PoolState | None:
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as f:
        d = json.load(f)
    if "pool" in d:
        return PoolState.from_dict(d["pool"])
    return PoolState.from_dict(d)


def _resolve_market(args) -> tuple[MarketParams, PoolState]:
    params = _load_params(args.params)
    pool = _load_pool(args.pool)
    if params is None or pool is None:
        default_params, default_pool, _ = fixtures.load_example_market()
        params = params or default_params
        pool = pool or default_pool
    return params, pool


def _print_quote(quote, params: MarketParams, json_mode: bool) -> None:
    if json_mode:
        print(json.dumps(quote.to_dict()))
        return
    unit = params.borrow_symbol
    print(f"side:            {quote.side}")
    print(f"collateral qty:  {quote.delta_q_c:,.6g} {params.collateral_symbol}")
    print(f"cash leg:        {quote.cash_leg:,.2f} {unit}")
    print(f"repayment:       {quote.delta_q_b:,.2f} {unit}")
    print(f"strike:          {quote.strike:,.2f} {unit}")
    print(f"premium (X):     {quote.oblivious_put:,.2f} {unit}/unit")
    print(f"implied LTV:     {quote.implied_ltv:.1%}")
    print(f"rate X/K:        {quote.implied_rate_table:.1%}")
    print(f"rate X/(K-X):    {quote.implied_rate_eq:.1%}")


def cmd_quote(args) -> int:
    params, pool = _resolve_market(args)
    if args.cash is not None:
        if args.side != LEND:
            raise UsageError("--cash is only meaningful with --side lend")
        quote = engine.solve_lend_for_cash(pool, params, args.cash, args.spot)
    elif args.side == BORROW:
        quote = engine.quote_borrow(pool, params, args.qc, args.spot)
    else:
        quote = engine.quote_lend(pool, params, args.qc, args.spot)
    _print_quote(quote, params, args.json)
    return 0


def _table_rows(params: MarketParams, pool: PoolState, spot: float) -> dict:
    borrow_rows = [
        engine.quote_borrow(pool, params, qc, spot).to_dict() for qc in BORROW_SIZES
    ]
    lend_rows = [
        engine.solve_lend_for_cash(pool, params, cash, spot).to_dict()
        for cash in LEND_CASH_AMOUNTS
    ]
    return {"spot": spot, "borrow": borrow_rows, "lend": lend_rows}


def cmd_tables(args) -> int:
    if args.fixture is not None:
        params, pool, spot = fixtures.load_market_file(args.fixture)
    else:
        params, pool, spot = fixtures.load_example_market()
    tables = _table_rows(params, pool, spot)
    if args.json:
        print(json.dumps(tables))
        return 0
    unit = params.borrow_symbol
    print(f"Borrow terms (spot {spot:,.0f} {unit}):")
    print(f"{'qty':>8} {'cash':>12} {'repayment':>12} {'strike':>10} {'LTV':>7} {'rate X/K':>9}")
    for row in tables["borrow"]:
        print(
            f"{row['delta_q_c']:>8.3f} {row['cash_leg']:>12,.0f} {row['delta_q_b']:>12,.0f} "
            f"{row['strike']:>10,.0f} {row['implied_ltv']:>6.0%} {row['implied_rate_table']:>8.0%}"
        )
    print(f"\nLend terms (spot {spot:,.0f} {unit}):")
    print(f"{'qty':>8} {'cash paid':>12} {'repayment':>12} {'strike':>10} {'LTV':>7} {'rate X/K':>9}")
    for row in tables["lend"]:
        print(
            f"{row['delta_q_c']:>8.3f} {row['cash_leg']:>12,.0f} {row['delta_q_b']:>12,.0f} "
            f"{row['strike']:>10,.0f} {row['implied_ltv']:>6.0%} {row['implied_rate_table']:>8.0%}"
        )
    return 0


def cmd_payoff(args) -> int:
    grid = np.arange(args.smin, args.smax + 0.5 * args.step, args.step)
    if args.figure == "borrower":
        pnl = payoffs.borrower_pnl(grid, args.strike, args.cash, args.s0)
    else:
        pnl = payoffs.lp_pnl(grid, args.strike, args.cash, args.share, args.qty)
    out = sys.stdout if args.out is None else open(args.out, "w", encoding="utf-8")
    try:
        out.write("s_t,pnl\n")
        for s, p in zip(grid, pnl):
            out.write(f"{s:g},{p:g}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_settle(args) -> int:
    params = _load_params(args.params)
    pool = _load_pool(args.pool)
    if params is None or pool is None:
        raise UsageError("settle requires --pool and --params files")
    report = engine.settle_expiry(pool, args.spot, params)
    if args.json:
        print(json.dumps(report.to_dict()))
        return 0
    unit = params.borrow_symbol
    print(f"settled {len(report.flows)} positions at spot {report.spot_at_expiry:,.2f} {unit}")
    for flow in report.flows:
        action = "repaid" if flow.repaid else "collateral kept/delivered"
        print(
            f"  {flow.side:<6} strike {flow.strike:>10,.2f}: {action}; "
            f"holder gets {flow.cash_to_holder:+,.2f} {unit}, "
            f"{flow.collateral_to_holder:+.6g} {params.collateral_symbol}"
        )
    print(f"final pool: {report.final_q_c:.6g} {params.collateral_symbol}, "
          f"{report.final_q_b:,.2f} {unit}")
    return 0


def cmd_backtest(args) -> int:
    config = bt.BacktestConfig.from_json_file(args.config)
    report = bt.run_backtest(config)
    report_path, series_path = bt.write_report_files(report, args.out)
    summary = report.summary
    if args.json:
        print(json.dumps(summary.to_dict()))
    else:
        print(f"wrote {report_path} and {series_path}")
        print(
            f"amm_roi={summary.amm_roi:+.4%} hold_roi={summary.hold_roi:+.4%} "
            f"outperformance={summary.outperformance:+.4%}"
        )
    return 0


class UsageError(Exception):
    """Flag combinations argparse cannot express; reported as exit 2."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zll",
        description="Zero-liquidation loan AMM: quote, reprice, settle, and backtest.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log trade events")
    sub = parser.add_subparsers(dest="command", required=True)

    quote = sub.add_parser("quote", help="price one borrow or lend trade")
    quote.add_argument("--side", choices=(BORROW, LEND), required=True)
    size = quote.add_mutually_exclusive_group(required=True)
    size.add_argument("--qc", type=float, help="trade size in collateral units")
    size.add_argument("--cash", type=float, help="lend size as cash paid")
    quote.add_argument("--spot", type=float, required=True, help="collateral price")
    quote.add_argument("--pool", help="pool state JSON (default: bundled example)")
    quote.add_argument("--params", help="market params JSON (default: bundled example)")
    quote.add_argument("--json", action="store_true")
    quote.set_defaults(func=cmd_quote)

    tables = sub.add_parser("tables", help="regenerate the example quote tables")
    tables.add_argument("--fixture", help="market fixture JSON (default: bundled example)")
    tables.add_argument("--json", action="store_true")
    tables.set_defaults(func=cmd_tables)

    payoff = sub.add_parser("payoff", help="emit an (s_t, pnl) grid as CSV")
    payoff.add_argument("--figure", choices=("borrower", "lp"), required=True)
    payoff.add_argument("--strike", type=float, default=2000.0)
    payoff.add_argument("--cash", type=float, default=1850.0,
                        help="cash received (borrower) / cash out per unit (lp)")
    payoff.add_argument("--s0", type=float, default=4000.0)
    payoff.add_argument("--share", type=float, default=0.5)
    payoff.add_argument("--qty", type=float, default=1.0)
    payoff.add_argument("--smin", type=float, default=0.0)
    payoff.add_argument("--smax", type=float, default=7000.0)
    payoff.add_argument("--step", type=float, default=50.0)
    payoff.add_argument("--out", help="output CSV path (default: stdout)")
    payoff.set_defaults(func=cmd_payoff)

    settle = sub.add_parser("settle", help="settle a pool at expiry")
    settle.add_argument("--pool", required=True, help="pool state JSON with open positions")
    settle.add_argument("--params", required=True, help="market params JSON")
    settle.add_argument("--spot", type=float, required=True, help="spot at expiry")
    settle.add_argument("--json", action="store_true")
    settle.set_defaults(func=cmd_settle)

    run = sub.add_parser("backtest", help="run a historical backtest")
    run.add_argument("config", help="backtest config JSON")
    run.add_argument("--out", default=".", help="directory for report.json / series.csv")
    run.add_argument("--json", action="store_true")
    run.set_defaults(func=cmd_backtest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
        return 2
    except (DomainError, engine.EngineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
