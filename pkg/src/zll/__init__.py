"""Zero-liquidation loan AMM.

A constant-product pool that lends against collateral with no margin calls:
every loan is repayable either in the borrow currency or by surrendering the
collateral.  The package covers quoting and execution (`engine`), the
pricing kernel (`pricing`), arbitrage detection and equilibrium sizing
(`arbitrage`), closed-form payoffs (`payoffs`), and historical backtesting
(`backtest`).
"""

from .core import (
    BORROW,
    LEND,
    DomainError,
    MarketParams,
    OptionQuote,
    PoolState,
    Position,
    PricePoint,
    PriceSeries,
    Quote,
)
from .engine import (
    EngineError,
    NoShortfallResult,
    SettlementReport,
    check_no_shortfall,
    execute,
    marginal_strike,
    quote_borrow,
    quote_lend,
    settle_expiry,
    solve_lend_for_cash,
)
from .arbitrage import (
    ArbSignal,
    EquilibriumTrade,
    borrower_arb_signal,
    find_equilibrium_trade,
    flash_borrow_arb_profit,
    lender_arb_profit,
    lender_arb_signal,
)
from .backtest import BacktestConfig, BacktestReport, load_prices, run_backtest
from .payoffs import borrower_pnl, liquidating_loan_path_payoff, lp_pnl, repayment_value
from .pricing import (
    bs_call,
    bs_put,
    implied_ltv,
    implied_rate_eq,
    implied_rate_table,
    oblivious_put_price,
    option_quote,
)

__version__ = "0.1.0"

__all__ = [
    "BORROW",
    "LEND",
    "ArbSignal",
    "BacktestConfig",
    "BacktestReport",
    "DomainError",
    "EngineError",
    "EquilibriumTrade",
    "MarketParams",
    "NoShortfallResult",
    "OptionQuote",
    "PoolState",
    "Position",
    "PricePoint",
    "PriceSeries",
    "Quote",
    "SettlementReport",
    "borrower_arb_signal",
    "borrower_pnl",
    "bs_call",
    "bs_put",
    "check_no_shortfall",
    "execute",
    "find_equilibrium_trade",
    "flash_borrow_arb_profit",
    "implied_ltv",
    "implied_rate_eq",
    "implied_rate_table",
    "lender_arb_profit",
    "lender_arb_signal",
    "liquidating_loan_path_payoff",
    "load_prices",
    "lp_pnl",
    "marginal_strike",
    "oblivious_put_price",
    "option_quote",
    "quote_borrow",
    "quote_lend",
    "repayment_value",
    "run_backtest",
    "settle_expiry",
    "solve_lend_for_cash",
]
