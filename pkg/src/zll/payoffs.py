"""Closed-form payoff and PnL functions, plus the liquidating-loan comparator.

The scalar functions broadcast over numpy arrays so a whole s_t grid can be
evaluated at once (that is how the CLI emits plot-ready CSVs).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import DomainError, PriceSeries, _require

Numeric = Union[float, np.ndarray]


def borrower_pnl(s_t: Numeric, strike: float, cash_received: float, s_0: float) -> Numeric:
    """Borrower PnL per unit of pledged collateral at expiry.

    max(s_t, strike) - strike - (s_0 - cash_received): full upside above the
    strike, downside capped at the initial equity s_0 - cash_received.
    """
    _require(np.all(np.asarray(s_t) >= 0.0), "s_t must be >= 0")
    _require(strike >= 0.0 and cash_received >= 0.0 and s_0 >= 0.0, "inputs must be >= 0")
    return np.maximum(s_t, strike) - strike - (s_0 - cash_received)


def lp_pnl(
    s_t: Numeric, strike: float, cash_out_per_unit: float, share: float, delta_q_c: float
) -> Numeric:
    """Pro-rata liquidity provider PnL on one loan at expiry.

    share * delta_q_c * (min(s_t, strike) - cash_out_per_unit): earns the
    spread strike - cash_out above the strike, bears the collateral downside
    below it, floored at -share * delta_q_c * cash_out.
    """
    _require(0.0 <= share <= 1.0, f"share must lie in [0, 1], got {share}")
    _require(np.all(np.asarray(s_t) >= 0.0), "s_t must be >= 0")
    _require(strike >= 0.0 and cash_out_per_unit >= 0.0 and delta_q_c >= 0.0, "inputs must be >= 0")
    return share * delta_q_c * (np.minimum(s_t, strike) - cash_out_per_unit)


def repayment_value(s_t: Numeric, strike: Numeric) -> Numeric:
    """Value repaid per unit at expiry: min(s_t, strike)."""
    _require(np.all(np.asarray(s_t) >= 0.0), "s_t must be >= 0")
    _require(np.all(np.asarray(strike) >= 0.0), "strike must be >= 0")
    return np.minimum(s_t, strike)


@dataclass(frozen=True)
class LiquidationOutcome:
    final_collateral: float
    fees_paid: float
    payoff: float
    liquidations: int


def liquidating_loan_path_payoff(
    path: Union[PriceSeries, Sequence[float]],
    loan: float,
    ltv_threshold: float,
    penalty: float,
    liquidation_fraction: float,
    collateral: float = 1.0,
) -> LiquidationOutcome:
    """Walk a price path through a margin-call loan and return the outcome.

    At every sample where loan / (collateral * price) >= ltv_threshold, the
    position is partially liquidated: liquidation_fraction of the remaining
    collateral is sold at the sample price, a penalty fee is taken from the
    proceeds, and the net reduces the loan.  Liquidations repeat at the same
    sample until the ratio recovers.  Net proceeds beyond the loan are
    re-invested in collateral at the sample price, so after a full
    liquidation only a residual collateral position remains.

    Payoff is the terminal position value minus the remaining loan; the LTV
    is only checked at sample points.
    """
    prices = path.prices if isinstance(path, PriceSeries) else np.asarray(list(path), dtype=float)
    if len(prices) == 0:
        raise DomainError("price path must be nonempty")
    _require(np.all(prices > 0.0), "path prices must be > 0")
    _require(loan >= 0.0, f"loan must be >= 0, got {loan}")
    _require(0.0 < ltv_threshold <= 1.0, f"ltv_threshold must lie in (0, 1], got {ltv_threshold}")
    _require(0.0 <= penalty <= 1.0, f"penalty must lie in [0, 1], got {penalty}")
    _require(
        0.0 <= liquidation_fraction <= 1.0,
        f"liquidation_fraction must lie in [0, 1], got {liquidation_fraction}",
    )
    _require(collateral > 0.0, f"collateral must be > 0, got {collateral}")

    fees = 0.0
    liquidations = 0
    for price in prices:
        price = float(price)
        while (
            loan > 0.0
            and collateral > 0.0
            and liquidation_fraction > 0.0
            and loan >= ltv_threshold * collateral * price
        ):
            sold = liquidation_fraction * collateral
            proceeds = sold * price
            fee = penalty * proceeds
            net = proceeds - fee
            repay = min(net, loan)
            surplus = net - repay
            collateral -= sold
            loan -= repay
            fees += fee
            liquidations += 1
            if surplus > 0.0:
                collateral += surplus / price
    terminal = float(prices[-1])
    return LiquidationOutcome(
        final_collateral=collateral,
        fees_paid=fees,
        payoff=collateral * terminal - loan,
        liquidations=liquidations,
    )
