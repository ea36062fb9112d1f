"""Arbitrage signals against a model option market, and equilibrium sizing.

Both signals compare the time value of the marginal embedded option,
C(K) - S + K evaluated at the marginal strike k / q_c**2, with the
spread-adjusted downside premium the pool charges (borrow side) or credits
(lend side).  Trading moves the marginal strike, so the signal's edge is
monotone in trade size and a bisection finds the size that closes it.

Edges are oriented so that active == (edge > 0) on both sides:
borrower edge = (C - S + K) - X*(1+s_ask), lender edge = X*(1-s_bid) - (C - S + K).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import engine
from .core import BORROW, LEND, MarketParams, PoolState, _require
from .pricing import bs_call, oblivious_put_price

# Bisection controls for equilibrium sizing.
MAX_ITERATIONS = 200
EDGE_TOL_PER_SPOT = 1e-6
SIZE_TOL_PER_QC = 1e-9

# Keep the solvency margin strictly positive when sizing up to the cap.
_CAP_SAFETY = 1.0 - 1e-9


class SignalInactiveError(engine.EngineError):
    """Equilibrium sizing requested while the corresponding signal is off."""


@dataclass(frozen=True)
class ArbSignal:
    active: bool
    edge: float


@dataclass(frozen=True)
class EquilibriumTrade:
    side: str
    delta_q_c: float
    constrained: bool


def _marginal_time_value(pool_k: float, q_c: float, params: MarketParams, spot: float, tau: float) -> float:
    strike = pool_k / (q_c * q_c)
    return bs_call(spot, strike, params.sigma, tau) - spot + strike


def borrower_arb_signal(pool: PoolState, params: MarketParams, spot: float, tau: float) -> ArbSignal:
    """Borrowing is profitable when the marginal option's time value exceeds
    the ask-side premium: C(K) - S + K > X * (1 + s_ask)."""
    lhs = _marginal_time_value(pool.k, pool.q_c, params, spot, tau)
    threshold = oblivious_put_price(spot, params, tau) * (1.0 + params.s_ask)
    edge = lhs - threshold
    return ArbSignal(active=edge > 0.0, edge=edge)


def lender_arb_signal(pool: PoolState, params: MarketParams, spot: float, tau: float) -> ArbSignal:
    """Lending is profitable when the bid-side premium exceeds the marginal
    option's time value: C(K) - S + K < X * (1 - s_bid)."""
    lhs = _marginal_time_value(pool.k, pool.q_c, params, spot, tau)
    threshold = oblivious_put_price(spot, params, tau) * (1.0 - params.s_bid)
    edge = threshold - lhs
    return ArbSignal(active=edge > 0.0, edge=edge)


def _edge_after(
    pool: PoolState, params: MarketParams, spot: float, tau: float, side: str, size: float
) -> float:
    """Signal edge at the hypothetical post-trade state for the given size."""
    q_c = pool.q_c + size if side == BORROW else pool.q_c - size
    lhs = _marginal_time_value(pool.k, q_c, params, spot, tau)
    x = oblivious_put_price(spot, params, tau)
    if side == BORROW:
        return lhs - x * (1.0 + params.s_ask)
    return x * (1.0 - params.s_bid) - lhs


def _feasibility_cap(pool: PoolState, params: MarketParams, spot: float, tau: float, side: str) -> float:
    """Largest size that keeps the trade executable: solvency margin stays
    positive, and a lend cannot drain the collateral inventory."""
    margin = engine.check_no_shortfall(pool).margin
    if side == BORROW:
        # delta_q_b(size) = q_b - k/(q_c + size) must stay below the margin
        target = margin * _CAP_SAFETY
        remaining = pool.q_b - target
        if remaining <= 0.0:
            return math.inf
        return max(pool.k / remaining - pool.q_c, 0.0)
    cap = pool.q_c * _CAP_SAFETY
    x_eff = oblivious_put_price(spot, params, tau) * (1.0 - params.s_bid)
    if x_eff > 0.0:
        cap = min(cap, margin * _CAP_SAFETY / x_eff)
    return cap


def find_equilibrium_trade(
    pool: PoolState, params: MarketParams, spot: float, tau: float, side: str
) -> EquilibriumTrade:
    """Size the trade that drives the active signal's edge to zero.

    The edge is strictly decreasing in size (borrowing lowers the marginal
    strike, lending raises it), so plain bisection applies.  If the solvency
    or inventory cap binds before the edge closes, the capped size is
    returned flagged `constrained`.  The returned size always leaves the
    post-trade edge <= 0 unless constrained.
    """
    _require(side in (BORROW, LEND), f"side must be borrow|lend, got {side!r}")
    signal = (
        borrower_arb_signal(pool, params, spot, tau)
        if side == BORROW
        else lender_arb_signal(pool, params, spot, tau)
    )
    if not signal.active:
        raise SignalInactiveError(f"{side} signal inactive (edge {signal.edge})")

    cap = _feasibility_cap(pool, params, spot, tau, side)
    if cap <= 0.0:
        return EquilibriumTrade(side=side, delta_q_c=0.0, constrained=True)

    hi = cap
    if math.isinf(hi):
        # expand a finite bracket; the edge goes negative for large sizes
        hi = pool.q_c
        while _edge_after(pool, params, spot, tau, side, hi) > 0.0:
            hi *= 2.0
            if hi > 1e12 * pool.q_c:
                return EquilibriumTrade(side=side, delta_q_c=hi, constrained=True)
    elif _edge_after(pool, params, spot, tau, side, hi) > 0.0:
        return EquilibriumTrade(side=side, delta_q_c=hi, constrained=True)

    lo = 0.0
    edge_tol = EDGE_TOL_PER_SPOT * spot
    size_tol = SIZE_TOL_PER_QC * pool.q_c
    for _ in range(MAX_ITERATIONS):
        mid = 0.5 * (lo + hi)
        edge = _edge_after(pool, params, spot, tau, side, mid)
        if edge > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= size_tol and abs(_edge_after(pool, params, spot, tau, side, hi)) <= edge_tol:
            break
    # hi sits on the non-positive-edge side, so the executed trade switches
    # the signal off
    return EquilibriumTrade(side=side, delta_q_c=hi, constrained=False)


def flash_borrow_arb_profit(spot: float, upfront_cash: float, market_call_price: float) -> float:
    """Round-trip profit of monetizing an underpriced embedded call:
    buy the collateral at spot, pledge it, sell the received call.

    Returns upfront_cash + market_call_price - spot.
    """
    _require(spot >= 0.0, f"spot must be >= 0, got {spot}")
    _require(upfront_cash >= 0.0, f"upfront_cash must be >= 0, got {upfront_cash}")
    _require(market_call_price >= 0.0, f"market_call_price must be >= 0, got {market_call_price}")
    return upfront_cash + market_call_price - spot


def lender_arb_profit(borrowed: float, lent: float, put_premium: float) -> float:
    """Profit of funding a deposit externally and hedging its downside with
    a market put.

    Returns borrowed - lent - put_premium.
    """
    _require(borrowed >= 0.0, f"borrowed must be >= 0, got {borrowed}")
    _require(lent >= 0.0, f"lent must be >= 0, got {lent}")
    _require(put_premium >= 0.0, f"put_premium must be >= 0, got {put_premium}")
    return borrowed - lent - put_premium
