"""The AMM state machine: quoting, execution, solvency, and expiry settlement.

Quotes are stateless computations against a pool snapshot; `execute`
revalidates the quote against the live pool (revision counter) before
mutating it, so a quote can never be applied to a pool that moved.  Every
accepted trade preserves q_c * q_b == k and the no-shortfall condition.

Curve inventories vs. physical holdings: q_c/q_b track the constant-product
curve.  Cash actually moves by the quote's cash_leg (repayment minus the
premium leg), and collateral earmarked to lenders stays in the vault until
expiry, so the physical holdings are reconstructed from the curve plus open
positions (`physical_holdings`).  Settlement flows are physical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    BORROW,
    LEND,
    DomainError,
    MarketParams,
    PoolState,
    Position,
    Quote,
    PRODUCT_RTOL,
    remaining_tau,
    _require,
)
from .pricing import implied_ltv, implied_rate_eq, implied_rate_table, oblivious_put_price

# Bisection controls shared by the cash solver.
MAX_BISECT_ITERATIONS = 200
CASH_SOLVE_TOL = 1e-6


class EngineError(Exception):
    """Base class for trade rejections."""


class UneconomicTradeError(EngineError):
    """The cash leg of the requested trade is not positive."""


class InsufficientLiquidityError(EngineError):
    """The trade would require more borrow-currency than the pool holds."""


class DrainsCollateralError(EngineError):
    """The trade would take the pool's collateral inventory to zero or below."""


class NoSolutionError(EngineError):
    """No trade size attains the requested cash amount."""


class StaleQuoteError(EngineError):
    """The quote was computed against a pool state that has since changed."""


class ShortfallError(EngineError):
    """Accepting the trade would break the solvency condition."""

    def __init__(self, margin: float):
        self.margin = margin
        super().__init__(f"no-shortfall condition violated; margin would be {margin}")


class NotExpiredError(EngineError):
    """Settlement requested before the pool's term has elapsed."""


@dataclass(frozen=True)
class NoShortfallResult:
    holds: bool
    margin: float


@dataclass(frozen=True)
class PositionSettlement:
    """Cash/collateral flows to one position holder at expiry."""

    side: str
    strike: float
    delta_q_c: float
    delta_q_b: float
    cash_leg: float
    x_effective: float
    opened_at: float
    repaid: bool
    cash_to_holder: float
    collateral_to_holder: float

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "strike": self.strike,
            "delta_q_c": self.delta_q_c,
            "delta_q_b": self.delta_q_b,
            "cash_leg": self.cash_leg,
            "x_effective": self.x_effective,
            "opened_at": self.opened_at,
            "repaid": self.repaid,
            "cash_to_holder": self.cash_to_holder,
            "collateral_to_holder": self.collateral_to_holder,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PositionSettlement":
        return cls(**d)


@dataclass(frozen=True)
class SettlementReport:
    """Per-position flows and the pool's terminal physical inventories."""

    spot_at_expiry: float
    final_q_c: float
    final_q_b: float
    flows: tuple[PositionSettlement, ...]

    def to_dict(self) -> dict:
        return {
            "spot_at_expiry": self.spot_at_expiry,
            "final_q_c": self.final_q_c,
            "final_q_b": self.final_q_b,
            "flows": [f.to_dict() for f in self.flows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SettlementReport":
        return cls(
            spot_at_expiry=d["spot_at_expiry"],
            final_q_c=d["final_q_c"],
            final_q_b=d["final_q_b"],
            flows=tuple(PositionSettlement.from_dict(f) for f in d["flows"]),
        )


def marginal_strike(pool: PoolState) -> float:
    """Strike quoted for an infinitesimal trade: k / q_c**2."""
    return pool.k / (pool.q_c * pool.q_c)


def _guard_open(pool: PoolState) -> None:
    if pool.settled:
        raise EngineError("pool already settled")


def quote_borrow(pool: PoolState, params: MarketParams, delta_q_c: float, spot: float) -> Quote:
    """Quote a loan of delta_q_b against delta_q_c units of pledged collateral.

    delta_q_b = q_b - k / (q_c + delta_q_c); the borrower receives
    delta_q_b - delta_q_c * X * (1 + s_ask) in cash and owes delta_q_b at
    expiry (or the collateral, whichever is worth less).
    """
    _guard_open(pool)
    _require(delta_q_c > 0.0, f"delta_q_c must be > 0, got {delta_q_c}")
    _require(spot > 0.0, f"spot must be > 0, got {spot}")
    delta_q_b = pool.q_b - pool.k / (pool.q_c + delta_q_c)
    if not delta_q_b < pool.q_b:
        raise InsufficientLiquidityError(
            f"trade needs {delta_q_b} of {pool.q_b} available borrow currency"
        )
    strike = delta_q_b / delta_q_c
    tau = remaining_tau(pool, params)
    x_eff = oblivious_put_price(spot, params, tau) * (1.0 + params.s_ask)
    cash_leg = delta_q_b - delta_q_c * x_eff
    if cash_leg <= 0.0:
        raise UneconomicTradeError(
            f"cash leg {cash_leg} is not positive at size {delta_q_c}"
        )
    return Quote(
        delta_q_c=delta_q_c,
        delta_q_b=delta_q_b,
        strike=strike,
        cash_leg=cash_leg,
        oblivious_put=x_eff,
        implied_ltv=implied_ltv(strike, spot),
        implied_rate_eq=implied_rate_eq(x_eff, strike),
        implied_rate_table=implied_rate_table(x_eff, strike),
        side=BORROW,
        pool_revision=pool.revision,
    )


def quote_lend(pool: PoolState, params: MarketParams, delta_q_c: float, spot: float) -> Quote:
    """Quote a deposit: the lender pays cash now for the pool's promise of
    min(S_T, strike) * delta_q_c at expiry.

    delta_q_b = k / (q_c - delta_q_c) - q_b is the promised repayment; the
    lender pays delta_q_b - delta_q_c * X * (1 - s_bid).
    """
    _guard_open(pool)
    _require(delta_q_c > 0.0, f"delta_q_c must be > 0, got {delta_q_c}")
    _require(spot > 0.0, f"spot must be > 0, got {spot}")
    if delta_q_c >= pool.q_c:
        raise DrainsCollateralError(
            f"size {delta_q_c} would drain the pool's {pool.q_c} collateral units"
        )
    delta_q_b = pool.k / (pool.q_c - delta_q_c) - pool.q_b
    strike = delta_q_b / delta_q_c
    tau = remaining_tau(pool, params)
    x_eff = oblivious_put_price(spot, params, tau) * (1.0 - params.s_bid)
    cash_leg = delta_q_b - delta_q_c * x_eff
    if cash_leg <= 0.0:
        raise UneconomicTradeError(
            f"cash leg {cash_leg} is not positive at size {delta_q_c}"
        )
    # cash_leg > 0 guarantees x_eff < strike, so both rates are defined
    return Quote(
        delta_q_c=delta_q_c,
        delta_q_b=delta_q_b,
        strike=strike,
        cash_leg=cash_leg,
        oblivious_put=x_eff,
        implied_ltv=implied_ltv(strike, spot),
        implied_rate_eq=implied_rate_eq(x_eff, strike),
        implied_rate_table=implied_rate_table(x_eff, strike),
        side=LEND,
        pool_revision=pool.revision,
    )


def solve_lend_for_cash(
    pool: PoolState, params: MarketParams, cash_paid: float, spot: float
) -> Quote:
    """Find the lend size whose cash leg equals cash_paid, by bisection.

    The cash leg is strictly increasing in size on the economically feasible
    region, so the root is unique there; converges to within CASH_SOLVE_TOL
    currency units.
    """
    _guard_open(pool)
    _require(cash_paid > 0.0, f"cash_paid must be > 0, got {cash_paid}")
    _require(spot > 0.0, f"spot must be > 0, got {spot}")
    tau = remaining_tau(pool, params)
    x_eff = oblivious_put_price(spot, params, tau) * (1.0 - params.s_bid)

    def cash_at(d: float) -> float:
        return pool.k / (pool.q_c - d) - pool.q_b - d * x_eff

    # cash_at is convex with cash_at(0) = 0; below d_turn it may decrease, so
    # restrict the bracket to the increasing branch.
    d_turn = 0.0
    if x_eff > 0.0:
        d_turn = max(0.0, pool.q_c - math.sqrt(pool.k / x_eff))
    hi_limit = pool.q_c * (1.0 - 1e-12)
    if cash_at(hi_limit) < cash_paid:
        raise NoSolutionError(f"cash {cash_paid} unattainable within pool collateral")
    lo, hi = d_turn, hi_limit
    for _ in range(MAX_BISECT_ITERATIONS):
        mid = 0.5 * (lo + hi)
        diff = cash_at(mid) - cash_paid
        if abs(diff) <= CASH_SOLVE_TOL:
            return quote_lend(pool, params, mid, spot)
        if diff < 0.0:
            lo = mid
        else:
            hi = mid
    raise NoSolutionError(f"bisection failed to reach {cash_paid} within tolerance")


def check_no_shortfall(pool: PoolState) -> NoShortfallResult:
    """Solvency condition: worst-case payouts to lenders stay strictly below
    the liquidity that remains of the initial funding after borrow payouts.

    holds iff sum over lends of delta_q_c * x_effective < q_b_initial - sum
    over borrows of delta_q_b; margin is the slack (RHS - LHS).
    """
    lhs = sum(p.delta_q_c * p.x_effective for p in pool.lend_positions)
    rhs = pool.q_b_initial - sum(p.delta_q_b for p in pool.borrow_positions)
    margin = rhs - lhs
    return NoShortfallResult(holds=margin > 0.0, margin=margin)


def execute(pool: PoolState, quote: Quote) -> Position:
    """Apply a quote to the pool and open the corresponding position.

    Rejects stale quotes (pool revision moved), quotes that do not restore
    the constant product, and trades that would violate no-shortfall (the
    pool is left untouched in every rejection case).
    """
    _guard_open(pool)
    if quote.pool_revision != pool.revision:
        raise StaleQuoteError(
            f"quote built at revision {quote.pool_revision}, pool is at {pool.revision}"
        )
    _require(quote.delta_q_c > 0.0, "quote size must be positive")
    if quote.side == BORROW:
        new_q_c = pool.q_c + quote.delta_q_c
        new_q_b = pool.q_b - quote.delta_q_b
    else:
        new_q_c = pool.q_c - quote.delta_q_c
        new_q_b = pool.q_b + quote.delta_q_b
    if new_q_c <= 0.0:
        raise DrainsCollateralError("trade would drain the collateral inventory")
    if new_q_b <= 0.0:
        raise InsufficientLiquidityError("trade would drain the borrow-currency inventory")
    if abs(new_q_c * new_q_b - pool.k) > PRODUCT_RTOL * pool.k:
        raise StaleQuoteError("quote does not restore the constant product")

    position = Position(
        side=quote.side,
        delta_q_c=quote.delta_q_c,
        delta_q_b=quote.delta_q_b,
        strike=quote.strike,
        cash_leg=quote.cash_leg,
        x_effective=quote.oblivious_put,
        opened_at=pool.now_years,
    )
    book = pool.borrow_positions if quote.side == BORROW else pool.lend_positions
    old_q_c, old_q_b = pool.q_c, pool.q_b
    pool.q_c, pool.q_b = new_q_c, new_q_b
    book.append(position)
    result = check_no_shortfall(pool)
    if not result.holds:
        book.pop()
        pool.q_c, pool.q_b = old_q_c, old_q_b
        raise ShortfallError(result.margin)
    pool.revision += 1
    return position


def physical_holdings(pool: PoolState) -> tuple[float, float]:
    """(collateral, cash) actually in the vault, versus the curve inventories.

    Lender-earmarked collateral has left the curve but not the vault; cash
    differs from q_b by the cumulative premium legs.
    """
    coll = pool.q_c + sum(p.delta_q_c for p in pool.lend_positions)
    cash = (
        pool.q_b
        + sum(p.delta_q_c * p.x_effective for p in pool.borrow_positions)
        - sum(p.delta_q_c * p.x_effective for p in pool.lend_positions)
    )
    return coll, cash


def settle_expiry(pool: PoolState, spot_at_expiry: float, params: MarketParams) -> SettlementReport:
    """Settle every open position at expiry and close the pool.

    Borrow legs: repayment happens iff S_T > strike (the borrower reclaims
    the collateral); at or below the strike the borrower walks away and the
    pool keeps the collateral.  Lend legs: iff S_T > strike the pool pays
    the promised repayment and keeps the earmarked collateral, otherwise it
    delivers the collateral to the lender.  Pool inventory changes mirror
    the holder flows exactly, so settlement conserves value.
    """
    _guard_open(pool)
    _require(spot_at_expiry > 0.0, f"spot must be > 0, got {spot_at_expiry}")
    if pool.now_years < params.term_years - 1e-12:
        raise NotExpiredError(
            f"pool clock at {pool.now_years}y, term is {params.term_years}y"
        )
    coll, cash = physical_holdings(pool)
    flows: list[PositionSettlement] = []
    for p in pool.borrow_positions:
        if spot_at_expiry > p.strike:
            cash += p.delta_q_b
            coll -= p.delta_q_c
            flows.append(_settlement_flow(p, repaid=True, cash=-p.delta_q_b, coll=p.delta_q_c))
        else:
            flows.append(_settlement_flow(p, repaid=False, cash=0.0, coll=0.0))
    for p in pool.lend_positions:
        if spot_at_expiry > p.strike:
            cash -= p.delta_q_b
            flows.append(_settlement_flow(p, repaid=True, cash=p.delta_q_b, coll=0.0))
        else:
            coll -= p.delta_q_c
            flows.append(_settlement_flow(p, repaid=False, cash=0.0, coll=p.delta_q_c))
    pool.q_c = coll
    pool.q_b = cash
    pool.borrow_positions.clear()
    pool.lend_positions.clear()
    pool.settled = True
    pool.revision += 1
    return SettlementReport(
        spot_at_expiry=spot_at_expiry,
        final_q_c=coll,
        final_q_b=cash,
        flows=tuple(flows),
    )


def _settlement_flow(p: Position, repaid: bool, cash: float, coll: float) -> PositionSettlement:
    return PositionSettlement(
        side=p.side,
        strike=p.strike,
        delta_q_c=p.delta_q_c,
        delta_q_b=p.delta_q_b,
        cash_leg=p.cash_leg,
        x_effective=p.x_effective,
        opened_at=p.opened_at,
        repaid=repaid,
        cash_to_holder=cash,
        collateral_to_holder=coll,
    )
