"""Core domain types for the zero-liquidation loan AMM.

A pool quotes loans against collateral with a constant-product curve; every
loan embeds a call option for the borrower (and the mirror-image put exposure
for the pool).  The types here are shared by the pricing, engine, arbitrage,
payoff, and backtest modules and carry no behaviour beyond validation and
JSON (de)serialization.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Day count is days/365; all times are year fractions.
SECONDS_PER_YEAR = 365.0 * 86400.0

# Relative tolerance for the constant-product invariant after a trade.
PRODUCT_RTOL = 1e-9

# Absolute call/put parity tolerance, per unit of spot.
PARITY_RTOL = 1e-9

BORROW = "borrow"
LEND = "lend"


class DomainError(ValueError):
    """An input lies outside an operation's mathematical domain."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DomainError(message)


@dataclass(frozen=True)
class MarketParams:
    """Immutable market configuration fixed at pool inception.

    alpha scales the downside premium between 0 (free optionality) and 1
    (full at-the-money approximation); sigma is annualized volatility;
    s_bid/s_ask are the spreads applied to that premium on the lend/borrow
    side; term_years is the loan term.
    """

    alpha: float
    sigma: float
    s_bid: float
    s_ask: float
    term_years: float
    collateral_symbol: str = "ETH"
    borrow_symbol: str = "USDC"

    def __post_init__(self) -> None:
        _require(0.0 <= self.alpha <= 1.0, f"alpha must lie in [0, 1], got {self.alpha}")
        _require(self.sigma >= 0.0, f"sigma must be >= 0, got {self.sigma}")
        _require(self.s_bid >= 0.0, f"s_bid must be >= 0, got {self.s_bid}")
        _require(self.s_ask >= 0.0, f"s_ask must be >= 0, got {self.s_ask}")
        _require(self.term_years > 0.0, f"term_years must be > 0, got {self.term_years}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "sigma": self.sigma,
            "s_bid": self.s_bid,
            "s_ask": self.s_ask,
            "term_years": self.term_years,
            "collateral_symbol": self.collateral_symbol,
            "borrow_symbol": self.borrow_symbol,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MarketParams":
        return cls(**d)


@dataclass(frozen=True)
class Position:
    """An open borrow or lend leg, settled only at expiry.

    delta_q_b is the repayment amount (strike * delta_q_c); cash_leg is the
    borrow-currency amount exchanged at open; x_effective is the per-unit
    spread-adjusted downside premium locked in at open.
    """

    side: str
    delta_q_c: float
    delta_q_b: float
    strike: float
    cash_leg: float
    x_effective: float
    opened_at: float

    def __post_init__(self) -> None:
        _require(self.side in (BORROW, LEND), f"side must be borrow|lend, got {self.side!r}")
        _require(self.delta_q_c > 0.0, "position size must be positive")
        # repayment is strike * quantity by definition
        _require(
            abs(self.delta_q_b - self.strike * self.delta_q_c) <= 1e-9 * max(1.0, self.delta_q_b),
            "delta_q_b must equal strike * delta_q_c",
        )

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "delta_q_c": self.delta_q_c,
            "delta_q_b": self.delta_q_b,
            "strike": self.strike,
            "cash_leg": self.cash_leg,
            "x_effective": self.x_effective,
            "opened_at": self.opened_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Position":
        return cls(**d)


@dataclass
class PoolState:
    """Mutable AMM state: curve inventories, the pool constant, and open legs.

    q_c and q_b are the constant-product curve inventories (q_c * q_b == k
    after every executed trade).  q_b_initial is the borrow-currency
    liquidity at inception, which anchors the solvency check.  The pool is a
    single-owner mutable value; `revision` is bumped on every executed trade
    so quotes can be revalidated, and is not part of the serialized snapshot.
    """

    q_c: float
    q_b: float
    k: float
    q_b_initial: float
    now_years: float = 0.0
    borrow_positions: list[Position] = field(default_factory=list)
    lend_positions: list[Position] = field(default_factory=list)
    revision: int = 0
    settled: bool = False

    def __post_init__(self) -> None:
        _require(self.q_c > 0.0, f"q_c must be > 0, got {self.q_c}")
        _require(self.q_b > 0.0, f"q_b must be > 0, got {self.q_b}")
        _require(self.k > 0.0, f"k must be > 0, got {self.k}")
        _require(self.q_b_initial > 0.0, "q_b_initial must be > 0")
        _require(self.now_years >= 0.0, "now_years must be >= 0")

    @classmethod
    def at_inception(cls, q_c: float, q_b: float) -> "PoolState":
        """Bootstrap a fresh pool; the constant k = q_c * q_b is fixed here."""
        _require(q_c > 0.0, f"q_c must be > 0, got {q_c}")
        _require(q_b > 0.0, f"q_b must be > 0, got {q_b}")
        return cls(q_c=q_c, q_b=q_b, k=q_c * q_b, q_b_initial=q_b)

    def to_dict(self) -> dict:
        return {
            "q_c": self.q_c,
            "q_b": self.q_b,
            "k": self.k,
            "q_b_initial": self.q_b_initial,
            "now_years": self.now_years,
            "borrow_positions": [p.to_dict() for p in self.borrow_positions],
            "lend_positions": [p.to_dict() for p in self.lend_positions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PoolState":
        return cls(
            q_c=d["q_c"],
            q_b=d["q_b"],
            k=d["k"],
            q_b_initial=d["q_b_initial"],
            now_years=d.get("now_years", 0.0),
            borrow_positions=[Position.from_dict(p) for p in d.get("borrow_positions", [])],
            lend_positions=[Position.from_dict(p) for p in d.get("lend_positions", [])],
        )


@dataclass(frozen=True)
class Quote:
    """One priced trade against the pool, valid for the recorded revision.

    oblivious_put holds the spread-adjusted per-unit downside premium that
    the cash leg was built with; both implied-rate conventions are filled
    (x/(strike-x) and x/strike).
    """

    delta_q_c: float
    delta_q_b: float
    strike: float
    cash_leg: float
    oblivious_put: float
    implied_ltv: float
    implied_rate_eq: float
    implied_rate_table: float
    side: str
    pool_revision: int = 0

    def __post_init__(self) -> None:
        _require(self.side in (BORROW, LEND), f"side must be borrow|lend, got {self.side!r}")

    def to_dict(self) -> dict:
        return {
            "delta_q_c": self.delta_q_c,
            "delta_q_b": self.delta_q_b,
            "strike": self.strike,
            "cash_leg": self.cash_leg,
            "oblivious_put": self.oblivious_put,
            "implied_ltv": self.implied_ltv,
            "implied_rate_eq": self.implied_rate_eq,
            "implied_rate_table": self.implied_rate_table,
            "side": self.side,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Quote":
        return cls(**d)


@dataclass(frozen=True)
class OptionQuote:
    """A consistent call/put pair from the external option market model.

    Zero-rate parity (call - put == spot - strike) is enforced at
    construction within PARITY_RTOL * spot.
    """

    call: float
    put: float
    spot: float
    strike: float
    tau_years: float

    def __post_init__(self) -> None:
        gap = abs(self.call - self.put - (self.spot - self.strike))
        _require(
            gap <= PARITY_RTOL * self.spot,
            f"parity violated: |C - P - (S - K)| = {gap}",
        )

    def to_dict(self) -> dict:
        return {
            "call": self.call,
            "put": self.put,
            "spot": self.spot,
            "strike": self.strike,
            "tau_years": self.tau_years,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptionQuote":
        return cls(**d)


@dataclass(frozen=True)
class PricePoint:
    """One observation of the collateral price, in borrow currency."""

    timestamp: float
    price: float

    def __post_init__(self) -> None:
        _require(self.price > 0.0, f"price must be > 0, got {self.price}")

    def to_dict(self) -> dict:
        return {"timestamp": self.timestamp, "price": self.price}

    @classmethod
    def from_dict(cls, d: dict) -> "PricePoint":
        return cls(**d)


class PriceSeries:
    """A strictly time-ordered positive price path with as-of lookup."""

    def __init__(self, timestamps: Iterable[float], prices: Iterable[float]):
        ts = np.asarray(list(timestamps), dtype=float)
        px = np.asarray(list(prices), dtype=float)
        if ts.size == 0:
            raise DomainError("price series must be nonempty")
        if ts.size != px.size:
            raise DomainError("timestamps and prices must have equal length")
        if np.any(px <= 0.0):
            bad = int(np.argmax(px <= 0.0))
            raise DomainError(f"nonpositive price {px[bad]} at index {bad}")
        if np.any(np.diff(ts) <= 0.0):
            bad = int(np.argmax(np.diff(ts) <= 0.0))
            raise DomainError(f"timestamps not strictly increasing at index {bad + 1}")
        self.timestamps = ts
        self.prices = px

    @classmethod
    def from_points(cls, points: Sequence[PricePoint]) -> "PriceSeries":
        return cls([p.timestamp for p in points], [p.price for p in points])

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def as_of(self, t: float) -> float:
        """Most recent price at or before t."""
        idx = bisect.bisect_right(self.timestamps, t) - 1
        if idx < 0:
            raise DomainError(f"no price at or before t={t}")
        return float(self.prices[idx])

    def covers(self, start: float, end: float) -> bool:
        return float(self.timestamps[0]) <= start and float(self.timestamps[-1]) >= end


def year_fraction(seconds: float) -> float:
    """Convert a duration in seconds to a year fraction (days/365 count)."""
    return seconds / SECONDS_PER_YEAR


def remaining_tau(pool: PoolState, params: MarketParams) -> float:
    """Time to expiry for the pool's clock, floored at zero."""
    return max(params.term_years - pool.now_years, 0.0)
