"""Option pricing kernel.

Zero-rate Black-Scholes vanillas model the external option market that
arbitrage agents trade against; the pool itself never prices a fair put but
charges the square-root approximation of an at-the-money put, scaled by
alpha (`oblivious_put_price`).  The implied rate and LTV conversions used in
quote terms live here as well.

The risk-free rate is zero throughout, so parity reads C - P = S - K.
"""

from __future__ import annotations

import math

from .core import DomainError, MarketParams, OptionQuote, _require

_SQRT2 = math.sqrt(2.0)

# Constant of the square-root ATM approximation P_atm ~= 0.4 * S * sigma * sqrt(tau).
ATM_APPROX_COEF = 0.4


def normal_cdf(x: float) -> float:
    """Standard normal CDF via erf; absolute error well below 1e-7."""
    return 0.5 * (1.0 + math.erf(x / _SQRT2))


def _check_vanilla_inputs(spot: float, strike: float, sigma: float, tau_years: float) -> None:
    _require(spot > 0.0, f"spot must be > 0, got {spot}")
    _require(strike >= 0.0, f"strike must be >= 0, got {strike}")
    _require(sigma >= 0.0, f"sigma must be >= 0, got {sigma}")
    _require(tau_years >= 0.0, f"tau_years must be >= 0, got {tau_years}")


def bs_call(spot: float, strike: float, sigma: float, tau_years: float) -> float:
    """Zero-rate Black-Scholes call price.

    C = S*N(d1) - K*N(d2) with d1 = (ln(S/K) + sigma^2 tau / 2) / (sigma sqrt(tau)).
    Degenerate cases: K=0 returns S; tau=0 or sigma=0 returns intrinsic value.
    """
    _check_vanilla_inputs(spot, strike, sigma, tau_years)
    if strike == 0.0:
        return spot
    if tau_years == 0.0 or sigma == 0.0:
        return max(spot - strike, 0.0)
    sd = sigma * math.sqrt(tau_years)
    d1 = (math.log(spot / strike) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    return spot * normal_cdf(d1) - strike * normal_cdf(d2)


def bs_put(spot: float, strike: float, sigma: float, tau_years: float) -> float:
    """Zero-rate Black-Scholes put price.

    P = K*N(-d2) - S*N(-d1); satisfies C - P = S - K.
    Degenerate cases: K=0 returns 0; tau=0 or sigma=0 returns intrinsic value.
    """
    _check_vanilla_inputs(spot, strike, sigma, tau_years)
    if strike == 0.0:
        return 0.0
    if tau_years == 0.0 or sigma == 0.0:
        return max(strike - spot, 0.0)
    sd = sigma * math.sqrt(tau_years)
    d1 = (math.log(spot / strike) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    return strike * normal_cdf(-d2) - spot * normal_cdf(-d1)


def option_quote(spot: float, strike: float, sigma: float, tau_years: float) -> OptionQuote:
    """Price the call/put pair at one strike; parity-checked at construction."""
    return OptionQuote(
        call=bs_call(spot, strike, sigma, tau_years),
        put=bs_put(spot, strike, sigma, tau_years),
        spot=spot,
        strike=strike,
        tau_years=tau_years,
    )


def oblivious_put_price(spot: float, params: MarketParams, tau_years: float) -> float:
    """Per-unit downside premium the pool charges in lieu of a fair put value.

    X = alpha * 0.4 * spot * sigma * sqrt(tau).  Monotone nondecreasing in
    alpha, spot, sigma, and tau; zero when alpha or tau is zero.
    """
    _require(spot > 0.0, f"spot must be > 0, got {spot}")
    _require(tau_years >= 0.0, f"tau_years must be >= 0, got {tau_years}")
    return params.alpha * ATM_APPROX_COEF * spot * params.sigma * math.sqrt(tau_years)


def implied_rate_eq(x: float, strike: float) -> float:
    """Maximum implied borrowing rate on the cash actually received: x / (strike - x).

    Undefined (raises) when x >= strike, where the cash leg vanishes.
    """
    _require(x >= 0.0, f"x must be >= 0, got {x}")
    _require(x < strike, f"x must be < strike, got x={x}, strike={strike}")
    return x / (strike - x)


def implied_rate_table(x: float, strike: float) -> float:
    """Premium as a fraction of the repayment amount: x / strike."""
    _require(x >= 0.0, f"x must be >= 0, got {x}")
    _require(strike > 0.0, f"strike must be > 0, got {strike}")
    return x / strike


def implied_ltv(strike: float, spot: float) -> float:
    """Loan-to-value of a quote: strike / spot."""
    _require(spot > 0.0, f"spot must be > 0, got {spot}")
    return strike / spot
