"""Bundled example market: a 30-unit / 100k pool at spot 4000.

The premium parameters make the per-unit downside premium exactly 800 at a
one-year horizon, which is what the example quote tables are built on.
"""

from __future__ import annotations

import json
from importlib import resources

from .core import DomainError, MarketParams, PoolState

EXAMPLE_MARKET_RESOURCE = "data/example_market.json"


def load_market_file(path: str) -> tuple[MarketParams, PoolState, float]:
    """Parse a market fixture file: {params, pool, spot}."""
    with open(path, "r", encoding="utf-8") as f:
        content = f.read().strip()
    if not content:
        raise DomainError(f"{path}: empty fixture file")
    d = json.loads(content)
    return _from_dict(d, origin=path)


def load_example_market() -> tuple[MarketParams, PoolState, float]:
    """The bundled example market (fresh pool on every call)."""
    text = resources.files("zll").joinpath(EXAMPLE_MARKET_RESOURCE).read_text(encoding="utf-8")
    return _from_dict(json.loads(text), origin=EXAMPLE_MARKET_RESOURCE)


def _from_dict(d: dict, origin: str) -> tuple[MarketParams, PoolState, float]:
    try:
        params = MarketParams.from_dict(d["params"])
        pool = PoolState.from_dict(d["pool"])
        spot = float(d["spot"])
    except (KeyError, TypeError) as exc:
        raise DomainError(f"{origin}: not a market fixture ({exc})") from exc
    if spot <= 0.0:
        raise DomainError(f"{origin}: spot must be > 0, got {spot}")
    return params, pool, spot
