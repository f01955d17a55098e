"""Core market model: ranked products, scale-adjusted prices, demand.

Products are ordered by environmental quality ("greenness"): the list index
is the rank, and every consumer prefers the greener product whenever it is
not more expensive.  Each product's effective price falls linearly with its
own market share (increasing returns to scale, or equivalently social
influence), so the price ordering can differ from the ordering of the
zero-share maximum prices.  A product whose effective price is at or above
that of a greener product attracts no buyers at all and drops out of demand.

All operations here are pure functions of immutable inputs.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass

import numpy as np

from .distributions import WtpDistribution

__all__ = [
    "ProductSpec",
    "MarketParams",
    "MarketState",
    "MarketView",
    "effective_prices",
    "rank_and_eliminate",
    "demand_shares",
    "market_view",
    "set_param",
]

SHARE_SUM_SLACK = 1e-12


@dataclass(frozen=True)
class ProductSpec:
    """One product: its greenness rank, a label, and its zero-share price."""

    id: int
    name: str
    p0: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.p0):
            raise ValueError(f"product {self.name!r}: p0 must be finite, got {self.p0}")


@dataclass(frozen=True)
class MarketParams:
    """Immutable market description.

    ``products`` are listed in greenness order (higher index = greener),
    ``k`` is the common returns-to-scale slope (price drop per unit of
    market share), ``lam`` the fraction of consumers re-choosing per step,
    and ``wtp`` the willingness-to-pay distribution.
    """

    products: tuple[ProductSpec, ...]
    k: float
    lam: float
    wtp: WtpDistribution

    def __post_init__(self) -> None:
        if len(self.products) < 1:
            raise ValueError("market needs at least one product")
        ids = [p.id for p in self.products]
        if ids != list(range(len(ids))):
            raise ValueError(f"product ids must be 0..n-1 in greenness order, got {ids}")
        if not self.k >= 0.0:
            raise ValueError(f"returns coefficient k must be >= 0, got {self.k}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"relaxation rate lam must lie in (0, 1], got {self.lam}")

    @classmethod
    def from_p0(
        cls,
        p0: "list[float] | tuple[float, ...] | np.ndarray",
        k: float,
        lam: float,
        wtp: WtpDistribution,
        names: "list[str] | None" = None,
    ) -> "MarketParams":
        """Convenience constructor from a list of zero-share prices."""
        if names is None:
            names = [f"product{i}" for i in range(len(p0))]
        specs = tuple(
            ProductSpec(id=i, name=name, p0=float(price))
            for i, (name, price) in enumerate(zip(names, p0))
        )
        return cls(products=specs, k=k, lam=lam, wtp=wtp)

    @property
    def n(self) -> int:
        return len(self.products)

    @property
    def p0(self) -> np.ndarray:
        return np.array([p.p0 for p in self.products], dtype=float)

    @property
    def top_p0(self) -> float:
        """Zero-share price of the greenest product."""
        return self.products[-1].p0


@dataclass(frozen=True)
class MarketState:
    """Market shares at one time step.  Shares may sum to less than one."""

    u: np.ndarray
    t: int = 0

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=float)
        object.__setattr__(self, "u", u)
        if u.ndim != 1:
            raise ValueError("share vector must be one-dimensional")
        if np.any(u < 0.0) or np.any(u > 1.0):
            raise ValueError(f"shares must lie in [0, 1], got {u}")
        if u.sum() > 1.0 + SHARE_SUM_SLACK:
            raise ValueError(f"shares sum to {u.sum()}, above 1")


@dataclass(frozen=True)
class MarketView:
    """Derived snapshot: effective prices, surviving products, non-buyers.

    ``survivors`` lists the ids of products still attracting demand, sorted
    by increasing effective price (which, after elimination, coincides with
    greenness order).  ``nonbuyer_share`` is 1 - sum(u): the fraction of
    consumers currently holding no product.
    """

    prices: np.ndarray
    survivors: tuple[int, ...]
    nonbuyer_share: float


def effective_prices(params: MarketParams, state: MarketState) -> np.ndarray:
    """Price of each product at its current share: p0 - k*u, componentwise.

    Values may go negative for large shares; the result is an *effective*
    price (posted price net of social utility), and the WTP cdf accepts any
    real argument.
    """
    return params.p0 - params.k * state.u


def rank_and_eliminate(prices: np.ndarray) -> list[int]:
    """Ids of products that keep any demand, sorted by increasing price.

    A product is dropped when some greener product is at least as cheap:
    nobody buys a product that costs the same or more than a greener one.
    The greenest product always survives.  Among survivors, price strictly
    increases with greenness, so price order equals greenness order.
    """
    survivors: list[int] = []
    cheapest_greener = np.inf
    for i in range(len(prices) - 1, -1, -1):
        if prices[i] < cheapest_greener:
            survivors.append(i)
            cheapest_greener = prices[i]
    survivors.reverse()
    return survivors


def demand_shares(
    params: MarketParams, prices: np.ndarray, survivors: "list[int] | tuple[int, ...]"
) -> np.ndarray:
    """Instantaneous demand for every product at the given prices.

    Consumers buy the greenest survivor they can afford, so survivor ``j``
    captures the WTP band between its own price and the next survivor's
    (the greenest one captures everything above its price).  Eliminated
    products get zero.  The demands plus the non-buyer fraction
    F(lowest survivor price) add up to one.
    """
    d = np.zeros(params.n)
    cdf_at = params.wtp.cdf(prices[list(survivors)])
    upper = 1.0
    for pos in range(len(survivors) - 1, -1, -1):
        d[survivors[pos]] = upper - cdf_at[pos]
        upper = cdf_at[pos]
    return d


def market_view(params: MarketParams, state: MarketState) -> MarketView:
    """Recompute prices, survivors and the non-buyer share for a state."""
    prices = effective_prices(params, state)
    survivors = rank_and_eliminate(prices)
    return MarketView(
        prices=prices,
        survivors=tuple(survivors),
        nonbuyer_share=float(1.0 - state.u.sum()),
    )


_PATH_RE = re.compile(r"^(?P<name>k|lambda|p0|share)(?:\[(?P<idx>\d+)\])?$")


def parse_param_path(path: str, n_products: int) -> tuple[str, "int | None"]:
    """Split a parameter path like ``"k"`` or ``"p0[2]"`` into (name, index).

    Valid paths: ``k``, ``lambda``, ``p0[<id>]`` and (for interventions
    only) ``share[<id>]``.  Indices must name an existing product.
    """
    m = _PATH_RE.match(path)
    if m is None:
        raise ValueError(f"cannot parse parameter path {path!r}")
    name, idx = m.group("name"), m.group("idx")
    if name in ("p0", "share"):
        if idx is None:
            raise ValueError(f"parameter path {path!r} needs a product index, e.g. '{name}[0]'")
        i = int(idx)
        if not 0 <= i < n_products:
            raise ValueError(f"parameter path {path!r}: no product with id {i}")
        return name, i
    if idx is not None:
        raise ValueError(f"parameter path {path!r} does not take an index")
    return name, None


def set_param(params: MarketParams, path: str, value: float) -> MarketParams:
    """Return a copy of ``params`` with the parameter at ``path`` replaced.

    ``share[i]`` paths are state, not parameters, and are rejected here.
    """
    name, idx = parse_param_path(path, params.n)
    if name == "k":
        return dataclasses.replace(params, k=value)
    if name == "lambda":
        return dataclasses.replace(params, lam=value)
    if name == "p0":
        products = list(params.products)
        products[idx] = dataclasses.replace(products[idx], p0=value)
        return dataclasses.replace(params, products=tuple(products))
    raise ValueError(f"path {path!r} addresses market state, not a parameter")
