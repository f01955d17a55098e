"""Equilibrium computation and multiplicity analysis.

The greenest product's equilibrium share solves a one-dimensional
self-consistency equation

    u = 1 - F(p0_top - k * u)

because consumers whose WTP exceeds its price always buy it, whatever the
other products do.  Depending on how the returns slope ``k`` compares with
the WTP distribution width, that equation has one fixed point or three
(two attractors separated by an unstable point), which is what produces
lock-in and hysteresis.

This module enumerates those fixed points numerically, locates the fold
(tangency) prices bounding the bistable window for the logistic
distribution, solves the full multi-product equilibrium in closed form for
uniform WTP, and finds attractors for arbitrary distributions by
multi-start relaxation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import fmt9, join_ids
from .distributions import LogitWtp, UniformWtp, WtpDistribution
from .dynamics import DEFAULT_T_MAX, DEFAULT_TOL, pure_state, settle
from .market import MarketParams, MarketState, demand_shares, market_view

__all__ = [
    "FixedPoint",
    "FixedPointSet",
    "FullEquilibrium",
    "NumericEquilibria",
    "green_fixed_points",
    "multiplicity_threshold",
    "fold_points",
    "equilibrium_uniform_closed_form",
    "equilibrium_numeric",
    "scanned_fraction",
    "intermediate_exit_threshold",
    "standard_excluded",
    "write_equilibria_csv",
]

GRID_CELLS = 10_000
BISECT_XTOL = 1e-12
DEDUPE_TOL = 1e-6
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class FixedPoint:
    """One solution of the green-share self-consistency equation.

    ``stable`` follows the map-derivative test k*f(x*) < 1, which does not
    depend on the relaxation rate.  A tangency (k*f(x*) exactly 1) is
    classified unstable and flagged ``degenerate``.
    """

    u_star: float
    stable: bool
    residual: float
    degenerate: bool = False


@dataclass(frozen=True)
class FixedPointSet:
    """All fixed points for one (wtp, p0_top, k), sorted by share.

    ``separatrix`` is the unstable middle point when exactly three fixed
    points exist: it divides the basins of the two attractors.
    """

    points: tuple[FixedPoint, ...]
    separatrix: "float | None"

    def __len__(self) -> int:
        return len(self.points)

    @property
    def stable_shares(self) -> list[float]:
        return [p.u_star for p in self.points if p.stable]

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("u_star,stable,residual\n")
            for p in self.points:
                fh.write(f"{fmt9(p.u_star)},{int(p.stable)},{fmt9(p.residual)}\n")


@dataclass(frozen=True)
class FullEquilibrium:
    """A complete market equilibrium: shares, prices, surviving products."""

    u: np.ndarray
    prices: np.ndarray
    survivors: tuple[int, ...]
    residual: float


@dataclass(frozen=True)
class NumericEquilibria:
    """Multi-start relaxation result.

    Distinct attractors found, sorted lexicographically by share vector,
    plus the initial conditions whose runs failed to converge (reported
    rather than dropped).
    """

    equilibria: tuple[FullEquilibrium, ...]
    nonconverged: tuple[np.ndarray, ...]


def _self_consistency(wtp: WtpDistribution, p0_top: float, k: float, u):
    """g(u) = u - 1 + F(p0_top - k*u); fixed points are its zeros."""
    return u - 1.0 + wtp.cdf(p0_top - k * u)


def _bisect(wtp: WtpDistribution, p0_top: float, k: float, lo: float, hi: float) -> float:
    g_lo = _self_consistency(wtp, p0_top, k, lo)
    while hi - lo > BISECT_XTOL:
        mid = 0.5 * (lo + hi)
        g_mid = _self_consistency(wtp, p0_top, k, mid)
        if g_mid == 0.0:
            return mid
        if (g_lo < 0.0) == (g_mid < 0.0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def green_fixed_points(
    wtp: WtpDistribution, p0_top: float, k: float, cells: int = GRID_CELLS
) -> FixedPointSet:
    """Enumerate all solutions of u = 1 - F(p0_top - k*u) on [0, 1].

    Sign changes of the residual are bracketed on a uniform grid and
    refined by bisection; at least one solution always exists because the
    residual is <= 0 at u=0 and >= 0 at u=1.  Each point carries the
    stability verdict from the slope test k*f < 1.
    """
    if not k >= 0.0:
        raise ValueError(f"returns coefficient k must be >= 0, got {k}")
    grid = np.linspace(0.0, 1.0, cells + 1)
    g = _self_consistency(wtp, p0_top, k, grid)
    roots = [float(x) for x in grid[g == 0.0]]
    sign_change = (g[:-1] * g[1:]) < 0.0
    for j in np.nonzero(sign_change)[0]:
        roots.append(_bisect(wtp, p0_top, k, float(grid[j]), float(grid[j + 1])))
    roots.sort()

    points = []
    for u_star in roots:
        slope = k * float(wtp.pdf(p0_top - k * u_star))
        points.append(
            FixedPoint(
                u_star=u_star,
                stable=slope < 1.0,
                residual=abs(float(_self_consistency(wtp, p0_top, k, u_star))),
                degenerate=slope == 1.0,
            )
        )
    separatrix = None
    if len(points) == 3 and not points[1].stable:
        separatrix = points[1].u_star
    return FixedPointSet(points=tuple(points), separatrix=separatrix)


def multiplicity_threshold(wtp: WtpDistribution) -> float:
    """Smallest k at which three fixed points become possible.

    Three solutions require the share-feedback slope k times the steepest
    cdf slope (1/width) to reach one, i.e. k >= width.
    """
    return wtp.width


def fold_points(wtp: LogitWtp, k: float) -> "tuple[float, float] | None":
    """Zero-share prices of the greenest product where attractors fold.

    For logistic WTP and k above the width, returns the two p0 values at
    which the line 1-u is tangent to the cdf: the bistable window's lower
    and upper edges.  The tangency condition k*f(x) = 1 is quadratic in
    F(x), so the folds come out in closed form.  Returns None for
    k <= width (single attractor everywhere, the tangency has no solution;
    k == width is the degenerate grazing case).
    """
    if not isinstance(wtp, LogitWtp):
        raise TypeError(f"fold points are computed analytically for LogitWtp only, got {type(wtp).__name__}")
    if k <= wtp.width:
        return None
    spread = math.sqrt(1.0 - wtp.width / k)
    folds = []
    for f_tan in ((1.0 + spread) / 2.0, (1.0 - spread) / 2.0):
        x = wtp.center + math.log(f_tan / (1.0 - f_tan)) / wtp.beta
        u = 1.0 - f_tan
        folds.append(x + k * u)
    return (min(folds), max(folds))


def _solve_uniform_share(wtp: UniformWtp, upper_cdf: float, p0: float, k: float) -> float:
    """Share of one product given the cdf value at the next survivor's price.

    Solves u = upper_cdf - F(p0 - k*u) exactly for the piecewise-linear
    uniform cdf (unique root since k < width).  Returns 0 when the root is
    non-positive (the product is priced out or its demand band is empty).
    """
    low, high = wtp.support
    w = wtp.width
    if wtp.cdf(p0) - upper_cdf >= 0.0:
        return 0.0
    u = (upper_cdf * w + low - p0) / (w - k)
    if low <= p0 - k * u <= high:
        return u
    # Price fell below the support: the whole band above it buys.
    return upper_cdf


def equilibrium_uniform_closed_form(params: MarketParams) -> FullEquilibrium:
    """Exact equilibrium for uniform WTP in the single-attractor regime.

    Works down the greenness ranks: the greenest product's share depends
    only on its own price parameters; each further product fills the WTP
    band between its price and the next surviving product's price.  A
    product whose band would be negative gets zero share and the cascade
    re-solves against the next survivor up.
    """
    wtp = params.wtp
    if not isinstance(wtp, UniformWtp):
        raise TypeError("closed-form equilibrium requires a uniform WTP distribution")
    if not params.k < wtp.width:
        raise ValueError(
            f"closed form is valid for k < width only (k={params.k}, width={wtp.width}); "
            "use green_fixed_points / equilibrium_numeric in the multiplicity regime"
        )
    n = params.n
    u = np.zeros(n)
    upper_cdf = 1.0
    for i in range(n - 1, -1, -1):
        share = _solve_uniform_share(wtp, upper_cdf, params.products[i].p0, params.k)
        u[i] = share
        if share > 0.0:
            upper_cdf = float(wtp.cdf(params.products[i].p0 - params.k * share))
    view = market_view(params, MarketState(u=u))
    d = demand_shares(params, view.prices, view.survivors)
    residual = float(np.max(np.abs(u - d)))
    return FullEquilibrium(u=u, prices=view.prices, survivors=view.survivors, residual=residual)


def equilibrium_numeric(
    params: MarketParams,
    initials: "list[np.ndarray] | None" = None,
    t_max: int = DEFAULT_T_MAX,
    tol: float = DEFAULT_TOL,
) -> NumericEquilibria:
    """Find attractors by relaxing from several initial conditions.

    Defaults to the pure states (all mass on one product) plus the empty
    market.  Endpoints are verified against the demand map and deduplicated;
    attractors of the relaxation dynamics are exactly the observable
    equilibria, so no root solver is needed.
    """
    if initials is None:
        initials = [pure_state(params.n, i) for i in range(params.n)] + [np.zeros(params.n)]
    candidates: list[np.ndarray] = []
    nonconverged: list[np.ndarray] = []
    for u0 in initials:
        u_end, converged, _ = settle(params, initial=u0, t_max=t_max, tol=tol)
        if not converged:
            nonconverged.append(np.array(u0, dtype=float))
            continue
        view = market_view(params, MarketState(u=u_end))
        d = demand_shares(params, view.prices, view.survivors)
        if float(np.max(np.abs(u_end - d))) >= RESIDUAL_TOL:
            nonconverged.append(np.array(u0, dtype=float))
            continue
        candidates.append(u_end)

    candidates.sort(key=lambda v: tuple(v))
    equilibria: list[FullEquilibrium] = []
    for u_end in candidates:
        if any(np.max(np.abs(u_end - eq.u)) < DEDUPE_TOL for eq in equilibria):
            continue
        view = market_view(params, MarketState(u=u_end))
        d = demand_shares(params, view.prices, view.survivors)
        equilibria.append(
            FullEquilibrium(
                u=u_end,
                prices=view.prices,
                survivors=view.survivors,
                residual=float(np.max(np.abs(u_end - d))),
            )
        )
    return NumericEquilibria(equilibria=tuple(equilibria), nonconverged=tuple(nonconverged))


def scanned_fraction(wtp: WtpDistribution, k: float) -> float:
    """Fraction of the WTP population swept as a share moves from 0 to 1.

    Moving a share across [0, 1] shifts that product's effective price by
    k; centered on the distribution median this covers F(c + k/2) -
    F(c - k/2) of all consumers.  Large values mean share feedback dwarfs
    the population's price heterogeneity.
    """
    c = wtp.quantile(0.5)
    return float(wtp.cdf(c + 0.5 * k) - wtp.cdf(c - 0.5 * k))


def intermediate_exit_threshold(wtp: UniformWtp, p0_top: float, k: float) -> float:
    """Zero-share price at which the second-greenest product loses its share.

    Equals the greenest product's equilibrium price (which is independent
    of everything below it): a product priced at or above that is
    eliminated.  Uniform WTP, k < width.
    """
    if not isinstance(wtp, UniformWtp):
        raise TypeError("exit thresholds are closed-form for uniform WTP only")
    if not k < wtp.width:
        raise ValueError(f"exit threshold needs k < width (k={k}, width={wtp.width})")
    top_share = _solve_uniform_share(wtp, 1.0, p0_top, k)
    return p0_top - k * top_share


def standard_excluded(
    wtp: UniformWtp, p00: float, p01: float, p0_top: float, k: float
) -> bool:
    """Whether the least-green product ends with zero share (three products).

    Two disjoint cases: the intermediate product keeps a share and its
    equilibrium price undercuts p00, or the intermediate product is itself
    priced out and the green product's price undercuts p00 directly.
    Assumes the interior regime (prices inside the support, k < width).
    """
    w = wtp.width
    p2_eq = intermediate_exit_threshold(wtp, p0_top, k)
    if p01 < p2_eq:
        p1_eq = (w * p01 - k * p2_eq) / (w - k)
        return p00 >= p1_eq
    return p00 >= p2_eq


def write_equilibria_csv(equilibria, path) -> None:
    """One row per equilibrium: index, shares, prices, survivors, residual."""
    eqs = list(equilibria)
    n = len(eqs[0].u) if eqs else 0
    header = (
        ["eq_index"]
        + [f"u_{i}" for i in range(n)]
        + [f"p_{i}" for i in range(n)]
        + ["survivors", "residual"]
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for idx, eq in enumerate(eqs):
            row = (
                [str(idx)]
                + [fmt9(x) for x in eq.u]
                + [fmt9(x) for x in eq.prices]
                + [join_ids(eq.survivors), fmt9(eq.residual)]
            )
            fh.write(",".join(row) + "\n")
