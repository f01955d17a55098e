"""Time evolution of market shares.

Each step, a fraction ``lam`` of consumers re-chooses according to the
current prices while the rest keep what they have:

    u(t+1) = (1 - lam) * u(t) + lam * demand(u(t))

The update is synchronous: all prices are computed from the pre-step state,
then all shares move at once.  Eliminated products receive zero demand, so
their installed share decays geometrically by (1 - lam) per step.

``simulate`` records a full trajectory and supports piecewise-constant
parameter interventions (temporary price cuts, subsidies on ``k``) plus
one-shot share injections, formalizing "bring the green share above the
separatrix for a while" policy experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import fmt9, join_ids
from .market import (
    MarketParams,
    MarketState,
    demand_shares,
    effective_prices,
    parse_param_path,
    rank_and_eliminate,
    set_param,
)

__all__ = [
    "Intervention",
    "Trajectory",
    "step",
    "simulate",
    "settle",
    "pure_state",
    "DEFAULT_T_MAX",
    "DEFAULT_TOL",
]

DEFAULT_T_MAX = 100_000
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class Intervention:
    """Temporary override of one parameter, or a one-shot share injection.

    Parameter targets (``"k"``, ``"p0[i]"``) are overridden for steps
    ``t_start <= t < t_end``; ``mode`` selects whether ``value`` replaces
    the parameter or is added to it.  A ``"share[i]"`` target fires once at
    ``t_start`` and moves share mass into (or out of) product ``i``,
    sourcing it proportionally from the other products and the non-buyers.
    """

    t_start: int
    t_end: int
    target: str
    value: float
    mode: str = "set"

    def __post_init__(self) -> None:
        if self.t_start < 0 or self.t_start > self.t_end:
            raise ValueError(
                f"intervention needs 0 <= t_start <= t_end, got [{self.t_start}, {self.t_end}]"
            )
        if self.mode not in ("set", "add"):
            raise ValueError(f"intervention mode must be 'set' or 'add', got {self.mode!r}")


@dataclass
class Trajectory:
    """Recorded simulation run.

    One record per step: shares, effective prices, surviving product ids
    and the non-buyer share (1 - sum of shares).  ``t_converged`` is the
    step at which consecutive share changes first fell below the tolerance
    (None if the run hit ``t_max`` first).
    """

    t: np.ndarray
    u: np.ndarray
    prices: np.ndarray
    survivors: list[tuple[int, ...]]
    nonbuyers: np.ndarray
    converged: bool
    t_converged: "int | None"

    @property
    def final_u(self) -> np.ndarray:
        return self.u[-1]

    def write_csv(self, path) -> None:
        n = self.u.shape[1]
        header = (
            ["t"]
            + [f"u_{i}" for i in range(n)]
            + [f"p_{i}" for i in range(n)]
            + ["nonbuyers", "survivors"]
        )
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for j in range(len(self.t)):
                row = (
                    [str(int(self.t[j]))]
                    + [fmt9(x) for x in self.u[j]]
                    + [fmt9(x) for x in self.prices[j]]
                    + [fmt9(self.nonbuyers[j]), join_ids(self.survivors[j])]
                )
                fh.write(",".join(row) + "\n")


def pure_state(n: int, product_id: int) -> np.ndarray:
    """Share vector with all mass on one product."""
    u = np.zeros(n)
    u[product_id] = 1.0
    return u


def step(params: MarketParams, state: MarketState) -> MarketState:
    """One synchronous relaxation step from the given state."""
    prices = effective_prices(params, state)
    survivors = rank_and_eliminate(prices)
    d = demand_shares(params, prices, survivors)
    u_next = np.clip((1.0 - params.lam) * state.u + params.lam * d, 0.0, 1.0)
    return MarketState(u=u_next, t=state.t + 1)


def _inject_share(u: np.ndarray, idx: int, value: float, mode: str) -> np.ndarray:
    """Move share mass into product ``idx`` (out of it for negative moves).

    The difference is sourced proportionally from the other products and
    the non-buyer pool, so the total stays bounded by one.
    """
    target = u[idx] + value if mode == "add" else value
    target = min(max(target, 0.0), 1.0)
    delta = target - u[idx]
    pool = 1.0 - u[idx]  # other products plus non-buyers
    if pool <= 0.0:
        # nothing to draw on: a reduction releases mass to the non-buyers
        out = u.copy()
        out[idx] = target
        return out
    delta = min(delta, pool)
    factor = (pool - delta) / pool
    out = u * factor
    out[idx] = u[idx] + delta
    return out


def _effective(
    base: MarketParams, schedule: "tuple[Intervention, ...]", t: int
) -> MarketParams:
    """Parameters in force at step ``t`` (overrides applied in list order)."""
    params = base
    for iv in schedule:
        if iv.target.startswith("share"):
            continue
        if iv.t_start <= t < iv.t_end:
            name, idx = parse_param_path(iv.target, base.n)
            current = params.k if name == "k" else params.products[idx].p0
            value = current + iv.value if iv.mode == "add" else iv.value
            params = set_param(params, iv.target, value)
    return params


def simulate(
    params: MarketParams,
    initial: "MarketState | np.ndarray | None" = None,
    t_max: int = DEFAULT_T_MAX,
    tol: float = DEFAULT_TOL,
    schedule: "tuple[Intervention, ...] | list[Intervention]" = (),
) -> Trajectory:
    """Iterate the relaxation map until shares settle or ``t_max`` is hit.

    Convergence is declared when the largest per-product share change
    between consecutive steps drops below ``tol``, and only once every
    scheduled intervention has ended.  Non-convergence is reported in the
    result, not raised.  The default start is all mass on product 0 (the
    least green product is the incumbent).
    """
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    if not tol > 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    schedule = tuple(schedule)
    for iv in schedule:
        name, _ = parse_param_path(iv.target, params.n)
        if name == "lambda":
            raise ValueError("interventions may target k, p0[i] or share[i], not lambda")

    if initial is None:
        state_u = pure_state(params.n, 0)
    elif isinstance(initial, MarketState):
        state_u = np.array(initial.u, dtype=float)
    else:
        state_u = np.array(initial, dtype=float)
    MarketState(u=state_u)  # validate

    last_end = max((iv.t_end for iv in schedule), default=0)

    ts: list[int] = []
    us: list[np.ndarray] = []
    ps: list[np.ndarray] = []
    survivor_sets: list[tuple[int, ...]] = []
    converged = False
    t_converged: "int | None" = None

    u = state_u
    t = 0
    while True:
        for iv in schedule:
            if iv.target.startswith("share") and iv.t_start == t:
                _, idx = parse_param_path(iv.target, params.n)
                u = _inject_share(u, idx, iv.value, iv.mode)
        eff = _effective(params, schedule, t)
        prices = eff.p0 - eff.k * u
        survivors = rank_and_eliminate(prices)
        ts.append(t)
        us.append(u)
        ps.append(prices)
        survivor_sets.append(tuple(survivors))
        if converged or t >= t_max:
            break
        d = demand_shares(eff, prices, survivors)
        u_next = np.clip((1.0 - eff.lam) * u + eff.lam * d, 0.0, 1.0)
        if t >= last_end and np.max(np.abs(u_next - u)) < tol:
            converged = True
            t_converged = t + 1
        u = u_next
        t += 1

    u_arr = np.array(us)
    return Trajectory(
        t=np.array(ts, dtype=int),
        u=u_arr,
        prices=np.array(ps),
        survivors=survivor_sets,
        nonbuyers=1.0 - u_arr.sum(axis=1),
        converged=converged,
        t_converged=t_converged,
    )


def settle(
    params: MarketParams,
    initial: "np.ndarray | None" = None,
    t_max: int = DEFAULT_T_MAX,
    tol: float = DEFAULT_TOL,
) -> tuple[np.ndarray, bool, "int | None"]:
    """Endpoint-only version of ``simulate`` (no schedule, no recording).

    Returns ``(final shares, converged, steps taken)``.  Used by the batch
    sweeps and the multi-start equilibrium search, where trajectories would
    only burn memory.
    """
    u = pure_state(params.n, 0) if initial is None else np.array(initial, dtype=float)
    p0 = params.p0
    k = params.k
    lam = params.lam
    wtp = params.wtp
    n = params.n
    for t in range(t_max):
        prices = p0 - k * u
        survivors = rank_and_eliminate(prices)
        d = np.zeros(n)
        cdf_at = wtp.cdf(prices[survivors])
        upper = 1.0
        for pos in range(len(survivors) - 1, -1, -1):
            d[survivors[pos]] = upper - cdf_at[pos]
            upper = cdf_at[pos]
        u_next = np.clip((1.0 - lam) * u + lam * d, 0.0, 1.0)
        if np.max(np.abs(u_next - u)) < tol:
            return u_next, True, t + 1
        u = u_next
    return u, False, None
