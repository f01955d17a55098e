"""Batch parameter-space exploration.

Regime maps run the relaxation dynamics to its attractor on a grid of
parameter values; hysteresis scans run every axis value twice, once from a
green-saturated market and once from a standard-only market, and report
where the two branches disagree.  Grid cells are pure, independent
computations, so they can be farmed out to a process pool; results are
assembled by cell index and are bit-identical whether computed serially or
concurrently.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._util import fmt9, join_ids
from .dynamics import DEFAULT_T_MAX, DEFAULT_TOL, pure_state, settle
from .market import MarketParams, parse_param_path, rank_and_eliminate, set_param

__all__ = [
    "Axis",
    "SweepSpec",
    "SweepResult",
    "HysteresisResult",
    "sweep2d",
    "hysteresis_sweep",
    "surface",
]

SURVIVING_SHARE = 1e-6
BRANCH_DIFF = 1e-3
DEFAULT_MAP_STEPS = 101
DEFAULT_HYSTERESIS_STEPS = 241

PROTOCOLS = ("independent-init", "continuation")


@dataclass(frozen=True)
class Axis:
    """One swept parameter: path, range and number of grid points.

    A single-point axis (steps=1, start == stop) degenerates the sweep to
    plain simulation along that dimension.
    """

    param: str
    start: float
    stop: float
    steps: int = DEFAULT_MAP_STEPS

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError(f"axis {self.param!r} needs steps >= 1, got {self.steps}")
        if self.steps == 1:
            if self.start != self.stop:
                raise ValueError(
                    f"axis {self.param!r} with steps=1 needs start == stop, "
                    f"got [{self.start}, {self.stop}]"
                )
        elif not self.start < self.stop:
            raise ValueError(
                f"axis {self.param!r} needs start < stop, got [{self.start}, {self.stop}]"
            )

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class SweepSpec:
    """A 1-D or 2-D sweep: base parameters, axes, starts, and protocol.

    ``independent-init`` (the default) relaxes every cell from each listed
    initial condition.  ``continuation`` chains cells along axis1 instead,
    warm-starting each cell from the previous cell's endpoint; that is the
    standard numerical-hysteresis protocol, provided as an option.
    """

    base: MarketParams
    axis1: Axis
    axis2: "Axis | None" = None
    initial_conditions: "tuple | None" = None
    protocol: str = "independent-init"

    def __post_init__(self) -> None:
        parse_param_path(self.axis1.param, self.base.n)
        if self.axis2 is not None:
            parse_param_path(self.axis2.param, self.base.n)
        for axis in (self.axis1, self.axis2):
            if axis is not None and axis.param.startswith("share"):
                raise ValueError("sweep axes address parameters, not shares")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")

    def initials(self) -> list[np.ndarray]:
        if self.initial_conditions is None:
            return [pure_state(self.base.n, 0)]
        return [np.array(u, dtype=float) for u in self.initial_conditions]


@dataclass
class SweepResult:
    """Gridded asymptotics.

    ``u`` has shape (axis1, axis2, initial condition, product).  The regime
    arrays summarize each cell: how many products keep a share above 1e-6
    (for the first initial condition) and how many distinct attractors the
    initial conditions reached.
    """

    spec: SweepSpec
    axis1_values: np.ndarray
    axis2_values: "np.ndarray | None"
    u: np.ndarray
    converged: np.ndarray
    survivors: list
    survivor_count: np.ndarray
    multiplicity: np.ndarray

    def write_csv(self, path) -> None:
        n = self.u.shape[3]
        header = (
            ["axis1", "axis2", "init_idx"]
            + [f"u_{i}" for i in range(n)]
            + ["survivors", "converged"]
        )
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("# " + ",".join(header) + "\n")
            for i1, a1 in enumerate(self.axis1_values):
                a2_vals = self.axis2_values if self.axis2_values is not None else [float("nan")]
                for i2, a2 in enumerate(a2_vals):
                    for j in range(self.u.shape[2]):
                        row = (
                            [fmt9(a1), fmt9(a2), str(j)]
                            + [fmt9(x) for x in self.u[i1, i2, j]]
                            + [join_ids(self.survivors[i1][i2][j]), str(int(self.converged[i1, i2, j]))]
                        )
                        fh.write(",".join(row) + "\n")


@dataclass
class HysteresisResult:
    """Dual-branch scan of one parameter.

    ``branch_high`` holds the asymptotic top-product share starting from a
    market saturated with the greenest product; ``branch_low`` starts from
    the standard-only market.  ``window`` brackets the axis values where
    the branches differ by more than 1e-3 (None when they never do).
    """

    axis_param: str
    axis_values: np.ndarray
    branch_high: np.ndarray
    branch_low: np.ndarray
    converged_high: np.ndarray
    converged_low: np.ndarray
    window: "tuple[float, float] | None"
    protocol: str

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("# axis,u2_high_branch,u2_low_branch,differs\n")
            for j, a in enumerate(self.axis_values):
                differs = int(abs(self.branch_high[j] - self.branch_low[j]) > BRANCH_DIFF)
                fh.write(
                    f"{fmt9(a)},{fmt9(self.branch_high[j])},{fmt9(self.branch_low[j])},{differs}\n"
                )


def _resolve_jobs(jobs: "int | None") -> int:
    if jobs is None:
        jobs = os.cpu_count() or 1
    return max(1, int(jobs))


def _cell_params(base: MarketParams, overrides) -> MarketParams:
    params = base
    for path, value in overrides:
        params = set_param(params, path, float(value))
    return params


def _run_cell(task):
    """One grid cell: relax every initial condition to its attractor."""
    base, overrides, initials, t_max, tol = task
    params = _cell_params(base, overrides)
    out = []
    for u0 in initials:
        u_end, converged, _ = settle(params, initial=u0, t_max=t_max, tol=tol)
        survivors = tuple(rank_and_eliminate(params.p0 - params.k * u_end))
        out.append((u_end, converged, survivors))
    return out


def _run_chain(task):
    """One continuation chain along axis1 (fixed axis2 cell, fixed start)."""
    base, override_lists, u0, t_max, tol = task
    out = []
    u_start = u0
    for overrides in override_lists:
        params = _cell_params(base, overrides)
        u_end, converged, _ = settle(params, initial=u_start, t_max=t_max, tol=tol)
        survivors = tuple(rank_and_eliminate(params.p0 - params.k * u_end))
        out.append((u_end, converged, survivors))
        u_start = u_end
    return out


def _map_tasks(tasks, worker, jobs: int):
    if jobs == 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    chunksize = max(1, len(tasks) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks, chunksize=chunksize))


def _distinct_endpoints(cell_u: np.ndarray) -> int:
    reps: list[np.ndarray] = []
    for u in cell_u:
        if not any(np.max(np.abs(u - r)) < SURVIVING_SHARE for r in reps):
            reps.append(u)
    return len(reps)


def sweep2d(
    spec: SweepSpec,
    t_max: int = DEFAULT_T_MAX,
    tol: float = DEFAULT_TOL,
    jobs: "int | None" = None,
) -> SweepResult:
    """Evaluate the asymptotic market on a parameter grid.

    Cells are independent (or chained along axis1 under the continuation
    protocol) and non-convergence is recorded per cell rather than raised.
    """
    jobs = _resolve_jobs(jobs)
    a1 = spec.axis1.values
    a2 = spec.axis2.values if spec.axis2 is not None else None
    n1 = len(a1)
    n2 = len(a2) if a2 is not None else 1
    initials = spec.initials()
    n_init = len(initials)
    n = spec.base.n

    u = np.zeros((n1, n2, n_init, n))
    converged = np.zeros((n1, n2, n_init), dtype=bool)
    survivors: list = [[[None] * n_init for _ in range(n2)] for _ in range(n1)]

    def overrides(i1: int, i2: int):
        ov = [(spec.axis1.param, a1[i1])]
        if a2 is not None:
            ov.append((spec.axis2.param, a2[i2]))
        return tuple(ov)

    if spec.protocol == "independent-init":
        tasks = [
            (spec.base, overrides(i1, i2), initials, t_max, tol)
            for i1 in range(n1)
            for i2 in range(n2)
        ]
        results = _map_tasks(tasks, _run_cell, jobs)
        for flat, cell in enumerate(results):
            i1, i2 = divmod(flat, n2)
            for j, (u_end, conv, surv) in enumerate(cell):
                u[i1, i2, j] = u_end
                converged[i1, i2, j] = conv
                survivors[i1][i2][j] = surv
    else:
        tasks = [
            (
                spec.base,
                [overrides(i1, i2) for i1 in range(n1)],
                initials[j],
                t_max,
                tol,
            )
            for i2 in range(n2)
            for j in range(n_init)
        ]
        results = _map_tasks(tasks, _run_chain, jobs)
        for flat, chain in enumerate(results):
            i2, j = divmod(flat, n_init)
            for i1, (u_end, conv, surv) in enumerate(chain):
                u[i1, i2, j] = u_end
                converged[i1, i2, j] = conv
                survivors[i1][i2][j] = surv

    survivor_count = (u > SURVIVING_SHARE).sum(axis=3)
    multiplicity = np.zeros((n1, n2), dtype=int)
    for i1 in range(n1):
        for i2 in range(n2):
            multiplicity[i1, i2] = _distinct_endpoints(u[i1, i2])

    return SweepResult(
        spec=spec,
        axis1_values=a1,
        axis2_values=a2,
        u=u,
        converged=converged,
        survivors=survivors,
        survivor_count=survivor_count,
        multiplicity=multiplicity,
    )


def _window_from_branches(axis_values, high, low) -> "tuple[float, float] | None":
    differs = np.abs(high - low) > BRANCH_DIFF
    if not differs.any():
        return None
    idx = np.nonzero(differs)[0]
    return (float(axis_values[idx[0]]), float(axis_values[idx[-1]]))


def hysteresis_sweep(
    base: MarketParams,
    start: float,
    stop: float,
    steps: int = DEFAULT_HYSTERESIS_STEPS,
    axis_param: "str | None" = None,
    protocol: str = "independent-init",
    t_max: int = DEFAULT_T_MAX,
    tol: float = DEFAULT_TOL,
    jobs: "int | None" = None,
) -> HysteresisResult:
    """Scan one parameter with both extreme starting markets.

    The default axis is the greenest product's zero-share price.  Under
    the default protocol each axis value is relaxed twice, independently:
    from all-green and from all-standard.  Under ``continuation`` the scan
    instead walks the axis upward warm-starting from the previous endpoint
    (this traces the high branch) and downward (low branch).
    """
    if steps < 50:
        raise ValueError(f"hysteresis sweep needs steps >= 50 to resolve the window, got {steps}")
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    if axis_param is None:
        axis_param = f"p0[{base.n - 1}]"
    axis = Axis(param=axis_param, start=start, stop=stop, steps=steps)
    top = base.n - 1
    green_start = pure_state(base.n, top)
    standard_start = pure_state(base.n, 0)

    if protocol == "independent-init":
        spec = SweepSpec(
            base=base,
            axis1=axis,
            initial_conditions=(green_start, standard_start),
        )
        result = sweep2d(spec, t_max=t_max, tol=tol, jobs=jobs)
        branch_high = result.u[:, 0, 0, top].copy()
        branch_low = result.u[:, 0, 1, top].copy()
        conv_high = result.converged[:, 0, 0].copy()
        conv_low = result.converged[:, 0, 1].copy()
    else:
        values = axis.values
        ups = [(axis_param, v) for v in values]
        downs = list(reversed(ups))
        high_chain, low_chain = _map_tasks(
            [
                (base, [(ov,) for ov in ups], green_start, t_max, tol),
                (base, [(ov,) for ov in downs], standard_start, t_max, tol),
            ],
            _run_chain,
            _resolve_jobs(jobs),
        )
        branch_high = np.array([cell[0][top] for cell in high_chain])
        conv_high = np.array([cell[1] for cell in high_chain], dtype=bool)
        branch_low = np.array([cell[0][top] for cell in reversed(low_chain)])
        conv_low = np.array([cell[1] for cell in reversed(low_chain)], dtype=bool)

    return HysteresisResult(
        axis_param=axis_param,
        axis_values=axis.values,
        branch_high=branch_high,
        branch_low=branch_low,
        converged_high=conv_high,
        converged_low=conv_low,
        window=_window_from_branches(axis.values, branch_high, branch_low),
        protocol=protocol,
    )


def surface(
    base: MarketParams,
    k_axis: "tuple[float, float, int]",
    p0_axis: "tuple[float, float, int]",
    t_max: int = DEFAULT_T_MAX,
    tol: float = DEFAULT_TOL,
    jobs: "int | None" = None,
) -> SweepResult:
    """Dual-branch grid over the returns slope and the top product's price.

    Each cell is relaxed from all-green and from all-standard; where the
    two endpoints differ the cell sits inside the hysteresis region, and
    the first-difference locus tracks the fold curves.  The region closes
    when the returns slope drops to the WTP width.
    """
    top = base.n - 1
    spec = SweepSpec(
        base=base,
        axis1=Axis("k", *k_axis),
        axis2=Axis(f"p0[{top}]", *p0_axis),
        initial_conditions=(pure_state(base.n, top), pure_state(base.n, 0)),
    )
    return sweep2d(spec, t_max=t_max, tol=tol, jobs=jobs)
