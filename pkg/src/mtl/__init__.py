"""Market transition lab.

Deterministic simulation and equilibrium analysis of competition between
quality-ranked products whose prices fall with market share, under a
heterogeneous willingness-to-pay population: time evolutions, fixed points
and their stability, regime maps, and hysteresis scans.
"""

from .distributions import LogitWtp, UniformWtp, WtpDistribution, distribution_from_config
from .dynamics import (
    DEFAULT_T_MAX,
    DEFAULT_TOL,
    Intervention,
    Trajectory,
    pure_state,
    settle,
    simulate,
    step,
)
from .equilibrium import (
    FixedPoint,
    FixedPointSet,
    FullEquilibrium,
    NumericEquilibria,
    equilibrium_numeric,
    equilibrium_uniform_closed_form,
    fold_points,
    green_fixed_points,
    intermediate_exit_threshold,
    multiplicity_threshold,
    scanned_fraction,
    standard_excluded,
)
from .market import (
    MarketParams,
    MarketState,
    MarketView,
    ProductSpec,
    demand_shares,
    effective_prices,
    market_view,
    rank_and_eliminate,
    set_param,
)
from .sweep import (
    Axis,
    HysteresisResult,
    SweepResult,
    SweepSpec,
    hysteresis_sweep,
    surface,
    sweep2d,
)

__version__ = "0.1.0"

__all__ = [
    "WtpDistribution",
    "UniformWtp",
    "LogitWtp",
    "distribution_from_config",
    "ProductSpec",
    "MarketParams",
    "MarketState",
    "MarketView",
    "effective_prices",
    "rank_and_eliminate",
    "demand_shares",
    "market_view",
    "set_param",
    "Intervention",
    "Trajectory",
    "step",
    "simulate",
    "settle",
    "pure_state",
    "DEFAULT_T_MAX",
    "DEFAULT_TOL",
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
    "Axis",
    "SweepSpec",
    "SweepResult",
    "HysteresisResult",
    "sweep2d",
    "hysteresis_sweep",
    "surface",
    "__version__",
]
