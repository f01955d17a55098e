"""Willingness-to-pay (WTP) distributions.

A WTP distribution describes how reservation prices are spread across the
consumer population: ``cdf(x)`` is the fraction of consumers whose maximum
acceptable price is at most ``x``.  Two stylized shapes are built in, a
uniform distribution on an interval and a logistic (S-shaped) one.  Both are
immutable and safe to share between concurrent evaluations.

The ``width`` of a distribution is the inverse of the steepest slope of its
cdf.  It is the scale against which the returns-to-scale coefficient ``k``
is compared when deciding whether multiple market equilibria can coexist.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit as _logit

__all__ = [
    "WtpDistribution",
    "UniformWtp",
    "LogitWtp",
    "distribution_from_config",
]


class WtpDistribution(ABC):
    """Cumulative distribution of reservation prices.

    Implementations must provide a non-decreasing ``cdf`` defined on the
    whole real line with limits 0 and 1, the matching density and quantile
    function, a ``width`` (inverse of the maximum cdf slope) and finite or
    infinite ``support`` bounds.
    """

    @abstractmethod
    def cdf(self, x):
        """Fraction of consumers willing to pay at most ``x``."""

    @abstractmethod
    def pdf(self, x):
        """Density of reservation prices at ``x``."""

    @abstractmethod
    def quantile(self, q: float) -> float:
        """Inverse cdf on the interior of the support.  Requires 0 < q < 1."""

    @property
    @abstractmethod
    def width(self) -> float:
        """Inverse slope of the cdf at its steepest point."""

    @property
    @abstractmethod
    def support(self) -> tuple[float, float]:
        """(lower, upper) bounds outside which the cdf is flat."""

    def _check_quantile_arg(self, q: float) -> None:
        if not 0.0 < q < 1.0:
            raise ValueError(f"quantile level must lie strictly in (0, 1), got {q}")


@dataclass(frozen=True)
class UniformWtp(WtpDistribution):
    """Uniform WTP on [low, high]: the cdf rises linearly across the support."""

    low: float
    high: float

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ValueError(f"uniform WTP needs low < high, got [{self.low}, {self.high}]")
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ValueError("uniform WTP bounds must be finite")

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.low) / self.width, 0.0, 1.0)[()]

    def pdf(self, x):
        # Constant 1/width inside the support. The boundary is assigned the
        # interior value at `low` and 0 at `high` (measure-zero convention).
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.low) & (x < self.high), 1.0 / self.width, 0.0)[()]

    def quantile(self, q: float) -> float:
        self._check_quantile_arg(q)
        return self.low + q * self.width

    @property
    def width(self) -> float:
        return self.high - self.low

    @property
    def support(self) -> tuple[float, float]:
        return (self.low, self.high)


@dataclass(frozen=True)
class LogitWtp(WtpDistribution):
    """Logistic WTP: cdf(x) = 1 / (1 + exp(-beta * (x - center))).

    ``beta`` controls steepness; the width (inverse slope at the inflexion
    point, which sits at ``center``) is 4/beta.  ``center`` defaults to 0,
    matching the canonical centered form; a nonzero center shifts the whole
    curve so the distribution can be placed against arbitrary price ranges.
    """

    center: float = 0.0
    beta: float = 4.0

    def __post_init__(self) -> None:
        if not self.beta > 0.0:
            raise ValueError(f"logit WTP needs beta > 0, got {self.beta}")

    @classmethod
    def from_width(cls, center: float, width: float) -> "LogitWtp":
        """Build from the width instead of the steepness (beta = 4/width)."""
        if not width > 0.0:
            raise ValueError(f"logit WTP needs width > 0, got {width}")
        return cls(center=center, beta=4.0 / width)

    def cdf(self, x):
        return expit(self.beta * (np.asarray(x, dtype=float) - self.center))[()]

    def pdf(self, x):
        f = self.cdf(x)
        return self.beta * f * (1.0 - f)

    def quantile(self, q: float) -> float:
        self._check_quantile_arg(q)
        return self.center + float(_logit(q)) / self.beta

    @property
    def width(self) -> float:
        return 4.0 / self.beta

    @property
    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)


def distribution_from_config(block: dict) -> WtpDistribution:
    """Build a distribution from a config mapping.

    Accepted forms::

        { kind = "uniform", min = 0.0, max = 1.0 }
        { kind = "logit", center = 0.0, width = 1.0 }
    """
    if "kind" not in block:
        raise ValueError("distribution block is missing the 'kind' key")
    kind = block["kind"]
    if kind == "uniform":
        required = {"kind", "min", "max"}
    elif kind == "logit":
        required = {"kind", "center", "width"}
    else:
        raise ValueError(f"unknown distribution kind {kind!r} (expected 'uniform' or 'logit')")
    missing = required - set(block)
    if missing:
        raise ValueError(f"distribution block is missing key '{sorted(missing)[0]}'")
    unknown = set(block) - required
    if unknown:
        raise ValueError(f"unknown key '{sorted(unknown)[0]}' in distribution block")
    if kind == "uniform":
        return UniformWtp(low=float(block["min"]), high=float(block["max"]))
    return LogitWtp.from_width(center=float(block["center"]), width=float(block["width"]))
