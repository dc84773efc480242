"""Domain types for customers, markets, and the value model.

A customer needs at most ``size`` units and values each unit at a latent
per-unit amount v.  Gross willingness to pay for q units is

    V(q) = v * min(q, size)                          (piecewise linear)
    V(q) = v * size**(1-a) * min(q, size)**a         (smooth, 0 < a < 1)

where the smooth variant is normalized so both forms agree at q = size.
The latent v is modeled as a linear index of observables plus a scaled
error draw:

    v = beta . X + year_effect[t] + size_effect[bin(size)] + sigma * eps

with eps standard logistic or standard normal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import ConfigurationError

ERROR_FAMILIES = ("logistic", "normal")

Interval = tuple[int, Optional[int]]  # [lo, hi) with hi=None meaning unbounded

DEFAULT_ESTIMATION_BINS: tuple[Interval, ...] = ((1, 20), (20, 50), (50, None))
DEFAULT_PRICING_BINS: tuple[Interval, ...] = (
    (0, 10),
    (10, 20),
    (20, 50),
    (50, 100),
    (100, None),
)


def interval_label(iv: Interval) -> str:
    lo, hi = iv
    return f"[{lo},{'inf' if hi is None else hi})"


def _check_intervals(intervals: tuple[Interval, ...], what: str) -> None:
    if not intervals:
        raise ValueError(f"{what}: need at least one interval")
    for (lo, hi), (lo2, _) in zip(intervals, intervals[1:]):
        if hi is None or hi != lo2 or lo >= hi:
            raise ValueError(f"{what}: intervals must be contiguous and ascending")
    if intervals[-1][1] is not None:
        raise ValueError(f"{what}: last interval must be unbounded above")


def find_interval(intervals: tuple[Interval, ...], size: int) -> int:
    """Index of the interval containing ``size``; raises if none does."""
    for k, (lo, hi) in enumerate(intervals):
        if size >= lo and (hi is None or size < hi):
            return k
    raise ConfigurationError(f"size {size} falls outside every interval")


@dataclass(frozen=True)
class SizeBinConfig:
    """Size groupings: coarse bins for demand fixed effects, finer bins for
    tariff segments.  Both lists cover all admissible sizes."""

    estimation_bins: tuple[Interval, ...] = DEFAULT_ESTIMATION_BINS
    pricing_bins: tuple[Interval, ...] = DEFAULT_PRICING_BINS

    def __post_init__(self):
        object.__setattr__(
            self, "estimation_bins", tuple(tuple(iv) for iv in self.estimation_bins)
        )
        object.__setattr__(
            self, "pricing_bins", tuple(tuple(iv) for iv in self.pricing_bins)
        )
        _check_intervals(self.estimation_bins, "estimation_bins")
        _check_intervals(self.pricing_bins, "pricing_bins")

    def estimation_bin(self, size: int) -> int:
        return find_interval(self.estimation_bins, size)

    def pricing_bin(self, size: int) -> int:
        return find_interval(self.pricing_bins, size)

    @property
    def pricing_starts(self) -> tuple[int, ...]:
        return tuple(lo for lo, _ in self.pricing_bins)

    @property
    def pricing_labels(self) -> tuple[str, ...]:
        return tuple(interval_label(iv) for iv in self.pricing_bins)


@dataclass(frozen=True)
class CustomerRecord:
    """One potential deal.

    ``size`` is the number of units the customer needs (for failed deals,
    the size it was considering); ``success`` flags whether the deal closed;
    ``observed_unit_price`` is the $/unit it faced; ``snc_value`` is the
    service-and-consulting cost booked against the deal.
    """

    id: str
    year: int
    covariates: Mapping[str, float]
    size: int
    success: int
    observed_unit_price: float
    snc_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "covariates", dict(self.covariates))
        if self.size < 1:
            raise ValueError(f"record {self.id}: size must be >= 1, got {self.size}")
        if self.success not in (0, 1):
            raise ValueError(f"record {self.id}: success must be 0 or 1")
        if self.observed_unit_price < 0:
            raise ValueError(f"record {self.id}: unit price must be nonnegative")
        if self.snc_value < 0:
            raise ValueError(f"record {self.id}: snc_value must be nonnegative")


@dataclass(frozen=True)
class ValueModel:
    """Parameters of the conditional distribution of per-unit value.

    The intercept rides inside ``beta`` as a constant covariate; the base
    year and the first size bin are normalized to zero effect.  ``sigma``
    scales a standard logistic or standard normal error.  ``smoothness`` = 1
    reproduces the piecewise-linear value function exactly; values below 1
    bend it toward diminishing returns.
    """

    beta: Mapping[str, float]
    year_effects: Mapping[int, float]
    size_effects: Mapping[Interval, float]
    sigma: float
    error_family: str = "logistic"
    smoothness: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "beta", dict(self.beta))
        object.__setattr__(self, "year_effects", dict(self.year_effects))
        object.__setattr__(
            self,
            "size_effects",
            {tuple(iv): float(g) for iv, g in self.size_effects.items()},
        )
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.error_family not in ERROR_FAMILIES:
            raise ValueError(f"unknown error family {self.error_family!r}")
        if not 0 < self.smoothness <= 1:
            raise ValueError("smoothness must lie in (0, 1]")

    @property
    def size_intervals(self) -> tuple[Interval, ...]:
        return tuple(sorted(self.size_effects, key=lambda iv: iv[0]))


@dataclass(frozen=True)
class CostParams:
    """Per-deal fixed cost c1 ($/customer) and marginal cost c2 ($/unit)."""

    c1: float
    c2: float

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("cost parameters must be nonnegative")


@dataclass(frozen=True)
class Market:
    """A population of potential customers with a fitted (or true) value
    model and calibrated costs.  The customer list doubles as the empirical
    size distribution: each record carries weight 1/N."""

    customers: tuple[CustomerRecord, ...]
    value_model: ValueModel
    costs: CostParams
    bins: SizeBinConfig = field(default_factory=SizeBinConfig)

    def __post_init__(self):
        object.__setattr__(self, "customers", tuple(self.customers))
        if not self.customers:
            raise ValueError("market needs at least one customer")

    def __len__(self) -> int:
        return len(self.customers)

    def size_pmf(self) -> dict[int, float]:
        counts: dict[int, int] = {}
        for c in self.customers:
            counts[c.size] = counts.get(c.size, 0) + 1
        n = len(self.customers)
        return {s: counts[s] / n for s in sorted(counts)}

    def mean_values(self) -> np.ndarray:
        """mu_i for every customer, in customer order."""
        return np.array([mean_value(self.value_model, c) for c in self.customers])

    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.customers], dtype=np.int64)


def mean_value(model: ValueModel, customer: CustomerRecord) -> float:
    """Deterministic part of the customer's per-unit value, in $/unit."""
    mu = 0.0
    for name, coef in model.beta.items():
        if name not in customer.covariates:
            raise ConfigurationError(
                f"record {customer.id}: missing covariate {name!r}"
            )
        mu += coef * customer.covariates[name]
    if customer.year not in model.year_effects:
        raise ConfigurationError(
            f"record {customer.id}: no year effect for {customer.year}"
        )
    mu += model.year_effects[customer.year]
    intervals = model.size_intervals
    mu += model.size_effects[intervals[find_interval(intervals, customer.size)]]
    return mu


def gross_value(model: ValueModel, v: float, size: int, q: float) -> float:
    """Willingness to pay for q units, in dollars.

    Flat beyond ``size``; exactly v * min(q, size) when smoothness is 1.
    """
    if q < 0:
        raise ValueError(f"quantity must be nonnegative, got {q}")
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    a = model.smoothness
    if a == 1.0:
        return v * min(q, size)
    return v * size ** (1.0 - a) * min(q, size) ** a
