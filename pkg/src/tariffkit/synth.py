"""Seeded synthetic market generator.

Real deal data in this domain is proprietary, so every verification path in
the package runs against markets drawn here.  Given generator settings and a
seed, the draw is fully reproducible: covariates are sampled in declared
order, then years, sizes, error draws, and cost tiers, and finally each
customer's purchase decision under the observed tariff determines the deal
outcome.  Latent values are returned alongside the observable records so
tests can use them as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .choice import solve_purchase, solve_purchase_many
from .errors import ConfigurationError
from .market import (
    CostParams,
    CustomerRecord,
    Market,
    SizeBinConfig,
    ValueModel,
    find_interval,
)
from .tariff import PriceSchedule, total_price_vector

#: Cost tiers for the service-and-consulting component, $/deal.
SNC_TIERS = (1868.0, 4670.0, 9340.0)


@dataclass(frozen=True)
class CovariateSpec:
    """How to draw one named covariate.

    dist is one of const, normal, lognormal, uniform, bernoulli; params are
    (value,), (mean, sd), (mean, sd of log), (lo, hi), (p,) respectively.
    """

    name: str
    dist: str
    params: tuple[float, ...]

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.dist == "const":
            return np.full(n, self.params[0])
        if self.dist == "normal":
            return rng.normal(self.params[0], self.params[1], n)
        if self.dist == "lognormal":
            return rng.lognormal(self.params[0], self.params[1], n)
        if self.dist == "uniform":
            return rng.uniform(self.params[0], self.params[1], n)
        if self.dist == "bernoulli":
            return (rng.random(n) < self.params[0]).astype(float)
        raise ValueError(f"unknown covariate distribution {self.dist!r}")


@dataclass(frozen=True)
class GeneratorSettings:
    n_customers: int
    covariates: tuple[CovariateSpec, ...]
    size_pmf: dict[int, float]
    value_model: ValueModel
    costs: CostParams
    observed_schedule: PriceSchedule
    bins: SizeBinConfig = field(default_factory=SizeBinConfig)
    year_pmf: dict[int, float] | None = None
    snc_pmf: dict[float, float] | None = None

    def __post_init__(self):
        if self.n_customers <= 0:
            raise ValueError("n_customers must be positive")
        for pmf, what in ((self.size_pmf, "size_pmf"), (self.year_pmf, "year_pmf")):
            if pmf and abs(sum(pmf.values()) - 1.0) > 1e-9:
                raise ValueError(f"{what} must sum to 1")
        if any(s < 1 for s in self.size_pmf):
            raise ValueError("sizes must be >= 1")


@dataclass(frozen=True)
class SyntheticDraw:
    """A generated market plus the latent quantities behind it (oracle use
    only: real data never reveals these)."""

    market: Market
    latent_values: np.ndarray
    mean_values: np.ndarray
    intended_sizes: np.ndarray
    chosen_quantities: np.ndarray


def _categorical(rng: np.random.Generator, pmf: dict, n: int) -> np.ndarray:
    keys = sorted(pmf)
    probs = np.array([pmf[k] for k in keys], dtype=float)
    probs = probs / probs.sum()
    idx = rng.choice(len(keys), size=n, p=probs)
    return np.array(keys)[idx]


def linear_index(vm: ValueModel, cov_columns: dict[str, np.ndarray], n: int) -> np.ndarray:
    """beta . X for every row, vectorized."""
    mu = np.zeros(n)
    for name, coef in vm.beta.items():
        if name not in cov_columns:
            raise ConfigurationError(f"no generator column for covariate {name!r}")
        mu += coef * cov_columns[name]
    return mu


def generate_market(settings: GeneratorSettings, seed: int) -> SyntheticDraw:
    """Draw a market; deterministic given (settings, seed).

    The deal outcome is the customer's actual best response to the observed
    tariff, so under a non-concave tariff a successful deal records the
    re-priced quantity rather than the intended size, exactly the distortion
    the concavity-dip filter exists to drop.
    """
    rng = np.random.default_rng(seed)
    n = settings.n_customers
    vm = settings.value_model

    cov_draws = {spec.name: spec.draw(rng, n) for spec in settings.covariates}
    year_pmf = settings.year_pmf or {min(vm.year_effects): 1.0}
    years = _categorical(rng, year_pmf, n).astype(int)
    sizes = _categorical(rng, settings.size_pmf, n).astype(np.int64)

    if vm.error_family == "logistic":
        eps = rng.logistic(0.0, 1.0, n)
    else:
        eps = rng.standard_normal(n)

    snc_pmf = settings.snc_pmf or {t: 1.0 / len(SNC_TIERS) for t in SNC_TIERS}
    sncs = _categorical(rng, snc_pmf, n).astype(float)

    mu = linear_index(vm, cov_draws, n)
    year_lookup = dict(vm.year_effects)
    try:
        mu += np.array([year_lookup[t] for t in years])
    except KeyError as exc:
        raise ConfigurationError(f"no year effect for {exc.args[0]}") from exc
    intervals = vm.size_intervals
    gamma = np.array([vm.size_effects[iv] for iv in intervals])
    size_bin = np.array([find_interval(intervals, int(s)) for s in sizes])
    mu += gamma[size_bin]

    v = mu + vm.sigma * eps
    if vm.smoothness == 1.0:
        chosen = solve_purchase_many(v, sizes, settings.observed_schedule)
    else:
        chosen = np.array(
            [
                solve_purchase(v[i], int(sizes[i]), settings.observed_schedule, vm.smoothness).quantity
                for i in range(n)
            ],
            dtype=np.int64,
        )
    bought = chosen > 0
    recorded = np.where(bought, chosen, sizes)
    prices = total_price_vector(settings.observed_schedule, recorded) / recorded

    width = len(str(n))
    records = tuple(
        CustomerRecord(
            id=f"C{i:0{width}d}",
            year=int(years[i]),
            covariates={name: float(col[i]) for name, col in cov_draws.items()},
            size=int(recorded[i]),
            success=int(bought[i]),
            observed_unit_price=float(prices[i]),
            snc_value=float(sncs[i]),
        )
        for i in range(n)
    )

    market = Market(
        customers=records,
        value_model=vm,
        costs=settings.costs,
        bins=settings.bins,
    )
    return SyntheticDraw(
        market=market,
        latent_values=v,
        mean_values=mu,
        intended_sizes=sizes,
        chosen_quantities=chosen,
    )
