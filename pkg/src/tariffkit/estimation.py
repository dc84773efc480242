"""Demand estimation from deal records.

The size distribution is read directly off the data (successful and failed
deals pooled).  The value model is a maximum-likelihood fit of the binary
deal outcome: a deal closes when the latent per-unit value clears the
per-unit price the customer faced, so each record contributes the
probability that the predicted outcome matches the observed one.

Because price variation is scarce, the sample is augmented with a zero-price
copy of itself in which every deal succeeds: the assumption that essentially
everyone would buy at a price of zero is what pins down the price response.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize as sciopt
from scipy.special import expit, log_ndtr

from .dist import cdf
from .errors import ConfigurationError
from .market import (
    CostParams,
    CustomerRecord,
    Interval,
    SizeBinConfig,
    ValueModel,
    find_interval,
    mean_value,
)
from .tariff import Q_MAX, PriceSchedule, is_concave_increasing, unit_price

#: Suffix marking the zero-price augmented copy of a record.
AUGMENT_TAG = "#zp"

SETUP_COST = 1253.0
PER_UNIT_COST = 601.0
SNC_FIXED_SHARE = 0.65


@dataclass(frozen=True)
class EstimationConfig:
    error_family: str = "logistic"
    bins: SizeBinConfig = field(default_factory=SizeBinConfig)
    covariate_names: tuple[str, ...] = ("const",)
    optimizer_tolerance: float = 1e-12
    sigma_floor: float = 1e-6
    bootstrap_reps: int = 0
    seed: int = 0
    max_iter: int = 500
    n_restarts: int = 4

    def __post_init__(self):
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")
        if self.bootstrap_reps < 0:
            raise ValueError("bootstrap_reps must be >= 0")


@dataclass(frozen=True)
class FitResult:
    value_model: ValueModel
    neg_log_likelihood: float
    standard_errors: dict[str, float]
    converged: bool
    size_pmf: dict[int, float]
    grad_max_norm: float
    n_obs: int
    parameter_names: tuple[str, ...]
    parameters: np.ndarray


def empirical_size_distribution(records) -> dict[int, float]:
    """Probability mass over observed sizes, one unit of weight per record,
    successes and failures pooled."""
    records = list(records)
    if not records:
        raise ValueError("cannot form a size distribution from zero records")
    counts = Counter(r.size for r in records)
    n = len(records)
    return {s: c / n for s, c in sorted(counts.items())}


def attach_unit_prices(records, schedule: PriceSchedule) -> list[CustomerRecord]:
    """Set each record's observed unit price to the break-even per-unit
    charge of its size under ``schedule`` (the segment rate, for fee-free
    via-origin tariffs)."""
    return [
        replace(r, observed_unit_price=unit_price(schedule, r.size)) for r in records
    ]


def filter_concavity_dips(records, observed_schedule: PriceSchedule, q_max: int = Q_MAX):
    """Drop records whose size sits in a dip of the observed tariff.

    A quantity undercut by a smaller one may be a re-priced purchase rather
    than the buyer's intended size, so those records cannot be trusted.
    Returns (kept, dropped_count).
    """
    _, dips = is_concave_increasing(observed_schedule, q_max)
    dipset = set(dips)
    kept = [r for r in records if r.size not in dipset]
    dropped = len(records) - len(kept)
    if records and not kept:
        warnings.warn("every record fell in a dip of the observed schedule")
    return kept, dropped


def augment_zero_price(records) -> list[CustomerRecord]:
    """Concatenate the sample with a copy in which the price is zero and
    every deal succeeds.  Output is exactly twice the input; augmenting an
    already-augmented sample is rejected."""
    records = list(records)
    if any(r.id.endswith(AUGMENT_TAG) for r in records):
        raise ValueError("records already contain zero-price augmented copies")
    copies = [
        replace(r, id=r.id + AUGMENT_TAG, observed_unit_price=0.0, success=1)
        for r in records
    ]
    return records + copies


def success_probability(model: ValueModel, record: CustomerRecord) -> float:
    """P(deal closes) = P(v >= observed unit price) under the fitted model."""
    if model.sigma <= 0:
        raise ValueError("success probability requires sigma > 0")
    mu = mean_value(model, record)
    z = (record.observed_unit_price - mu) / model.sigma
    return float(1.0 - cdf(z, model.error_family))


# -- likelihood ---------------------------------------------------------------


@dataclass(frozen=True)
class _Design:
    X: np.ndarray
    price: np.ndarray
    success: np.ndarray
    names: tuple[str, ...]
    covariate_names: tuple[str, ...]
    years: tuple[int, ...]
    intervals: tuple[Interval, ...]

    def to_model(self, theta: np.ndarray, family: str) -> ValueModel:
        coefs = dict(zip(self.names, theta[:-1]))
        beta = {name: coefs[name] for name in self.covariate_names}
        year_effects = {self.years[0]: 0.0}
        for y in self.years[1:]:
            year_effects[y] = coefs[f"year:{y}"]
        size_effects = {self.intervals[0]: 0.0}
        for iv in self.intervals[1:]:
            size_effects[iv] = coefs[f"size:{iv[0]}"]
        return ValueModel(
            beta=beta,
            year_effects=year_effects,
            size_effects=size_effects,
            sigma=float(theta[-1]),
            error_family=family,
        )


def _build_design(records, config: EstimationConfig) -> _Design:
    records = list(records)
    years = tuple(sorted({r.year for r in records}))
    intervals = config.bins.estimation_bins
    names = list(config.covariate_names)
    names += [f"year:{y}" for y in years[1:]]
    names += [f"size:{iv[0]}" for iv in intervals[1:]]

    n, p = len(records), len(names)
    X = np.zeros((n, p))
    for i, r in enumerate(records):
        for j, name in enumerate(config.covariate_names):
            try:
                X[i, j] = r.covariates[name]
            except KeyError:
                raise ConfigurationError(
                    f"record {r.id}: missing covariate {name!r}"
                ) from None
        if r.year != years[0]:
            X[i, len(config.covariate_names) + years[1:].index(r.year)] = 1.0
        b = find_interval(intervals, r.size)
        if b > 0:
            X[i, len(config.covariate_names) + len(years) - 1 + b - 1] = 1.0
    price = np.array([r.observed_unit_price for r in records])
    success = np.array([float(r.success) for r in records])
    return _Design(
        X=X,
        price=price,
        success=success,
        names=tuple(names),
        covariate_names=tuple(config.covariate_names),
        years=years,
        intervals=intervals,
    )


def _nll_and_grad(theta: np.ndarray, design: _Design, family: str):
    """Negative log-likelihood and its exact gradient.

    Log-probabilities are evaluated in log space (softplus / log_ndtr), so
    separation drives terms to large-but-finite values instead of log(0).
    """
    coefs, sigma = theta[:-1], theta[-1]
    X, p, s = design.X, design.price, design.success
    z = (X @ coefs - p) / sigma
    bought = s > 0.5
    if family == "logistic":
        # log P(buy) = -softplus(-z); log P(no buy) = -softplus(z)
        nll = float(np.sum(np.where(bought, np.logaddexp(0.0, -z), np.logaddexp(0.0, z))))
        w = s - expit(z)
    else:
        log_phi = -0.5 * z * z - 0.5 * np.log(2.0 * np.pi)
        nll = float(-np.sum(np.where(bought, log_ndtr(z), log_ndtr(-z))))
        # hazard ratios phi/Phi; switch to the Mills asymptote in the far tails
        with np.errstate(invalid="ignore", over="ignore"):
            ratio_buy = np.exp(log_phi - log_ndtr(z))
            ratio_no = np.exp(log_phi - log_ndtr(-z))
        far = z > 30.0
        ratio_buy = np.where(far, 0.0, ratio_buy)
        ratio_no = np.where(far, z + 1.0 / np.maximum(z, 1.0), ratio_no)
        far = z < -30.0
        ratio_no = np.where(far, 0.0, ratio_no)
        ratio_buy = np.where(far, -z + 1.0 / np.maximum(-z, 1.0), ratio_buy)
        w = np.where(bought, ratio_buy, -ratio_no)
    grad = np.empty_like(theta)
    grad[:-1] = -(X.T @ w) / sigma
    grad[-1] = float(np.sum(w * z) / sigma)
    return nll, grad


def _starts(design: _Design, config: EstimationConfig) -> list[np.ndarray]:
    pos = design.price[design.price > 0]
    mean_p = float(pos.mean()) if pos.size else float(design.price.mean())
    sd_p = float(pos.std()) if pos.size > 1 else 0.0
    if sd_p < 1e-9:
        sd_p = float(design.price.std())
    sd_p = max(sd_p, 10.0 * config.sigma_floor, 1.0)

    p = len(design.names)
    base = np.zeros(p + 1)
    if "const" in design.names:
        base[design.names.index("const")] = mean_p
    base[-1] = sd_p

    rng = np.random.default_rng(config.seed)
    starts = [base]
    for _ in range(config.n_restarts):
        jitter = base.copy()
        jitter[:-1] = base[:-1] + rng.normal(0.0, 0.25 * max(mean_p, 1.0), p)
        jitter[-1] = sd_p * rng.uniform(0.5, 2.0)
        starts.append(jitter)
    return starts


def fit_mle(records, config: EstimationConfig) -> FitResult:
    """Bounded quasi-Newton fit of the value model.

    Runs from a data-driven start plus random restarts, keeps the best
    likelihood, and flags convergence by the projected-gradient norm at the
    optimum.  The scale parameter is kept positive by a hard floor.
    """
    records = list(records)
    if not records:
        raise ValueError("cannot fit on zero records")
    design = _build_design(records, config)
    bounds = [(None, None)] * len(design.names) + [(config.sigma_floor, None)]

    best = None
    for start in _starts(design, config):
        res = sciopt.minimize(
            _nll_and_grad,
            start,
            args=(design, config.error_family),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={
                "maxiter": config.max_iter,
                "ftol": 1e-13,
                "gtol": config.optimizer_tolerance,
            },
        )
        if best is None or res.fun < best.fun:
            best = res

    theta = best.x
    _, grad = _nll_and_grad(theta, design, config.error_family)
    # projected gradient: a coordinate pinned at its bound cannot move inward
    if theta[-1] <= config.sigma_floor and grad[-1] > 0:
        grad[-1] = 0.0
    grad_max = float(np.max(np.abs(grad)))
    converged = bool(best.success) and grad_max <= config.optimizer_tolerance

    model = design.to_model(theta, config.error_family)
    ses: dict[str, float] = {}
    if config.bootstrap_reps > 0:
        boot = bootstrap(
            records,
            config,
            lambda recs: fit_mle(recs, replace(config, bootstrap_reps=0)).parameters,
        )
        if boot.samples.size:
            ses = dict(zip(tuple(design.names) + ("sigma",), boot.std))
    return FitResult(
        value_model=model,
        neg_log_likelihood=float(best.fun),
        standard_errors=ses,
        converged=converged,
        size_pmf=empirical_size_distribution(records),
        grad_max_norm=grad_max,
        n_obs=len(records),
        parameter_names=tuple(design.names) + ("sigma",),
        parameters=theta.copy(),
    )


def negative_log_likelihood(model: ValueModel, records) -> float:
    """Direct re-evaluation of the fitted criterion, one record at a time."""
    total = 0.0
    for r in records:
        p_buy = success_probability(model, r)
        p_obs = p_buy if r.success else 1.0 - p_buy
        total -= float(np.log(max(p_obs, 1e-300)))
    return total


# -- cost calibration ---------------------------------------------------------


def calibrate_costs(
    records,
    setup_cost: float = SETUP_COST,
    snc_fixed_share: float = SNC_FIXED_SHARE,
    per_unit_cost: float = PER_UNIT_COST,
) -> CostParams:
    """Split booked service-and-consulting costs of successful deals into a
    per-deal fixed part and a per-unit part on top of the setup and
    per-unit base costs."""
    winners = [r for r in records if r.success]
    if not winners:
        raise ValueError("cost calibration needs at least one successful deal")
    snc_total = sum(r.snc_value for r in winners)
    units_total = sum(r.size for r in winners)
    c1 = setup_cost + snc_fixed_share * snc_total / len(winners)
    c2 = per_unit_cost + (1.0 - snc_fixed_share) * snc_total / units_total
    return CostParams(c1=c1, c2=c2)


# -- bootstrap ----------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapResult:
    statistic_names: tuple[str, ...]
    samples: np.ndarray  # (reps_ok, dim)
    std: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n_failed: int


def bootstrap(records, config: EstimationConfig, statistic, names=()) -> BootstrapResult:
    """Percentile bootstrap over deal rows.

    Resamples raw records with replacement (the statistic re-applies any
    augmentation itself), one derived seed per replicate; failed replicates
    are dropped and counted.
    """
    records = list(records)
    n = len(records)
    reps = config.bootstrap_reps
    if reps == 0:
        empty = np.empty((0, 0))
        return BootstrapResult(tuple(names), empty, np.array([]), np.array([]), np.array([]), 0)
    seeds = np.random.SeedSequence(config.seed).spawn(reps)
    rows = []
    failed = 0
    for seq in seeds:
        rng = np.random.default_rng(seq)
        idx = rng.integers(0, n, n)
        sample = [records[i] for i in idx]
        try:
            rows.append(np.atleast_1d(np.asarray(statistic(sample), dtype=np.float64)))
        except Exception:
            failed += 1
    if not rows:
        empty = np.empty((0, 0))
        return BootstrapResult(tuple(names), empty, np.array([]), np.array([]), np.array([]), failed)
    samples = np.vstack(rows)
    return BootstrapResult(
        statistic_names=tuple(names),
        samples=samples,
        std=samples.std(axis=0, ddof=1) if len(samples) > 1 else np.zeros(samples.shape[1]),
        lo=np.percentile(samples, 2.5, axis=0),
        hi=np.percentile(samples, 97.5, axis=0),
        n_failed=failed,
    )
