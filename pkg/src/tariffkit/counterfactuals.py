"""Counterfactual pricing scenarios and market experiments.

Everything here runs on a fitted (or synthetic) market: perfect
individualized pricing, per-segment third-degree discrimination, grouped
second-plus-third-degree schedules, demand homogenization, cost sweeps,
outcome-flipping data experiments, the incentive-compatibility gap
decomposition, and recovery of the size/covariate distribution from a
simulated randomized price experiment.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .dist import cdf, expected_excess, partial_mean, sample
from .market import CostParams, Interval, Market, ValueModel, mean_value
from .optimize import (
    GridBisectionConfig,
    IndividualOptimum,
    ScheduleSearch,
    individually_optimized,
    optimize_schedule,
)
from .profit import ProfitReport, expected_profit
from .tariff import PriceSchedule

DEFAULT_ARM_PRICES = (0.0, 1000.0, 2000.0, 3000.0, 4000.0, 5000.0)


@dataclass(frozen=True)
class SegmentWelfare:
    profit: float
    revenue: float
    consumer_welfare: float
    social_welfare: float
    buyer_count_expectation: float


@dataclass(frozen=True)
class ScenarioResult:
    scheme_label: str
    profit: float
    revenue: float
    consumer_welfare: float
    social_welfare: float
    per_segment: dict[str, SegmentWelfare]
    confidence: dict[str, tuple[float, float]] | None = None

    def __post_init__(self):
        gap = abs(self.social_welfare - self.profit - self.consumer_welfare)
        if gap > 1e-6 * max(1.0, abs(self.social_welfare)):
            raise ValueError("social welfare must equal profit plus consumer welfare")


def _scenario_from_report(label: str, report: ProfitReport) -> ScenarioResult:
    per_seg = {
        k: SegmentWelfare(
            profit=s.profit,
            revenue=s.revenue,
            consumer_welfare=s.consumer_welfare,
            social_welfare=s.profit + s.consumer_welfare,
            buyer_count_expectation=s.buyer_count_expectation,
        )
        for k, s in report.per_segment.items()
    }
    return ScenarioResult(
        scheme_label=label,
        profit=report.expected_profit,
        revenue=report.expected_revenue,
        consumer_welfare=report.consumer_surplus,
        social_welfare=report.expected_profit + report.consumer_surplus,
        per_segment=per_seg,
    )


# -- first-degree discrimination ----------------------------------------------


def first_degree(market: Market) -> ScenarioResult:
    """Perfect price discrimination: sell to a customer whenever its total
    value covers its total cost, charging exactly that value.

    Closed form per customer: the deal clears when v exceeds c2 + c1/size,
    and the firm pockets the full surplus, so consumer welfare is zero by
    construction.
    """
    vm = market.value_model
    if vm.sigma <= 0:
        raise ValueError("first-degree evaluation requires sigma > 0")
    fam = vm.error_family
    mu = market.mean_values()
    sizes = market.sizes().astype(np.float64)
    c1, c2 = market.costs.c1, market.costs.c2

    threshold = c2 + c1 / sizes
    z = (threshold - mu) / vm.sigma
    sale = 1.0 - cdf(z, fam)
    profit = sizes * vm.sigma * expected_excess(z, fam)
    # E[v | sale] mass: mu minus the below-threshold partial mean
    revenue = sizes * (mu * sale - vm.sigma * partial_mean(z, fam))
    cost = (c1 + c2 * sizes) * sale

    seg_idx = np.array([market.bins.pricing_bin(c.size) for c in market.customers])
    per_seg = {}
    for k, label in enumerate(market.bins.pricing_labels):
        m = seg_idx == k
        per_seg[label] = SegmentWelfare(
            profit=float(profit[m].sum()),
            revenue=float(revenue[m].sum()),
            consumer_welfare=0.0,
            social_welfare=float(profit[m].sum()),
            buyer_count_expectation=float(sale[m].sum()),
        )
    total = float(profit.sum())
    return ScenarioResult(
        scheme_label="first_degree",
        profit=total,
        revenue=float(revenue.sum()),
        consumer_welfare=0.0,
        social_welfare=total,
        per_segment=per_seg,
    )


# -- third-degree discrimination ----------------------------------------------


def third_degree_by_size(
    market: Market, config: GridBisectionConfig | None = None
) -> tuple[ScenarioResult, IndividualOptimum]:
    """Each size segment is held to its own optimal linear price (customers
    cannot shop across segments), so profit is the sum of the per-segment
    optima."""
    ind = individually_optimized(market, config)
    totals = dict(profit=0.0, revenue=0.0, cs=0.0)
    per_seg: dict[str, SegmentWelfare] = {}
    for seg in ind.segments:
        label = seg.label
        if seg.n_customers == 0:
            per_seg[label] = SegmentWelfare(0.0, 0.0, 0.0, 0.0, 0.0)
            continue
        lo, hi = seg.interval
        members = tuple(
            c for c in market.customers if c.size >= lo and (hi is None or c.size < hi)
        )
        sub = Market(members, market.value_model, market.costs, market.bins)
        rep = expected_profit(sub, PriceSchedule("linear", (seg.price,)))
        per_seg[label] = SegmentWelfare(
            profit=rep.expected_profit,
            revenue=rep.expected_revenue,
            consumer_welfare=rep.consumer_surplus,
            social_welfare=rep.expected_profit + rep.consumer_surplus,
            buyer_count_expectation=sum(
                s.buyer_count_expectation for s in rep.per_segment.values()
            ),
        )
        totals["profit"] += rep.expected_profit
        totals["revenue"] += rep.expected_revenue
        totals["cs"] += rep.consumer_surplus
    result = ScenarioResult(
        scheme_label="third_degree_by_size",
        profit=totals["profit"],
        revenue=totals["revenue"],
        consumer_welfare=totals["cs"],
        social_welfare=totals["profit"] + totals["cs"],
        per_segment=per_seg,
    )
    return result, ind


def third_degree_by_covariates(
    market: Market,
    groups: int,
    config: GridBisectionConfig | None = None,
) -> tuple[list[ScheduleSearch], ScenarioResult]:
    """Rank customers by the observable part of their value index, split
    them into equally sized groups (remainder to the last), and optimize a
    via-origin schedule per group.  One group reproduces the plain optimum
    exactly."""
    n = len(market.customers)
    if groups < 1:
        raise ValueError("need at least one group")
    if groups > n:
        raise ValueError(f"cannot split {n} customers into {groups} groups")
    vm = market.value_model
    score = np.array(
        [sum(vm.beta[k] * c.covariates[k] for k in vm.beta) for c in market.customers]
    )
    order = np.argsort(-score, kind="stable")
    base = n // groups
    searches: list[ScheduleSearch] = []
    totals = np.zeros(3)
    labels = market.bins.pricing_labels
    per_seg_acc = {
        label: dict(profit=0.0, revenue=0.0, cs=0.0, buyers=0.0) for label in labels
    }
    for g in range(groups):
        lo = g * base
        hi = (g + 1) * base if g < groups - 1 else n
        members = tuple(market.customers[i] for i in order[lo:hi])
        sub = Market(members, vm, market.costs, market.bins)
        search = optimize_schedule(sub, "via_origin", config)
        searches.append(search)
        rep = search.report
        totals += (rep.expected_profit, rep.expected_revenue, rep.consumer_surplus)
        for label, s in rep.per_segment.items():
            acc = per_seg_acc[label]
            acc["profit"] += s.profit
            acc["revenue"] += s.revenue
            acc["cs"] += s.consumer_welfare
            acc["buyers"] += s.buyer_count_expectation
    per_seg = {
        label: SegmentWelfare(
            profit=acc["profit"],
            revenue=acc["revenue"],
            consumer_welfare=acc["cs"],
            social_welfare=acc["profit"] + acc["cs"],
            buyer_count_expectation=acc["buyers"],
        )
        for label, acc in per_seg_acc.items()
    }
    result = ScenarioResult(
        scheme_label=f"third_degree_by_covariates_J{groups}",
        profit=float(totals[0]),
        revenue=float(totals[1]),
        consumer_welfare=float(totals[2]),
        social_welfare=float(totals[0] + totals[2]),
        per_segment=per_seg,
    )
    return searches, result


# -- demand and cost scenarios -------------------------------------------------


def homogenize_demand(market: Market, year: int | None = None) -> Market:
    """Give every customer the population-average mean value at the target
    year, leaving sizes untouched, so values and sizes become independent up
    to the error draw."""
    vm = market.value_model
    if year is None:
        year = max(c.year for c in market.customers)
    mus = [
        mean_value(vm, replace(c, year=year)) for c in market.customers
    ]
    mu_bar = float(np.mean(mus))
    flat_model = ValueModel(
        beta={"const": mu_bar},
        year_effects={year: 0.0},
        size_effects={iv: 0.0 for iv in vm.size_intervals},
        sigma=vm.sigma,
        error_family=vm.error_family,
        smoothness=vm.smoothness,
    )
    customers = tuple(
        replace(c, year=year, covariates={"const": 1.0}) for c in market.customers
    )
    return Market(customers, flat_model, market.costs, market.bins)


@dataclass(frozen=True)
class CostSweepPoint:
    c1: float
    c2: float
    schedule: PriceSchedule
    report: ProfitReport


def cost_sweep(
    market: Market,
    c1_list,
    c2_list,
    config: GridBisectionConfig | None = None,
) -> list[CostSweepPoint]:
    """Re-optimize the via-origin schedule over a grid of cost parameters."""
    points = []
    for c1 in c1_list:
        for c2 in c2_list:
            m = Market(
                market.customers,
                market.value_model,
                CostParams(c1=float(c1), c2=float(c2)),
                market.bins,
            )
            search = optimize_schedule(m, "via_origin", config)
            points.append(
                CostSweepPoint(float(c1), float(c2), search.schedule, search.report)
            )
    return points


def simulate_counterfactual_outcomes(
    records,
    flip_prob: float,
    favored: Interval,
    seed: int,
    invert: bool = False,
) -> list:
    """Outcome-flipping experiment on the raw records.

    Each record's success flag is overwritten with probability
    ``flip_prob``: to 1 when its size falls in the favored interval, else to
    0 (``invert`` swaps the two).  Unflipped records pass through.
    """
    if not 0.0 <= flip_prob <= 1.0:
        raise ValueError("flip_prob must lie in [0, 1]")
    records = list(records)
    lo, hi = favored
    rng = np.random.default_rng(seed)
    flips = rng.random(len(records)) < flip_prob
    out = []
    for r, flip in zip(records, flips):
        if not flip:
            out.append(r)
            continue
        in_favored = r.size >= lo and (hi is None or r.size < hi)
        hit = (not in_favored) if invert else in_favored
        out.append(replace(r, success=1 if hit else 0))
    return out


# -- incentive-compatibility gap -----------------------------------------------


@dataclass(frozen=True)
class IcGapAnalysis:
    """Jointly versus per-segment optimized tariffs on the same market."""

    profit_joint: float
    profit_separate: float
    naive_separate_total: float
    per_segment_gap: dict[str, float]
    joint: ScheduleSearch
    separate: IndividualOptimum

    @property
    def gap(self) -> float:
        return self.profit_joint - self.profit_separate

    @property
    def relative_gap(self) -> float:
        return self.gap / self.profit_joint if self.profit_joint else 0.0


def ic_gap_analysis(
    market: Market, config: GridBisectionConfig | None = None
) -> IcGapAnalysis:
    """Quantify what ignoring cross-segment shopping costs the firm.

    The per-segment prices are assembled and re-priced under actual choice;
    the joint search is warm-started from that assembled schedule, so the
    reported gap is nonnegative by construction.
    """
    ind = individually_optimized(market, config)
    joint = optimize_schedule(
        market,
        "via_origin",
        config,
        extra_candidates=[np.array(ind.schedule.rates)],
    )
    per_seg_gap = {
        label: joint.report.per_segment[label].profit - ind.report.per_segment[label].profit
        for label in joint.report.per_segment
    }
    return IcGapAnalysis(
        profit_joint=joint.report.expected_profit,
        profit_separate=ind.report.expected_profit,
        naive_separate_total=ind.naive_profit,
        per_segment_gap=per_seg_gap,
        joint=joint,
        separate=ind,
    )


# -- randomized price experiment and recovery ----------------------------------


@dataclass(frozen=True, slots=True)
class ExperimentRow:
    """One simulated deal under a randomized linear price.  The intended
    size is masked (None) when the deal failed, mirroring what a firm that
    never met the failed buyer would record."""

    size: int | None
    cell: tuple
    success: bool


@dataclass(frozen=True)
class ExperimentArm:
    arm_price: float
    rows: tuple[ExperimentRow, ...]

    def __post_init__(self):
        if self.arm_price < 0:
            raise ValueError("arm price must be nonnegative")


def _cell(record) -> tuple:
    return (record.year,) + tuple(sorted(record.covariates.items()))


def simulate_price_experiment(
    market: Market,
    n_rows: int,
    seed: int,
    arm_prices=DEFAULT_ARM_PRICES,
) -> list[ExperimentArm]:
    """Replicate the market to ``n_rows`` rows, assign each row a random arm
    price, draw its value, and record success with the size masked on
    failure."""
    vm = market.value_model
    rng = np.random.default_rng(seed)
    n = len(market.customers)
    cells = [_cell(c) for c in market.customers]
    sizes = [c.size for c in market.customers]
    mu = market.mean_values()

    arm_prices = tuple(float(p) for p in arm_prices)
    arm_idx = rng.integers(0, len(arm_prices), n_rows)
    eps = sample(rng, vm.error_family, n_rows)

    buckets: dict[float, list[ExperimentRow]] = {p: [] for p in arm_prices}
    for row in range(n_rows):
        i = row % n
        price = arm_prices[arm_idx[row]]
        v = mu[i] + vm.sigma * eps[row]
        bought = v >= price
        buckets[price].append(
            ExperimentRow(size=sizes[i] if bought else None, cell=cells[i], success=bool(bought))
        )
    return [ExperimentArm(p, tuple(buckets[p])) for p in arm_prices]


@dataclass(frozen=True)
class ArmRecovery:
    arm_price: float
    prob_below: float
    joint_below: dict[tuple, float]
    clipped_mass: float


@dataclass(frozen=True)
class RecoveryResult:
    """Size-by-covariate distributions recovered stratum by stratum.

    ``base_joint`` is the joint over (size, cell) read off the zero-price
    arm's buyers; each kept arm contributes the conditional joint below its
    price via the total-probability identity.  ``completed`` holds the arms'
    rows with failed deals' sizes (and cells) imputed from the recovered
    conditionals.
    """

    base_joint: dict[tuple, float]
    arms: dict[float, ArmRecovery]
    skipped: tuple[float, ...]
    completed: dict[float, tuple[ExperimentRow, ...]]
    diagnostics: tuple[str, ...]

    def stratified_joint(self) -> dict[tuple, float]:
        """Joint over (stratum, size, cell).  Stratum k collects values in
        [a_k, a_{k+1}) for the ascending kept arm prices, with open bottom
        and top strata."""
        prices = sorted(self.arms)
        edges = [(-np.inf, prices[0])]
        edges += [(prices[i], prices[i + 1]) for i in range(len(prices) - 1)]
        edges += [(prices[-1], np.inf)]
        out: dict[tuple, float] = {}
        atoms = set(self.base_joint)
        for arm in self.arms.values():
            atoms |= set(arm.joint_below)

        def below(price, atom):
            if price == -np.inf:
                return 0.0
            if price == np.inf:
                return self.base_joint.get(atom, 0.0)
            arm = self.arms[price]
            return arm.prob_below * arm.joint_below.get(atom, 0.0)

        for k, (a, b) in enumerate(edges):
            for atom in atoms:
                mass = below(b, atom) - below(a, atom)
                if mass > 0:
                    out[(k,) + atom] = out.get((k,) + atom, 0.0) + mass
        total = sum(out.values())
        if total <= 0:
            raise ValueError("recovered joint has no mass")
        return {k: v / total for k, v in sorted(out.items())}


def experimental_recovery(
    arms,
    base_price: float = 0.0,
    seed: int = 0,
) -> RecoveryResult:
    """Recover the size/covariate distribution by value stratum from a
    randomized price experiment.

    The base arm's buyers give the unconditional joint; for every other arm
    the purchase share estimates P(v >= price), and the joint among the
    arm's non-buyers follows from the law of total probability.  Negative
    solved masses (finite-sample artifacts) are clipped to zero and
    renormalized with a diagnostic; an arm where everyone buys leaves the
    conditional undefined and is skipped with a diagnostic.
    """
    by_price = {arm.arm_price: arm for arm in arms}
    if len(by_price) != len(list(arms)):
        raise ValueError("duplicate arm prices")
    if base_price not in by_price:
        raise ValueError(f"no arm at the base price {base_price}")
    for arm in by_price.values():
        if not arm.rows:
            raise ValueError(f"arm at price {arm.arm_price} is empty")

    base = by_price[base_price]
    base_buyers = [r for r in base.rows if r.success]
    if not base_buyers:
        raise ValueError("base arm has no buyers; cannot anchor the joint")
    base_joint = _normalized_counts((r.size, r.cell) for r in base_buyers)

    diagnostics: list[str] = []
    skipped: list[float] = []
    recovered: dict[float, ArmRecovery] = {}
    completed: dict[float, tuple[ExperimentRow, ...]] = {
        base_price: tuple(base_buyers)
    }
    seeds = np.random.SeedSequence(seed).spawn(len(by_price))
    for (price, arm), seq in zip(sorted(by_price.items()), seeds):
        if price == base_price:
            continue
        n = len(arm.rows)
        n_above = sum(r.success for r in arm.rows)
        p_above = n_above / n
        p_below = 1.0 - p_above
        if p_below == 0.0:
            msg = (
                f"arm {price}: every row bought, P(v < {price}) is zero and the "
                "conditional joint is undefined; arm skipped"
            )
            diagnostics.append(msg)
            warnings.warn(msg)
            skipped.append(price)
            continue
        above_joint = _normalized_counts(
            ((r.size, r.cell) for r in arm.rows if r.success)
        ) if n_above else {}
        raw = {
            atom: base_joint.get(atom, 0.0) - p_above * above_joint.get(atom, 0.0)
            for atom in set(base_joint) | set(above_joint)
        }
        clipped = -sum(v for v in raw.values() if v < 0)
        pos = {k: v for k, v in raw.items() if v > 0}
        total = sum(pos.values())
        if clipped > 0:
            diagnostics.append(
                f"arm {price}: clipped {clipped:.3g} negative probability mass and renormalized"
            )
        joint_below = {k: v / total for k, v in pos.items()}
        recovered[price] = ArmRecovery(price, p_below, joint_below, clipped)

        rng = np.random.default_rng(seq)
        atoms = sorted(joint_below)
        probs = np.array([joint_below[a] for a in atoms])
        n_fail = n - n_above
        draw_iter = iter(rng.choice(len(atoms), size=n_fail, p=probs)) if n_fail else iter(())
        filled = []
        for r in arm.rows:
            if r.success:
                filled.append(r)
            else:
                size, cell = atoms[next(draw_iter)]
                filled.append(ExperimentRow(size=size, cell=cell, success=False))
        completed[price] = tuple(filled)

    return RecoveryResult(
        base_joint=base_joint,
        arms=recovered,
        skipped=tuple(skipped),
        completed=completed,
        diagnostics=tuple(diagnostics),
    )


def _normalized_counts(items) -> dict[tuple, float]:
    counts = Counter(items)
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()}


def true_stratified_joint(market: Market, arm_prices) -> dict[tuple, float]:
    """Model-implied joint over (stratum, size, cell), the oracle the
    recovery is checked against."""
    vm = market.value_model
    prices = sorted(p for p in (float(x) for x in arm_prices) if p > 0)
    edges = np.array([-np.inf] + prices + [np.inf])
    mu = market.mean_values()
    n = len(market.customers)
    out: dict[tuple, float] = {}
    for i, c in enumerate(market.customers):
        z = (edges - mu[i]) / vm.sigma
        F = np.concatenate(([0.0], cdf(z[1:-1], vm.error_family), [1.0]))
        masses = np.diff(F)
        atom = (c.size, _cell(c))
        for k, mass in enumerate(masses):
            if mass > 0:
                key = (k,) + atom
                out[key] = out.get(key, 0.0) + mass / n
    return out


def coarsen_sizes(joint: dict[tuple, float], bins, keep_cells: bool = False) -> dict[tuple, float]:
    """Map the size coordinate of a stratified joint onto size bins; by
    default the covariate cells are marginalized out, leaving the
    (value stratum x size bin) joint."""
    out: dict[tuple, float] = {}
    for (stratum, size, cell), mass in joint.items():
        key = (stratum, bins.pricing_bin(int(size)))
        if keep_cells:
            key = key + (cell,)
        out[key] = out.get(key, 0.0) + mass
    return out


def tv_distance(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
