"""Derivative-free tariff search.

The main engine is grid-bisection: evaluate a full grid over the rate box,
zoom a shrunken box (factor ``zoom``) onto the grid argmax, clamped inside
the previous box, and repeat until every box width falls below the stop
width.  The returned point is the best ever evaluated, which can only
improve on the final grid.  A Nelder-Mead simplex search is provided as the
comparison baseline, and both can be warm-started with candidate points so
that nested tariff families are guaranteed to do no worse than the families
they contain.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .market import Market
from .profit import ProfitEvaluator, ProfitReport
from .tariff import PriceSchedule

DEFAULT_RATE_BOUND = 5000.0


@dataclass(frozen=True)
class GridBisectionConfig:
    dims: int
    points_per_dim: int = 5
    zoom: float = 0.5
    lower: tuple[float, ...] | float = 0.0
    upper: tuple[float, ...] | float = DEFAULT_RATE_BOUND
    stop_width: float = 1.0

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.points_per_dim < 2:
            raise ValueError("points_per_dim must be >= 2")
        if not 0.0 < self.zoom < 1.0:
            raise ValueError("zoom must lie in (0, 1)")
        if self.stop_width <= 0:
            raise ValueError("stop_width must be positive")
        lo = self._expand(self.lower)
        hi = self._expand(self.upper)
        if np.any(hi <= lo):
            raise ValueError("upper bound must exceed lower bound in every dimension")

    def _expand(self, b) -> np.ndarray:
        arr = np.broadcast_to(np.asarray(b, dtype=np.float64), (self.dims,))
        return arr.astype(np.float64)

    @property
    def lower_array(self) -> np.ndarray:
        return self._expand(self.lower)

    @property
    def upper_array(self) -> np.ndarray:
        return self._expand(self.upper)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    grid_best: tuple[float, ...]
    grid_best_value: float
    incumbent: tuple[float, ...]
    incumbent_value: float


@dataclass(frozen=True)
class SearchResult:
    x: np.ndarray
    value: float
    trace: tuple[IterationRecord, ...]
    n_evals: int


def _eval_points(objective, pts: np.ndarray) -> np.ndarray:
    if hasattr(objective, "evaluate_batch"):
        return np.asarray(objective.evaluate_batch(pts), dtype=np.float64)
    return np.array([float(objective(p)) for p in pts])


def expected_iterations(config: GridBisectionConfig) -> int:
    """Number of grid evaluations before every width drops below the stop
    width: ceil((log l - log eps) / (-log z)) for the widest dimension."""
    widths = config.upper_array - config.lower_array
    w = float(widths.max())
    if w < config.stop_width:
        return 1
    return max(1, math.ceil((math.log(w) - math.log(config.stop_width)) / -math.log(config.zoom)))


def grid_bisection(objective, config: GridBisectionConfig, extra_candidates=()) -> SearchResult:
    """Maximize ``objective`` over the configured box.

    Grid ties go to the lexicographically smallest index vector; the
    incumbent is replaced only on strict improvement, so warm-start
    candidates survive exact ties.  Candidates in ``extra_candidates`` are
    evaluated up front and compete for the returned optimum but do not steer
    the zoom.
    """
    k = config.dims
    lo = config.lower_array.copy()
    hi = config.upper_array.copy()
    n_evals = 0

    inc_x = None
    inc_v = -math.inf
    for cand in extra_candidates:
        cand = np.asarray(cand, dtype=np.float64)
        if cand.shape != (k,):
            raise ValueError(f"candidate shape {cand.shape} != ({k},)")
        v = float(_eval_points(objective, cand[None, :])[0])
        n_evals += 1
        if v > inc_v:
            inc_x, inc_v = cand.copy(), v

    trace = []
    iteration = 0
    while True:
        iteration += 1
        axes = [np.linspace(lo[d], hi[d], config.points_per_dim) for d in range(k)]
        pts = np.array(list(itertools.product(*axes)))
        vals = _eval_points(objective, pts)
        n_evals += len(pts)
        j = int(np.argmax(vals))
        gx, gv = pts[j], float(vals[j])
        if gv > inc_v:
            inc_x, inc_v = gx.copy(), gv
        trace.append(
            IterationRecord(
                iteration=iteration,
                lower=tuple(lo),
                upper=tuple(hi),
                grid_best=tuple(gx),
                grid_best_value=gv,
                incumbent=tuple(inc_x),
                incumbent_value=inc_v,
            )
        )
        new_w = config.zoom * (hi - lo)
        lo = np.clip(gx - new_w / 2.0, lo, hi - new_w)
        hi = lo + new_w
        if np.all(new_w < config.stop_width):
            break
    return SearchResult(x=inc_x, value=inc_v, trace=tuple(trace), n_evals=n_evals)


@dataclass(frozen=True)
class NelderMeadConfig:
    dims: int
    lower: tuple[float, ...] | float = 0.0
    upper: tuple[float, ...] | float = DEFAULT_RATE_BOUND
    init_points_per_dim: int = 5
    stop_diameter: float = 1e-6
    max_iter: int = 5000
    init_step_frac: float = 0.05

    def _expand(self, b) -> np.ndarray:
        return np.broadcast_to(np.asarray(b, dtype=np.float64), (self.dims,)).astype(np.float64)

    @property
    def lower_array(self) -> np.ndarray:
        return self._expand(self.lower)

    @property
    def upper_array(self) -> np.ndarray:
        return self._expand(self.upper)


def initial_grid_start(objective, config: NelderMeadConfig) -> np.ndarray:
    """Best point of a coarse inclusive grid, the conventional simplex seed."""
    axes = [
        np.linspace(config.lower_array[d], config.upper_array[d], config.init_points_per_dim)
        for d in range(config.dims)
    ]
    pts = np.array(list(itertools.product(*axes)))
    vals = _eval_points(objective, pts)
    return pts[int(np.argmax(vals))].copy()


def nelder_mead(objective, start, config: NelderMeadConfig) -> SearchResult:
    """Simplex ascent (reflection / expansion / contraction / shrink) from
    ``start``, with iterates clipped into the box.  Stops when the simplex
    diameter falls below the configured threshold or on the iteration cap.
    """
    lo, hi = config.lower_array, config.upper_array
    k = config.dims
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        return float(_eval_points(objective, np.clip(x, lo, hi)[None, :])[0])

    start = np.clip(np.asarray(start, dtype=np.float64), lo, hi)
    simplex = [start]
    step = config.init_step_frac * (hi - lo)
    for d in range(k):
        x = start.copy()
        x[d] = x[d] + step[d] if x[d] + step[d] <= hi[d] else x[d] - step[d]
        simplex.append(x)
    fx = [f(x) for x in simplex]

    for _ in range(config.max_iter):
        order = sorted(range(k + 1), key=lambda i: -fx[i])
        simplex = [simplex[i] for i in order]
        fx = [fx[i] for i in order]
        diam = max(
            float(np.linalg.norm(a - b)) for a, b in itertools.combinations(simplex, 2)
        )
        if diam < config.stop_diameter:
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst, f_worst = simplex[-1], fx[-1]
        refl = np.clip(centroid + (centroid - worst), lo, hi)
        f_refl = f(refl)
        if f_refl > fx[0]:
            expa = np.clip(centroid + 2.0 * (centroid - worst), lo, hi)
            f_expa = f(expa)
            if f_expa > f_refl:
                simplex[-1], fx[-1] = expa, f_expa
            else:
                simplex[-1], fx[-1] = refl, f_refl
        elif f_refl > fx[-2]:
            simplex[-1], fx[-1] = refl, f_refl
        else:
            contr = np.clip(centroid + 0.5 * (worst - centroid), lo, hi)
            f_contr = f(contr)
            if f_contr > f_worst:
                simplex[-1], fx[-1] = contr, f_contr
            else:
                best = simplex[0]
                simplex = [best] + [
                    np.clip(best + 0.5 * (x - best), lo, hi) for x in simplex[1:]
                ]
                fx = [fx[0]] + [f(x) for x in simplex[1:]]
    j = int(np.argmax(fx))
    return SearchResult(x=simplex[j], value=fx[j], trace=(), n_evals=evals)


# -- tariff-shaped wrappers --------------------------------------------------


class _RateObjective:
    """Adapter exposing batched profit evaluation to the optimizers.

    layout "rates": x is the rate vector.  layout "fee_first": x[0] is the
    fixed fee, x[1:] the rates.  layout "fee_last": x[-1] is the fee.
    """

    def __init__(self, evaluator: ProfitEvaluator, layout: str = "rates"):
        self.ev = evaluator
        self.layout = layout

    def split(self, x: np.ndarray):
        if self.layout == "rates":
            return x, 0.0
        if self.layout == "fee_first":
            return x[1:], float(x[0])
        return x[:-1], float(x[-1])

    def __call__(self, x) -> float:
        rates, fee = self.split(np.asarray(x, dtype=np.float64))
        return self.ev.profit(rates, fee)

    def evaluate_batch(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        if self.layout == "rates":
            return self.ev.profit_batch(pts)
        if self.layout == "fee_first":
            return self.ev.profit_batch(pts[:, 1:], pts[:, 0])
        return self.ev.profit_batch(pts[:, :-1], pts[:, -1])


@dataclass(frozen=True)
class ScheduleSearch:
    schedule: PriceSchedule
    report: ProfitReport
    value: float
    trace: tuple[IterationRecord, ...]
    n_evals: int


OPTIMIZABLE_KINDS = ("linear", "via_origin", "continuous", "two_part", "via_origin_fee")


def optimize_schedule(
    market: Market,
    kind: str,
    config: GridBisectionConfig | None = None,
    extra_candidates=(),
    auto_seed: bool = True,
) -> ScheduleSearch:
    """Search the configured tariff family for maximal expected profit.

    With ``auto_seed`` (default) each richer family is warm-started from the
    optima of the families it nests -- via-origin and continuous schedules
    from the optimal linear price, the two-part tariff from the zero-fee
    linear optimum, and the fee-augmented via-origin schedule from all three
    -- so reported optima are monotone across nested families by
    construction.
    """
    if kind not in OPTIMIZABLE_KINDS:
        raise ValueError(f"cannot optimize schedule kind {kind!r}")
    starts = market.bins.pricing_starts
    nbins = len(starts)

    if kind == "linear":
        dims, layout, sched_kind = 1, "rates", "linear"
    elif kind == "two_part":
        dims, layout, sched_kind = 2, "fee_first", "two_part"
    elif kind == "via_origin_fee":
        dims, layout, sched_kind = nbins + 1, "fee_last", "via_origin"
    else:
        dims, layout, sched_kind = nbins, "rates", kind

    if config is None:
        config = GridBisectionConfig(dims=dims)
    elif config.dims != dims:
        raise ValueError(f"config.dims={config.dims} but {kind} needs {dims}")

    ev = ProfitEvaluator(market, sched_kind, starts if sched_kind != "linear" else None)
    objective = _RateObjective(ev, layout)

    seeds = [np.asarray(c, dtype=np.float64) for c in extra_candidates]
    if auto_seed and kind != "linear":
        sub = _sub_config(config, 1)
        lin = grid_bisection(_RateObjective(ProfitEvaluator(market, "linear"), "rates"), sub)
        p_lin = float(lin.x[0])
        if kind in ("via_origin", "continuous"):
            seeds.append(np.full(dims, p_lin))
        elif kind == "two_part":
            seeds.append(np.array([0.0, p_lin]))
        else:  # via_origin_fee
            seeds.append(np.concatenate((np.full(nbins, p_lin), [0.0])))
            vo = optimize_schedule(market, "via_origin", _sub_config(config, nbins))
            seeds.append(np.concatenate((vo.schedule.rates, [0.0])))
            tp = optimize_schedule(market, "two_part", _sub_config(config, 2))
            seeds.append(
                np.concatenate((np.full(nbins, tp.schedule.rates[0]), [tp.schedule.fixed_fee]))
            )

    res = grid_bisection(objective, config, extra_candidates=seeds)
    rates, fee = objective.split(res.x)
    schedule = PriceSchedule(
        sched_kind,
        tuple(rates),
        fee,
        starts if sched_kind in ("via_origin", "continuous") else (0,),
    )
    report = ev.report(np.asarray(rates), fee)
    return ScheduleSearch(
        schedule=schedule, report=report, value=res.value, trace=res.trace, n_evals=res.n_evals
    )


def _sub_config(config: GridBisectionConfig, dims: int) -> GridBisectionConfig:
    lo = float(np.min(config.lower_array))
    hi = float(np.max(config.upper_array))
    return GridBisectionConfig(
        dims=dims,
        points_per_dim=config.points_per_dim,
        zoom=config.zoom,
        lower=lo,
        upper=hi,
        stop_width=config.stop_width,
    )


# -- per-segment (locally optimal) prices ------------------------------------


@dataclass(frozen=True)
class SegmentOptimum:
    label: str
    interval: tuple[int, int | None]
    price: float
    local_profit: float
    n_customers: int


@dataclass(frozen=True)
class IndividualOptimum:
    """Per-segment optimal linear prices assembled into one tariff.

    ``naive_profit`` adds up each segment's own optimum as if customers
    could be held to their segment's rate; ``report`` prices the assembled
    schedule against actual cross-segment choice.
    """

    schedule: PriceSchedule
    naive_profit: float
    report: ProfitReport
    segments: tuple[SegmentOptimum, ...]

    @property
    def true_profit(self) -> float:
        return self.report.expected_profit


def individually_optimized(
    market: Market, config: GridBisectionConfig | None = None
) -> IndividualOptimum:
    """Optimize each size segment's linear price in isolation and assemble
    the via-origin tariff from the pieces.  Empty segments inherit the
    previous segment's rate."""
    from .profit import expected_profit  # local import to keep module edges clean

    if config is None:
        config = GridBisectionConfig(dims=1)
    elif config.dims != 1:
        config = replace(config, dims=1, lower=float(np.min(config.lower_array)),
                         upper=float(np.max(config.upper_array)))

    intervals = market.bins.pricing_bins
    labels = market.bins.pricing_labels
    prices: list[float | None] = []
    segments = []
    any_member = False
    for iv, label in zip(intervals, labels):
        lo_iv, hi_iv = iv
        members = tuple(
            c for c in market.customers if c.size >= lo_iv and (hi_iv is None or c.size < hi_iv)
        )
        if not members:
            segments.append(SegmentOptimum(label, iv, math.nan, 0.0, 0))
            prices.append(None)
            continue
        any_member = True
        sub = Market(members, market.value_model, market.costs, market.bins)
        res = grid_bisection(_RateObjective(ProfitEvaluator(sub, "linear"), "rates"), config)
        price = float(res.x[0])
        segments.append(SegmentOptimum(label, iv, price, float(res.value), len(members)))
        prices.append(price)
    if not any_member:
        raise ValueError("every pricing segment is empty")

    # forward-fill empty segments; leading empties inherit the first optimum
    filled: list[float] = []
    last = next(p for p in prices if p is not None)
    for p in prices:
        if p is not None:
            last = p
        filled.append(last)

    schedule = PriceSchedule("via_origin", tuple(filled), 0.0, market.bins.pricing_starts)
    report = expected_profit(market, schedule)
    return IndividualOptimum(
        schedule=schedule,
        naive_profit=float(sum(s.local_profit for s in segments)),
        report=report,
        segments=tuple(segments),
    )
