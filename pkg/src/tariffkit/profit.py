"""Expected profit, revenue, cost, and surplus under a posted tariff.

Two integration routes with independent implementations:

* envelope -- exact.  For the piecewise-linear value function each candidate
  quantity's payoff is a line in the latent value v, so the best response
  partitions the v axis into finitely many intervals; expectations reduce to
  error-family CDF masses and partial means at the interval edges.
* monte_carlo -- simulated.  Latent values are drawn per customer and the
  purchase problem solved draw by draw; the only route available for the
  smooth value function.

Both routes share the candidate tables built once per (market, tariff
shape); only the payments change as a rate vector moves, which is what makes
the tariff search cheap to iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .choice import candidate_quantities
from .dist import sample
from .errors import UnsupportedOperation
from .market import Market
from .tariff import Q_MAX, PriceSchedule, total_price_vector

_MC_CHUNK_CELLS = 20_000_000


@dataclass(frozen=True)
class SegmentStats:
    profit: float
    revenue: float
    consumer_welfare: float
    buyer_count_expectation: float


@dataclass(frozen=True)
class ProfitReport:
    expected_profit: float
    expected_revenue: float
    expected_cost: float
    consumer_surplus: float
    per_segment: dict[str, SegmentStats]
    method: str
    mc_std_error: float | None = None

    @property
    def social_welfare(self) -> float:
        return self.expected_profit + self.consumer_surplus


class ProfitEvaluator:
    """Reusable expected-profit machine for one market and one tariff shape.

    The candidate set per customer size depends only on the tariff kind and
    its segment boundaries, so it is tabulated once; evaluating a new rate
    vector just reprices the candidates.
    """

    def __init__(self, market: Market, kind: str, bins=None, q_max: int = Q_MAX):
        if kind == "individualized":
            raise UnsupportedOperation("individualized tariffs are priced per customer")
        vm = market.value_model
        if vm.sigma <= 0:
            raise ValueError("profit integration requires sigma > 0")
        self.market = market
        self.kind = kind
        self.family = vm.error_family
        self.sigma = float(vm.sigma)
        self.c1 = float(market.costs.c1)
        self.c2 = float(market.costs.c2)

        if kind in ("linear", "two_part"):
            self.starts = np.array([0.0])
            self.n_rates = 1
        else:
            starts = tuple(bins) if bins is not None else market.bins.pricing_starts
            self.starts = np.asarray(starts, dtype=np.float64)
            self.n_rates = len(starts)
        template = PriceSchedule(
            kind, (1.0,) * self.n_rates, 0.0,
            tuple(int(s) for s in self.starts) if kind in ("via_origin", "continuous") else (0,),
        )

        sizes = market.sizes()
        mu = market.mean_values()
        self.order = np.argsort(sizes, kind="stable")
        self.mu_sorted = np.ascontiguousarray(mu[self.order])
        sizes_sorted = sizes[self.order]
        classes, first = np.unique(sizes_sorted, return_index=True)
        self.mem_ptr = np.concatenate((first, [len(sizes)])).astype(np.int64)

        q_parts, ptr = [], [0]
        for size in classes:
            cands = candidate_quantities(int(size), template, q_max)
            q_parts.append(np.array(cands, dtype=np.int64))
            ptr.append(ptr[-1] + len(cands))
        self.cls_ptr = np.array(ptr, dtype=np.int64)
        q_flat = np.concatenate(q_parts)
        size_of_cand = np.repeat(classes, np.diff(self.cls_ptr))
        self.qty = q_flat.astype(np.float64)
        self.slope = np.minimum(q_flat, size_of_cand).astype(np.float64)
        self.buy = (q_flat > 0).astype(np.float64)
        self.cand_bin = np.clip(
            np.searchsorted(self.starts, self.qty, side="right") - 1, 0, self.n_rates - 1
        )
        self.widths = np.diff(self.starts)

        self.seg_idx = np.array(
            [market.bins.pricing_bin(c.size) for c in market.customers], dtype=np.int64
        )
        self.seg_labels = market.bins.pricing_labels

    # -- payments -----------------------------------------------------------

    def payments(self, rates, fee: float = 0.0) -> np.ndarray:
        rates = np.asarray(rates, dtype=np.float64)
        if rates.shape != (self.n_rates,):
            raise ValueError(f"expected {self.n_rates} rates, got {rates.shape}")
        if self.kind in ("linear", "two_part"):
            pay = rates[0] * self.qty
        elif self.kind == "via_origin":
            pay = rates[self.cand_bin] * self.qty
        else:
            bases = np.concatenate(([0.0], np.cumsum(rates[:-1] * self.widths)))
            pay = bases[self.cand_bin] + rates[self.cand_bin] * (
                self.qty - self.starts[self.cand_bin]
            )
        if fee:
            pay = pay + fee * self.buy
        return np.ascontiguousarray(pay)

    def payment_matrix(self, rate_matrix, fees=None) -> np.ndarray:
        rate_matrix = np.atleast_2d(np.asarray(rate_matrix, dtype=np.float64))
        if self.kind in ("linear", "two_part"):
            pay = rate_matrix[:, [0]] * self.qty[None, :]
        elif self.kind == "via_origin":
            pay = rate_matrix[:, self.cand_bin] * self.qty[None, :]
        else:
            bases = np.concatenate(
                (np.zeros((rate_matrix.shape[0], 1)), np.cumsum(rate_matrix[:, :-1] * self.widths, axis=1)),
                axis=1,
            )
            pay = bases[:, self.cand_bin] + rate_matrix[:, self.cand_bin] * (
                self.qty - self.starts[self.cand_bin]
            )
        if fees is not None:
            pay = pay + np.asarray(fees, dtype=np.float64)[:, None] * self.buy[None, :]
        return np.ascontiguousarray(pay)

    # -- evaluation ---------------------------------------------------------

    def profit(self, rates, fee: float = 0.0) -> float:
        return float(self.profit_batch(np.asarray(rates, dtype=np.float64)[None, :], [fee])[0])

    def profit_batch(self, rate_matrix, fees=None) -> np.ndarray:
        pay = self.payment_matrix(rate_matrix, fees)
        return kernels.envelope_profit_batch(
            self.cls_ptr, self.slope, self.qty, pay,
            self.mem_ptr, self.mu_sorted, self.sigma,
            self.family, self.c1, self.c2,
        )

    def _scatter(self, arr: np.ndarray) -> np.ndarray:
        out = np.empty_like(arr)
        out[self.order] = arr
        return out

    def customer_stats(self, rates, fee: float = 0.0):
        """Per-customer (revenue, cost, surplus, buy probability, expected
        quantity) in original customer order."""
        pay = self.payments(rates, fee)
        stats = kernels.envelope_customer_stats(
            self.cls_ptr, self.slope, self.qty, pay,
            self.mem_ptr, self.mu_sorted, self.sigma,
            self.family, self.c1, self.c2,
        )
        return tuple(self._scatter(a) for a in stats)

    def report(self, rates, fee: float = 0.0) -> ProfitReport:
        rev, cost, cs, pbuy, _ = self.customer_stats(rates, fee)
        return self._assemble(rev, cost, cs, pbuy, "envelope", None)

    def mc_report(self, rates, fee: float, draws: int, seed: int) -> ProfitReport:
        """Monte Carlo counterpart of report(); deterministic given seed.

        Draws stream row-major from one generator, so chunking does not
        change the result, and two schedules compared under the same seed
        share their draws (common random numbers).
        """
        pay = self.payments(rates, fee)
        rng = np.random.default_rng(seed)
        n = len(self.mu_sorted)
        chunk = max(1, _MC_CHUNK_CELLS // max(n, 1))
        profit_draws = []
        agg = None
        done = 0
        while done < draws:
            r = min(chunk, draws - done)
            eps = sample(rng, self.family, (r, n))
            out = kernels.mc_totals(
                self.cls_ptr, self.slope, self.qty, pay,
                self.mem_ptr, self.mu_sorted, self.sigma, eps,
                self.c1, self.c2,
            )
            rev_d, cost_d, cs_d = out[0], out[1], out[2]
            profit_draws.append(rev_d - cost_d)
            w = r / draws
            cust = np.stack(out[3:])
            agg = cust * w if agg is None else agg + cust * w
            done += r
        profit_draws = np.concatenate(profit_draws)
        rev, cost, cs, pbuy, _ = (self._scatter(a) for a in agg)
        se = float(np.std(profit_draws, ddof=1) / np.sqrt(draws)) if draws > 1 else None
        return self._assemble(rev, cost, cs, pbuy, "monte_carlo", se)

    def _assemble(self, rev, cost, cs, pbuy, method, se) -> ProfitReport:
        per_seg = {}
        for k, label in enumerate(self.seg_labels):
            m = self.seg_idx == k
            per_seg[label] = SegmentStats(
                profit=float(rev[m].sum() - cost[m].sum()),
                revenue=float(rev[m].sum()),
                consumer_welfare=float(cs[m].sum()),
                buyer_count_expectation=float(pbuy[m].sum()),
            )
        return ProfitReport(
            expected_profit=float(rev.sum() - cost.sum()),
            expected_revenue=float(rev.sum()),
            expected_cost=float(cost.sum()),
            consumer_surplus=float(cs.sum()),
            per_segment=per_seg,
            method=method,
            mc_std_error=se,
        )


def expected_profit(
    market: Market,
    schedule: PriceSchedule,
    method: str = "auto",
    draws: int = 100_000,
    seed: int | None = None,
) -> ProfitReport:
    """ProfitReport for a posted tariff.

    method "auto" picks the exact envelope whenever the value function is
    piecewise linear and falls back to Monte Carlo for the smooth variant
    (which has no finite envelope).  Monte Carlo requires a seed.
    """
    if schedule.kind == "individualized":
        raise UnsupportedOperation(
            "individualized pricing has no posted schedule; use the first-degree scenario"
        )
    a = market.value_model.smoothness
    if method == "auto":
        method = "envelope" if a == 1.0 else "monte_carlo"
    if method == "envelope":
        if a != 1.0:
            raise UnsupportedOperation("envelope integration requires smoothness == 1")
        ev = ProfitEvaluator(market, schedule.kind, schedule.bins)
        return ev.report(np.array(schedule.rates), schedule.fixed_fee)
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}")
    if seed is None:
        raise ValueError("monte_carlo profit evaluation requires a seed")
    if a == 1.0:
        ev = ProfitEvaluator(market, schedule.kind, schedule.bins)
        return ev.mc_report(np.array(schedule.rates), schedule.fixed_fee, draws, seed)
    return _mc_smooth_report(market, schedule, draws, seed)


def welfare(market: Market, schedule: PriceSchedule, **kwargs) -> tuple[float, float]:
    """(consumer surplus, social welfare); social = profit + surplus."""
    rep = expected_profit(market, schedule, **kwargs)
    return rep.consumer_surplus, rep.expected_profit + rep.consumer_surplus


def _mc_smooth_report(market: Market, schedule: PriceSchedule, draws: int, seed: int) -> ProfitReport:
    """Monte Carlo profit for the smooth value function.

    The candidate set gains the per-segment interior stationary points,
    which move with each drawn value, so candidates are formed per draw.
    """
    vm = market.value_model
    a = vm.smoothness
    rng = np.random.default_rng(seed)
    sizes = market.sizes()
    mu = market.mean_values()
    n = len(sizes)
    seg_idx = np.array([market.bins.pricing_bin(c.size) for c in market.customers])

    if schedule.kind in ("linear", "two_part"):
        seg_bounds = [(0, None)]
        seg_rates = [schedule.rates[0]]
    else:
        seg_bounds = [
            (schedule.bins[k], schedule.bins[k + 1] if k + 1 < len(schedule.bins) else None)
            for k in range(len(schedule.bins))
        ]
        seg_rates = list(schedule.rates)

    chunk = max(1, _MC_CHUNK_CELLS // (10 * max(n, 1)))
    profit_draws = []
    crev = np.zeros(n)
    ccost = np.zeros(n)
    ccs = np.zeros(n)
    cpbuy = np.zeros(n)
    done = 0
    while done < draws:
        r = min(chunk, draws - done)
        eps = sample(rng, vm.error_family, (r, n))
        rev_m = np.zeros((r, n))
        cost_m = np.zeros((r, n))
        cs_m = np.zeros((r, n))
        q_m = np.zeros((r, n))
        for size in np.unique(sizes):
            cols = np.flatnonzero(sizes == size)
            size = int(size)
            v = mu[cols][None, :] + vm.sigma * eps[:, cols]
            zeta = size ** (1.0 - a)
            best_po = np.zeros(v.shape)
            best_q = np.zeros(v.shape)
            for q in candidate_quantities(size, schedule):
                po = v * (zeta * min(q, size) ** a) - float(
                    total_price_vector(schedule, np.array([q]))[0]
                )
                _lex_update(best_po, best_q, po, float(q))
            for (lo, hi), rate in zip(seg_bounds, seg_rates):
                if rate <= 0 or lo > size:
                    continue
                seg_hi = size if hi is None else min(hi - 1, size)
                seg_lo = max(lo, 1)
                if seg_hi < seg_lo:
                    continue
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    q_star = np.where(
                        v > 0, (np.maximum(v, 1e-300) * a * zeta / rate) ** (1.0 / (1.0 - a)), seg_lo
                    )
                base = np.floor(q_star)
                for off in (-1.0, 0.0, 1.0, 2.0):
                    q_try = np.clip(base + off, seg_lo, seg_hi)
                    po = v * zeta * q_try**a - total_price_vector(schedule, q_try)
                    _lex_update(best_po, best_q, po, q_try)
            rev_m[:, cols] = total_price_vector(schedule, best_q)
            cost_m[:, cols] = np.where(best_q > 0, market.costs.c1, 0.0) + market.costs.c2 * best_q
            cs_m[:, cols] = best_po
            q_m[:, cols] = best_q
        profit_draws.append((rev_m - cost_m).sum(axis=1))
        w = r / draws
        crev += rev_m.mean(axis=0) * w
        ccost += cost_m.mean(axis=0) * w
        ccs += cs_m.mean(axis=0) * w
        cpbuy += (q_m > 0).mean(axis=0) * w
        done += r
    profit_draws = np.concatenate(profit_draws)
    se = float(np.std(profit_draws, ddof=1) / np.sqrt(draws)) if draws > 1 else None
    per_seg = {}
    labels = market.bins.pricing_labels
    for k, label in enumerate(labels):
        m = seg_idx == k
        per_seg[label] = SegmentStats(
            profit=float(crev[m].sum() - ccost[m].sum()),
            revenue=float(crev[m].sum()),
            consumer_welfare=float(ccs[m].sum()),
            buyer_count_expectation=float(cpbuy[m].sum()),
        )
    return ProfitReport(
        expected_profit=float(crev.sum() - ccost.sum()),
        expected_revenue=float(crev.sum()),
        expected_cost=float(ccost.sum()),
        consumer_surplus=float(ccs.sum()),
        per_segment=per_seg,
        method="monte_carlo",
        mc_std_error=se,
    )


def _lex_update(best_po, best_q, po, q):
    """In-place candidate update with the larger-quantity tie-break."""
    if np.isscalar(q):
        q = np.full(po.shape, q)
    take = (po > best_po) | ((po == best_po) & (q > best_q))
    best_po[take] = po[take]
    best_q[take] = q[take]
