"""Customer purchase decisions: q* = argmax V(q) - P(q).

Because the gross value is flat beyond the customer's size and the charge is
linear within each tariff segment (when smoothness is 1), the integer argmax
always sits at a segment endpoint, the size itself, or zero.  Enumerating
that small candidate set solves the problem exactly; an exhaustive integer
scan is kept alongside as the test oracle.

Ties are broken toward the larger quantity (purchase over no purchase,
larger over smaller) so every code path is deterministic.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedOperation
from .tariff import Q_MAX, PriceSchedule, total_price, total_price_vector


@dataclass(frozen=True)
class PurchaseDecision:
    quantity: int
    payment: float
    surplus: float
    bought: bool


@dataclass(frozen=True)
class ValueEnvelope:
    """Partition of the latent-value axis by the winning quantity.

    ``winning_quantity[j]`` is optimal for v in
    [breakpoints[j-1], breakpoints[j]); intervals are right-open so the
    larger quantity wins exactly at a breakpoint.
    """

    breakpoints: tuple[float, ...]
    winning_quantity: tuple[int, ...]
    payments: tuple[float, ...]
    slopes: tuple[float, ...]

    def lookup(self, v: float) -> int:
        return self.winning_quantity[bisect_right(self.breakpoints, v)]


def _segments(schedule: PriceSchedule) -> list[tuple[int, int | None]]:
    """Quantity segments as [lo, hi) pairs; single unbounded segment for
    constant-rate kinds."""
    if schedule.kind in ("linear", "two_part"):
        return [(0, None)]
    starts = schedule.bins
    segs: list[tuple[int, int | None]] = []
    for k, lo in enumerate(starts):
        hi = starts[k + 1] if k + 1 < len(starts) else None
        segs.append((lo, hi))
    return segs


def candidate_quantities(
    size: int, schedule: PriceSchedule, q_max: int = Q_MAX
) -> list[int]:
    """Integer quantities guaranteed to contain the argmax for the
    piecewise-linear value function.

    Per segment the payoff is linear in q, so only segment endpoints can win;
    the size itself caps the sloped region, and zero is always feasible.
    """
    if schedule.kind == "individualized":
        raise UnsupportedOperation("individualized tariffs have no candidate set")
    top = max(q_max, size)
    cands = {0, size}
    for lo, hi in _segments(schedule):
        if lo > top:
            continue
        cands.add(max(lo, 1))
        cands.add(top if hi is None else min(hi - 1, top))
    return sorted(cands)


def _stationary_candidates(
    v: float, size: int, schedule: PriceSchedule, a: float, q_max: int
) -> set[int]:
    """Interior candidates for the smooth value function.

    With 0 < a < 1 the per-segment objective v*size^(1-a)*q^a - p*q is
    strictly concave, so the integer optimum lies next to the real
    stationary point; integers around it are added per segment.
    """
    if v <= 0:
        return set()
    out: set[int] = set()
    zeta = size ** (1.0 - a)
    for k, (lo, hi) in enumerate(_segments(schedule)):
        rate = schedule.rates[0] if schedule.kind in ("linear", "two_part") else schedule.rates[k]
        if rate <= 0 or lo > size:
            continue
        q_star = (v * a * zeta / rate) ** (1.0 / (1.0 - a))
        base = math.floor(q_star)
        seg_hi = size if hi is None else min(hi - 1, size)
        seg_lo = max(lo, 1)
        for q in range(base - 1, base + 3):
            if seg_lo <= q <= min(seg_hi, q_max):
                out.add(q)
    return out


def _pick(
    quantities,
    payoffs,
) -> int:
    """Index of the best payoff; ties go to the later (larger) quantity."""
    best = 0
    for j in range(1, len(payoffs)):
        if payoffs[j] >= payoffs[best]:
            best = j
    return best


def solve_purchase(
    v: float,
    size: int,
    schedule: PriceSchedule,
    smoothness: float = 1.0,
    q_max: int = Q_MAX,
) -> PurchaseDecision:
    """Exact purchase decision via candidate enumeration.

    Zero is always available, so the realized surplus is never negative.
    """
    cands = candidate_quantities(size, schedule, q_max)
    if smoothness < 1.0:
        extra = _stationary_candidates(v, size, schedule, smoothness, q_max)
        cands = sorted(set(cands) | extra)
    payoffs = [
        _gross(v, size, q, smoothness) - total_price(schedule, q) for q in cands
    ]
    j = _pick(cands, payoffs)
    q = cands[j]
    return PurchaseDecision(
        quantity=q,
        payment=total_price(schedule, q),
        surplus=payoffs[j],
        bought=q > 0,
    )


def brute_force_purchase(
    v: float,
    size: int,
    schedule: PriceSchedule,
    smoothness: float = 1.0,
    q_max: int = Q_MAX,
) -> PurchaseDecision:
    """Exhaustive integer argmax over 0..max(q_max, size); the oracle
    definition of the purchase problem, used in tests."""
    top = max(q_max, size)
    qs = np.arange(0, top + 1, dtype=np.float64)
    capped = np.minimum(qs, float(size))
    if smoothness == 1.0:
        gross = v * capped
    else:
        a = smoothness
        gross = v * size ** (1.0 - a) * capped**a
    pays = total_price_vector(schedule, qs)
    payoff = gross - pays
    best = int(np.flatnonzero(payoff == payoff.max())[-1])
    return PurchaseDecision(
        quantity=best,
        payment=float(pays[best]),
        surplus=float(payoff[best]),
        bought=best > 0,
    )


def envelope_lines(
    size: int, schedule: PriceSchedule, q_max: int = Q_MAX
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Candidate payoff lines (quantity, slope, payment), ascending in
    quantity.  Payoff of buying q at value v is slope * v - payment with
    slope = min(q, size)."""
    cands = candidate_quantities(size, schedule, q_max)
    q = np.array(cands, dtype=np.int64)
    slope = np.minimum(q, size).astype(np.float64)
    pay = total_price_vector(schedule, q)
    return q, slope, pay


def upper_envelope(
    q: np.ndarray, slope: np.ndarray, pay: np.ndarray
) -> tuple[list[float], list[int], list[float], list[float]]:
    """Upper envelope of payoff lines, inputs sorted by quantity.

    Returns (breakpoints, quantities, payments, slopes) with len(quantities)
    = len(breakpoints) + 1.  For equal slopes the cheaper line dominates; on
    exact payment ties the larger quantity is kept, matching the purchase
    tie-break.
    """
    # dedup equal slopes: scan in quantity order, keep cheapest (ties: later q)
    kept: list[int] = []
    for j in range(len(q)):
        if kept and slope[kept[-1]] == slope[j]:
            if pay[j] <= pay[kept[-1]]:
                kept[-1] = j
        else:
            kept.append(j)
    # convex-hull pass over strictly increasing slopes
    idx: list[int] = []
    start: list[float] = []
    for j in kept:
        x = -math.inf
        while idx:
            top = idx[-1]
            x = (pay[j] - pay[top]) / (slope[j] - slope[top])
            if x <= start[-1]:
                idx.pop()
                start.pop()
                x = -math.inf
            else:
                break
        idx.append(j)
        start.append(x)
    return (
        start[1:],
        [int(q[j]) for j in idx],
        [float(pay[j]) for j in idx],
        [float(slope[j]) for j in idx],
    )


def value_envelope(
    size: int, schedule: PriceSchedule, smoothness: float = 1.0, q_max: int = Q_MAX
) -> ValueEnvelope:
    """Exact v-axis partition for the piecewise-linear value function.

    Only defined for smoothness 1, where candidate payoffs are lines in v;
    the smooth case is integrated by Monte Carlo instead.
    """
    if smoothness != 1.0:
        raise UnsupportedOperation("value envelopes require smoothness == 1")
    qs, slopes, pays = envelope_lines(size, schedule, q_max)
    br, wq, wp, ws = upper_envelope(qs, slopes, pays)
    return ValueEnvelope(
        breakpoints=tuple(br),
        winning_quantity=tuple(wq),
        payments=tuple(wp),
        slopes=tuple(ws),
    )


def solve_purchase_many(
    v: np.ndarray,
    sizes: np.ndarray,
    schedule: PriceSchedule,
    q_max: int = Q_MAX,
) -> np.ndarray:
    """Vectorized purchase quantities for the piecewise-linear value
    function, one latent value per customer."""
    v = np.asarray(v, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.int64)
    out = np.zeros(len(v), dtype=np.int64)
    for size in np.unique(sizes):
        mask = sizes == size
        q, slope, pay = envelope_lines(int(size), schedule, q_max)
        payoff = np.outer(v[mask], slope) - pay  # (n, C)
        best_pay = payoff[:, 0].copy()
        best_q = np.full(mask.sum(), q[0])
        for j in range(1, len(q)):
            take = payoff[:, j] >= best_pay
            best_pay[take] = payoff[take, j]
            best_q[take] = q[j]
        out[mask] = best_q
    return out


def _gross(v: float, size: int, q: float, a: float) -> float:
    if a == 1.0:
        return v * min(q, size)
    return v * size ** (1.0 - a) * min(q, size) ** a
