"""Price schedules: every tariff shape the firm can post, plus evaluation
and structural checks.

A schedule maps a purchased quantity q to a total charge P(q), with P(0) = 0
("no purchase, no payment") for every kind:

* ``linear``      -- single per-unit rate, P(q) = p * q.
* ``via_origin``  -- one rate per quantity segment; the whole charge is
  re-priced at the segment's rate, so each piece extrapolates through the
  origin: P(q) = p_k * q for q in segment k.
* ``continuous``  -- incremental block rates; each segment charges its rate
  only on the units falling inside it, so P is continuous in q.
* ``two_part``    -- fixed fee plus a single per-unit rate.
* ``individualized`` -- per-customer surplus extraction; it has no posted
  P(q) and is evaluated by the counterfactual scenarios, not here.

A positive ``fixed_fee`` may be attached to any posted kind and is charged
once for any q > 0.

Segment membership is half-open: a quantity exactly on a boundary belongs to
the upper segment.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from .errors import UnsupportedOperation

KINDS = ("linear", "via_origin", "continuous", "two_part", "individualized")

#: Default segment start quantities for five-segment piecewise schedules.
DEFAULT_SEGMENT_STARTS = (0, 10, 20, 50, 100)

#: Default upper bound of the integer grid used for structural scans and
#: brute-force purchase searches.  Largest segment start times five.
Q_MAX = 500


@dataclass(frozen=True)
class PriceSchedule:
    """Immutable tariff description.

    rates are $/unit and aligned with ``bins`` (segment start quantities,
    ascending, first element 0) for piecewise kinds; linear and two_part
    schedules carry a single rate.  ``fixed_fee`` is in $ and applies once
    to any positive purchase.
    """

    kind: str
    rates: tuple[float, ...]
    fixed_fee: float = 0.0
    bins: tuple[int, ...] = field(default=DEFAULT_SEGMENT_STARTS)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "fixed_fee", float(self.fixed_fee))
        if self.kind in ("linear", "two_part"):
            if len(self.rates) != 1:
                raise ValueError(f"{self.kind} schedule needs exactly one rate")
            object.__setattr__(self, "bins", (0,))
        elif self.kind in ("via_origin", "continuous"):
            object.__setattr__(self, "bins", tuple(int(b) for b in self.bins))
            if len(self.rates) != len(self.bins):
                raise ValueError(
                    f"{len(self.rates)} rates for {len(self.bins)} segments"
                )
            if self.bins[0] != 0 or any(
                a >= b for a, b in zip(self.bins, self.bins[1:])
            ):
                raise ValueError("segment starts must be ascending and begin at 0")
        else:  # individualized
            object.__setattr__(self, "bins", ())
        if any(r < 0 for r in self.rates):
            raise ValueError("rates must be nonnegative")
        if self.fixed_fee < 0:
            raise ValueError("fixed_fee must be nonnegative")

    def segment_index(self, q: float) -> int:
        """Index of the segment containing q (half-open membership)."""
        return bisect.bisect_right(self.bins, q) - 1

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "bins": list(self.bins),
            "rates": list(self.rates),
            "fixed_fee": self.fixed_fee,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PriceSchedule":
        return cls(
            kind=d["kind"],
            rates=tuple(d["rates"]),
            fixed_fee=d.get("fixed_fee", 0.0),
            bins=tuple(d.get("bins", DEFAULT_SEGMENT_STARTS)),
        )


def linear(rate: float, fixed_fee: float = 0.0) -> PriceSchedule:
    return PriceSchedule("linear", (rate,), fixed_fee)


def two_part(fixed_fee: float, rate: float) -> PriceSchedule:
    return PriceSchedule("two_part", (rate,), fixed_fee)


def via_origin(rates, bins=DEFAULT_SEGMENT_STARTS, fixed_fee: float = 0.0) -> PriceSchedule:
    return PriceSchedule("via_origin", tuple(rates), fixed_fee, tuple(bins))


def continuous(rates, bins=DEFAULT_SEGMENT_STARTS, fixed_fee: float = 0.0) -> PriceSchedule:
    return PriceSchedule("continuous", tuple(rates), fixed_fee, tuple(bins))


def _continuous_bases(schedule: PriceSchedule) -> tuple[float, ...]:
    """Cumulative charge at each segment start for incremental-rate tariffs."""
    bases = [0.0]
    for k in range(len(schedule.bins) - 1):
        width = schedule.bins[k + 1] - schedule.bins[k]
        bases.append(bases[-1] + schedule.rates[k] * width)
    return tuple(bases)


def total_price(schedule: PriceSchedule, q: float) -> float:
    """Total charge P(q) in dollars.

    q = 0 always costs 0.  The fixed fee, if any, is added once for q > 0.
    """
    if q < 0:
        raise ValueError(f"quantity must be nonnegative, got {q}")
    if schedule.kind == "individualized":
        raise UnsupportedOperation("individualized tariffs have no posted total price")
    if q == 0:
        return 0.0
    if schedule.kind in ("linear", "two_part"):
        return schedule.rates[0] * q + schedule.fixed_fee
    k = schedule.segment_index(q)
    if schedule.kind == "via_origin":
        return schedule.rates[k] * q + schedule.fixed_fee
    # continuous: charge full lower segments, then the partial top segment
    base = _continuous_bases(schedule)[k]
    return base + schedule.rates[k] * (q - schedule.bins[k]) + schedule.fixed_fee


def total_price_vector(schedule: PriceSchedule, qs) -> "np.ndarray":
    """Vectorized total_price over an array of nonnegative quantities."""
    import numpy as np

    qs = np.asarray(qs, dtype=np.float64)
    if np.any(qs < 0):
        raise ValueError("quantities must be nonnegative")
    if schedule.kind == "individualized":
        raise UnsupportedOperation("individualized tariffs have no posted total price")
    positive = qs > 0
    if schedule.kind in ("linear", "two_part"):
        out = schedule.rates[0] * qs
    else:
        starts = np.array(schedule.bins, dtype=np.float64)
        rates = np.array(schedule.rates)
        k = np.searchsorted(starts, qs, side="right") - 1
        k = np.clip(k, 0, len(starts) - 1)
        if schedule.kind == "via_origin":
            out = rates[k] * qs
        else:
            bases = np.array(_continuous_bases(schedule))
            out = bases[k] + rates[k] * (qs - starts[k])
    if schedule.fixed_fee:
        out = out + schedule.fixed_fee * positive
    return np.where(positive, out, 0.0)


def marginal_price(schedule: PriceSchedule, q: float) -> float:
    """Applicable per-unit rate at quantity q > 0.

    For via_origin this is the flat rate of q's segment; for continuous it is
    the incremental rate of q's segment.
    """
    if q <= 0:
        raise ValueError(f"marginal price needs q > 0, got {q}")
    if schedule.kind == "individualized":
        raise UnsupportedOperation("individualized tariffs have no marginal price")
    if schedule.kind in ("linear", "two_part"):
        return schedule.rates[0]
    return schedule.rates[schedule.segment_index(q)]


def unit_price(schedule: PriceSchedule, q: float) -> float:
    """Break-even per-unit charge P(q)/q, the price an all-or-nothing buyer
    compares its valuation against.  Coincides with marginal_price for
    fee-free via_origin and linear tariffs.
    """
    if q <= 0:
        raise ValueError(f"unit price needs q > 0, got {q}")
    return total_price(schedule, q) / q


def is_concave_increasing(schedule: PriceSchedule, q_max: int = Q_MAX):
    """Check strict increase and concavity of the total charge on 1..q_max.

    Returns ``(ok, dips)``.  ``ok`` is True iff P is strictly increasing on
    the integer grid and its increments never grow.  ``dips`` lists every
    integer q undercut by a smaller quantity (some q' < q has P(q') > P(q)):
    the quantities a buyer could be re-priced into, so an observed purchase
    there cannot be trusted to equal the buyer's intended size.
    """
    totals = [total_price(schedule, q) for q in range(0, q_max + 1)]
    ok = True
    prev_inc = None
    for q in range(1, q_max + 1):
        inc = totals[q] - totals[q - 1]
        if inc <= 0:
            ok = False
        if prev_inc is not None and inc > prev_inc + 1e-9:
            ok = False
        prev_inc = inc
    dips = []
    running_max = totals[1]
    for q in range(2, q_max + 1):
        if totals[q] < running_max:
            dips.append(q)
        running_max = max(running_max, totals[q])
    return ok, dips
