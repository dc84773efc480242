"""Kernel backend selection.

The profit-integration inner loops dominate runtime (a 5-dimensional tariff
search evaluates the market tens of thousands of times), so they are
implemented twice: a compiled Cython extension and a NumPy fallback with
identical semantics.  The compiled backend is used when importable; set
TARIFFKIT_KERNELS=pure or =c to force a choice (=c raises if the extension
is missing).
"""

import os

_requested = os.environ.get("TARIFFKIT_KERNELS", "auto")
if _requested not in ("auto", "c", "pure"):
    raise RuntimeError(f"TARIFFKIT_KERNELS must be auto, c, or pure, not {_requested!r}")

impl = None
if _requested in ("auto", "c"):
    try:
        from . import _kernels_c as impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "c":
            raise
        impl = None
if impl is None:
    from . import _kernels_numpy as impl

BACKEND: str = impl.BACKEND
envelope_profit_batch = impl.envelope_profit_batch
envelope_customer_stats = impl.envelope_customer_stats
mc_totals = impl.mc_totals
