"""Stable CDF / partial-expectation helpers for the two error families.

All functions work on standardized values; callers shift and scale by the
model's mu and sigma.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, ndtr

_SQRT2PI = np.sqrt(2.0 * np.pi)

FAMILY_CODES = {"logistic": 0, "normal": 1}


def cdf(t, family: str):
    """P(eps <= t) for a standard draw of the given family."""
    t = np.asarray(t, dtype=np.float64)
    if family == "logistic":
        return expit(t)
    if family == "normal":
        return ndtr(t)
    raise ValueError(f"unknown error family {family!r}")


def partial_mean(t, family: str):
    """E[eps * 1{eps <= t}] for a standard draw; 0 at -inf, 0 at +inf."""
    t = np.asarray(t, dtype=np.float64)
    if family == "logistic":
        # d/dt [t*F(t) - softplus(t)] = t*f(t)
        return t * expit(t) - np.logaddexp(0.0, t)
    if family == "normal":
        return -np.exp(-0.5 * t * t) / _SQRT2PI
    raise ValueError(f"unknown error family {family!r}")


def expected_excess(z, family: str):
    """E[(eps - z)^+] for a standard draw."""
    z = np.asarray(z, dtype=np.float64)
    if family == "logistic":
        return np.logaddexp(0.0, -z)
    if family == "normal":
        return np.exp(-0.5 * z * z) / _SQRT2PI - z * ndtr(-z)
    raise ValueError(f"unknown error family {family!r}")


def sample(rng: np.random.Generator, family: str, shape):
    """Standard draws of the given family."""
    if family == "logistic":
        return rng.logistic(0.0, 1.0, shape)
    if family == "normal":
        return rng.standard_normal(shape)
    raise ValueError(f"unknown error family {family!r}")
