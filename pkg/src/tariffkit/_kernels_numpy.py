"""NumPy implementation of the profit-integration kernels.

This is the fallback backend: semantically identical to the compiled
extension, selected at import time when the extension is unavailable (or
forced via TARIFFKIT_KERNELS=pure).

Layout shared by all entry points: customers are grouped into classes of
equal size; ``cls_ptr`` delimits each class's candidate block inside the
flat candidate arrays, ``mem_ptr`` delimits its members inside ``mu``.
Candidates are sorted by quantity within a class.
"""

from __future__ import annotations

import numpy as np

from .choice import upper_envelope
from .dist import cdf, partial_mean

BACKEND = "numpy"


def _interval_tables(breaks, wq, wp, ws, mu, sigma, family, c1, c2):
    """Per-interval probabilities and partial means for a member block."""
    n = len(mu)
    k = len(breaks)
    F = np.empty((n, k + 2))
    PM = np.empty((n, k + 2))
    F[:, 0], F[:, -1] = 0.0, 1.0
    PM[:, 0], PM[:, -1] = 0.0, mu
    if k:
        t = (np.asarray(breaks)[None, :] - mu[:, None]) / sigma
        F[:, 1:-1] = cdf(t, family)
        PM[:, 1:-1] = mu[:, None] * F[:, 1:-1] + sigma * partial_mean(t, family)
    dF = np.diff(F, axis=1)
    dPM = np.diff(PM, axis=1)
    q = np.asarray(wq, dtype=np.float64)
    pay = np.asarray(wp)
    m = np.asarray(ws)
    costs = c1 * (q > 0) + c2 * q
    return dF, dPM, q, pay, m, costs


def envelope_customer_stats(cls_ptr, slope, qty, pay, mem_ptr, mu, sigma, family, c1, c2):
    """Exact per-customer expectations under one schedule.

    Returns (revenue, cost, consumer surplus, purchase probability,
    expected quantity), each aligned with ``mu``.
    """
    n = len(mu)
    rev = np.zeros(n)
    cost = np.zeros(n)
    cs = np.zeros(n)
    pbuy = np.zeros(n)
    eq = np.zeros(n)
    for z in range(len(cls_ptr) - 1):
        j0, j1 = cls_ptr[z], cls_ptr[z + 1]
        m0, m1 = mem_ptr[z], mem_ptr[z + 1]
        if m0 == m1:
            continue
        breaks, wq, wp, ws = upper_envelope(qty[j0:j1], slope[j0:j1], pay[j0:j1])
        dF, dPM, q, pw, mw, cw = _interval_tables(
            breaks, wq, wp, ws, mu[m0:m1], sigma, family, c1, c2
        )
        rev[m0:m1] = dF @ pw
        cost[m0:m1] = dF @ cw
        cs[m0:m1] = dPM @ mw - dF @ pw
        pbuy[m0:m1] = dF @ (q > 0).astype(float)
        eq[m0:m1] = dF @ q
    return rev, cost, cs, pbuy, eq


def envelope_profit_batch(cls_ptr, slope, qty, pay_matrix, mem_ptr, mu, sigma, family, c1, c2):
    """Total expected profit for each schedule row of ``pay_matrix``."""
    pay_matrix = np.atleast_2d(pay_matrix)
    S = pay_matrix.shape[0]
    out = np.zeros(S)
    for z in range(len(cls_ptr) - 1):
        j0, j1 = cls_ptr[z], cls_ptr[z + 1]
        m0, m1 = mem_ptr[z], mem_ptr[z + 1]
        if m0 == m1:
            continue
        mu_z = mu[m0:m1]
        for s in range(S):
            breaks, wq, wp, ws = upper_envelope(
                qty[j0:j1], slope[j0:j1], pay_matrix[s, j0:j1]
            )
            q = np.asarray(wq, dtype=np.float64)
            margin = np.asarray(wp) - c1 * (q > 0) - c2 * q
            k = len(breaks)
            if k == 0:
                out[s] += margin[0] * len(mu_z)
                continue
            t = (np.asarray(breaks)[None, :] - mu_z[:, None]) / sigma
            Fsum = cdf(t, family).sum(axis=0)
            Fsum = np.concatenate(([0.0], Fsum, [float(len(mu_z))]))
            out[s] += np.diff(Fsum) @ margin
    return out


def mc_totals(cls_ptr, slope, qty, pay, mem_ptr, mu, sigma, eps, c1, c2):
    """Simulated totals under one schedule.

    ``eps`` is an (R, N) matrix of standard error draws in member order.
    Returns per-draw totals (revenue, cost, surplus) plus per-customer means
    of (revenue, cost, surplus, purchase indicator, quantity).
    """
    R, n = eps.shape
    rev_d = np.zeros(R)
    cost_d = np.zeros(R)
    cs_d = np.zeros(R)
    crev = np.zeros(n)
    ccost = np.zeros(n)
    ccs = np.zeros(n)
    cpbuy = np.zeros(n)
    ceq = np.zeros(n)
    for z in range(len(cls_ptr) - 1):
        j0, j1 = cls_ptr[z], cls_ptr[z + 1]
        m0, m1 = mem_ptr[z], mem_ptr[z + 1]
        if m0 == m1:
            continue
        v = mu[m0:m1][None, :] + sigma * eps[:, m0:m1]
        best_po = slope[j0] * v - pay[j0]
        best_j = np.full(v.shape, j0, dtype=np.int64)
        for j in range(j0 + 1, j1):
            po = slope[j] * v - pay[j]
            take = po >= best_po
            best_po[take] = po[take]
            best_j[take] = j
        q = qty[best_j]
        pw = pay[best_j]
        cw = c1 * (q > 0) + c2 * q
        rev_d += pw.sum(axis=1)
        cost_d += cw.sum(axis=1)
        cs_d += best_po.sum(axis=1)
        crev[m0:m1] = pw.mean(axis=0)
        ccost[m0:m1] = cw.mean(axis=0)
        ccs[m0:m1] = best_po.mean(axis=0)
        cpbuy[m0:m1] = (q > 0).mean(axis=0)
        ceq[m0:m1] = q.mean(axis=0)
    return rev_d, cost_d, cs_d, crev, ccost, ccs, cpbuy, ceq
