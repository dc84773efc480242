# cython: language_level=3
"""Compiled profit-integration kernels.

Same contracts and tie conventions as _kernels_numpy; that module is the
readable reference.  Customers are grouped into equal-size classes; each
class's candidate block holds (quantity, payoff slope, payment) triples
sorted by quantity.
"""

import numpy as np

from libc.math cimport INFINITY, erf, exp, log1p

BACKEND = "cython"

cdef double SQRT1_2 = 0.7071067811865476
cdef double INV_SQRT2PI = 0.3989422804014327


cdef inline double _logistic_cdf(double t) nogil:
    cdef double e
    if t >= 0.0:
        return 1.0 / (1.0 + exp(-t))
    e = exp(t)
    return e / (1.0 + e)


cdef inline double _softplus(double t) nogil:
    if t > 35.0:
        return t
    if t < -35.0:
        return exp(t)
    return log1p(exp(t))


cdef inline double _cdf(double t, int family) nogil:
    if family == 0:
        return _logistic_cdf(t)
    return 0.5 * (1.0 + erf(t * SQRT1_2))


cdef inline double _partial_mean(double t, int family) nogil:
    # E[eps * 1{eps <= t}] for a standard draw; -> 0 at both infinities
    if family == 0:
        return t * _logistic_cdf(t) - _softplus(t)
    return -INV_SQRT2PI * exp(-0.5 * t * t)


cdef int _family_code(str family) except -1:
    if family == "logistic":
        return 0
    if family == "normal":
        return 1
    raise ValueError(f"unknown error family {family!r}")


cdef Py_ssize_t _build_hull(
    const double* slope,
    const double* pay,
    Py_ssize_t j0,
    Py_ssize_t j1,
    long long* kept,
    long long* hull,
    double* hx,
) nogil:
    """Upper envelope of the class's payoff lines.

    Equal slopes keep the cheaper line (ties: the later, larger quantity);
    intervals are right-open, so at a breakpoint the larger quantity wins.
    Returns the hull size; hx[k] is where hull[k] starts winning.
    """
    cdef Py_ssize_t nk = 0, h = 0, j, m
    cdef double x
    for j in range(j0, j1):
        if nk > 0 and slope[kept[nk - 1]] == slope[j]:
            if pay[j] <= pay[kept[nk - 1]]:
                kept[nk - 1] = j
        else:
            kept[nk] = j
            nk += 1
    for m in range(nk):
        j = kept[m]
        x = -INFINITY
        while h > 0:
            x = (pay[j] - pay[hull[h - 1]]) / (slope[j] - slope[hull[h - 1]])
            if x <= hx[h - 1]:
                h -= 1
                x = -INFINITY
            else:
                break
        hull[h] = j
        hx[h] = x
        h += 1
    return h


def envelope_customer_stats(cls_ptr, slope, qty, pay, mem_ptr, mu, sigma, family, c1, c2):
    cdef long long[::1] cp = np.ascontiguousarray(cls_ptr, dtype=np.int64)
    cdef long long[::1] mp = np.ascontiguousarray(mem_ptr, dtype=np.int64)
    cdef const double[::1] sl = np.ascontiguousarray(slope, dtype=np.float64)
    cdef const double[::1] qt = np.ascontiguousarray(qty, dtype=np.float64)
    cdef const double[::1] pv = np.ascontiguousarray(pay, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double sg = sigma, cc1 = c1, cc2 = c2
    cdef int fam = _family_code(family)

    cdef Py_ssize_t n = mv.shape[0], nz = cp.shape[0] - 1
    rev_a = np.zeros(n); cost_a = np.zeros(n); cs_a = np.zeros(n)
    pbuy_a = np.zeros(n); eq_a = np.zeros(n)
    cdef double[::1] rev = rev_a, cost = cost_a, cs = cs_a, pbuy = pbuy_a, eq = eq_a

    cdef Py_ssize_t maxc = 0, z
    for z in range(nz):
        if cp[z + 1] - cp[z] > maxc:
            maxc = cp[z + 1] - cp[z]
    kept_a = np.empty(maxc, dtype=np.int64)
    hull_a = np.empty(maxc, dtype=np.int64)
    hx_a = np.empty(maxc, dtype=np.float64)
    cdef long long[::1] kept = kept_a, hull = hull_a
    cdef double[::1] hx = hx_a

    cdef Py_ssize_t h, i, k, j
    cdef double mui, F, F_prev, PM, PM_prev, dF, dPM, q, pw, t
    cdef double r_acc, c_acc, s_acc, b_acc, q_acc
    with nogil:
        for z in range(nz):
            if mp[z] == mp[z + 1]:
                continue
            h = _build_hull(&sl[0], &pv[0], cp[z], cp[z + 1], &kept[0], &hull[0], &hx[0])
            for i in range(mp[z], mp[z + 1]):
                mui = mv[i]
                F_prev = 0.0
                PM_prev = 0.0
                r_acc = 0.0
                c_acc = 0.0
                s_acc = 0.0
                b_acc = 0.0
                q_acc = 0.0
                for k in range(h):
                    if k + 1 < h:
                        t = (hx[k + 1] - mui) / sg
                        F = _cdf(t, fam)
                        PM = mui * F + sg * _partial_mean(t, fam)
                    else:
                        F = 1.0
                        PM = mui
                    dF = F - F_prev
                    dPM = PM - PM_prev
                    j = hull[k]
                    q = qt[j]
                    pw = pv[j]
                    r_acc += pw * dF
                    if q > 0.0:
                        c_acc += (cc1 + cc2 * q) * dF
                        b_acc += dF
                        q_acc += q * dF
                    s_acc += sl[j] * dPM - pw * dF
                    F_prev = F
                    PM_prev = PM
                rev[i] = r_acc
                cost[i] = c_acc
                cs[i] = s_acc
                pbuy[i] = b_acc
                eq[i] = q_acc
    return rev_a, cost_a, cs_a, pbuy_a, eq_a


def envelope_profit_batch(cls_ptr, slope, qty, pay_matrix, mem_ptr, mu, sigma, family, c1, c2):
    cdef long long[::1] cp = np.ascontiguousarray(cls_ptr, dtype=np.int64)
    cdef long long[::1] mp = np.ascontiguousarray(mem_ptr, dtype=np.int64)
    cdef const double[::1] sl = np.ascontiguousarray(slope, dtype=np.float64)
    cdef const double[::1] qt = np.ascontiguousarray(qty, dtype=np.float64)
    pm = np.ascontiguousarray(np.atleast_2d(pay_matrix), dtype=np.float64)
    cdef const double[:, ::1] pv = pm
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double sg = sigma, cc1 = c1, cc2 = c2
    cdef int fam = _family_code(family)

    cdef Py_ssize_t S = pv.shape[0], nz = cp.shape[0] - 1
    out_a = np.zeros(S)
    cdef double[::1] out = out_a

    cdef Py_ssize_t maxc = 0, z
    for z in range(nz):
        if cp[z + 1] - cp[z] > maxc:
            maxc = cp[z + 1] - cp[z]
    kept_a = np.empty(maxc, dtype=np.int64)
    hull_a = np.empty(maxc, dtype=np.int64)
    hx_a = np.empty(maxc, dtype=np.float64)
    margin_a = np.empty(maxc, dtype=np.float64)
    cdef long long[::1] kept = kept_a, hull = hull_a
    cdef double[::1] hx = hx_a, margin = margin_a

    cdef Py_ssize_t s, h, i, k, j
    cdef double mui, F, F_prev, acc, total, q, t
    with nogil:
        for s in range(S):
            total = 0.0
            for z in range(nz):
                if mp[z] == mp[z + 1]:
                    continue
                h = _build_hull(
                    &sl[0], &pv[s, 0], cp[z], cp[z + 1], &kept[0], &hull[0], &hx[0]
                )
                for k in range(h):
                    j = hull[k]
                    q = qt[j]
                    margin[k] = pv[s, j]
                    if q > 0.0:
                        margin[k] -= cc1 + cc2 * q
                for i in range(mp[z], mp[z + 1]):
                    mui = mv[i]
                    F_prev = 0.0
                    acc = 0.0
                    for k in range(h):
                        if k + 1 < h:
                            t = (hx[k + 1] - mui) / sg
                            F = _cdf(t, fam)
                        else:
                            F = 1.0
                        acc += margin[k] * (F - F_prev)
                        F_prev = F
                    total += acc
            out[s] = total
    return out_a


def mc_totals(cls_ptr, slope, qty, pay, mem_ptr, mu, sigma, eps, c1, c2):
    cdef long long[::1] cp = np.ascontiguousarray(cls_ptr, dtype=np.int64)
    cdef long long[::1] mp = np.ascontiguousarray(mem_ptr, dtype=np.int64)
    cdef const double[::1] sl = np.ascontiguousarray(slope, dtype=np.float64)
    cdef const double[::1] qt = np.ascontiguousarray(qty, dtype=np.float64)
    cdef const double[::1] pv = np.ascontiguousarray(pay, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    eps_c = np.ascontiguousarray(eps, dtype=np.float64)
    cdef const double[:, ::1] ep = eps_c
    cdef double sg = sigma, cc1 = c1, cc2 = c2

    cdef Py_ssize_t R = ep.shape[0], n = mv.shape[0], nz = cp.shape[0] - 1
    rev_d_a = np.zeros(R); cost_d_a = np.zeros(R); cs_d_a = np.zeros(R)
    crev_a = np.zeros(n); ccost_a = np.zeros(n); ccs_a = np.zeros(n)
    cpbuy_a = np.zeros(n); ceq_a = np.zeros(n)
    cdef double[::1] rev_d = rev_d_a, cost_d = cost_d_a, cs_d = cs_d_a
    cdef double[::1] crev = crev_a, ccost = ccost_a, ccs = ccs_a
    cdef double[::1] cpbuy = cpbuy_a, ceq = ceq_a

    cdef Py_ssize_t z, i, r, j, best
    cdef double v, po, best_po, q, pw, cw, inv_r
    inv_r = 1.0 / R
    with nogil:
        for z in range(nz):
            for i in range(mp[z], mp[z + 1]):
                for r in range(R):
                    v = mv[i] + sg * ep[r, i]
                    best = cp[z]
                    best_po = sl[best] * v - pv[best]
                    for j in range(cp[z] + 1, cp[z + 1]):
                        po = sl[j] * v - pv[j]
                        if po >= best_po:
                            best_po = po
                            best = j
                    q = qt[best]
                    pw = pv[best]
                    cw = cc2 * q
                    if q > 0.0:
                        cw += cc1
                    rev_d[r] += pw
                    cost_d[r] += cw
                    cs_d[r] += best_po
                    crev[i] += pw * inv_r
                    ccost[i] += cw * inv_r
                    ccs[i] += best_po * inv_r
                    if q > 0.0:
                        cpbuy[i] += inv_r
                    ceq[i] += q * inv_r
    return rev_d_a, cost_d_a, cs_d_a, crev_a, ccost_a, ccs_a, cpbuy_a, ceq_a
