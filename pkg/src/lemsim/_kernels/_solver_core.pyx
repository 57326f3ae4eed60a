# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backward-induction core.

Must stay bit-identical to the NumPy backend: same expressions, same
evaluation order, compiled without FP contraction (see setup.py).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY


cdef inline double _fmax(double a, double b) nogil:
    return a if a > b else b


cdef inline double _clamp(double x, double lo, double hi) nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def solve_layered(act_target, act_energy, act_count, residual, market_mode,
                  grid_buy, grid_sell, market_min, market_max, fees, w_sq,
                  others_bid=None, others_ask=None):
    """See lemsim._kernels._numpy_core.solve_layered for the contract."""
    cdef const cnp.int32_t[:, ::1] target = np.ascontiguousarray(act_target, dtype=np.int32)
    cdef const double[:, ::1] energy = np.ascontiguousarray(act_energy, dtype=np.float64)
    cdef const cnp.int32_t[::1] count = np.ascontiguousarray(act_count, dtype=np.int32)
    cdef const double[::1] resid = np.ascontiguousarray(residual, dtype=np.float64)

    cdef Py_ssize_t n = target.shape[0]
    cdef Py_ssize_t horizon = resid.shape[0]
    cdef bint market = bool(market_mode)

    cdef double p_buy = grid_buy
    cdef double p_sell = grid_sell
    cdef double p_min = market_min
    cdef double p_max = market_max
    cdef double fee = fees
    cdef double wq = w_sq
    cdef double mid = (p_min + p_max) / 2.0
    cdef double span = p_buy - p_sell

    cdef const double[::1] ob_arr
    cdef const double[::1] oa_arr
    if market:
        ob_arr = np.ascontiguousarray(others_bid, dtype=np.float64)
        oa_arr = np.ascontiguousarray(others_ask, dtype=np.float64)
    else:
        ob_arr = np.zeros(horizon)
        oa_arr = np.zeros(horizon)

    values_arr = np.zeros((horizon + 1, n))
    policy_arr = np.zeros((horizon, n), dtype=np.int32)
    cdef double[:, ::1] values = values_arr
    cdef cnp.int32_t[:, ::1] policy = policy_arr

    cdef Py_ssize_t t, i, k
    cdef cnp.int32_t j, best_j
    cdef double e, qb, qa, dd, ss, total, price, cleared, scale, mb, ms, gb, gs
    cdef double bill, r, val, best, ob, oa, res

    with nogil:
        for t in range(horizon - 1, -1, -1):
            res = resid[t]
            ob = ob_arr[t]
            oa = oa_arr[t]
            for i in range(n):
                best = -INFINITY
                best_j = 0
                for k in range(count[i]):
                    j = target[i, k]
                    e = res + energy[i, k]
                    if market:
                        qb = _fmax(e, 0.0)
                        qa = _fmax(-e, 0.0)
                        dd = qb + ob
                        ss = qa + oa
                        total = dd + ss
                        if total > 0:
                            price = _clamp(p_sell + span * (dd / total), p_min, p_max)
                        else:
                            price = mid
                        cleared = dd if dd < ss else ss
                        if dd <= ss:
                            mb = qb
                        else:
                            scale = cleared / dd
                            if qb >= ob:
                                mb = cleared - ob * scale
                            else:
                                mb = qb * scale
                        if ss <= dd:
                            ms = qa
                        else:
                            scale = cleared / ss
                            if qa >= oa:
                                ms = cleared - oa * scale
                            else:
                                ms = qa * scale
                        gb = qb - mb
                        gs = qa - ms
                        bill = (mb - ms) * price + gb * p_buy - gs * p_sell + fee
                        r = -bill
                    else:
                        r = -(_fmax(e, 0.0) * p_buy - _fmax(-e, 0.0) * p_sell) - wq * (e * e)
                    val = r + values[t + 1, j]
                    if val > best:
                        best = val
                        best_j = j
                values[t, i] = best
                policy[t, i] = best_j
    return values_arr, policy_arr
