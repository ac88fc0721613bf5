# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled inner loops. Semantics must match ``qvlab._fallback`` exactly."""

import numpy as np
from libc.math cimport cos, sin, floor

cdef enum:
    RESYNC = 64


def char_function(const double[::1] values, const double[::1] weights,
                  double dt, Py_ssize_t count):
    """Return ``sum_j w_j exp(i k dt x_j)`` for ``k = 0 .. count-1``.

    Uses a per-node rotation recurrence, re-anchored with direct
    trigonometric evaluation every few steps to stop phase drift.
    """
    cdef Py_ssize_t q = values.shape[0]
    cdef Py_ssize_t j, k
    cdef double accr, acci, tr, ang
    out = np.empty(count, dtype=np.complex128)
    cdef double complex[::1] res = out
    zr_a = np.empty(q)
    zi_a = np.empty(q)
    rr_a = np.empty(q)
    ri_a = np.empty(q)
    cdef double[::1] zr = zr_a, zi = zi_a, rr = rr_a, ri = ri_a
    for j in range(q):
        zr[j] = weights[j]
        zi[j] = 0.0
        rr[j] = cos(dt * values[j])
        ri[j] = sin(dt * values[j])
    for k in range(count):
        if k > 0 and k % RESYNC == 0:
            for j in range(q):
                ang = k * dt * values[j]
                zr[j] = weights[j] * cos(ang)
                zi[j] = weights[j] * sin(ang)
        accr = 0.0
        acci = 0.0
        for j in range(q):
            accr += zr[j]
            acci += zi[j]
            tr = zr[j] * rr[j] - zi[j] * ri[j]
            zi[j] = zr[j] * ri[j] + zi[j] * rr[j]
            zr[j] = tr
        res[k] = accr + 1j * acci
    return out


def isotonic_increasing(const double[::1] y, const double[::1] w):
    """Weighted least-squares nondecreasing fit (pool adjacent violators)."""
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t i, b, k, end
    lvl_a = np.empty(n)
    wt_a = np.empty(n)
    start_a = np.empty(n, dtype=np.intp)
    cdef double[::1] lvl = lvl_a, wt = wt_a
    cdef Py_ssize_t[::1] start = start_a
    cdef double tot
    b = -1
    for i in range(n):
        b += 1
        lvl[b] = y[i]
        wt[b] = w[i]
        start[b] = i
        while b > 0 and lvl[b - 1] > lvl[b]:
            tot = wt[b - 1] + wt[b]
            lvl[b - 1] = (wt[b - 1] * lvl[b - 1] + wt[b] * lvl[b]) / tot
            wt[b - 1] = tot
            b -= 1
    out = np.empty(n)
    cdef double[::1] res = out
    for k in range(b + 1):
        i = start[k]
        end = start[k + 1] if k < b else n
        while i < end:
            res[i] = lvl[k]
            i += 1
    return out


cdef inline double _interp(double x, const double[::1] xs, const double[::1] ys) nogil:
    cdef Py_ssize_t lo = 0, hi = xs.shape[0] - 1, mid
    if x <= xs[0]:
        return ys[0]
    if x >= xs[hi]:
        return ys[hi]
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    return ys[lo] + (ys[hi] - ys[lo]) * (x - xs[lo]) / (xs[hi] - xs[lo])


def election_sums(const double[:, ::1] draws, const double[::1] ppf_table,
                  const double[::1] grid_u, const double[::1] grid_v,
                  double u_star, double v_ext):
    """Per-row value total, vote total and extremist count.

    ``draws`` holds uniform(0,1) variates; values come from linear
    interpolation of ``ppf_table`` (quantiles on an equispaced
    probability grid), votes from the piecewise-linear strategy with the
    extremist vote applied below ``u_star``.
    """
    cdef Py_ssize_t reps = draws.shape[0], n = draws.shape[1]
    cdef Py_ssize_t r, i, idx
    cdef Py_ssize_t last = ppf_table.shape[0] - 1
    cdef double p, pos, frac, u, su, sv, cu, cv, y, t
    cdef long ne
    U_a = np.empty(reps)
    V_a = np.empty(reps)
    E_a = np.empty(reps, dtype=np.int64)
    cdef double[::1] U = U_a, V = V_a
    cdef long long[::1] E = E_a
    with nogil:
        for r in range(reps):
            su = 0.0
            sv = 0.0
            cu = 0.0
            cv = 0.0
            ne = 0
            for i in range(n):
                p = draws[r, i]
                pos = p * last
                idx = <Py_ssize_t> floor(pos)
                if idx >= last:
                    idx = last - 1
                frac = pos - idx
                u = ppf_table[idx] + (ppf_table[idx + 1] - ppf_table[idx]) * frac
                # compensated sums
                y = u - cu
                t = su + y
                cu = (t - su) - y
                su = t
                if u < u_star:
                    y = v_ext - cv
                    ne += 1
                else:
                    y = _interp(u, grid_u, grid_v) - cv
                t = sv + y
                cv = (t - sv) - y
                sv = t
            U[r] = su
            V[r] = sv
            E[r] = ne
    return U_a, V_a, E_a
