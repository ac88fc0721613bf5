"""Pure-NumPy implementations of the compiled kernels in ``_kernels.pyx``."""

from __future__ import annotations

import numpy as np

_CHUNK = 128


def char_function(values, weights, dt, count):
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    out = np.empty(count, dtype=complex)
    for k0 in range(0, count, _CHUNK):
        k = np.arange(k0, min(count, k0 + _CHUNK))
        out[k] = np.exp(1j * dt * np.outer(k, values)) @ weights
    return out


def isotonic_increasing(y, w):
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    levels: list[float] = []
    wts: list[float] = []
    sizes: list[int] = []
    for yi, wi in zip(y, w):
        levels.append(float(yi))
        wts.append(float(wi))
        sizes.append(1)
        while len(levels) > 1 and levels[-2] > levels[-1]:
            tot = wts[-2] + wts[-1]
            levels[-2] = (wts[-2] * levels[-2] + wts[-1] * levels[-1]) / tot
            wts[-2] = tot
            sizes[-2] += sizes[-1]
            levels.pop()
            wts.pop()
            sizes.pop()
    return np.repeat(np.array(levels), sizes)


def election_sums(draws, ppf_table, grid_u, grid_v, u_star, v_ext):
    draws = np.asarray(draws, dtype=float)
    ppf_table = np.asarray(ppf_table, dtype=float)
    last = ppf_table.shape[0] - 1
    pos = draws * last
    idx = np.minimum(np.floor(pos).astype(np.intp), last - 1)
    frac = pos - idx
    u = ppf_table[idx] + (ppf_table[idx + 1] - ppf_table[idx]) * frac
    ext = u < u_star
    v = np.where(ext, v_ext, np.interp(u, grid_u, grid_v))
    return u.sum(axis=1), v.sum(axis=1), ext.sum(axis=1).astype(np.int64)
