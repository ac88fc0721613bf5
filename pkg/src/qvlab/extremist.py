"""The extremist problem: how far one low-value voter moves the total.

``H(alpha, w) = (1 - Psi(w))*|u_lo| - (alpha - w)**2`` is the gain of a voter
at ``u_lo`` who moves a total sitting at ``alpha`` down to ``w``. The pair
``(alpha*, w*)`` has ``max_w H(alpha*, w) = H(alpha*, w*) = 0``; ``h(alpha) =
max_w H`` is decreasing, so ``alpha*`` is a 1-D root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from qvlab.distributions import ValueDistribution
from qvlab.payoff import PayoffFunction

CRIT_GRID = 10_000
H_ZERO_TOL = 1e-8


@dataclass(frozen=True)
class ExtremistSolution:
    alpha: float
    w: float
    zeta: float
    exists: bool
    delta: float
    u_lo: float
    h_at_delta: float

    def with_zeta(self, zeta: float) -> "ExtremistSolution":
        return replace(self, zeta=float(zeta))


def H(alpha, w, P: PayoffFunction, u_lo: float):
    """Extremist gain ``(1 - Psi(w))*|u_lo| - (alpha - w)**2`` (vectorized)."""
    alpha = np.asarray(alpha, dtype=float)
    w = np.asarray(w, dtype=float)
    out = (1.0 - P.Psi(w)) * abs(u_lo) - (alpha - w) ** 2
    return out if np.ndim(out) else float(out)


def dH_dw(alpha, w, P: PayoffFunction, u_lo: float):
    w = np.asarray(w, dtype=float)
    return -P.psi(w) * abs(u_lo) + 2.0 * (alpha - w)


def critical_points(alpha: float, P: PayoffFunction, u_lo: float,
                    grid_points: int = CRIT_GRID, xtol: float = 1e-10) -> list[float]:
    """Roots of ``dH/dw`` in ``(-delta, delta)``, in increasing order.

    ``w = alpha`` is always a critical point when ``alpha >= delta``; it is not
    included here.
    """
    d = P.delta
    ws = np.linspace(-d, d, grid_points)
    g = dH_dw(alpha, ws, P, u_lo)
    roots = []
    s = np.sign(g)
    for i in np.flatnonzero(s[:-1] * s[1:] < 0):
        r = brentq(lambda x: float(dH_dw(alpha, x, P, u_lo)), ws[i], ws[i + 1], xtol=xtol)
        if -d < r < d:
            roots.append(r)
    for i in np.flatnonzero(s[1:-1] == 0):
        roots.append(float(ws[i + 1]))
    return sorted(roots)


def _max_over_window(alpha: float, P: PayoffFunction, u_lo: float) -> tuple[float, float]:
    """(h(alpha), argmax) of ``H(alpha, .)`` over ``[-delta, delta]``."""
    d = P.delta
    cands = [-d, d] + critical_points(alpha, P, u_lo)
    best_w, best = None, -math.inf
    for w in cands:
        val = float(H(alpha, w, P, u_lo))
        if val > best:
            best, best_w = val, w
    # polish the interior maximizer; the critical root is already accurate
    if -d < best_w < d:
        span = 4 * d / CRIT_GRID
        res = minimize_scalar(lambda x: -float(H(alpha, x, P, u_lo)),
                              bounds=(max(-d, best_w - span), min(d, best_w + span)),
                              method="bounded", options={"xatol": 1e-12})
        if -res.fun > best:
            best, best_w = -res.fun, float(res.x)
    return float(best), float(best_w)


def h_profile(P: PayoffFunction, u_lo: float, alphas) -> np.ndarray:
    return np.array([_max_over_window(a, P, u_lo)[0] for a in np.asarray(alphas, dtype=float)])


def solve_alpha_w(P: PayoffFunction, u_lo: float) -> ExtremistSolution:
    """Root ``alpha*`` of ``h`` on ``[delta, delta + sqrt(2|u_lo|)]`` and its ``w*``."""
    if u_lo > -1:
        raise ValueError("u_lo must be <= -1")
    d = P.delta
    h_d, _ = _max_over_window(d, P, u_lo)
    if h_d <= H_ZERO_TOL:
        return ExtremistSolution(alpha=d, w=float("nan"), zeta=float("nan"), exists=False,
                                 delta=d, u_lo=u_lo, h_at_delta=h_d)
    a_hi = d + math.sqrt(2 * abs(u_lo))
    alpha = brentq(lambda a: _max_over_window(a, P, u_lo)[0], d, a_hi, xtol=1e-14, rtol=1e-15)
    _, w = _max_over_window(alpha, P, u_lo)
    return ExtremistSolution(alpha=alpha, w=w, zeta=float("nan"),
                             exists=True, delta=d, u_lo=u_lo, h_at_delta=h_d)


def extremist_cutoff(sol: ExtremistSolution, F: ValueDistribution, P: PayoffFunction, N: int,
                     mu: float | None = None, use_mu: bool = True) -> tuple[float, float]:
    """(zeta, u_star) with ``u_star = u_lo + zeta/N**2``.

    ``zeta = alpha / (mu * psi(w) * f(u_lo))``; ``use_mu=False`` drops ``mu``.
    """
    if not sol.exists:
        raise ValueError("no extremist solution")
    if N < 2:
        raise ValueError("N must be >= 2")
    psi_w = float(P.psi(np.array([sol.w]))[0])
    if psi_w <= 0:
        raise ValueError("psi(w) = 0: w sits on the window edge")
    f_lo = float(F.density(np.array([F.u_lo]))[0])
    mu = F.moments.mu if mu is None else mu
    factor = mu if use_mu else 1.0
    if factor <= 0:
        raise ValueError("mu must be positive for the lower-tail extremist cutoff")
    zeta = sol.alpha / (factor * psi_w * f_lo)
    return zeta, F.u_lo + zeta / N**2


@dataclass(frozen=True)
class BruteScan:
    alphas: np.ndarray
    row_max: np.ndarray  # max over the w grid of H(alpha, .)
    row_argmax: np.ndarray
    hits: list[tuple[float, float]]  # pairs meeting both conditions
    first_alpha: float  # smallest alpha with row_max <= h_tol


def brute_force_alpha_w(P: PayoffFunction, u_lo: float, points: int = 2000,
                        h_tol: float = 1e-6, zero_tol: float = 1e-8) -> BruteScan:
    """Exhaustive ``points x points`` scan of ``H`` over the alpha and w ranges.

    A grid pair qualifies when ``|H(alpha, w)| <= zero_tol`` and
    ``max_w' H(alpha, w') <= h_tol``.
    """
    d = P.delta
    alphas = np.linspace(d, d + math.sqrt(2 * abs(u_lo)), points)
    ws = np.linspace(-d, d, points)
    one_minus = (1.0 - P.Psi(ws)) * abs(u_lo)
    Hm = one_minus[None, :] - (alphas[:, None] - ws[None, :]) ** 2
    row_max = Hm.max(axis=1)
    row_arg = ws[np.argmax(Hm, axis=1)]
    ok_rows = row_max <= h_tol
    hits = []
    for i in np.flatnonzero(ok_rows):
        for j in np.flatnonzero(np.abs(Hm[i]) <= zero_tol):
            hits.append((float(alphas[i]), float(ws[j])))
    first = float(alphas[np.argmax(ok_rows)]) if ok_rows.any() else float("nan")
    return BruteScan(alphas, row_max, row_arg, hits, first)


__all__ = ["ExtremistSolution", "H", "dH_dw", "critical_points", "h_profile",
           "solve_alpha_w", "extremist_cutoff", "brute_force_alpha_w", "BruteScan"]
