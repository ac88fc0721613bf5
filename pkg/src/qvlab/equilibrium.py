"""Symmetric equilibrium of the smoothed quadratic-voting game.

A voter with value ``u`` facing the one-out total ``S`` (the sum of the other
``N - 1`` votes) maximizes ``G(v) = u*E[Psi(S + v)] - v**2``. The solver
iterates damped, monotonized best responses to a fixed point.

When the best response develops a jump near ``u_lo`` the extremist regime is
switched on. Extremists occupy ``[u_lo, u_star)``, a sliver far narrower
than the value grid, so ``u_star`` is a separate unknown: for each trial
cutoff the moderate fixed point is solved, and ``u_star`` is the root of the
indifference gap between the extremist and moderate branches there.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from qvlab import _backend
from qvlab.distributions import ValueDistribution
from qvlab.extremist import solve_alpha_w
from qvlab.payoff import PayoffFunction
from qvlab.strategy import (
    Cutoff,
    GridSpec,
    VoteStrategy,
    VoteTotalDistribution,
    expect_Psi,
    expect_psi,
    value_grid,
    vote_total_distribution,
)

_TIE_TOL = 1e-14
_NEWTON_STEPS = 40


@dataclass(frozen=True)
class SolverOptions:
    """Controls for :func:`solve_equilibrium`.

    ``tol_fixed_point`` defaults to ``1e-6*sqrt(2*u_hi)`` when left as
    ``None``. ``seed`` is recorded in summaries; the solver is deterministic.
    """

    grid_size: int = 801
    damping: float = 0.3
    tol_fixed_point: float | None = None
    tol_foc: float = 1e-6
    max_iters: int = 400
    v_scan_points: int = 2001
    seed: int = 0
    detect_jumps: bool = True
    points_per_delta: int = 40
    points_per_sd: int = 6
    cutoff_xtol: float = 1e-10

    def __post_init__(self):
        ints = (self.grid_size, self.max_iters, self.v_scan_points, self.points_per_delta,
                self.points_per_sd)
        if min(ints) <= 0 or self.tol_foc <= 0 or not (0 < self.damping <= 1):
            raise ValueError("solver options must be positive with 0 < damping <= 1")
        if self.tol_fixed_point is not None and self.tol_fixed_point <= 0:
            raise ValueError("tol_fixed_point must be positive")

    def fixed_point_tol(self, F: ValueDistribution) -> float:
        if self.tol_fixed_point is not None:
            return self.tol_fixed_point
        return 1e-6 * math.sqrt(2 * F.u_hi)

    def grid_spec(self, P: PayoffFunction) -> GridSpec:
        return GridSpec(delta=P.delta, points_per_delta=self.points_per_delta,
                        points_per_sd=self.points_per_sd)


@dataclass
class EquilibriumReport:
    strategy: VoteStrategy
    p_hat: float
    foc_residual_sup: float
    br_gap_sup: float
    iterations: int
    converged: bool
    s_mean: float
    s_var: float
    discontinuity: tuple[float, float, float] | None = None
    N: int = 0
    delta: float = float("nan")
    message: str = ""
    history: list[tuple[int, float, float]] = field(default_factory=list)

    def summary(self) -> dict:
        out = {
            "N": self.N, "delta": self.delta, "converged": self.converged,
            "iterations": self.iterations, "p_hat": self.p_hat,
            "foc_residual_sup": self.foc_residual_sup, "br_gap_sup": self.br_gap_sup,
            "s_mean": self.s_mean, "s_var": self.s_var, "message": self.message,
        }
        if self.discontinuity is not None:
            u_star, v_minus, v_plus = self.discontinuity
            out.update(u_star=u_star, v_minus=v_minus, v_plus=v_plus)
        return out

    def write(self, out_dir, stem: str = "equilibrium") -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{stem}_strategy.csv"
        self.strategy.save(csv_path)
        summary_path = out_dir / f"{stem}_summary.csv"
        rows = ["key,value"]
        for k, v in self.summary().items():
            rows.append(f"{k},{_fmt(v)}")
        summary_path.write_text("\n".join(rows) + "\n")
        return csv_path, summary_path


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, str):
        return json.dumps(v)
    return str(v)


def vote_bounds(F_or_strategy) -> tuple[float, float]:
    return -math.sqrt(2 * abs(F_or_strategy.u_lo)), math.sqrt(2 * F_or_strategy.u_hi)


# --------------------------------------------------------------------------
# best response


@dataclass
class _Candidates:
    v: np.ndarray  # (n_u, 2) refined local maximizers, nan when absent
    G: np.ndarray  # (n_u, 2) objective at the candidates


class ResponseTable:
    """Best responses against one vote-total law.

    ``E[Psi(S + v)]`` does not depend on ``u``, so it is tabulated once on a
    scan grid per sign half (ordered outward from ``v = 0``). Each ``u`` then
    costs one row of ``u*g - v**2``; the two best local maxima are refined by
    safeguarded Newton steps on the first-order condition.
    """

    def __init__(self, dist: VoteTotalDistribution, P: PayoffFunction,
                 bounds: tuple[float, float], scan_points: int = 2001):
        self.dist = dist
        self.P = P
        self.v_lo, self.v_hi = bounds
        width = self.v_hi - self.v_lo
        n_neg = max(8, int(round(scan_points * -self.v_lo / width)))
        n_pos = max(8, scan_points - n_neg)
        self.neg = np.linspace(0.0, self.v_lo, n_neg + 1)  # 0, -dv, ..., v_lo
        self.pos = np.linspace(0.0, self.v_hi, n_pos + 1)
        self.g_neg = expect_Psi(dist, P, self.neg)
        self.g_pos = expect_Psi(dist, P, self.pos)

    def G(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast(u, v).shape
        uu, vv = np.broadcast_to(u, shape).ravel(), np.broadcast_to(v, shape).ravel()
        return (uu * expect_Psi(self.dist, self.P, vv) - vv * vv).reshape(shape)

    def _half(self, u: np.ndarray, grid: np.ndarray, g: np.ndarray) -> _Candidates:
        n = u.size
        Gm = u[:, None] * g[None, :] - grid[None, :] ** 2
        left = np.concatenate([np.full((n, 1), -np.inf), Gm[:, :-1]], axis=1)
        right = np.concatenate([Gm[:, 1:], np.full((n, 1), -np.inf)], axis=1)
        # index 0 is v = 0, so ">=" toward the origin and ">" outward favours small |v|
        is_max = (Gm > left) & (Gm >= right)
        is_max[:, 0] = Gm[:, 0] >= Gm[:, 1]
        masked = np.where(is_max, Gm, -np.inf)
        first = np.argmax(masked, axis=1)
        masked2 = masked.copy()
        masked2[np.arange(n), first] = -np.inf
        second = np.argmax(masked2, axis=1)
        has_second = np.isfinite(masked2[np.arange(n), second])
        idx = np.stack([first, second], axis=1)
        v0 = grid[idx]
        lo_idx = np.clip(idx - 1, 0, grid.size - 1)
        hi_idx = np.clip(idx + 1, 0, grid.size - 1)
        a = np.minimum(grid[lo_idx], grid[hi_idx])
        b = np.maximum(grid[lo_idx], grid[hi_idx])
        uu = np.repeat(u[:, None], 2, axis=1)
        v_ref = self._refine(uu.ravel(), v0.ravel(), a.ravel(), b.ravel()).reshape(n, 2)
        G_ref = self.G(uu, v_ref)
        # never accept a refinement that is worse than its scan point
        G_scan = np.take_along_axis(Gm, idx, axis=1)
        worse = G_ref < G_scan
        v_ref = np.where(worse, v0, v_ref)
        G_ref = np.where(worse, G_scan, G_ref)
        v_ref[~has_second, 1] = np.nan
        G_ref[~has_second, 1] = -np.inf
        return _Candidates(v_ref, G_ref)

    def _refine(self, u, v, a, b):
        """Safeguarded Newton on ``u*E[psi(S+v)] - 2v = 0`` inside ``[a, b]``."""
        v = v.copy()
        fa = self._foc(u, a)
        fb = self._foc(u, b)
        bracket = (fa > 0) & (fb < 0)
        lo, hi = a.copy(), b.copy()
        active = bracket & (u != 0)
        for _ in range(_NEWTON_STEPS):
            if not np.any(active):
                break
            ia = np.flatnonzero(active)
            e_psi, e_psip = expect_psi(self.dist, self.P, v[ia])
            f = u[ia] * e_psi - 2 * v[ia]
            df = u[ia] * e_psip - 2.0
            pos = f > 0
            lo[ia] = np.where(pos, v[ia], lo[ia])
            hi[ia] = np.where(pos, hi[ia], v[ia])
            with np.errstate(divide="ignore", invalid="ignore"):
                step = v[ia] - f / df
            bad = ~np.isfinite(step) | (step <= lo[ia]) | (step >= hi[ia]) | (df >= 0)
            new = np.where(bad, 0.5 * (lo[ia] + hi[ia]), step)
            done = (np.abs(new - v[ia]) <= 1e-15 * np.maximum(1.0, np.abs(v[ia]))) | (hi[ia] - lo[ia] <= 1e-16)
            v[ia] = new
            active[ia[done]] = False
        return v

    def _foc(self, u, v):
        e_psi, _ = expect_psi(self.dist, self.P, v)
        return u * e_psi - 2 * v

    def candidates(self, u) -> _Candidates:
        """Top-two local maximizers of ``G`` on the sign half matching each ``u``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.full((u.size, 2), np.nan)
        G = np.full((u.size, 2), -np.inf)
        neg, pos = u < 0, u > 0
        if np.any(neg):
            c = self._half(u[neg], self.neg, self.g_neg)
            v[neg], G[neg] = c.v, c.G
        if np.any(pos):
            c = self._half(u[pos], self.pos, self.g_pos)
            v[pos], G[pos] = c.v, c.G
        zero = u == 0
        v[zero, 0], G[zero, 0] = 0.0, 0.0
        return _Candidates(v, G)

    def best(self, u) -> np.ndarray:
        """Global maximizer; exact ties go to the smaller ``|v|``."""
        c = self.candidates(u)
        v1, v2 = c.v[:, 0], c.v[:, 1]
        G1, G2 = c.G[:, 0], c.G[:, 1]
        pick2 = (G2 > G1 + _TIE_TOL * np.maximum(1.0, np.abs(G1))) | (
            (np.abs(G2 - G1) <= _TIE_TOL * np.maximum(1.0, np.abs(G1))) & (np.abs(v2) < np.abs(v1)))
        pick2 &= np.isfinite(v2)
        return np.where(pick2, v2, v1)

    def branches(self, u) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(v_moderate, G_moderate, v_far, G_far): candidates sorted by ``|v|``.

        When only one local maximum exists both branches coincide.
        """
        c = self.candidates(u)
        v, G = c.v, c.G
        v2 = np.where(np.isfinite(v[:, 1]), v[:, 1], v[:, 0])
        G2 = np.where(np.isfinite(v[:, 1]), G[:, 1], G[:, 0])
        swap = np.abs(v2) < np.abs(v[:, 0])
        v_mod = np.where(swap, v2, v[:, 0])
        G_mod = np.where(swap, G2, G[:, 0])
        v_far = np.where(swap, v[:, 0], v2)
        G_far = np.where(swap, G[:, 0], G2)
        return v_mod, G_mod, v_far, G_far


def best_response(u, dist: VoteTotalDistribution, P: PayoffFunction,
                  bounds: tuple[float, float], v_scan_points: int = 2001):
    """Global maximizer of ``u*E[Psi(S+v)] - v**2`` over ``v`` in ``bounds``."""
    table = ResponseTable(dist, P, bounds, v_scan_points)
    out = table.best(u)
    return float(out[0]) if np.ndim(u) == 0 else out


def brute_force_response(u: float, dist: VoteTotalDistribution, P: PayoffFunction,
                         bounds: tuple[float, float], points: int = 10_000) -> tuple[float, float]:
    """Argmax of ``G`` on a uniform scan (oracle for tests); returns (v, cell width)."""
    grid = np.linspace(bounds[0], bounds[1], points)
    G = u * expect_Psi(dist, P, grid) - grid**2
    best = np.flatnonzero(G >= G.max() - _TIE_TOL)
    k = best[np.argmin(np.abs(grid[best]))]
    return float(grid[k]), float(grid[1] - grid[0])


# --------------------------------------------------------------------------
# residuals


def _bulk_mask(grid_u: np.ndarray, cutoff: Cutoff | None, cells: int = 2) -> np.ndarray:
    du = np.diff(grid_u).max()
    mask = (grid_u - grid_u[0] > cells * du) & (grid_u[-1] - grid_u > cells * du)
    if cutoff is not None:
        k = int(np.searchsorted(grid_u, cutoff.u_star, side="right"))
        mask[max(k - 1, 0):k + 1] = False
    return mask


def foc_residual(strategy: VoteStrategy, F: ValueDistribution, P: PayoffFunction, N: int,
                 dist: VoteTotalDistribution | None = None,
                 grid_spec: GridSpec | None = None) -> tuple[float, np.ndarray]:
    """(sup over the bulk, per-node profile) of ``|2v(u) - u*E[psi(S + v(u))]|``."""
    if dist is None:
        dist = vote_total_distribution(strategy, F, N - 1, grid_spec or GridSpec(delta=P.delta))
    gu, gv = strategy.grid_u, strategy.grid_v
    e_psi, _ = expect_psi(dist, P, gv)
    prof = np.abs(2 * gv - gu * e_psi)
    mask = _bulk_mask(gu, strategy.cutoff)
    return float(prof[mask].max()), prof


def discontinuity_condition_check(strategy: VoteStrategy, F: ValueDistribution,
                                  P: PayoffFunction, N: int, points: int = 4001,
                                  dist: VoteTotalDistribution | None = None) -> float:
    """min over ``v`` in ``[v_minus, v_plus]`` of ``|E[psi'(v+S)]*u_star - 2|``."""
    if strategy.cutoff is None:
        raise ValueError("strategy has no discontinuity")
    if dist is None:
        dist = vote_total_distribution(strategy, F, N - 1, GridSpec(delta=P.delta))
    u_star = strategy.cutoff.u_star
    v_minus = strategy.cutoff.v_extremist
    v_plus = float(np.interp(u_star, strategy.grid_u, strategy.grid_v))
    vs = np.linspace(v_minus, v_plus, points)
    _, e_psip = expect_psi(dist, P, vs)
    return float(np.min(np.abs(e_psip * u_star - 2.0)))


# --------------------------------------------------------------------------
# solver


@dataclass
class _State:
    v: np.ndarray
    cutoff: Cutoff | None
    dist: VoteTotalDistribution
    table: ResponseTable
    br: np.ndarray
    gap: float
    res: float


class _Solver:
    def __init__(self, F, P, N, opts: SolverOptions):
        if N < 2:
            raise ValueError("N must be >= 2")
        self.F, self.P, self.N, self.opts = F, P, N, opts
        self.grid_u = value_grid(F, opts.grid_size)
        self.bounds = vote_bounds(F)
        self.spec = opts.grid_spec(P)
        self.tol_fp = opts.fixed_point_tol(F)
        self.bulk = _bulk_mask(self.grid_u, None)
        self.jump_threshold = 0.25 * math.sqrt(2 * abs(F.u_lo))
        self.history: list[tuple[int, float, float]] = []
        self.iterations = 0

    def strategy(self, v, cutoff=None) -> VoteStrategy:
        return VoteStrategy(self.grid_u, v, cutoff)

    def evaluate(self, v, cutoff=None, moderate_only=False) -> _State:
        strat = self.strategy(v, cutoff)
        dist = vote_total_distribution(strat, self.F, self.N - 1, self.spec)
        table = ResponseTable(dist, self.P, self.bounds, self.opts.v_scan_points)
        if moderate_only:
            br = table.branches(self.grid_u)[0]
        else:
            br = table.best(self.grid_u)
        br = _backend.isotonic_increasing(br, np.ones_like(br))
        br[self.grid_u == 0.0] = 0.0
        bulk = _bulk_mask(self.grid_u, cutoff)
        gap = float(np.max(np.abs(br - v)[bulk]))
        e_psi, _ = expect_psi(dist, self.P, v)
        res = float(np.max(np.abs(2 * v - self.grid_u * e_psi)[bulk]))
        return _State(v, cutoff, dist, table, br, gap, res)

    def iterate(self, v, cutoff=None, moderate_only=False, max_iters=None,
                stop_on_jump=False) -> tuple[_State, bool, bool]:
        """Damped iteration; returns (state, converged, jump_seen)."""
        lam = self.opts.damping
        max_iters = self.opts.max_iters if max_iters is None else max_iters
        state = self.evaluate(v, cutoff, moderate_only)
        for _ in range(max_iters):
            self.history.append((self.iterations, state.gap, state.res))
            if state.gap <= self.tol_fp and state.res <= self.opts.tol_foc:
                return state, True, False
            if stop_on_jump and self.jump_seen(state):
                return state, False, True
            self.iterations += 1
            v_new = (1 - lam) * state.v + lam * state.br
            state = self.evaluate(v_new, cutoff, moderate_only)
        self.history.append((self.iterations, state.gap, state.res))
        ok = state.gap <= self.tol_fp and state.res <= self.opts.tol_foc
        return state, ok, False

    def jump_seen(self, state: _State) -> bool:
        """A best-response jump of at least the detection threshold, either
        between grid neighbours or against the current iterate."""
        th = self.jump_threshold
        return bool(np.max(np.diff(state.br)) >= th or np.max(np.abs(state.br - state.v)) >= th)

    # -- extremist branch --------------------------------------------------
    def cutoff_gap(self, state: _State, u: float) -> tuple[float, float]:
        """(G_far - G_moderate, v_far) at value ``u`` against ``state``'s law."""
        v_mod, G_mod, v_far, G_far = state.table.branches(np.array([u]))
        if abs(v_far[0] - v_mod[0]) < self.jump_threshold:
            return -1.0, float(v_far[0])
        return float(G_far[0] - G_mod[0]), float(v_far[0])

    def _moderate_at(self, dist: VoteTotalDistribution, u: float, v_guess: float) -> float:
        """Smallest-|v| local maximizer of ``G`` at ``u > 0``: first downward
        crossing of the first-order condition."""
        hi = max(4 * abs(v_guess), 1e-12)
        while True:
            vs = np.linspace(0.0, min(hi, self.bounds[1]), 65)
            e_psi, _ = expect_psi(dist, self.P, vs)
            f = u * e_psi - 2 * vs
            down = np.flatnonzero((f[:-1] > 0) & (f[1:] <= 0))
            if down.size or hi >= self.bounds[1]:
                break
            hi *= 4
        if f[0] <= 0:
            return 0.0
        if not down.size:
            return float(vs[-1])
        k = down[0]

        def foc(x):
            return float(u * expect_psi(dist, self.P, np.array([x]))[0][0] - 2 * x)

        return brentq(foc, vs[k], vs[k + 1], xtol=1e-15, rtol=1e-14)

    def _inner(self, a: float, shape: np.ndarray, v_ext: float, lg_bounds):
        """Moderate fixed point whose top vote is pinned at ``a``.

        The cutoff is chosen so that the moderate response at ``u_hi`` equals
        ``a``; returns (state, status) with status in {"ok", "low", "high"}.
        """
        u_lo, u_hi = self.F.u_lo, self.F.u_hi
        lg_min, lg_max = lg_bounds
        state = None
        for _ in range(60):
            v = a * shape

            def resid(lg, v=v, v_ext=v_ext):
                cut = Cutoff(u_lo + math.exp(lg), v_ext)
                dist = vote_total_distribution(self.strategy(v, cut), self.F, self.N - 1, self.spec)
                return self._moderate_at(dist, u_hi, a) - a

            if resid(lg_min) >= 0:
                return state, "low"
            if resid(lg_max) <= 0:
                return state, "high"
            lg = brentq(resid, lg_min, lg_max, xtol=1e-12, rtol=1e-13)
            cut = Cutoff(u_lo + math.exp(lg), v_ext)
            state = self.evaluate(v, cut, moderate_only=True)
            self.iterations += 1
            self.history.append((self.iterations, state.gap, state.res))
            _, v_far = self.cutoff_gap(state, cut.u_star)
            new_shape = state.br / state.br[-1]
            moved = float(np.max(np.abs(a * new_shape - v)))
            shape = new_shape
            ext_moved = abs(v_far - v_ext)
            v_ext = v_far
            if moved <= 0.1 * self.tol_fp and ext_moved <= 1e-10:
                break
        return state, "ok"

    def solve_with_cutoff(self, v_start) -> tuple[_State, bool, str]:
        """Nested root-finds: the outer one zeroes the indifference gap at
        ``u_star`` over the pinned top vote ``a``."""
        F, N = self.F, self.N
        mu = F.moments.mu
        f_lo = float(F.density(np.array([F.u_lo]))[0])
        width = F.u_hi - F.u_lo
        lg_bounds = (math.log(1e-15 * width), math.log(min(0.05 * width, 1.0 / (N * f_lo))))
        sol = solve_alpha_w(self.P, F.u_lo)
        v_start = np.asarray(v_start, dtype=float)
        s0 = self.evaluate(v_start)
        if not sol.exists:
            return s0, False, "extremist problem has no solution"
        dens = F.density(self.grid_u)
        memo = {}
        warm = {"shape": v_start / v_start[-1]}

        def ext_guess(a):
            # extremists pull the moderate total down to w
            v = a * warm["shape"]
            return max(sol.w - (N - 1) * trapezoid(v * dens, self.grid_u), self.bounds[0])

        def D(log_a: float) -> float:
            if log_a in memo:
                return memo[log_a][0]
            a = math.exp(log_a)
            state, status = self._inner(a, warm["shape"], ext_guess(a), lg_bounds)
            if status == "low":
                val = 1.0
            elif status == "high":
                val = -1.0
            else:
                val, _ = self.cutoff_gap(state, state.cutoff.u_star)
                warm["shape"] = state.v / state.v[-1]
            memo[log_a] = (val, state)
            return val

        # asymptotic top vote: the moderate total sits at alpha
        a0 = sol.alpha * F.u_hi / ((N - 1) * mu)
        lo, hi = math.log(a0) - math.log(2), math.log(a0) + math.log(2)
        for _ in range(40):
            if D(lo) > 0:
                break
            lo -= math.log(2)
        for _ in range(40):
            if D(hi) < 0:
                break
            hi += math.log(2)
        if not (D(lo) > 0 > D(hi)):
            return s0, False, "indifference not bracketed"
        root = brentq(D, lo, hi, xtol=1e-13, rtol=1e-13, maxiter=200)
        val = D(root)
        state = memo[root][1]
        if state is None:
            return s0, False, "cutoff solve failed"
        _, v_ext = self.cutoff_gap(state, state.cutoff.u_star)
        state = replace(state, cutoff=Cutoff(state.cutoff.u_star, v_ext))
        ok = state.gap <= self.tol_fp and state.res <= self.opts.tol_foc
        return state, ok, f"cutoff regime (indifference gap {val:.3g})"


def _initial_votes(F: ValueDistribution, P: PayoffFunction, N: int, grid_u: np.ndarray) -> np.ndarray:
    mom = F.moments
    lo, hi = vote_bounds(F)
    if abs(mom.mu) < 1e-9:
        p_N = 1.0 / (2**0.75 * math.sqrt(mom.sigma) * (math.pi * (N - 1)) ** 0.25)
        v = p_N * grid_u
    else:
        v = P.delta * grid_u / (abs(mom.mu) * N)
    return np.clip(v, lo, hi)


def solve_equilibrium(F: ValueDistribution, P: PayoffFunction, N: int,
                      opts: SolverOptions | None = None,
                      initial: VoteStrategy | None = None) -> EquilibriumReport:
    """Damped best-response iteration to a symmetric equilibrium."""
    opts = opts or SolverOptions()
    solver = _Solver(F, P, N, opts)
    if initial is not None:
        v0 = np.interp(solver.grid_u, initial.grid_u, initial.grid_v)
    else:
        v0 = _initial_votes(F, P, N, solver.grid_u)

    message = "continuous"
    if initial is not None and initial.cutoff is not None:
        state, ok, message = solver.solve_with_cutoff(v0)
        return _report(solver, state, ok, message)

    state = solver.evaluate(v0)
    if opts.detect_jumps and solver.jump_seen(state) and F.moments.mu > 0:
        state, ok, message = solver.solve_with_cutoff(v0)
    else:
        state, ok, jump = solver.iterate(v0, stop_on_jump=opts.detect_jumps)
        if jump:
            if F.moments.mu > 0:
                state, ok, message = solver.solve_with_cutoff(state.v)
            else:
                ok, message = False, "jump outside the supported lower-tail regime"
    return _report(solver, state, ok, message)


def _report(solver: _Solver, state: _State, ok: bool, message: str) -> EquilibriumReport:
    strat = solver.strategy(state.v, state.cutoff)
    e_psi0, _ = expect_psi(state.dist, solver.P, np.array([0.0]))
    disc = None
    if state.cutoff is not None:
        v_plus = float(np.interp(state.cutoff.u_star, solver.grid_u, state.v))
        disc = (state.cutoff.u_star, state.cutoff.v_extremist, v_plus)
        # global optimality of the moderate branch outside the cutoff cell
        glob = state.table.best(solver.grid_u)
        mask = _bulk_mask(solver.grid_u, state.cutoff)
        gap = float(np.max(np.abs(glob - state.v)[mask]))
        if gap > state.gap:
            state = replace(state, gap=gap)
            ok = ok and gap <= solver.tol_fp
            if gap > solver.tol_fp:
                message += "; moderate branch not globally optimal"
    return EquilibriumReport(
        strategy=strat, p_hat=float(e_psi0[0]), foc_residual_sup=state.res,
        br_gap_sup=state.gap, iterations=solver.iterations, converged=bool(ok),
        s_mean=state.dist.mean, s_var=state.dist.var, discontinuity=disc,
        N=solver.N, delta=solver.P.delta, message=message, history=solver.history,
    )


def report_from_strategy(strategy: VoteStrategy, F: ValueDistribution, P: PayoffFunction,
                         N: int, opts: SolverOptions | None = None) -> EquilibriumReport:
    """Residual report for a given strategy without iterating."""
    opts = opts or SolverOptions(grid_size=strategy.grid_u.size)
    solver = _Solver(F, P, N, replace(opts, grid_size=strategy.grid_u.size))
    solver.grid_u = strategy.grid_u
    state = solver.evaluate(np.array(strategy.grid_v), strategy.cutoff,
                            moderate_only=strategy.cutoff is not None)
    ok = state.gap <= solver.tol_fp and state.res <= opts.tol_foc
    return _report(solver, state, ok, "evaluated")


__all__ = [
    "SolverOptions", "EquilibriumReport", "ResponseTable",
    "best_response", "brute_force_response", "foc_residual",
    "discontinuity_condition_check", "solve_equilibrium", "report_from_strategy",
    "vote_bounds",
]
