"""Vote strategies and the law of the vote total they induce.

A :class:`VoteStrategy` is piecewise linear in the value ``u`` on a node
grid, optionally with an extremist cutoff: below ``u_star`` every voter
casts the same ``v_extremist`` votes.

:func:`vote_total_distribution` returns the density of ``S_n``, the sum of
``n`` independent votes, on a uniform grid. Moderate votes enter through
their characteristic function, computed by Gauss-Legendre quadrature over
the value grid and inverted with a real FFT. The extremist atom is never
smeared onto the grid: conditioning on the number ``M`` of extremists gives
an exact binomial mixture of shifted moderate sums, summed until the
remaining tail probability is below ``1e-14``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import ndtr
from scipy.stats import binom

from qvlab import _backend
from qvlab.distributions import ValueDistribution
from qvlab.payoff import PayoffFunction

_TAIL_TARGET = 1e-14
_MAX_EXTREMIST_TERMS = 64
_CF_CUTOFF = 1e-17


class GridError(RuntimeError):
    """The vote-total grid cannot represent the law (aliasing or size cap)."""


@dataclass(frozen=True)
class Cutoff:
    u_star: float
    v_extremist: float


@dataclass(frozen=True, eq=False)
class VoteStrategy:
    grid_u: np.ndarray
    grid_v: np.ndarray
    cutoff: Cutoff | None = None

    def __post_init__(self):
        gu = np.ascontiguousarray(self.grid_u, dtype=float)
        gv = np.ascontiguousarray(self.grid_v, dtype=float)
        if gu.ndim != 1 or gu.shape != gv.shape or gu.size < 2:
            raise ValueError("grid_u and grid_v must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(gu) <= 0):
            raise ValueError("grid_u must be strictly increasing")
        gu.setflags(write=False)
        gv.setflags(write=False)
        object.__setattr__(self, "grid_u", gu)
        object.__setattr__(self, "grid_v", gv)

    @property
    def u_lo(self) -> float:
        return float(self.grid_u[0])

    @property
    def u_hi(self) -> float:
        return float(self.grid_u[-1])

    def evaluate(self, u):
        """Vote of a voter with value ``u`` (vectorized)."""
        u = np.asarray(u, dtype=float)
        tol = 1e-12 * max(1.0, abs(self.u_lo), abs(self.u_hi))
        if np.any(u < self.u_lo - tol) or np.any(u > self.u_hi + tol):
            raise ValueError("value outside the strategy support")
        out = np.interp(u, self.grid_u, self.grid_v)
        if self.cutoff is not None:
            out = np.where(u < self.cutoff.u_star, self.cutoff.v_extremist, out)
        return out if out.ndim else float(out)

    def with_values(self, grid_v, cutoff: Cutoff | None = None) -> "VoteStrategy":
        return VoteStrategy(self.grid_u, grid_v, cutoff)

    def scaled(self, lam: float) -> "VoteStrategy":
        cut = None if self.cutoff is None else Cutoff(self.cutoff.u_star, lam * self.cutoff.v_extremist)
        return VoteStrategy(self.grid_u, lam * self.grid_v, cut)

    @property
    def max_abs_vote(self) -> float:
        m = float(np.max(np.abs(self.grid_v)))
        if self.cutoff is not None:
            m = max(m, abs(self.cutoff.v_extremist))
        return m

    def invariant_violations(self, tol: float = 1e-12) -> list[str]:
        """Names of violated strategy invariants (monotone, sign, bounds)."""
        bad = []
        gv, gu = self.grid_v, self.grid_u
        if np.any(np.diff(gv) < -tol):
            bad.append("monotone")
        if self.cutoff is not None:
            above = gu >= self.cutoff.u_star
            if np.any(self.cutoff.v_extremist > gv[above] + tol):
                bad.append("monotone_cutoff")
        if np.any(gv * gu < -tol):
            bad.append("sign")
        zero = np.abs(gu) <= tol
        if np.any(np.abs(gv[zero]) > tol):
            bad.append("zero_at_zero")
        lo, hi = -math.sqrt(2 * abs(self.u_lo)), math.sqrt(2 * self.u_hi)
        vals = gv if self.cutoff is None else np.append(gv, self.cutoff.v_extremist)
        if np.any(vals < lo - tol) or np.any(vals > hi + tol):
            bad.append("bounds")
        return bad

    # -- serialization ---------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.cutoff is not None:
            buf.write(f"# cutoff u_star={self.cutoff.u_star:.17g} "
                      f"v_extremist={self.cutoff.v_extremist:.17g}\n")
        buf.write("u,v\n")
        for u, v in zip(self.grid_u, self.grid_v):
            buf.write(f"{u:.17g},{v:.17g}\n")
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "VoteStrategy":
        cutoff = None
        rows = []
        lines = text.splitlines()
        body = []
        for line in lines:
            if line.startswith("#"):
                fields = dict(kv.split("=", 1) for kv in line[1:].split() if "=" in kv)
                if "u_star" in fields:
                    cutoff = Cutoff(float(fields["u_star"]), float(fields["v_extremist"]))
            elif line.strip():
                body.append(line)
        reader = csv.DictReader(body)
        for rec in reader:
            rows.append((float(rec["u"]), float(rec["v"])))
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1], cutoff)

    @classmethod
    def load(cls, path) -> "VoteStrategy":
        return cls.from_csv(Path(path).read_text())


def value_grid(F: ValueDistribution, size: int = 801) -> np.ndarray:
    """Node grid on ``[u_lo, u_hi]`` that always contains ``u = 0``."""
    if size < 5:
        raise ValueError("grid size must be >= 5")
    width = F.u_hi - F.u_lo
    n_left = max(2, int(round((size - 1) * (-F.u_lo) / width)))
    n_right = max(2, size - 1 - n_left)
    left = np.linspace(F.u_lo, 0.0, n_left + 1)
    right = np.linspace(0.0, F.u_hi, n_right + 1)
    return np.concatenate([left, right[1:]])


def strategy_from_function(fn: Callable[[np.ndarray], np.ndarray], F: ValueDistribution,
                           size: int = 801, cutoff: Cutoff | None = None) -> VoteStrategy:
    gu = value_grid(F, size)
    return VoteStrategy(gu, np.asarray(fn(gu), dtype=float), cutoff)


def linear_strategy(c: float, F: ValueDistribution, size: int = 801) -> VoteStrategy:
    return strategy_from_function(lambda u: c * u, F, size)


# --------------------------------------------------------------------------
# law of the vote total


@dataclass(frozen=True)
class GridSpec:
    """Resolution controls for the vote-total grid.

    ``delta`` is the payoff half-width the grid must resolve (``None`` when
    no payoff expectations will be taken).
    """

    delta: float | None = None
    points_per_delta: int = 40
    points_per_sd: int = 6
    sd_cover: float = 12.0
    max_points: int = 2**22
    min_points: int = 2**10


@dataclass(eq=False)
class VoteTotalDistribution:
    """Density of ``S_n`` on the grid ``s_j = s0 + j*h``.

    ``kind`` is ``"density"`` (cell values of a continuous law) or
    ``"lattice"`` (point masses at nodes, stored as mass/h).
    """

    s0: float
    h: float
    pdf: np.ndarray
    n: int
    kind: str = "density"
    tail_mass: float = 0.0
    atom_mass: float = 0.0
    v_extremist: float | None = None
    components: dict[int, np.ndarray] = field(default_factory=dict)
    component_weights: dict[int, float] = field(default_factory=dict)
    clipped_mass: float = 0.0

    @property
    def size(self) -> int:
        return self.pdf.shape[0]

    @cached_property
    def grid_s(self) -> np.ndarray:
        return self.s0 + self.h * np.arange(self.size)

    @cached_property
    def cum(self) -> np.ndarray:
        """``cum[j]`` = mass of nodes ``0..j``."""
        return np.cumsum(self.pdf) * self.h

    @property
    def total_mass(self) -> float:
        return float(self.cum[-1])

    @cached_property
    def mean(self) -> float:
        return float(np.sum(self.pdf * self.grid_s) * self.h / self.total_mass)

    @cached_property
    def var(self) -> float:
        d = self.grid_s - self.mean
        return float(np.sum(self.pdf * d * d) * self.h / self.total_mass)

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    def cdf_at(self, x):
        """P(S_n <= x) treating each node's mass as spread over its cell
        (``density``) or concentrated at the node (``lattice``)."""
        x = np.asarray(x, dtype=float)
        pos = (x - self.s0) / self.h
        if self.kind == "lattice":
            j = np.floor(pos + 1e-9).astype(np.int64)
            return np.where(j < 0, 0.0, self.cum[np.clip(j, 0, self.size - 1)])
        edge = pos + 0.5
        j = np.floor(edge).astype(np.int64)
        frac = edge - j
        below = np.where(j >= 1, self.cum[np.clip(j - 1, 0, self.size - 1)], 0.0)
        inside = np.where((j >= 0) & (j < self.size), self.pdf[np.clip(j, 0, self.size - 1)] * self.h * frac, 0.0)
        return np.where(j >= self.size, self.total_mass, below + inside)

    def mass_between(self, a: float, b: float) -> float:
        return float(self.cdf_at(b) - self.cdf_at(a))

    @classmethod
    def from_lattice(cls, values, probs, h: float, n: int = 1, pad: int = 8) -> "VoteTotalDistribution":
        """Point masses ``probs`` at ``values`` (all on a lattice of spacing ``h``)."""
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        s0 = values.min() - pad * h
        size = int(round((values.max() - s0) / h)) + pad + 1
        pdf = np.zeros(size)
        idx = np.rint((values - s0) / h).astype(int)
        np.add.at(pdf, idx, probs / h)
        return cls(s0=s0, h=h, pdf=pdf, n=n, kind="lattice")


@dataclass(frozen=True)
class _SingleVoteLaw:
    nodes: np.ndarray  # vote values at quadrature nodes (moderate part)
    weights: np.ndarray  # probability weights, summing to 1 - q
    q: float
    v_ext: float | None
    vmin: float
    vmax: float
    seg_dv: float

    @property
    def moderate_mass(self) -> float:
        return 1.0 - self.q

    @cached_property
    def cond_moments(self) -> tuple[float, float]:
        w = self.weights / self.weights.sum()
        m = float(w @ self.nodes)
        var = float(w @ (self.nodes - m) ** 2)
        return m, max(var, 0.0)


def _single_vote_law(strategy: VoteStrategy, F: ValueDistribution, order: int) -> _SingleVoteLaw:
    gu, gv = strategy.grid_u, strategy.grid_v
    q = 0.0
    v_ext = None
    start = gu[0]
    if strategy.cutoff is not None and strategy.cutoff.u_star > gu[0]:
        start = min(strategy.cutoff.u_star, gu[-1])
        q = float(F.cdf(start))
        v_ext = strategy.cutoff.v_extremist
    k0 = int(np.searchsorted(gu, start, side="right")) - 1
    a = np.concatenate([[start], gu[k0 + 1:-1]])
    b = gu[k0 + 1:]
    keep = b > a
    a, b = a[keep], b[keep]
    x, w = np.polynomial.legendre.leggauss(order)
    half = (b - a) / 2
    pts = (a + half)[:, None] + half[:, None] * x[None, :]
    wts = half[:, None] * w[None, :] * F.density(pts)
    vals = np.interp(pts, gu, gv)
    seg_dv = float(np.max(np.abs(np.interp(b, gu, gv) - np.interp(a, gu, gv)))) if a.size else 0.0
    wts = wts.ravel()
    # exact moderate mass
    if wts.sum() > 0:
        wts *= (1.0 - q) / wts.sum()
    vals = vals.ravel()
    vmin = float(vals.min()) if vals.size else 0.0
    vmax = float(vals.max()) if vals.size else 0.0
    return _SingleVoteLaw(vals, wts, q, v_ext, vmin, vmax, seg_dv)


def _extremist_terms(n: int, q: float) -> tuple[np.ndarray, float]:
    if q <= 0.0:
        return np.array([1.0]), 0.0
    m_max = 2
    while m_max < min(n, _MAX_EXTREMIST_TERMS) and binom.sf(m_max, n, q) > _TAIL_TARGET:
        m_max += 1
    m_max = min(m_max, n)
    weights = binom.pmf(np.arange(m_max + 1), n, q)
    tail = float(binom.sf(m_max, n, q))
    return weights, tail


def vote_total_distribution(strategy: VoteStrategy, F: ValueDistribution, n: int,
                            grid_spec: GridSpec | None = None,
                            keep_components: bool = False) -> VoteTotalDistribution:
    """Law of ``S_n = v(U_1) + ... + v(U_n)`` for i.i.d. ``U_i ~ F``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    spec = grid_spec or GridSpec()
    law = _single_vote_law(strategy, F, order=4)
    weights, tail = _extremist_terms(n, law.q)
    m_max = weights.size - 1
    m1, var1 = law.cond_moments
    v_ext = law.v_ext if law.v_ext is not None else 0.0

    # --- grid design
    vmax_abs = max(strategy.max_abs_vote, 1e-12)
    lo_list, hi_list, sds = [], [], []
    for M in range(m_max + 1):
        k = n - M
        mean_M = k * m1 + M * v_ext
        sd_M = math.sqrt(k * var1)
        lo_list.append(max(mean_M - spec.sd_cover * sd_M, k * law.vmin + M * v_ext))
        hi_list.append(min(mean_M + spec.sd_cover * sd_M, k * law.vmax + M * v_ext))
        if sd_M > 0:
            sds.append(sd_M)
    lo, hi = min(lo_list), max(hi_list)
    if spec.delta is not None:
        lo = min(lo, -2 * spec.delta - vmax_abs)
        hi = max(hi, 2 * spec.delta + vmax_abs)
    h_candidates = []
    if spec.delta is not None:
        h_candidates.append(spec.delta / spec.points_per_delta)
    if sds:
        h_candidates.append(min(sds) / spec.points_per_sd)
    if n == 1:
        h_candidates.append(max(hi - lo, vmax_abs) / 2048)
    h = min(h_candidates) if h_candidates else 1e-3
    span = hi - lo
    margin = 0.1 * span + 8 * h
    lo -= margin
    hi += margin

    for _attempt in range(4):
        size = max(spec.min_points, 1 << int(math.ceil(math.log2(max(2.0, (hi - lo) / h)))))
        if size > spec.max_points:
            size = spec.max_points
            h = (hi - lo) / size
            if spec.delta is not None and h > spec.delta / 8:
                raise GridError(f"vote grid would need more than {spec.max_points} points")
        s0 = h * math.floor(lo / h)  # aligns s = 0 with a node
        dist = _build(strategy, F, n, law, weights, tail, s0, h, size, keep_components)
        edge = max(2, size // 100)
        leak = float(dist.pdf[:edge].sum() + dist.pdf[-edge:].sum()) * h
        if leak <= 1e-6:
            return dist
        extra = hi - lo
        lo -= extra / 2
        hi += extra / 2
    raise GridError(f"mass leakage {leak:.3g} at the grid boundary (aliasing)")


def _place_point_mass(pdf: np.ndarray, s0: float, h: float, x: float, mass: float) -> None:
    pos = (x - s0) / h
    j = int(math.floor(pos))
    frac = pos - j
    if frac < 1e-9:
        pdf[j] += mass / h
        return
    pdf[j] += (1 - frac) * mass / h
    pdf[j + 1] += frac * mass / h


def _push_forward(strategy, F, law, s0, h, size) -> np.ndarray:
    """Cell-averaged density of a single vote (n = 1)."""
    edges = s0 + h * (np.arange(size + 1) - 0.5)
    gu, gv = strategy.grid_u, strategy.grid_v
    pdf = np.zeros(size)
    start = gu[0] if law.q == 0 else strategy.cutoff.u_star
    if np.all(np.diff(gv) > 0):
        u_edge = np.interp(edges, gv, gu)
        cdf = F.cdf(np.maximum(u_edge, start)) - F.cdf(start)
        cdf = np.where(edges < np.interp(start, gu, gv), 0.0, cdf)
        pdf += np.diff(cdf) / h
    else:
        # flat pieces carry atoms; bin fine quadrature nodes instead
        idx = np.clip(np.rint((law.nodes - s0) / h).astype(int), 0, size - 1)
        np.add.at(pdf, idx, law.weights / h)
    if law.q > 0:
        _place_point_mass(pdf, s0, h, law.v_ext, law.q)
    return pdf


def _moderate_cf(law: _SingleVoteLaw, dt: float, count: int, k_needed: int,
                 n_min: int) -> np.ndarray:
    """Normalized characteristic function of the moderate vote on k*dt."""
    count = max(1, count)
    mass = law.moderate_mass
    while True:
        kk = min(k_needed, count)
        phi = _backend.char_function(law.nodes, law.weights / mass, dt, kk)
        if kk == count or abs(phi[-1]) ** n_min < _CF_CUTOFF:
            out = np.zeros(count, dtype=complex)
            out[:kk] = phi
            return out
        k_needed *= 2


def _build(strategy, F, n, law, weights, tail, s0, h, size, keep_components) -> VoteTotalDistribution:
    m_max = weights.size - 1
    m1, var1 = law.cond_moments
    v_ext = law.v_ext if law.v_ext is not None else 0.0
    comps: dict[int, np.ndarray] = {}
    pdf = np.zeros(size)
    kind = "density"
    if n == 1:
        pdf = _push_forward(strategy, F, law, s0, h, size)
        dist = VoteTotalDistribution(s0=s0, h=h, pdf=pdf, n=1, kind="density",
                                     tail_mass=0.0, atom_mass=law.q, v_extremist=law.v_ext)
        return dist
    if var1 <= 1e-300:
        kind = "lattice"
        for M in range(m_max + 1):
            comp = np.zeros(size)
            _place_point_mass(comp, s0, h, (n - M) * m1 + M * v_ext, weights[M])
            pdf += comp
            if keep_components:
                comps[M] = comp
    else:
        dt = 2 * math.pi / (size * h)
        n_min = n - m_max
        half = size // 2 + 1
        sd_min = math.sqrt(max(n_min, 1) * var1)
        k_gauss = int(math.ceil(1.5 * math.sqrt(2 * 40 * math.log(10)) / (sd_min * dt))) + 16
        k_needed = min(half, k_gauss) if n_min >= 8 else half
        t_top = k_needed * dt
        order = int(np.clip(math.ceil(t_top * law.seg_dv / 2) + 4, 4, 48))
        if order != 4:
            law = _single_vote_law(strategy, F, order)
        phi = _moderate_cf(law, dt, half, k_needed, max(n_min, 1))
        t = dt * np.arange(half)
        shift = np.exp(-1j * t * s0)
        log_phi = None
        for M in range(m_max + 1):
            k = n - M
            if k == 0:
                spec_M = np.ones(half, dtype=complex)
            else:
                with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
                    if log_phi is None:
                        log_phi = np.log(phi)
                    spec_M = np.exp(k * log_phi)
                spec_M[~np.isfinite(spec_M)] = 0.0
            if M:
                spec_M = spec_M * np.exp(1j * t * M * v_ext)
            # forward transform convention: the inverse needs the conjugate
            comp = np.fft.irfft(np.conj(weights[M] * spec_M * shift), n=size) / h
            pdf += comp
            if keep_components:
                comps[M] = comp
    clipped = float(np.sum(np.abs(pdf[pdf < 1e-12]))) * h
    pdf = _clip_conserving(pdf)
    if keep_components:
        comps = {M: _clip_conserving(c) for M, c in comps.items()}
    return VoteTotalDistribution(
        s0=s0, h=h, pdf=pdf, n=n, kind=kind, tail_mass=tail, atom_mass=law.q,
        v_extremist=law.v_ext, components=comps,
        component_weights={M: float(weights[M]) for M in range(m_max + 1)},
        clipped_mass=clipped,
    )


def _clip_conserving(pdf: np.ndarray) -> np.ndarray:
    """Zero values below 1e-12 and rescale so the total mass is unchanged."""
    before = float(pdf.sum())
    out = np.where(pdf < 1e-12, 0.0, pdf)
    after = float(out.sum())
    if after > 0 and before > 0:
        out *= before / after
    return out


def single_vote_moments(strategy: VoteStrategy, F: ValueDistribution) -> tuple[float, float]:
    """Mean and variance of ``v(U)`` by adaptive quadrature (independent of the grid path)."""
    edges = list(strategy.grid_u)
    if strategy.cutoff is not None:
        edges.append(strategy.cutoff.u_star)
    edges = np.array(sorted(set(edges)))
    x, w = np.polynomial.legendre.leggauss(20)
    a, b = edges[:-1], edges[1:]
    half = (b - a) / 2
    pts = (a + half)[:, None] + half[:, None] * x[None, :]
    wts = half[:, None] * w[None, :] * F.density(pts)
    vals = strategy.evaluate(pts)
    m = float(np.sum(wts * vals))
    m2 = float(np.sum(wts * vals * vals))
    return m, m2 - m * m


# --------------------------------------------------------------------------
# payoff expectations


def _window(dist: VoteTotalDistribution, delta: float, v: np.ndarray):
    h, s0 = dist.h, dist.s0
    j_lo = np.floor((-delta - v - s0) / h).astype(np.int64) + 1
    j_hi = np.ceil((delta - v - s0) / h).astype(np.int64) - 1
    width = int(math.ceil(2 * delta / h)) + 2
    idx = j_lo[:, None] + np.arange(width)[None, :]
    valid = (idx <= j_hi[:, None]) & (idx >= 0) & (idx < dist.size)
    safe = np.clip(idx, 0, dist.size - 1)
    p = np.where(valid, dist.pdf[safe], 0.0)
    x = s0 + idx * h + v[:, None]
    return j_lo, j_hi, p, x, valid


def expect_psi(dist: VoteTotalDistribution, P: PayoffFunction, v) -> tuple[np.ndarray, np.ndarray]:
    """(E psi(S+v), E psi'(S+v)) by the grid rule, vectorized over ``v``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    _, _, p, x, valid = _window(dist, P.delta, v)
    xs = np.where(valid, x, 2 * P.delta)
    e_psi = dist.h * np.sum(p * P.psi(xs), axis=1)
    e_psip = dist.h * np.sum(p * P.psi_prime(xs), axis=1)
    return e_psi, e_psip


def expect_Psi(dist: VoteTotalDistribution, P: PayoffFunction, v) -> np.ndarray:
    """E Psi(S+v) by the grid rule, vectorized over ``v``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    j_lo, j_hi, p, x, valid = _window(dist, P.delta, v)
    cum = dist.cum
    last = dist.size - 1
    below = np.where(j_lo >= 1, cum[np.clip(j_lo - 1, 0, last)], 0.0)
    below = np.where(j_lo - 1 > last, cum[last], below)
    upto = np.where(j_hi >= 0, cum[np.clip(j_hi, 0, last)], 0.0)
    above = cum[last] - upto
    xs = np.where(valid, x, 2 * P.delta)
    inside = dist.h * np.sum(p * P.Psi(xs), axis=1)
    return above - below + inside


def expect_payoff_terms(dist: VoteTotalDistribution, P: PayoffFunction, v=0.0):
    """(E Psi(S+v), E psi(S+v), E psi'(S+v)); scalars in, scalars out."""
    scalar = np.ndim(v) == 0
    e_Psi = expect_Psi(dist, P, v)
    e_psi, e_psip = expect_psi(dist, P, v)
    if scalar:
        return float(e_Psi[0]), float(e_psi[0]), float(e_psip[0])
    return e_Psi, e_psi, e_psip


def normal_cdf(x):
    return ndtr(x)
