"""Quantitative checks on solved equilibria and simulated elections.

All functions are pure: they read a report or strategy and return numbers.
"Bulk" means values with ``|u|`` between 10% and 90% of the larger support
endpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import linregress

from qvlab.distributions import Moments, ValueDistribution
from qvlab.equilibrium import EquilibriumReport
from qvlab.extremist import ExtremistSolution
from qvlab.payoff import PayoffFunction
from qvlab.simulation import SweepRow, simulate_sums
from qvlab.strategy import GridSpec, VoteStrategy, VoteTotalDistribution, vote_total_distribution

MU_ZERO_TOL = 1e-9


class DiagnosticError(ValueError):
    """A diagnostic was called outside its regime or with inconsistent inputs."""


def proportionality_constant(sigma: float, N: int) -> float:
    """``1 / (2**(3/4) * sqrt(sigma) * (pi*(N-1))**(1/4))``."""
    return 1.0 / (2**0.75 * math.sqrt(sigma) * (math.pi * (N - 1)) ** 0.25)


def bulk_mask(grid_u: np.ndarray, lo: float = 0.1, hi: float = 0.9) -> np.ndarray:
    m = max(abs(grid_u[0]), abs(grid_u[-1]))
    a = np.abs(grid_u)
    return (a >= lo * m) & (a <= hi * m)


@dataclass(frozen=True)
class Proportionality:
    max_rel_dev_bulk: float
    p_N_theory: float
    p_hat_ratio: float


def check_proportionality(report: EquilibriumReport, F: ValueDistribution, N: int) -> Proportionality:
    """Worst bulk ``|v(u)/(p_N*u) - 1|`` and ``(p_hat/2)/p_N``."""
    mom = F.moments
    if abs(mom.mu) >= MU_ZERO_TOL:
        raise DiagnosticError(f"proportionality needs a mean-zero distribution, mu = {mom.mu:g}")
    p_N = proportionality_constant(mom.sigma, N)
    gu, gv = report.strategy.grid_u, report.strategy.grid_v
    m = bulk_mask(gu)
    dev = float(np.max(np.abs(gv[m] / (p_N * gu[m]) - 1.0)))
    return Proportionality(dev, p_N, (report.p_hat / 2) / p_N)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    conjecture_ratio: list[float]  # per kept row; nan when mu3 = 0
    kept_N: list[int]
    dropped_N: list[int]


def ei_decay_fit(rows: Sequence[SweepRow] | Sequence[tuple[int, float, float]],
                 moments: Moments, zero_sigmas: float = 2.0) -> DecayFit:
    """Least-squares slope of log EI against log N.

    Rows whose EI is within ``zero_sigmas`` standard errors of zero are
    dropped and listed. ``conjecture_ratio = EI*16*sigma**6*N/mu3**2``.
    """
    triples = []
    for r in rows:
        if isinstance(r, SweepRow):
            triples.append((r.N, r.estimate.ei, r.estimate.std_err))
        else:
            triples.append(tuple(r))
    kept = [(n, e) for n, e, se in triples if e > zero_sigmas * se and e > 0]
    dropped = [n for n, e, se in triples if not (e > zero_sigmas * se and e > 0)]
    if len(kept) < 2:
        raise DiagnosticError("fewer than two EI estimates distinguishable from zero")
    Ns = np.array([n for n, _ in kept], dtype=float)
    ei = np.array([e for _, e in kept])
    fit = linregress(np.log(Ns), np.log(ei))
    mu3 = moments.mu3_central
    if abs(mu3) < 1e-12:
        ratio = [float("nan")] * len(kept)
    else:
        ratio = list(ei * 16 * moments.sigma2**3 * Ns / mu3**2)
    return DecayFit(float(fit.slope), float(fit.intercept), [float(x) for x in ratio],
                    [int(n) for n in Ns], dropped)


@dataclass(frozen=True)
class Concentration:
    outside_mass: float
    extremist_probability: float  # P(at least one extremist)
    no_extremist_outside: float  # conditional on no extremist
    tail_bound: float  # mixture mass not represented


def concentration_check(report: EquilibriumReport, sol: ExtremistSolution, F: ValueDistribution,
                        P: PayoffFunction, N: int, eps: float,
                        grid_spec: GridSpec | None = None) -> Concentration:
    """Mass of the full vote total ``V`` outside ``[alpha - eps, alpha + eps]``."""
    strat = report.strategy
    if not sol.exists and strat.cutoff is not None:
        raise DiagnosticError("strategy has an extremist cutoff but the extremist problem has no solution")
    if F.moments.mu <= 0:
        raise DiagnosticError("concentration check needs mu > 0")
    dist = vote_total_distribution(strat, F, N, grid_spec or GridSpec(delta=P.delta),
                                   keep_components=True)
    a, b = sol.alpha - eps, sol.alpha + eps
    inside = dist.mass_between(a, b)
    outside = max(0.0, 1.0 - inside)
    w0 = dist.component_weights.get(0, 1.0)
    if strat.cutoff is not None and 0 in dist.components:
        comp0 = VoteTotalDistribution(s0=dist.s0, h=dist.h, pdf=dist.components[0], n=N)
        cond = max(0.0, 1.0 - comp0.mass_between(a, b) / w0)
    else:
        cond = outside
    return Concentration(outside, 1.0 - w0, cond, dist.tail_mass)


def exponential_rate(Ns: Sequence[int], masses: Sequence[float]) -> float:
    """``c`` in a least-squares fit ``mass ~ A*exp(-c*N)``; masses must be positive."""
    m = np.asarray(masses, dtype=float)
    if np.any(m <= 0):
        raise DiagnosticError("masses must be positive to fit an exponential rate")
    fit = linregress(np.asarray(Ns, dtype=float), np.log(m))
    return float(-fit.slope)


def ks_to_normal(dist: VoteTotalDistribution) -> float:
    """Sup distance between the standardized CDF of ``dist`` and the normal CDF."""
    m, s = dist.mean, dist.sd
    if s <= 0:
        raise DiagnosticError("degenerate law has no standardization")
    mass = dist.pdf * dist.h / dist.total_mass
    right = np.cumsum(mass)
    if dist.kind == "lattice":
        x = dist.grid_s
        left = right - mass
        z = ndtr((x - m) / s)
        return float(max(np.max(np.abs(right - z)), np.max(np.abs(left - z))))
    edges = dist.grid_s + dist.h / 2
    return float(np.max(np.abs(right - ndtr((edges - m) / s))))


def normality_check(report: EquilibriumReport, F: ValueDistribution, P: PayoffFunction,
                    N: int) -> float:
    """KS distance of the standardized one-out total to the standard normal."""
    if report.strategy.cutoff is not None:
        raise DiagnosticError("normality check applies to continuous strategies")
    dist = vote_total_distribution(report.strategy, F, N - 1, GridSpec(delta=P.delta))
    return ks_to_normal(dist)


def mean_vs_sd(dist: VoteTotalDistribution) -> float:
    return abs(dist.mean) / dist.sd


def mean_vs_sd_check(report: EquilibriumReport) -> float:
    """``|E S| / sd(S)`` for the one-out total at the fixed point."""
    return abs(report.s_mean) / math.sqrt(report.s_var)


@dataclass(frozen=True)
class ExtremistFrequency:
    observed: float  # fraction of elections with at least one extremist
    expected: float
    std_err: float
    mean_count: float
    expected_count: float

    @property
    def z(self) -> float:
        return (self.observed - self.expected) / self.std_err if self.std_err > 0 else 0.0


def extremist_frequency(strategy: VoteStrategy, F: ValueDistribution, N: int, reps: int,
                        seed, threads: int = 1) -> ExtremistFrequency:
    """Simulated extremist incidence against ``1 - (1 - F(u_star))**N``."""
    if strategy.cutoff is None:
        raise DiagnosticError("strategy has no extremist cutoff")
    q = float(F.cdf(np.array([strategy.cutoff.u_star]))[0])
    sums = simulate_sums(strategy, F, N, reps, seed, threads=threads)
    expected = -math.expm1(N * math.log1p(-q))
    se = math.sqrt(expected * (1 - expected) / reps)
    return ExtremistFrequency(float(np.mean(sums.extremists > 0)), expected, se,
                              float(sums.extremists.mean()), N * q)


__all__ = [
    "DiagnosticError", "proportionality_constant", "bulk_mask", "Proportionality",
    "check_proportionality", "DecayFit", "ei_decay_fit", "Concentration",
    "concentration_check", "exponential_rate", "ks_to_normal", "normality_check",
    "mean_vs_sd", "mean_vs_sd_check", "ExtremistFrequency", "extremist_frequency",
]
