"""Monte Carlo elections and the expected-inefficiency estimator.

Replicate ``r`` of a run seeded with ``seed`` draws its values from
``numpy.random.default_rng([*seed, r])``, so any replicate can be
regenerated on its own and results do not depend on batching or threads.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from qvlab import _backend
from qvlab.distributions import ValueDistribution
from qvlab.payoff import PayoffFunction
from qvlab.strategy import VoteStrategy

EI_COLUMNS = ("N", "EI", "std_err", "extremist_rate", "V_mean", "V_var",
              "EI_no_extremist", "EI_with_extremist", "extremist_elections", "reps", "converged")


@dataclass(frozen=True)
class ElectionOutcome:
    values: np.ndarray
    votes: np.ndarray
    V: float
    payments: np.ndarray
    refunds: np.ndarray
    outcome_prob: float
    outcome: int  # 1 if option 1 was drawn, else 0
    realized_welfare: float

    @property
    def budget_gap(self) -> float:
        """Relative |sum(payments) - sum(refunds)|."""
        paid = math.fsum(self.payments)
        if paid == 0.0:
            return abs(math.fsum(self.refunds))
        return abs(paid - math.fsum(self.refunds)) / paid


def _seed_tuple(seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def run_election(strategy: VoteStrategy, F: ValueDistribution, P: PayoffFunction, N: int,
                 seed) -> ElectionOutcome:
    """One election with ``N`` voters; transfers balance by construction."""
    if N < 2:
        raise ValueError("N must be >= 2")
    rng = np.random.default_rng(list(_seed_tuple(seed)))
    values = F.ppf(rng.random(N))
    votes = np.asarray(strategy.evaluate(values), dtype=float)
    V = math.fsum(votes)
    payments = votes * votes
    total = math.fsum(payments)
    refunds = (total - payments) / (N - 1)
    psi_v = float(P.Psi(np.array([V]))[0])
    prob = min(1.0, max(0.0, (psi_v + 1.0) / 2.0))
    outcome = int(rng.random() < prob)
    return ElectionOutcome(values=values, votes=votes, V=V, payments=payments, refunds=refunds,
                           outcome_prob=prob, outcome=outcome,
                           realized_welfare=math.fsum(values) * psi_v)


@dataclass(frozen=True)
class EIEstimate:
    ei: float
    std_err: float
    reps: int
    n_extremist_elections: int
    extremist_rate: float = 0.0  # mean extremists per election
    V_mean: float = float("nan")
    V_var: float = float("nan")
    ei_no_extremist: float = float("nan")
    ei_with_extremist: float = float("nan")


@dataclass(frozen=True)
class ReplicateSums:
    U: np.ndarray
    V: np.ndarray
    extremists: np.ndarray


def simulate_sums(strategy: VoteStrategy, F: ValueDistribution, N: int, reps: int, seed,
                  batch: int | None = None, threads: int = 1) -> ReplicateSums:
    """Value totals, vote totals and extremist counts for ``reps`` elections."""
    seeds = _seed_tuple(seed)
    if batch is None:
        batch = max(1, min(reps, 2_000_000 // max(N, 1)))
    table = F.ppf_table
    u_star = strategy.cutoff.u_star if strategy.cutoff is not None else -math.inf
    v_ext = strategy.cutoff.v_extremist if strategy.cutoff is not None else 0.0
    starts = list(range(0, reps, batch))

    def work(start: int):
        stop = min(start + batch, reps)
        draws = np.empty((stop - start, N))
        for i, r in enumerate(range(start, stop)):
            draws[i] = np.random.default_rng([*seeds, r]).random(N)
        return _backend.election_sums(draws, table, strategy.grid_u, strategy.grid_v, u_star, v_ext)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    U = np.concatenate([p[0] for p in parts])
    V = np.concatenate([p[1] for p in parts])
    E = np.concatenate([p[2] for p in parts]).astype(np.int64)
    return ReplicateSums(U, V, E)


def _ratio(y: np.ndarray, a: np.ndarray) -> tuple[float, float]:
    """``mean(y) / (2*mean(a))`` and its delta-method standard error."""
    n = y.size
    if n == 0:
        return float("nan"), float("nan")
    ybar, abar = y.mean(), a.mean()
    if abar == 0:
        return float("nan"), float("nan")
    r = ybar / abar
    if n < 2:
        return 0.5 * r, float("nan")
    cov = np.cov(y, a, ddof=1)
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / n
    return 0.5 * r, 0.5 * math.sqrt(max(var, 0.0)) / abar


def estimate_EI(strategy: VoteStrategy, F: ValueDistribution, P: PayoffFunction, N: int,
                reps: int, seed, threads: int = 1, batch: int | None = None) -> EIEstimate:
    """Paired ratio estimator of ``1/2 - E[U*Psi(V)] / (2*E|U|)``.

    Numerator and ``E|U|`` come from the same replicates; ``Psi(V)`` is used
    in place of a drawn outcome.
    """
    if reps < 100:
        raise ValueError("reps must be >= 100")
    sums = simulate_sums(strategy, F, N, reps, seed, batch=batch, threads=threads)
    absU = np.abs(sums.U)
    y = absU - sums.U * P.Psi(sums.V)
    ei, se = _ratio(y, absU)
    has = sums.extremists > 0
    ei_no, _ = _ratio(y[~has], absU[~has]) if (~has).any() else (float("nan"), 0.0)
    ei_with, _ = _ratio(y[has], absU[has]) if has.any() else (float("nan"), 0.0)
    return EIEstimate(
        ei=ei, std_err=se, reps=reps, n_extremist_elections=int(has.sum()),
        extremist_rate=float(sums.extremists.mean()), V_mean=float(sums.V.mean()),
        V_var=float(sums.V.var(ddof=1)), ei_no_extremist=ei_no, ei_with_extremist=ei_with,
    )


@dataclass(frozen=True)
class SweepRow:
    N: int
    estimate: EIEstimate
    converged: bool

    def as_dict(self) -> dict:
        e = self.estimate
        return {"N": self.N, "EI": e.ei, "std_err": e.std_err, "extremist_rate": e.extremist_rate,
                "V_mean": e.V_mean, "V_var": e.V_var, "EI_no_extremist": e.ei_no_extremist,
                "EI_with_extremist": e.ei_with_extremist,
                "extremist_elections": e.n_extremist_elections, "reps": e.reps,
                "converged": self.converged}


def sweep_EI(strategy_solver: Callable[[int], object], F: ValueDistribution, P: PayoffFunction,
             N_list: Sequence[int], reps: int, seed, threads: int = 1) -> list[SweepRow]:
    """EI at each ``N`` under the strategy returned by ``strategy_solver(N)``.

    The solver may return a :class:`VoteStrategy` or anything with
    ``strategy`` and ``converged`` attributes. Replicate seeds are
    ``(seed, N, r)``.
    """
    N_list = list(N_list)
    if N_list != sorted(N_list):
        raise ValueError("N_list must be sorted ascending")
    rows = []
    for N in N_list:
        solved = strategy_solver(N)
        if isinstance(solved, VoteStrategy):
            strat, ok = solved, True
        else:
            strat, ok = solved.strategy, bool(solved.converged)
        est = estimate_EI(strat, F, P, N, reps, (*_seed_tuple(seed), N), threads=threads)
        rows.append(SweepRow(N, est, ok))
    return rows


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    return rows_to_csv([r.as_dict() for r in rows], EI_COLUMNS)
