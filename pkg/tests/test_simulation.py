from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qvlab.simulation import (
    EI_COLUMNS,
    estimate_EI,
    run_election,
    simulate_sums,
    sweep_EI,
    sweep_to_csv,
)
from qvlab.strategy import Cutoff, VoteStrategy, linear_strategy, value_grid


def test_zero_strategy_election(uniform, P05):
    out = run_election(linear_strategy(0.0, uniform), uniform, P05, 50, seed=1)
    assert out.V == 0.0 and out.outcome_prob == 0.5
    assert not out.payments.any() and not out.refunds.any()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(2, 3000), c=st.floats(0.01, 1.0))
def test_budget_balance_and_welfare_bound(seed, N, c, uniform, P05):
    out = run_election(linear_strategy(c, uniform), uniform, P05, N, seed)
    assert out.budget_gap <= 1e-12
    assert 0.0 <= out.outcome_prob <= 1.0
    assert abs(out.realized_welfare) <= abs(math.fsum(out.values)) + 1e-12
    assert out.outcome in (0, 1)


def test_election_deterministic(uniform, P05):
    s = linear_strategy(0.1, uniform)
    a = run_election(s, uniform, P05, 300, seed=(4, 2))
    b = run_election(s, uniform, P05, 300, seed=(4, 2))
    assert np.array_equal(a.votes, b.votes) and a.outcome == b.outcome


def test_ei_zero_strategy(uniform, P05):
    est = estimate_EI(linear_strategy(0.0, uniform), uniform, P05, 101, 1000, seed=0)
    assert est.ei == pytest.approx(0.5, abs=1e-15)


def test_ei_aligned_strategy_small(uniform, P05):
    est = estimate_EI(linear_strategy(0.05, uniform), uniform, P05, 1001, 100_000, seed=3, threads=2)
    assert est.ei < 0.05
    assert -3 * est.std_err <= est.ei <= 1 + 3 * est.std_err


def test_ei_anti_aligned(uniform, P05):
    est = estimate_EI(linear_strategy(0.0, uniform).with_values(-0.05 * value_grid(uniform)),
                      uniform, P05, 1001, 20_000, seed=3)
    assert est.ei - 3 * est.std_err > 0.45


def test_reps_precondition(uniform, P05):
    with pytest.raises(ValueError):
        estimate_EI(linear_strategy(0.1, uniform), uniform, P05, 11, 99, seed=0)


def test_batching_and_threads_invariant(uniform):
    s = linear_strategy(0.1, uniform)
    a = simulate_sums(s, uniform, 57, 1000, seed=9)
    b = simulate_sums(s, uniform, 57, 1000, seed=9, batch=37, threads=3)
    assert np.array_equal(a.V, b.V) and np.array_equal(a.U, b.U)
    prefix = simulate_sums(s, uniform, 57, 400, seed=9)
    assert np.array_equal(prefix.V, a.V[:400])


def test_extremist_incidence_binomial(tilt_positive):
    F, N, reps = tilt_positive, 500, 10_000
    g = value_grid(F)
    u_star = -0.9995
    s = VoteStrategy(g, 0.01 * g, Cutoff(u_star, -1.3))
    sums = simulate_sums(s, F, N, reps, seed=17)
    q = float(F.cdf(np.array([u_star]))[0])
    p = -math.expm1(N * math.log1p(-q))
    se = math.sqrt(p * (1 - p) / reps)
    assert abs(np.mean(sums.extremists > 0) - p) < 3 * se
    se_count = math.sqrt(N * q * (1 - q) / reps)
    assert abs(sums.extremists.mean() - N * q) < 3 * se_count


def test_sweep_rows_and_determinism(uniform, P05):
    def solver(n):
        return linear_strategy(0.3 * n ** -0.25, uniform)

    rows = sweep_EI(solver, uniform, P05, [11, 51], 500, seed=5)
    again = sweep_EI(solver, uniform, P05, [11, 51], 500, seed=5)
    text = sweep_to_csv(rows)
    assert text == sweep_to_csv(again)
    lines = text.splitlines()
    assert lines[0] == ",".join(EI_COLUMNS) and len(lines) == 3
    with pytest.raises(ValueError):
        sweep_EI(solver, uniform, P05, [51, 11], 500, seed=5)
