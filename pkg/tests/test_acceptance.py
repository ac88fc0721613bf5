"""Acceptance criteria 1-12.

Each test records one ``PASS``/``FAIL`` line (printed in the terminal
summary by ``conftest.py``) and then asserts. Run just this module with
``pytest tests/test_acceptance.py -v -s`` or as a script with
``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import os
import time
from functools import lru_cache

import numpy as np
import pytest

from qvlab.cli import main as cli_main
from qvlab.diagnostics import (
    check_proportionality,
    concentration_check,
    ei_decay_fit,
    exponential_rate,
    ks_to_normal,
    mean_vs_sd_check,
)
from qvlab.distributions import make_distribution
from qvlab.equilibrium import (
    ResponseTable,
    brute_force_response,
    solve_equilibrium,
    vote_bounds,
)
from qvlab.extremist import H, brute_force_alpha_w, extremist_cutoff, solve_alpha_w
from qvlab.payoff import make_bump_payoff, verify_axioms
from qvlab.simulation import run_election, simulate_sums, sweep_EI
from qvlab.strategy import GridSpec, VoteTotalDistribution, linear_strategy, vote_total_distribution

RESULTS: dict[int, tuple[bool, str]] = {}
THREADS = os.cpu_count() or 1

SYM_N = (101, 1001, 10001)
EI_N = [101, 301, 1001, 3001, 10001]
EI_DELTA = 0.005
TILT_GAMMA = 0.8
CUTOFF_DELTA = 0.3


def record(k: int, ok: bool, detail: str) -> None:
    RESULTS[k] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")


# -- shared fixtures (cached; expensive solves run once) ---------------------


@lru_cache(maxsize=None)
def uniform():
    return make_distribution({"family": "uniform"})


@lru_cache(maxsize=None)
def payoff(delta: float):
    return make_bump_payoff(delta)


@lru_cache(maxsize=None)
def symmetric(N: int):
    t0 = time.perf_counter()
    rep = solve_equilibrium(uniform(), payoff(0.5), N)
    return rep, time.perf_counter() - t0


@lru_cache(maxsize=None)
def tilt_positive():
    return make_distribution({"family": "linear_tilt", "gamma": TILT_GAMMA})


@lru_cache(maxsize=None)
def cutoff_solution(N: int):
    return solve_equilibrium(tilt_positive(), payoff(CUTOFF_DELTA), N)


@lru_cache(maxsize=None)
def alpha_w():
    return solve_alpha_w(payoff(CUTOFF_DELTA), -1.0)


# -- criteria ------------------------------------------------------------------


def test_criterion_01_payoff_axioms():
    details, ok = [], True
    for delta in (0.3, 0.5, 0.7):
        t0 = time.perf_counter()
        report = verify_axioms(make_bump_payoff(delta, verify=False))
        dt = time.perf_counter() - t0
        good = report.passed and report.inflection_count == 1 and dt < 1.0
        ok &= good
        details.append(f"delta={delta} pass={report.passed} inflections={report.inflection_count} "
                       f"t={dt:.3f}s")
    record(1, ok, "; ".join(details))
    assert ok


def test_criterion_02_budget_balance():
    rep, _ = symmetric(10001)
    gaps = [run_election(rep.strategy, uniform(), payoff(0.5), 10_000, seed=(2, r)).budget_gap
            for r in range(10_000)]
    worst = max(gaps)
    ok = worst <= 1e-12
    record(2, ok, f"max relative gap {worst:.3g} over 10^4 elections at N=10^4")
    assert ok


def test_criterion_03_fixed_point_quality():
    details, ok = [], True
    for N in SYM_N:
        rep, dt = symmetric(N)
        good = (rep.converged and rep.foc_residual_sup <= 1e-6
                and rep.br_gap_sup <= 1e-6 * math.sqrt(2) and dt <= 300)
        ok &= good
        details.append(f"N={N} conv={rep.converged} foc={rep.foc_residual_sup:.2e} "
                       f"gap={rep.br_gap_sup:.2e} t={dt:.1f}s")
    record(3, ok, "; ".join(details))
    assert ok


def test_criterion_04_proportionality():
    lo = check_proportionality(symmetric(101)[0], uniform(), 101)
    hi = check_proportionality(symmetric(10001)[0], uniform(), 10001)
    ok = hi.max_rel_dev_bulk <= 0.15 and hi.max_rel_dev_bulk < lo.max_rel_dev_bulk
    record(4, ok, f"max bulk |v/(p_N u) - 1| = {hi.max_rel_dev_bulk:.5f} at N=10001 "
                  f"(limit 0.15), {lo.max_rel_dev_bulk:.5f} at N=101; "
                  f"p_hat/2/p_N = {hi.p_hat_ratio:.4f}")
    assert ok


def test_criterion_05_mean_vs_sd():
    ratio = mean_vs_sd_check(symmetric(10001)[0])
    ok = ratio <= 0.1
    record(5, ok, f"|E S|/sd(S) = {ratio:.3g} at N=10001")
    assert ok


def test_criterion_06_ei_decay():
    F = make_distribution({"family": "linear_tilt", "u_lo": -1.0, "u_hi": 1.9, "recenter": True})
    P = make_bump_payoff(EI_DELTA)
    t0 = time.perf_counter()
    rows = sweep_EI(lambda n: solve_equilibrium(F, P, n), F, P, EI_N, 100_000, seed=6,
                    threads=THREADS)
    dt = time.perf_counter() - t0
    fit = ei_decay_fit(rows, F.moments)
    ok = (-1.35 <= fit.slope <= -0.65 and dt <= 1800 and all(r.converged for r in rows)
          and not fit.dropped_N)
    eis = ", ".join(f"{r.N}:{r.estimate.ei:.3e}" for r in rows)
    record(6, ok, f"slope {fit.slope:.3f} (delta={EI_DELTA}, EI {eis}, t={dt:.0f}s)")
    assert ok


def test_criterion_07_alpha_w():
    P = payoff(CUTOFF_DELTA)
    sol = alpha_w()
    h_val = abs(H(sol.alpha, sol.w, P, -1.0))
    h_max = float(np.max(H(sol.alpha, np.linspace(-0.3, 0.3, 100_001), P, -1.0)))
    scan = brute_force_alpha_w(P, -1.0, points=2000)
    early = [a for a, _ in scan.hits if a < sol.alpha - 1e-3]
    ok = sol.exists and h_val <= 1e-8 and h_max <= 1e-6 and not early
    record(7, ok, f"alpha*={sol.alpha:.12f} w*={sol.w:.12f} |H|={h_val:.2e} max_w H={h_max:.2e} "
                  f"brute hits below alpha*-1e-3: {len(early)}")
    assert ok


def test_criterion_08_cutoff_structure():
    N = 500
    F, P, sol = tilt_positive(), payoff(CUTOFF_DELTA), alpha_w()
    rep = cutoff_solution(N)
    s = rep.strategy
    jump = sol.alpha - sol.w
    delta_detect = 0.25 * math.sqrt(2)
    one_jump = s.cutoff is not None and float(np.max(np.diff(s.grid_v))) < delta_detect
    v_lo = float(s.evaluate(F.u_lo)) if s.cutoff is not None else float(s.grid_v[0])
    rel = abs(v_lo + jump) / jump
    zeta, u_pred = extremist_cutoff(sol, F, P, N)
    ratio = (s.cutoff.u_star - F.u_lo) / (u_pred - F.u_lo) if s.cutoff else float("nan")
    q = float(F.cdf(np.array([s.cutoff.u_star]))[0]) if s.cutoff else 0.0
    sums = simulate_sums(s, F, N, 10_000, seed=8, threads=THREADS)
    se = math.sqrt(N * q * (1 - q) / 10_000)
    z = (sums.extremists.mean() - N * q) / se if se > 0 else float("inf")
    ok = (rep.converged and one_jump and rel <= 0.05 and 0.1 <= ratio <= 10 and abs(z) <= 3)
    record(8, ok, f"converged={rep.converged} single jump={one_jump} "
                  f"|v(u_lo)+(alpha-w)|/(alpha-w)={rel:.4f} u_star ratio={ratio:.3f} "
                  f"(zeta={zeta:.3f}) extremists/election {sums.extremists.mean():.4f} vs "
                  f"N F(u_star)={N * q:.4f} (z={z:.2f})")
    assert ok


def test_criterion_09_concentration():
    F, P, sol = tilt_positive(), payoff(CUTOFF_DELTA), alpha_w()
    Ns = [250, 500, 1000]
    conc = [concentration_check(cutoff_solution(n), sol, F, P, n, 0.1) for n in Ns]
    masses = [c.no_extremist_outside for c in conc]
    c_rate = exponential_rate(Ns, masses)
    ok = (all(cutoff_solution(n).converged for n in Ns)
          and conc[2].outside_mass <= conc[0].outside_mass and c_rate > 0)
    record(9, ok, "outside mass " + ", ".join(f"N={n}:{c.outside_mass:.4f}" for n, c in zip(Ns, conc))
           + "; no-extremist " + ", ".join(f"{m:.4f}" for m in masses) + f"; fitted c={c_rate:.3g}")
    assert ok


def test_criterion_10_best_response_oracle():
    rng = np.random.default_rng(10)
    F = uniform()
    pairs = []  # (u, dist, payoff)
    P05, P03 = payoff(0.5), payoff(CUTOFF_DELTA)
    for _ in range(30):
        c = rng.uniform(0.02, 0.4)
        n = int(rng.integers(5, 2000))
        d = vote_total_distribution(linear_strategy(c, F), F, n, GridSpec(delta=0.5))
        pairs.append((float(rng.uniform(-1, 1)), d, P05))
    sol = alpha_w()
    for _ in range(10):
        a = rng.uniform(0.35, sol.alpha - 0.02)
        d = VoteTotalDistribution.from_lattice([round(a / 1e-3) * 1e-3], [1.0], h=1e-3)
        pairs.append((float(rng.uniform(-1.0, -0.9)), d, P03))
    rep = cutoff_solution(250)
    d250 = vote_total_distribution(rep.strategy, tilt_positive(), 249, GridSpec(delta=0.3))
    u_star = rep.strategy.cutoff.u_star
    for _ in range(10):
        u = float(rng.uniform(-1.0, u_star - 0.2 * (u_star + 1.0)))
        pairs.append((u, d250, P03))
    bounds = vote_bounds(F)
    bad, extremist = 0, 0
    for u, d, P in pairs:
        v = float(ResponseTable(d, P, bounds, 2001).best(np.array([u]))[0])
        vb, cell = brute_force_response(u, d, P, bounds, points=10_000)
        bad += abs(v - vb) > cell
        extremist += abs(vb) > 0.25 * math.sqrt(2)
    ok = bad == 0 and extremist >= 5 and len(pairs) == 50
    record(10, ok, f"{len(pairs)} pairs, {bad} disagreements beyond one cell, "
                   f"{extremist} in the extremist regime")
    assert ok


def test_criterion_11_normality():
    ks = {}
    for N in (101, 10001):
        rep, _ = symmetric(N)
        ks[N] = ks_to_normal(vote_total_distribution(rep.strategy, uniform(), N - 1,
                                                     GridSpec(delta=0.5)))
    ok = ks[10001] <= 0.05 and ks[10001] < ks[101]
    record(11, ok, f"KS N=101: {ks[101]:.3e}, N=10001: {ks[10001]:.3e}")
    assert ok


def test_criterion_12_determinism(tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("family = linear_tilt\nu_hi = 1.9\nrecenter = true\ndelta = 0.05\n"
                   "N_list = {101, 301, 1001}\nreps = 5000\nseed = 12\n")
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        code = cli_main(["sweep", str(cfg), "--out", str(out)])
        outs.append((code, (out / "sweep.csv").read_bytes(), (out / "sweep_fit.csv").read_bytes()))
    ok = outs[0][0] == 0 and outs[0] == outs[1]
    record(12, ok, f"sweep CSVs identical={outs[0][1:] == outs[1][1:]} ({len(outs[0][1])} bytes)")
    assert ok


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                pass
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
