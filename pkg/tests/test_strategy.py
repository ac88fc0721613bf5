from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qvlab.strategy import (
    Cutoff,
    GridSpec,
    VoteStrategy,
    VoteTotalDistribution,
    expect_Psi,
    expect_payoff_terms,
    expect_psi,
    linear_strategy,
    single_vote_moments,
    strategy_from_function,
    value_grid,
    vote_total_distribution,
)


def test_value_grid_contains_zero(uniform, tilt_half):
    for F in (uniform, tilt_half):
        g = value_grid(F, 801)
        assert 0.0 in g and g[0] == F.u_lo and g[-1] == F.u_hi


def test_evaluate_basics(uniform):
    s = linear_strategy(0.2, uniform)
    assert s.evaluate(0.0) == 0.0
    node = s.grid_u[123]
    assert s.evaluate(node) == s.grid_v[123]
    with pytest.raises(ValueError):
        s.evaluate(1.5)


def test_evaluate_below_cutoff(uniform):
    s = VoteStrategy(value_grid(uniform), 0.1 * value_grid(uniform), Cutoff(-0.999, -1.3))
    assert s.evaluate(-0.9995) == -1.3
    assert s.evaluate(-0.998) == pytest.approx(-0.0998)


def test_strategy_is_immutable(uniform):
    s = linear_strategy(0.2, uniform)
    with pytest.raises(ValueError):
        s.grid_v[0] = 1.0


def test_invariant_violations(uniform):
    g = value_grid(uniform)
    assert linear_strategy(0.2, uniform).invariant_violations() == []
    assert "monotone" in VoteStrategy(g, -0.1 * g).invariant_violations()
    assert "bounds" in VoteStrategy(g, 3.0 * g).invariant_violations()
    assert "zero_at_zero" in VoteStrategy(g, 0.1 * g + 0.01).invariant_violations()
    bad_cut = VoteStrategy(g, 0.1 * g, Cutoff(-0.5, 0.5))
    assert "monotone_cutoff" in bad_cut.invariant_violations()


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.0, 1.0), u_star=st.floats(-1.0, -0.9), v_ext=st.floats(-1.4, -0.5),
       with_cut=st.booleans())
def test_csv_round_trip(c, u_star, v_ext, with_cut, uniform):
    cut = Cutoff(u_star, v_ext) if with_cut else None
    s = strategy_from_function(lambda u: c * u + 0.01 * u**3, uniform, size=51, cutoff=cut)
    back = VoteStrategy.from_csv(s.to_csv())
    assert np.array_equal(back.grid_u, s.grid_u) and np.array_equal(back.grid_v, s.grid_v)
    assert back.cutoff == s.cutoff


def test_zero_strategy_point_mass(uniform):
    s = linear_strategy(0.0, uniform)
    for n in (1, 7, 500):
        d = vote_total_distribution(s, uniform, n)
        assert d.mass_between(-d.h, d.h) == pytest.approx(1.0, abs=1e-12)


def test_single_vote_uniform_density(uniform):
    # v = c*u with U uniform on [-1, 1] gives a vote uniform on [-c, c]
    c = 0.3
    d = vote_total_distribution(linear_strategy(c, uniform), uniform, 1)
    inner = np.abs(d.grid_s) < c - 2 * d.h
    assert np.max(np.abs(d.pdf[inner] - 1 / (2 * c))) < 1e-8
    assert d.total_mass == pytest.approx(1.0, abs=1e-12)


def test_two_vote_triangle(uniform):
    # sum of two uniform[-c, c] votes has the triangular density (2c - |s|)/(4c^2)
    c = 0.25
    d = vote_total_distribution(linear_strategy(c, uniform), uniform, 2, GridSpec(delta=0.05))
    exact = np.clip(2 * c - np.abs(d.grid_s), 0, None) / (4 * c * c)
    assert np.max(np.abs(d.pdf - exact)) < 2e-3 * exact.max()
    assert d.total_mass == pytest.approx(1.0, abs=1e-8)


def test_linear_moments_n1000(uniform):
    c = 0.05
    d = vote_total_distribution(linear_strategy(c, uniform), uniform, 1000, GridSpec(delta=0.5))
    assert abs(d.mean) < 1e-6
    assert d.var == pytest.approx(1000 * c * c / 3, abs=1e-6)
    assert d.total_mass == pytest.approx(1.0, abs=1e-8)
    assert np.all(d.pdf >= 0)


def test_moments_match_single_vote(tilt_half):
    s = strategy_from_function(lambda u: 0.1 * u + 0.02 * u**3, tilt_half)
    m1, v1 = single_vote_moments(s, tilt_half)
    exact_m = tilt_half.integrate(lambda u: 0.1 * u + 0.02 * u**3)
    assert m1 == pytest.approx(exact_m, abs=1e-6)
    n = 300
    d = vote_total_distribution(s, tilt_half, n)
    assert d.mean == pytest.approx(n * m1, abs=1e-6 * max(1, abs(n * m1)))
    assert d.var == pytest.approx(n * v1, abs=1e-6 * max(1, n * v1))


def test_scaling_linearity(uniform):
    s = strategy_from_function(lambda u: 0.1 * u + 0.03 * u**2 * np.sign(u), uniform, size=201)
    d1 = vote_total_distribution(s, uniform, 50)
    d2 = vote_total_distribution(s.scaled(2.0), uniform, 50)
    xs = np.linspace(-3 * d1.sd, 3 * d1.sd, 41)
    assert np.max(np.abs(d2.cdf_at(2 * xs) - d1.cdf_at(xs))) < 2e-3
    assert d2.var == pytest.approx(4 * d1.var, rel=1e-6)


def test_mixture_with_cutoff(tilt_positive):
    F = tilt_positive
    g = value_grid(F)
    u_star = -0.999
    s = VoteStrategy(g, 0.01 * g, Cutoff(u_star, -1.3))
    n = 500
    d = vote_total_distribution(s, F, n, GridSpec(delta=0.3), keep_components=True)
    q = float(F.cdf(np.array([u_star]))[0])
    assert d.atom_mass == pytest.approx(q)
    assert 1 - d.tail_mass - 1e-8 <= d.total_mass <= 1 + 1e-8
    assert d.tail_mass <= 1e-14
    assert sorted(d.component_weights)[:3] == [0, 1, 2]
    assert d.component_weights[0] == pytest.approx((1 - q) ** n)
    m1, v1 = single_vote_moments(s, F)
    assert d.mean == pytest.approx(n * m1, abs=1e-6 * max(1, abs(n * m1)))
    assert d.var == pytest.approx(n * v1, abs=1e-6 * max(1, n * v1))
    # the atom is not smeared: one extremist shifts a whole copy of the moderate law
    m_mod = F.integrate(lambda u: 0.01 * u, u_star, F.u_hi) / (1 - q)
    v_mod = F.integrate(lambda u: (0.01 * u) ** 2, u_star, F.u_hi) / (1 - q) - m_mod**2
    mod_mean = (n - 1) * m_mod
    sd_mod = math.sqrt(n * v_mod)
    lo, hi = mod_mean - 1.3 - 5 * sd_mod, mod_mean - 1.3 + 5 * sd_mod
    one = d.mass_between(lo, hi)
    assert one == pytest.approx(d.component_weights[1], rel=1e-4)


def test_expectations_point_masses(P05):
    far = VoteTotalDistribution.from_lattice([1.0], [1.0], h=0.01)
    assert expect_payoff_terms(far, P05, 0.0) == pytest.approx((1.0, 0.0, 0.0), abs=1e-14)
    zero = VoteTotalDistribution.from_lattice([0.0], [1.0], h=0.01)
    e = expect_payoff_terms(zero, P05, 0.0)
    assert e[0] == pytest.approx(0.0, abs=1e-14)
    assert e[1] == pytest.approx(P05.eval(0.0, "psi"), rel=1e-12)
    assert e[2] == pytest.approx(0.0, abs=1e-12)


def test_expect_psi_monte_carlo(uniform, P05):
    c, n = 0.05, 1000
    d = vote_total_distribution(linear_strategy(c, uniform), uniform, n, GridSpec(delta=0.5))
    e_psi = expect_payoff_terms(d, P05, 0.0)[1]
    rng = np.random.default_rng(5)
    S = np.concatenate([c * rng.uniform(-1, 1, (10_000, n)).sum(axis=1) for _ in range(20)])
    vals = P05.psi(S)
    se = vals.std(ddof=1) / math.sqrt(S.size)
    assert abs(e_psi - vals.mean()) < 3 * se


def test_expect_Psi_derivative(uniform, P05):
    d = vote_total_distribution(linear_strategy(0.05, uniform), uniform, 200, GridSpec(delta=0.5))
    v = np.linspace(-0.6, 0.6, 25)
    h = 1e-4
    fd = (expect_Psi(d, P05, v + h) - expect_Psi(d, P05, v - h)) / (2 * h)
    e_psi, _ = expect_psi(d, P05, v)
    assert np.max(np.abs(fd - e_psi)) < 1e-5


@settings(max_examples=15, deadline=None)
@given(c=st.floats(0.01, 0.5), n=st.integers(2, 400), v=st.floats(-1, 1))
def test_expectation_bounds(c, n, v, uniform, P05):
    d = vote_total_distribution(linear_strategy(c, uniform), uniform, n, GridSpec(delta=0.5))
    e_Psi, e_psi, _ = expect_payoff_terms(d, P05, v)
    assert abs(e_Psi) <= 1 + 1e-9
    assert e_psi >= 0
    assert d.total_mass == pytest.approx(1.0, abs=1e-8)
