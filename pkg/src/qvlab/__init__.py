"""Numerical laboratory for quadratic voting equilibria.

Submodules: :mod:`distributions`, :mod:`payoff`, :mod:`strategy`,
:mod:`equilibrium`, :mod:`extremist`, :mod:`simulation`,
:mod:`diagnostics` and :mod:`cli`. The hot loops run in a compiled
extension when it is available; ``qvlab.BACKEND`` names the active one.
"""

from __future__ import annotations

from qvlab._backend import BACKEND
from qvlab.distributions import DistributionError, ValueDistribution, make_distribution
from qvlab.equilibrium import EquilibriumReport, SolverOptions, best_response, solve_equilibrium
from qvlab.extremist import ExtremistSolution, solve_alpha_w
from qvlab.payoff import PayoffFunction, make_bump_payoff, verify_axioms
from qvlab.simulation import estimate_EI, run_election, sweep_EI
from qvlab.strategy import Cutoff, VoteStrategy, vote_total_distribution

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DistributionError", "ValueDistribution", "make_distribution",
    "EquilibriumReport", "SolverOptions", "best_response", "solve_equilibrium",
    "ExtremistSolution", "solve_alpha_w", "PayoffFunction", "make_bump_payoff",
    "verify_axioms", "estimate_EI", "run_election", "sweep_EI", "Cutoff", "VoteStrategy",
    "vote_total_distribution",
]
