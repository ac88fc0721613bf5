"""Smoothed payoff functions and their admissibility checks.

A payoff function ``Psi`` maps the vote total to ``[-1, 1]``; it is odd,
equals ``sign(x)`` for ``|x| >= delta`` and its derivative ``psi`` is a
positive bump on ``(-delta, delta)`` with ``psi' > 0`` on ``(-delta, 0)``
and a single inflection point there.

The canonical family is the mollifier bump
``psi(x) = c * exp(-1 / (1 - (x/delta)**2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate as _integrate

ArrayFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_TABLE_SIZE = 2**14
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class PayoffAxiomError(ValueError):
    """A constructed payoff function failed :func:`verify_axioms`."""


@dataclass(frozen=True, eq=False)
class PayoffFunction:
    delta: float
    psi: ArrayFn
    psi_prime: ArrayFn
    Psi: ArrayFn
    psi_second: ArrayFn | None = None
    name: str = "custom"

    def eval(self, x, order: str = "Psi"):
        """Evaluate ``Psi``, ``psi`` or ``psi_prime`` at ``x``."""
        fn = {"Psi": self.Psi, "psi": self.psi, "psi_prime": self.psi_prime}.get(order)
        if fn is None:
            raise ValueError(f"unknown order {order!r}")
        x = np.asarray(x, dtype=float)
        out = fn(x)
        return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# bump family


def _bump_core(y):
    """exp(-1/(1-y^2)) for |y| < 1, else 0."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    out[inside] = np.exp(-1.0 / (1.0 - yi * yi))
    return out


def make_bump_payoff(delta: float, table_size: int = DEFAULT_TABLE_SIZE,
                     verify: bool = True) -> PayoffFunction:
    """Mollifier-bump payoff with half-width ``delta``.

    ``Psi`` is read off a cumulative table on ``[0, delta]`` (8-point
    Gauss-Legendre per cell) and completed inside the cell by the same rule,
    so it is exactly odd and monotone. Raises :class:`PayoffAxiomError` if
    the axiom check fails.
    """
    if not (delta > 0 and math.isfinite(delta)):
        raise ValueError(f"delta must be a positive finite number, got {delta!r}")
    d = float(delta)
    nodes = np.linspace(0.0, d, table_size + 1)
    hcell = nodes[1] - nodes[0]
    mids = (nodes[:-1] + nodes[1:]) / 2
    xs = mids[:, None] + (hcell / 2) * _GL_X[None, :]
    cell = (hcell / 2) * (_bump_core(xs / d) @ _GL_W)
    half = float(cell.sum())
    c = 1.0 / half  # integral of psi over [0, delta] is 1
    cum = np.concatenate([[0.0], np.cumsum(cell * c)])
    cum[-1] = 1.0

    def psi(x):
        return c * _bump_core(np.asarray(x, dtype=float) / d)

    def psi_prime(x):
        y = np.asarray(x, dtype=float) / d
        out = np.zeros_like(y)
        m = np.abs(y) < 1.0
        yi = y[m]
        s = 1.0 - yi * yi
        out[m] = c * np.exp(-1.0 / s) * (-2.0 * yi / (s * s)) / d
        return out

    def psi_second(x):
        y = np.asarray(x, dtype=float) / d
        out = np.zeros_like(y)
        m = np.abs(y) < 1.0
        yi = y[m]
        s = 1.0 - yi * yi
        bracket = 4 * yi * yi / s**4 - 2 / s**2 - 8 * yi * yi / s**3
        out[m] = c * np.exp(-1.0 / s) * bracket / (d * d)
        return out

    def Psi(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        out = np.ones_like(ax)
        m = ax < d
        a = ax[m]
        k = np.minimum((a / hcell).astype(np.intp), table_size - 1)
        left = nodes[k]
        half_w = (a - left) / 2
        pts = (left + half_w)[:, None] + half_w[:, None] * _GL_X[None, :]
        out[m] = cum[k] + half_w * (psi(pts) @ _GL_W)
        return np.sign(x) * out

    P = PayoffFunction(delta=d, psi=psi, psi_prime=psi_prime, Psi=Psi,
                       psi_second=psi_second, name="bump")
    if verify:
        report = verify_axioms(P)
        if not report.passed:
            raise PayoffAxiomError(f"bump payoff failed axioms: {report.failures()}")
    return P


# --------------------------------------------------------------------------
# non-admissible references used to exercise the checker


def hard_threshold_payoff(delta: float = 0.5) -> PayoffFunction:
    """Psi = sign(x); its derivative is a point spike, so psi is zero a.e."""
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    return PayoffFunction(delta=delta, psi=zero, psi_prime=zero,
                          Psi=lambda x: np.sign(np.asarray(x, dtype=float)),
                          name="hard_threshold")


def triangle_payoff(delta: float = 0.5) -> PayoffFunction:
    """Piecewise-linear psi (a tent); psi'' vanishes so there is no inflection."""
    d = delta

    def psi(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) < d, (2 / d) * (1 - np.abs(x) / d), 0.0)

    def psi_prime(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) < d, -np.sign(x) * 2 / d**2, 0.0)

    def Psi(x):
        x = np.asarray(x, dtype=float)
        a = np.minimum(np.abs(x), d)
        return np.sign(x) * (2 * a / d - a * a / d**2)

    return PayoffFunction(delta=d, psi=psi, psi_prime=psi_prime, Psi=Psi,
                          psi_second=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                          name="triangle")


# --------------------------------------------------------------------------
# axiom verification


@dataclass(frozen=True)
class AxiomCheck:
    name: str
    passed: bool
    worst: float
    detail: str = ""


@dataclass(frozen=True)
class AxiomReport:
    checks: tuple[AxiomCheck, ...]
    psi_sup: float
    psi_prime_sup: float
    inflection_count: int
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [f"{c.name} (worst={c.worst:.3g})" for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name} worst={c.worst:.6g} {c.detail}".rstrip()
                for c in self.checks]


def _sign_changes(values: np.ndarray) -> int:
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def verify_axioms(P: PayoffFunction, grid_points: int = 10_000,
                  fd_step: float = 1e-5, fd_points: int = 1000) -> AxiomReport:
    """Check the payoff axioms on grids; failures are reported, never raised.

    Strict positivity is tested on the core ``|x| <= 0.98*delta``: closer to
    the edge a C-infinity bump underflows double precision. Finite
    differences use ``h = fd_step * min(1, delta/0.5)``; the 1e-6 tolerance
    is scaled by ``(0.5/delta)**order`` for narrow windows only.
    """
    d = P.delta
    checks: list[AxiomCheck] = []

    def add(name, worst, ok, detail=""):
        checks.append(AxiomCheck(name, bool(ok), float(worst), detail))

    outer = np.concatenate([np.linspace(-4 * d, -d, grid_points // 2),
                            np.linspace(d, 4 * d, grid_points // 2)])
    err = np.max(np.abs(P.Psi(outer) - np.sign(outer)))
    add("sign_outside_window", err, err <= 1e-12)

    sym = np.linspace(-2 * d, 2 * d, grid_points + 1)
    err = np.max(np.abs(P.Psi(sym) + P.Psi(-sym)))
    add("odd", err, err <= 1e-12)

    vals = P.Psi(sym)
    worst = float(np.max(np.maximum(-np.diff(vals), 0.0)))
    add("nondecreasing", worst, worst <= 1e-14)

    open_grid = np.linspace(-d, d, grid_points + 2)[1:-1]
    core = open_grid[np.abs(open_grid) <= 0.98 * d]
    psi_open = P.psi(open_grid)
    psi_core = P.psi(core)
    add("psi_positive_inside", -float(np.min(psi_core)),
        np.min(psi_core) > 0 and np.min(psi_open) >= 0)

    err = float(np.max(np.abs(P.psi(outer))) + np.max(np.abs(P.psi_prime(outer))))
    add("psi_zero_outside", err, err == 0.0)

    total, _ = _integrate.quad(lambda x: float(P.psi(np.asarray(x))), -d, d,
                               epsabs=1e-13, epsrel=1e-13, limit=400)
    add("psi_integral_two", abs(total - 2.0), abs(total - 2.0) <= 1e-10)

    left = open_grid[(open_grid < 0) & (open_grid >= -0.98 * d)]
    dp = P.psi_prime(left)
    add("psi_prime_positive_left", -float(np.min(dp)), np.min(dp) > 0)

    left_full = np.linspace(-d, 0.0, grid_points + 2)[1:-1]
    if P.psi_second is not None:
        second = P.psi_second(left_full)
    else:
        hh = 1e-6 * d
        second = (P.psi_prime(left_full + hh) - P.psi_prime(left_full - hh)) / (2 * hh)
    count = _sign_changes(second)
    add("single_inflection_left", count, count == 1, f"count={count}")

    h = fd_step * min(1.0, d / 0.5)
    xs = np.linspace(-d, d, fd_points + 2)[1:-1]
    psi_sup = float(np.max(np.abs(P.psi(np.linspace(-d, d, grid_points + 1)))))
    psi_prime_sup = float(np.max(np.abs(P.psi_prime(np.linspace(-d, d, grid_points + 1)))))
    fd1 = (P.Psi(xs + h) - P.Psi(xs - h)) / (2 * h)
    err = float(np.max(np.abs(fd1 - P.psi(xs))))
    scale = max(1.0, 0.5 / d)
    add("fd_Psi_vs_psi", err, err < 1e-6 * scale)
    fd2 = (P.psi(xs + h) - P.psi(xs - h)) / (2 * h)
    err = float(np.max(np.abs(fd2 - P.psi_prime(xs))))
    add("fd_psi_vs_psi_prime", err, err < 1e-6 * scale**2)

    finite = math.isfinite(psi_sup) and math.isfinite(psi_prime_sup)
    add("bounded_derivatives", psi_prime_sup, finite)

    return AxiomReport(checks=tuple(checks), psi_sup=psi_sup, psi_prime_sup=psi_prime_sup,
                       inflection_count=count)
