"""Value distributions on a bounded interval.

Three families are supported: ``uniform``, ``linear_tilt`` (density
proportional to ``1 + gamma*u``) and ``truncnormal`` (a truncated normal
mixed with a small uniform floor). Every distribution is checked at
construction: the support must straddle zero with ``min(|u_lo|, u_hi) >= 1``,
the density must integrate to one and stay above ``DENSITY_FLOOR``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy.special import ndtr

DENSITY_FLOOR = 1e-3
PPF_TABLE_SIZE = 2**16
FAMILIES = ("uniform", "linear_tilt", "truncnormal")

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


class DistributionError(ValueError):
    """Raised when a distribution config is unsupported or violates an invariant."""


@dataclass(frozen=True)
class Moments:
    mu: float
    sigma2: float
    mu3_raw: float
    e_abs_u: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def mu3_central(self) -> float:
        return self.mu3_raw - 3 * self.mu * self.sigma2 - self.mu**3


@dataclass(frozen=True, eq=False)
class ValueDistribution:
    """Immutable sampling law of individual values on ``[u_lo, u_hi]``.

    Use :func:`make_distribution` rather than calling this directly.
    """

    family: str
    u_lo: float
    u_hi: float
    params: Mapping[str, float] = field(default_factory=dict)

    # -- pointwise ------------------------------------------------------
    def density(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u >= self.u_lo) & (u <= self.u_hi)
        return np.where(inside, self._raw_density(u), 0.0)

    def cdf(self, u):
        u = np.clip(np.asarray(u, dtype=float), self.u_lo, self.u_hi)
        return np.clip(self._raw_cdf(u), 0.0, 1.0)

    def _raw_density(self, u):
        a, b = self.u_lo, self.u_hi
        if self.family == "uniform":
            return np.full_like(u, 1.0 / (b - a))
        if self.family == "linear_tilt":
            g = self.params["gamma"]
            z = (b - a) + g * (b * b - a * a) / 2
            return (1 + g * u) / z
        m, s, eps = self.params["mean"], self.params["sd"], self.params["epsilon"]
        mass = ndtr((b - m) / s) - ndtr((a - m) / s)
        gauss = np.exp(-0.5 * ((u - m) / s) ** 2) / (s * math.sqrt(2 * math.pi) * mass)
        return (1 - eps) * gauss + eps / (b - a)

    def _raw_cdf(self, u):
        a, b = self.u_lo, self.u_hi
        if self.family == "uniform":
            return (u - a) / (b - a)
        if self.family == "linear_tilt":
            g = self.params["gamma"]
            z = (b - a) + g * (b * b - a * a) / 2
            return ((u - a) + g * (u * u - a * a) / 2) / z
        m, s, eps = self.params["mean"], self.params["sd"], self.params["epsilon"]
        lo = ndtr((a - m) / s)
        mass = ndtr((b - m) / s) - lo
        return (1 - eps) * (ndtr((u - m) / s) - lo) / mass + eps * (u - a) / (b - a)

    # -- quantiles and sampling ------------------------------------------
    @cached_property
    def ppf_table(self) -> np.ndarray:
        """Quantiles at probabilities ``k / PPF_TABLE_SIZE``, k = 0..PPF_TABLE_SIZE."""
        probs = np.linspace(0.0, 1.0, PPF_TABLE_SIZE + 1)
        dense = np.linspace(self.u_lo, self.u_hi, 8 * PPF_TABLE_SIZE + 1)
        x = np.interp(probs, self.cdf(dense), dense)
        # Newton polish; the density is bounded below so steps are safe
        for _ in range(3):
            x = np.clip(x - (self.cdf(x) - probs) / self.density(x), self.u_lo, self.u_hi)
        x[0], x[-1] = self.u_lo, self.u_hi
        return np.maximum.accumulate(x)

    def ppf(self, p):
        """Piecewise-linear interpolation of :attr:`ppf_table`."""
        table = self.ppf_table
        last = table.shape[0] - 1
        pos = np.asarray(p, dtype=float) * last
        idx = np.minimum(np.floor(pos).astype(np.intp), last - 1)
        frac = pos - idx
        return table[idx] + (table[idx + 1] - table[idx]) * frac

    def sample(self, count: int, seed: int | Sequence[int]) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        return self.ppf(rng.random(count))

    # -- integration -----------------------------------------------------
    def integrate(self, g: Callable[[float], float], a: float | None = None,
                  b: float | None = None) -> float:
        """E[g(U)] (or the integral of g*f over ``[a, b]``) by adaptive quadrature."""
        a = self.u_lo if a is None else a
        b = self.u_hi if b is None else b

        def integrand(u):
            val = g(u)
            if not np.isfinite(val):
                raise DistributionError(f"non-finite integrand value at u={u!r}")
            return float(val) * float(self._raw_density(np.asarray(u)))

        points = [0.0] if a < 0.0 < b else None
        val, _ = _integrate.quad(integrand, a, b, points=points, **_QUAD_OPTS)
        return val

    @cached_property
    def moments(self) -> Moments:
        mu = self.integrate(lambda u: u)
        sigma2 = self.integrate(lambda u: (u - mu) ** 2)
        mu3 = self.integrate(lambda u: u**3)
        e_abs = self.integrate(abs)
        return Moments(mu=mu, sigma2=sigma2, mu3_raw=mu3, e_abs_u=e_abs)

    def describe(self) -> dict[str, Any]:
        out: dict[str, Any] = {"family": self.family, "u_lo": self.u_lo, "u_hi": self.u_hi}
        out.update(self.params)
        return out


def moments(F: ValueDistribution) -> Moments:
    return F.moments


def sample(F: ValueDistribution, count: int, seed: int | Sequence[int]) -> np.ndarray:
    return F.sample(count, seed)


def integrate(F: ValueDistribution, g: Callable[[float], float]) -> float:
    return F.integrate(g)


def zero_mean_gamma(u_lo: float, u_hi: float) -> float:
    """Tilt coefficient giving the linear-tilt family mean zero on ``[u_lo, u_hi]``."""
    a, b = u_lo, u_hi
    return -1.5 * (b * b - a * a) / (b**3 - a**3)


def _as_bool(x: Any) -> bool:
    if isinstance(x, str):
        return x.strip().lower() in ("1", "true", "yes", "on")
    return bool(x)


def make_distribution(config: Mapping[str, Any]) -> ValueDistribution:
    """Build and validate a distribution from a flat config.

    Keys: ``family``, ``u_lo``, ``u_hi`` and, by family, ``gamma`` (or
    ``recenter = true`` to solve for a zero-mean tilt), ``mean``, ``sd``,
    ``epsilon``.
    """
    family = str(config.get("family", "uniform")).strip().lower()
    if family not in FAMILIES:
        raise DistributionError(f"unsupported family {family!r}; expected one of {FAMILIES}")
    try:
        u_lo = float(config.get("u_lo", -1.0))
        u_hi = float(config.get("u_hi", 1.0))
    except (TypeError, ValueError) as exc:
        raise DistributionError(f"bad support bounds: {exc}") from None
    if not (u_lo < 0.0 < u_hi):
        raise DistributionError(f"support must satisfy u_lo < 0 < u_hi, got [{u_lo}, {u_hi}]")
    if min(-u_lo, u_hi) < 1.0:
        raise DistributionError(
            f"normalization violated: min(|u_lo|, u_hi) = {min(-u_lo, u_hi):g} < 1"
        )

    params: dict[str, float] = {}
    if family == "linear_tilt":
        if _as_bool(config.get("recenter", False)):
            params["gamma"] = zero_mean_gamma(u_lo, u_hi)
        else:
            params["gamma"] = float(config.get("gamma", 0.0))
    elif family == "truncnormal":
        params["mean"] = float(config.get("mean", 0.0))
        params["sd"] = float(config.get("sd", 1.0))
        params["epsilon"] = float(config.get("epsilon", 0.05))
        if params["sd"] <= 0 or not (0.0 <= params["epsilon"] < 1.0):
            raise DistributionError("truncnormal needs sd > 0 and 0 <= epsilon < 1")

    dist = ValueDistribution(family, u_lo, u_hi, params)
    grid = np.linspace(u_lo, u_hi, 10_000)
    fmin = float(np.min(dist._raw_density(grid)))
    if not fmin > DENSITY_FLOOR:
        raise DistributionError(
            f"density not bounded away from zero: min f = {fmin:.3g} <= {DENSITY_FLOOR:g}"
        )
    total = dist.integrate(lambda u: 1.0)
    if abs(total - 1.0) > 1e-10:
        raise DistributionError(f"density integrates to {total!r}, not 1")
    return dist
