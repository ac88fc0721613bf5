"""Command-line interface: ``qvlab <command> CONFIG [--out DIR] [--set key=value]``.

Configs are flat ``key = value`` files; ``#`` starts a comment and unknown
keys are rejected. Every run writes ``config_echo.txt`` next to its outputs.
Exit codes: 0 success, 1 domain failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from qvlab import diagnostics as diag
from qvlab.distributions import DistributionError, make_distribution
from qvlab.equilibrium import (
    SolverOptions,
    discontinuity_condition_check,
    foc_residual,
    report_from_strategy,
    solve_equilibrium,
)
from qvlab.extremist import extremist_cutoff, h_profile, solve_alpha_w
from qvlab.payoff import make_bump_payoff, verify_axioms
from qvlab.simulation import EI_COLUMNS, SweepRow, estimate_EI, rows_to_csv, sweep_EI
from qvlab.strategy import VoteStrategy

log = logging.getLogger("qvlab")

OUT_DIR_ENV = "QVLAB_OUT_DIR"
EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


class DomainFailure(RuntimeError):
    pass


def _as_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _int_list(text: str) -> list[int]:
    body = text.strip().strip("{}[]()")
    try:
        return [int(x) for x in body.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"not an integer list: {text!r}") from None


# key -> parser; value None means the key is passed through as text
KEYS: dict[str, Callable[[str], Any]] = {
    "family": str, "u_lo": float, "u_hi": float, "gamma": float, "recenter": _as_bool,
    "mean": float, "sd": float, "epsilon": float,
    "delta": float, "payoff_table_size": int,
    "N": int, "N_list": _int_list, "reps": int, "seed": int,
    "grid_size": int, "damping": float, "tol_fixed_point": float, "tol_foc": float,
    "max_iters": int, "v_scan_points": int, "detect_jumps": _as_bool,
    "points_per_delta": int, "points_per_sd": int,
    "strategy_file": str, "solve": _as_bool, "eps": float, "use_mu": _as_bool,
    "alpha_points": int, "threads": int, "out_dir": str,
}

DIST_KEYS = ("family", "u_lo", "u_hi", "gamma", "recenter", "mean", "sd", "epsilon")
SOLVER_KEYS = ("grid_size", "damping", "tol_fixed_point", "tol_foc", "max_iters",
               "v_scan_points", "seed", "detect_jumps", "points_per_delta", "points_per_sd")


@dataclass
class RunConfig:
    values: dict[str, Any]
    raw: dict[str, str]

    @classmethod
    def parse(cls, text: str, overrides: list[str] | None = None) -> "RunConfig":
        raw: dict[str, str] = {}
        lines = text.splitlines() + list(overrides or [])
        for lineno, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            if key in raw and lineno <= len(text.splitlines()):
                raise ConfigError(f"duplicate config key {key!r}")
            raw[key] = value
        values = {}
        for key, value in raw.items():
            try:
                values[key] = KEYS[key](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from None
        cfg = cls(values, raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: list[str] | None = None) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.parse(text, overrides)

    def validate(self) -> None:
        v = self.values
        if "delta" in v and not (v["delta"] > 0 and math.isfinite(v["delta"])):
            raise ConfigError("delta must be a positive finite number")
        for key in ("N", "reps", "grid_size", "max_iters", "v_scan_points", "threads",
                    "alpha_points", "payoff_table_size"):
            if key in v and v[key] < 1:
                raise ConfigError(f"{key} must be >= 1")
        if "N" in v and v["N"] < 2:
            raise ConfigError("N must be >= 2")
        if "N_list" in v and (not v["N_list"] or min(v["N_list"]) < 2):
            raise ConfigError("N_list must hold integers >= 2")
        if "damping" in v and not (0 < v["damping"] <= 1):
            raise ConfigError("damping must lie in (0, 1]")

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, key: str):
        if key not in self.values:
            raise ConfigError(f"missing required key {key!r}")
        return self.values[key]

    def echo(self) -> str:
        return "".join(f"{k} = {self.raw[k]}\n" for k in sorted(self.raw))

    # -- builders ---------------------------------------------------------
    def distribution(self):
        return make_distribution({k: self.values[k] for k in DIST_KEYS if k in self.values})

    def payoff(self):
        delta = self.get("delta", 0.5)
        return make_bump_payoff(delta, table_size=self.get("payoff_table_size", 2**14))

    def solver_options(self) -> SolverOptions:
        kw = {k: self.values[k] for k in SOLVER_KEYS if k in self.values}
        if "damping" in kw:
            kw["damping"] = float(kw["damping"])
        try:
            return SolverOptions(**kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def threads(self) -> int:
        return min(self.get("threads", 1), os.cpu_count() or 1)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _write_kv(path: Path, pairs: list[tuple[str, Any]]) -> None:
    path.write_text("key,value\n" + "".join(f"{k},{_fmt(v)}\n" for k, v in pairs))


# --------------------------------------------------------------------------
# commands


def cmd_axioms(cfg: RunConfig, out: Path) -> int:
    P = make_bump_payoff(cfg.get("delta", 0.5), table_size=cfg.get("payoff_table_size", 2**14),
                         verify=False)
    report = verify_axioms(P)
    rows = [("payoff", c.name, c.passed, c.worst, c.detail) for c in report.checks]
    try:
        F = cfg.distribution()
        m = F.moments
        rows.append(("distribution", "construction", True, 0.0, f"mu={m.mu:.17g} sigma2={m.sigma2:.17g}"))
    except DistributionError as exc:
        rows.append(("distribution", "construction", False, float("nan"), str(exc)))
    text = "component,check,passed,worst,detail\n" + "".join(
        f"{a},{b},{_fmt(c)},{_fmt(float(d))},\"{e}\"\n" for a, b, c, d, e in rows)
    (out / "axioms_report.csv").write_text(text)
    failed = [r for r in rows if not r[2]]
    for r in failed:
        log.error("FAIL %s %s %s", r[0], r[1], r[4])
    return EXIT_DOMAIN if failed else EXIT_OK


def _solve(cfg: RunConfig, F, P, N):
    report = solve_equilibrium(F, P, N, cfg.solver_options())
    log.info("N=%d converged=%s iterations=%d %s", N, report.converged, report.iterations,
             report.message)
    return report


def cmd_equilibrium(cfg: RunConfig, out: Path) -> int:
    F, P = cfg.distribution(), cfg.payoff()
    N = cfg.require("N")
    report = _solve(cfg, F, P, N)
    report.write(out)
    return EXIT_OK if report.converged else EXIT_DOMAIN


def cmd_alpha_w(cfg: RunConfig, out: Path) -> int:
    P = cfg.payoff()
    u_lo = cfg.get("u_lo", -1.0)
    sol = solve_alpha_w(P, u_lo)
    zeta = u_star = float("nan")
    if sol.exists and "N" in cfg.values:
        F = cfg.distribution()
        if F.moments.mu > 0:
            zeta, u_star = extremist_cutoff(sol, F, P, cfg.values["N"], use_mu=cfg.get("use_mu", True))
    _write_kv(out / "alpha_w.csv", [("alpha", sol.alpha), ("w", sol.w), ("zeta", zeta),
                                    ("u_star", u_star), ("exists", sol.exists),
                                    ("h_at_delta", sol.h_at_delta)])
    alphas = np.linspace(P.delta, P.delta + math.sqrt(2 * abs(u_lo)), cfg.get("alpha_points", 200))
    hs = h_profile(P, u_lo, alphas)
    (out / "h_profile.csv").write_text(
        "alpha,h\n" + "".join(f"{_fmt(a)},{_fmt(h)}\n" for a, h in zip(alphas, hs)))
    return EXIT_OK


def _load_strategy(cfg: RunConfig) -> VoteStrategy | None:
    path = cfg.get("strategy_file")
    if path is None:
        return None
    try:
        return VoteStrategy.load(path)
    except (OSError, KeyError, ValueError) as exc:
        raise DomainFailure(f"missing strategy: cannot read {path}: {exc}") from None


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    F, P = cfg.distribution(), cfg.payoff()
    N = cfg.require("N")
    strategy = _load_strategy(cfg)
    converged = True
    if strategy is None:
        if not cfg.get("solve", False):
            raise DomainFailure("missing strategy: set strategy_file or solve = true")
        report = _solve(cfg, F, P, N)
        strategy, converged = report.strategy, report.converged
    est = estimate_EI(strategy, F, P, N, cfg.get("reps", 10_000), cfg.get("seed", 0),
                      threads=cfg.threads)
    row = SweepRow(N, est, converged).as_dict()
    (out / "simulate.csv").write_text(rows_to_csv([row], EI_COLUMNS))
    return EXIT_OK if converged else EXIT_DOMAIN


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    F, P = cfg.distribution(), cfg.payoff()
    N_list = cfg.require("N_list")
    if N_list != sorted(N_list):
        raise ConfigError("N_list must be sorted ascending")
    rows = sweep_EI(lambda n: _solve(cfg, F, P, n), F, P, N_list, cfg.get("reps", 10_000),
                    cfg.get("seed", 0), threads=cfg.threads)
    (out / "sweep.csv").write_text(rows_to_csv([r.as_dict() for r in rows], EI_COLUMNS))
    try:
        fit = diag.ei_decay_fit(rows, F.moments)
        _write_kv(out / "sweep_fit.csv", [("slope", fit.slope), ("intercept", fit.intercept),
                                          ("dropped_N", " ".join(map(str, fit.dropped_N)))])
    except diag.DiagnosticError as exc:
        log.warning("decay fit skipped: %s", exc)
    return EXIT_OK if all(r.converged for r in rows) else EXIT_DOMAIN


def cmd_diagnose(cfg: RunConfig, out: Path) -> int:
    F, P = cfg.distribution(), cfg.payoff()
    N = cfg.require("N")
    strategy = _load_strategy(cfg)
    if strategy is None:
        raise DomainFailure("missing strategy: diagnose needs strategy_file from an equilibrium run")
    opts = cfg.solver_options()
    report = report_from_strategy(strategy, F, P, N, opts)
    rows: list[tuple[str, float, str]] = []
    res, _ = foc_residual(strategy, F, P, N)
    rows.append(("foc_residual_sup", res, ""))
    rows.append(("br_gap_sup", report.br_gap_sup, ""))
    mu = F.moments.mu
    if abs(mu) < diag.MU_ZERO_TOL:
        prop = diag.check_proportionality(report, F, N)
        rows += [("max_rel_dev_bulk", prop.max_rel_dev_bulk, ""),
                 ("p_N_theory", prop.p_N_theory, ""), ("p_hat_ratio", prop.p_hat_ratio, ""),
                 ("mean_vs_sd", diag.mean_vs_sd_check(report), "")]
        if strategy.cutoff is None:
            rows.append(("normality_ks", diag.normality_check(report, F, P, N), ""))
    elif mu > 0:
        sol = solve_alpha_w(P, F.u_lo)
        if sol.exists:
            conc = diag.concentration_check(report, sol, F, P, N, cfg.get("eps", 0.1))
            rows += [("outside_mass", conc.outside_mass, f"alpha={sol.alpha:.17g}"),
                     ("extremist_probability", conc.extremist_probability, ""),
                     ("no_extremist_outside", conc.no_extremist_outside, "")]
        if strategy.cutoff is not None:
            rows.append(("discontinuity_residual",
                         discontinuity_condition_check(strategy, F, P, N), ""))
            freq = diag.extremist_frequency(strategy, F, N, cfg.get("reps", 10_000),
                                            cfg.get("seed", 0), threads=cfg.threads)
            rows.append(("extremist_frequency", freq.observed,
                         f"expected={freq.expected:.17g} se={freq.std_err:.17g}"))
    text = "check,N,value,detail\n" + "".join(f"{c},{N},{_fmt(v)},{d}\n" for c, v, d in rows)
    (out / "diagnose.csv").write_text(text)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig, Path], int]] = {
    "axioms": cmd_axioms, "equilibrium": cmd_equilibrium, "alpha-w": cmd_alpha_w,
    "simulate": cmd_simulate, "sweep": cmd_sweep, "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qvlab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="flat key = value config file")
    p.add_argument("--out", help=f"output directory (default: out_dir key, ${OUT_DIR_ENV}, ./qvlab_out)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key; repeatable")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config, args.set)
        out = Path(args.out or cfg.get("out_dir") or os.environ.get(OUT_DIR_ENV) or "qvlab_out")
        out.mkdir(parents=True, exist_ok=True)
        (out / "config_echo.txt").write_text(cfg.echo())
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainFailure, DistributionError, diag.DiagnosticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
