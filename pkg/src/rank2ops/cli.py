"""Experiment runner.

    python -m rank2ops.cli <subcommand> --config cfg.toml --out DIR [--seed N] [--tol name=value ...]

Subcommands: elliptic-check, build-operators, commute-scan, ba-verify,
flow-run, full-suite.  Exit status 0 when every check passes, 1 when a check
fails, 2 on a configuration (or output path) error.  Nothing is written
when the configuration is rejected.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import __version__, construction, suites
from . import elliptic as ell
from .diffop import Seq
from .errors import ConfigError, Rank2Error

SUBCOMMANDS = ("elliptic-check", "build-operators", "commute-scan", "ba-verify", "flow-run", "full-suite")


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class GeneratorCfg:
    seed: int
    center: complex = 0.5 + 0.5j
    radius: float = 0.2
    v_scale: float = 0.3
    wp_sep: float = 0.5
    x_max: float = 10.0


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    omega1: complex
    omega2: complex
    alpha0: tuple[complex, complex]
    c_sum: complex
    generator: GeneratorCfg | None
    gamma: tuple[complex, ...] | None
    v: tuple[complex, ...] | None
    n_sites: int = 48
    n_max: int = 10
    tolerances: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def lattice(self) -> ell.LatticeSpec:
        return ell.make_lattice(self.omega1, self.omega2)

    def echo(self) -> dict:
        def cj(z):
            return [float(complex(z).real), float(complex(z).imag)]

        out = {
            "seed": self.seed,
            "lattice": {"omega1": cj(self.omega1), "omega2": cj(self.omega2)},
            "data": {"alpha0": [cj(a) for a in self.alpha0], "c_sum": cj(self.c_sum)},
            "windows": {"n_sites": self.n_sites, "n_max": self.n_max},
            "tolerances": dict(sorted(self.tolerances.items())),
            "run": self.run,
        }
        if self.generator is not None:
            g = asdict(self.generator)
            g["center"] = cj(g["center"])
            out["data"]["generator"] = g
        else:
            out["data"]["gamma"] = [cj(x) for x in self.gamma]
            out["data"]["v"] = [cj(x) for x in self.v]
        return out


RUN_DEFAULTS = {
    "elliptic-check": {"n_lattices": 5, "n_points": 100},
    "commute-scan": {"n_seeds": 10},
    "ba-verify": {"n_check": 6, "n_kappa": 4},
    "flow-run": {"P": 16, "dt": 1e-3, "t_end": 10.0, "kappa": "zero", "sample_every": 100, "dt_ref": 1e-5},
}


def _complex(x, key: str) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(t, (int, float)) for t in x):
        return complex(x[0], x[1])
    raise ConfigError(f"{key}: expected a number or [re, im], got {x!r}")


def _take(tbl: dict, key: str, path: str, kind, default=None, required: bool = False):
    if key not in tbl:
        if required:
            raise ConfigError(f"{path}.{key}: missing")
        return default
    val = tbl[key]
    if kind is complex:
        return _complex(val, f"{path}.{key}")
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ConfigError(f"{path}.{key}: expected an integer, got {val!r}")
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{path}.{key}: expected a number, got {val!r}")
        return float(val)
    if kind is str and not isinstance(val, str):
        raise ConfigError(f"{path}.{key}: expected a string, got {val!r}")
    return val


def _check_keys(tbl: dict, allowed: set, path: str) -> None:
    extra = sorted(set(tbl) - allowed)
    if extra:
        raise ConfigError(f"{path}.{extra[0]}: unknown key")


def parse_config(raw: dict, seed_override: int | None = None, tol_overrides: dict | None = None) -> ExperimentConfig:
    _check_keys(raw, {"seed", "lattice", "data", "windows", "tolerances", "run"}, "config")
    seed = _take(raw, "seed", "config", int)
    if seed_override is not None:
        seed = seed_override

    lat = raw.get("lattice", {})
    _check_keys(lat, {"omega1", "omega2", "tau"}, "lattice")
    if "tau" in lat:
        if "omega2" in lat:
            raise ConfigError("lattice.tau: give either tau or omega2, not both")
        w1 = _take(lat, "omega1", "lattice", complex, 1.0)
        w2 = w1 * _take(lat, "tau", "lattice", complex)
    else:
        w1 = _take(lat, "omega1", "lattice", complex, 1.0)
        w2 = _take(lat, "omega2", "lattice", complex, required=True)
    try:
        ell.make_lattice(w1, w2)
    except Rank2Error as exc:
        raise ConfigError(f"lattice: {exc}") from exc

    data = raw.get("data", {})
    _check_keys(data, {"alpha0", "c_sum", "generator", "gamma", "v"}, "data")
    a0 = data.get("alpha0", [[0.7, 0.0], [-0.4, 0.0]])
    if not isinstance(a0, list) or len(a0) != 2:
        raise ConfigError("data.alpha0: expected a pair")
    alpha0 = (_complex(a0[0], "data.alpha0[0]"), _complex(a0[1], "data.alpha0[1]"))
    c_sum = _take(data, "c_sum", "data", complex, 0j)
    gen = None
    gamma = v = None
    has_gen = "generator" in data
    has_explicit = "gamma" in data or "v" in data
    if has_gen == has_explicit:
        raise ConfigError("data.generator: give either a generator table or explicit gamma and v lists")
    if has_gen:
        g = data["generator"]
        _check_keys(g, {"seed", "center", "radius", "v_scale", "wp_sep", "x_max"}, "data.generator")
        gseed = _take(g, "seed", "data.generator", int)
        if seed_override is not None:
            gseed = seed_override
        if gseed is None:
            raise ConfigError("data.generator.seed: missing (a seed is required when a generator is used)")
        gen = GeneratorCfg(
            seed=gseed,
            center=_take(g, "center", "data.generator", complex, 0.5 + 0.5j),
            radius=_take(g, "radius", "data.generator", float, 0.2),
            v_scale=_take(g, "v_scale", "data.generator", float, 0.3),
            wp_sep=_take(g, "wp_sep", "data.generator", float, 0.5),
            x_max=_take(g, "x_max", "data.generator", float, 10.0),
        )
        if seed is None:
            seed = gseed
        if c_sum != 0:
            raise ConfigError("data.c_sum: the generator draws data with c_sum = 0")
    else:
        for key in ("gamma", "v"):
            if key not in data or not isinstance(data[key], list) or not data[key]:
                raise ConfigError(f"data.{key}: explicit data needs a non-empty list")
        gamma = tuple(_complex(x, f"data.gamma[{i}]") for i, x in enumerate(data["gamma"]))
        v = tuple(_complex(x, f"data.v[{i}]") for i, x in enumerate(data["v"]))
        if len(gamma) != len(v):
            raise ConfigError("data.v: length differs from data.gamma")
    if seed is None:
        raise ConfigError("config.seed: missing")

    win = raw.get("windows", {})
    _check_keys(win, {"n_sites", "n_max"}, "windows")
    n_sites = _take(win, "n_sites", "windows", int, 48 if gamma is None else len(gamma))
    n_max = _take(win, "n_max", "windows", int, 10)
    if gamma is not None and n_sites > len(gamma):
        raise ConfigError(f"windows.n_sites: {n_sites} exceeds the {len(gamma)} explicit sites")
    if n_max + 1 > n_sites:
        raise ConfigError("windows.n_max: needs n_max + 1 <= n_sites")
    if n_max < 6:
        raise ConfigError("windows.n_max: at least 6 sites are needed for the operator fits")

    tols = dict(suites.DEFAULT_TOLERANCES)
    user_tols = raw.get("tolerances", {})
    for k, val in list(user_tols.items()) + list((tol_overrides or {}).items()):
        if k not in tols:
            raise ConfigError(f"tolerances.{k}: unknown tolerance name")
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"tolerances.{k}: expected a number")
        tols[k] = float(val)

    run_raw = raw.get("run", {})
    _check_keys(run_raw, set(RUN_DEFAULTS), "run")
    run = {}
    for name, defaults in RUN_DEFAULTS.items():
        blk = run_raw.get(name, {})
        _check_keys(blk, set(defaults), f"run.{name}")
        merged = {}
        for k, dv in defaults.items():
            kind = type(dv)
            merged[k] = _take(blk, k, f"run.{name}", kind, dv)
        run[name] = merged
    if run["flow-run"]["kappa"] != "zero":
        raise ConfigError("run.flow-run.kappa: only 'zero' is supported from a config file")
    if not run["flow-run"]["dt"] > 0:
        raise ConfigError("run.flow-run.dt: must be positive")
    if run["flow-run"]["P"] < 3:
        raise ConfigError("run.flow-run.P: needs at least 3 sites")
    return ExperimentConfig(seed, w1, w2, alpha0, c_sum, gen, gamma, v, n_sites, n_max, tols, run)


def load_config(path: str | os.PathLike, seed_override=None, tol_overrides=None) -> ExperimentConfig:
    p = Path(path)
    try:
        raw = tomli.loads(p.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config: file not found: {p}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config: {p}: {exc}") from exc
    return parse_config(raw, seed_override, tol_overrides)


def inverse_data(cfg: ExperimentConfig, seed: int | None = None) -> construction.InverseData:
    L = cfg.lattice()
    if cfg.generator is not None:
        g = cfg.generator
        return construction.generate_inverse_data(
            L, cfg.n_sites, g.seed if seed is None else seed, center=g.center, radius=g.radius,
            v_scale=g.v_scale, alpha0=cfg.alpha0, wp_sep=g.wp_sep, x_max=g.x_max,
        )
    gam = np.array(cfg.gamma[: cfg.n_sites])
    v = np.array(cfg.v[: cfg.n_sites])
    return construction.InverseData(L, Seq.from_list(0, gam), Seq.from_list(0, v), cfg.alpha0, cfg.c_sum)


# ---------------------------------------------------------------- running


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (complex, np.complexfloating)):
        return f"{format(x.real, '.17g')}{format(x.imag, '+.17g')}j"
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    return x


def emit_report(result: suites.SuiteResult, out_dir: str | os.PathLike, subcommand: str, cfg: ExperimentConfig, timings: dict | None = None) -> Path:
    """report.json plus one CSV per table; timings go to timings.json so reports stay reproducible."""
    if not result.checks:
        raise ValueError("refusing to write a report without checks")
    names = [c.name for c in result.checks]
    if len(set(names)) != len(names):
        raise ValueError("duplicate check names")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        report = {
            "subcommand": subcommand,
            "config": cfg.echo(),
            "versions": {"rank2ops": __version__, "numpy": np.__version__, "python": platform.python_version()},
            "checks": [c.to_json() for c in result.checks],
            "pass": result.passed,
            "info": _jsonable(result.info),
        }
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        for name, tbl in sorted(result.tables.items()):
            with open(out / f"{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(tbl.header)
                for row in tbl.rows:
                    w.writerow([_fmt(x) for x in row])
        if timings is not None:
            (out / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return out / "report.json"


def _operators_result(cfg: ExperimentConfig) -> suites.SuiteResult:
    """build-operators: closed-form L_2, L_lambda and the numerical L_6 for the configured data."""
    d = inverse_data(cfg)
    der = construction.derive(d)
    L4 = construction.build_Llambda(d, der)
    cr = construction.find_commuting_partner(L4)
    fit = construction.fit_spectral_curve(L4, cr.L6)
    L = d.lattice
    tols = cfg.tolerances
    coeffs = suites.Table(["n", "gamma_re", "gamma_im", "v_re", "v_im", "alpha1_re", "alpha1_im", "alpha2_re", "alpha2_im", "c_re", "c_im", "u_re", "u_im"])
    for n in range(d.n_sites):
        row = [n]
        for x in (d.gamma[n], d.v[n], der.alpha1[n], der.alpha2[n], der.c_coeff[n], der.u[n]):
            row += [complex(x).real, complex(x).imag]
        coeffs.rows.append(row)
    l6 = suites.Table(["n"] + [f"u{p}_{part}" for p in range(-3, 4) for part in ("re", "im")])
    for n in cr.L6.valid.sites():
        row = [n]
        for p in range(-3, 4):
            x = cr.L6.coeff(p, n)
            row += [x.real, x.imag]
        l6.rows.append(row)
    res = suites.SuiteResult(tables={"coefficients": coeffs, "l6": l6})
    res.checks += [
        suites.equals("operators.basis_dim", cr.basis_dim, 3),
        suites.above("operators.gap", cr.gap, tols["commutant_gap"], strict=False),
        suites.below("operators.partner_residual", cr.residual, tols["partner_residual"]),
        suites.below("operators.g2_rel_err", abs(fit.g2_hat - L.g2) / abs(L.g2), tols["curve_invariants"]),
        suites.below("operators.g3_rel_err", abs(fit.g3_hat - L.g3) / max(abs(L.g3), 1e-300), tols["curve_invariants"]),
    ]
    res.info["curve_fit"] = fit.to_json()
    return res


def run_suite(subcommand: str, cfg: ExperimentConfig) -> tuple[suites.SuiteResult, dict]:
    tols = cfg.tolerances
    L = cfg.lattice()
    result = suites.SuiteResult()
    timings: dict[str, float] = {}

    def timed(name, fn):
        t0 = time.perf_counter()
        out = fn()
        timings[name] = time.perf_counter() - t0
        return out

    todo = SUBCOMMANDS[:-1] if subcommand == "full-suite" else (subcommand,)
    ver = None
    for sc in todo:
        r = cfg.run.get(sc, {})
        if sc == "elliptic-check":
            result.extend(timed(sc, lambda: suites.elliptic_suite(cfg.seed, r["n_lattices"], r["n_points"], L, tols)))
        elif sc == "build-operators":
            result.extend(timed(sc, lambda: _operators_result(cfg)))
        elif sc == "commute-scan":
            if cfg.generator is not None:
                g = cfg.generator
                gen = dict(center=g.center, radius=g.radius, v_scale=g.v_scale, alpha0=cfg.alpha0, wp_sep=g.wp_sep, x_max=g.x_max)
                seeds = [g.seed + i for i in range(r["n_seeds"])]
                result.extend(timed(sc, lambda: suites.commute_suite(L, seeds, cfg.n_sites, gen, tols)))
            else:
                result.extend(timed(sc, lambda: _operators_result(cfg)))
        elif sc == "ba-verify":
            d = inverse_data(cfg)
            res, ver = timed(sc, lambda: suites.ba_suite(d, cfg.n_max, r["n_check"], r["n_kappa"], cfg.seed, tols))
            result.extend(res)
            result.extend(timed("structural", lambda: suites.structural_suite(ver, cfg.seed, tols)))
        elif sc == "flow-run":
            result.extend(timed(sc, lambda: suites.flow_suite(r["P"], r["dt"], r["t_end"], cfg.seed, r["sample_every"], r["dt_ref"], tols=tols)))
    return result, timings


def _parse_tol(items: list[str]) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise ConfigError(f"--tol {it!r}: expected name=value")
        k, v = it.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError as exc:
            raise ConfigError(f"tolerances.{k.strip()}: {v!r} is not a number") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rank2ops", description="Rank-2 commuting difference operators: verification runs.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, _parse_tol(args.tol))
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must be an unsigned 64-bit integer")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result, timings = run_suite(args.subcommand, cfg)
    except Rank2Error as exc:
        # a numerical failure is a failed check, recorded as such
        result = suites.SuiteResult(checks=[suites.Check(f"{args.subcommand}.error:{type(exc).__name__}", math.nan, math.nan, "ok", False)])
        result.info["error"] = str(exc)
        timings = {}
    try:
        emit_report(result, args.out, args.subcommand, cfg, timings)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.value:.3g} {c.relation} {c.tolerance:g}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
