"""Command-line experiment runner.

Every subcommand resolves its parameters from built-in defaults, then an
optional JSON config (``--config``, which must carry ``"version": 1``), then
explicit flags.  It writes ``<name>.json`` and ``<name>.csv`` plus the
resolved config ``<name>.resolved.json`` to the output directory
(``--output-dir``, else ``$SHELAB_OUTPUT_DIR``, else ``./shelab-out``) and
prints a short summary.

Exit status: 0 when every required check passes, 1 on a failed check or a
numerical/invariant error, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from scipy import integrate

from . import __version__
from .drift import DiffusionSpec, DriftSpec, osgood_integral, truncate, validate
from .errors import ConfigError, ShelabError
from .kernel import (
    InitialData,
    heat_kernel,
    product_identity_residual,
    squared_identity_residual,
    squared_kernel_mass,
    squared_kernel_mass_quadrature,
)
from .noise import GridSpec
from .ode import HittingProblem, hitting_time
from .spde import SpdeProblem, blowup_scan, minimal_ladder, solve
from . import verify as vf

CONFIG_VERSION = 1
ENV_OUTPUT = "SHELAB_OUTPUT_DIR"

_GRID = {"dt": 0.005, "dx": 0.1, "t_max": 1.0, "x_min": -10.0, "length": 20.0}
_PROBLEM = {
    "drift": {"family": "power", "params": [2.0]},
    "diffusion": 1.0,
    "u0": 0.0,
    "grid": _GRID,
    "boundary": "periodic",
    "seed": 0,
}

DEFAULTS = {
    "osgood-check": {"family": "power", "params": [2.0], "lower": 1.0, "tol": 1e-10,
                     "expect": None},
    "hitting-time": {"family": "power", "params": [2.0], "from": 1.0, "to": 10.0,
                     "tol": 1e-10, "expect": None},
    "simulate": {**_PROBLEM, "drift": {"family": "affine", "params": [1.0]}, "stride": 10,
                 "truncate": None},
    "ladder": {**_PROBLEM, "levels": [2, 4, 8, 16], "threshold": "half", "stride": 100,
               "require_decreasing": False},
    "blowup-scan": {**_PROBLEM, "grid": {**_GRID, "t_max": 5.0}, "levels": [2, 4, 8, 16],
                    "threshold": "half", "seeds": 10, "M": 1.0},
    "verify-tails": {"c": 1.0, "t": 1.0, "lambdas": [0.0, 0.5, 1.0, 2.0], "reps": 10_000,
                     "seed": 0, "dt": None, "dx": None},
    "verify-moments": {"c0": 1.0, "k": [2, 4], "reps": 10_000, "seed": 0,
                       "direction": "all",
                       "spatial": {"t": 1.0, "pairs": [[0.0, 0.25], [0.0, 1.0]],
                                   "dt": 0.02, "dx": None},
                       "temporal": {"x": 0.0, "t_pairs": [[1.0, 1.02], [1.0, 1.1]],
                                    "dt": 0.02, "dx": None},
                       "combined": {"window": [[[0.01, 0.0], [0.0101, 0.01]],
                                               [[0.01, 0.0], [0.01, 0.02]],
                                               [[0.01, 0.0], [0.0102, 0.0]]],
                                    "dt": 1e-4, "dx": 0.005}},
    "verify-covariance": {"c": 1.0, "t": 1.0, "x": [0.0, 1.0, 2.0, 10.0],
                          "g": ["identity", "abs", "tanh"], "reps": 10_000, "seed": 0,
                          "shifts": [5.0], "dt": None, "dx": None},
    "growth-scan": {"c1": 1.0, "c2": 1.0, "a": 1.0, "epsilon": 0.5,
                    "L": [10.0, 100.0, 1000.0], "reps": 20, "seed": 0, "min_fraction": 0.95},
    "kernel-selftest": {"n": 1000, "seed": 0},
}

# flag name -> (config key, parser type, help)
_FLAGS = {
    "osgood-check": [("family", str, "drift family"), ("params", "floats", "family parameters"),
                     ("lower", float, "lower limit M"), ("tol", float, "absolute tolerance")],
    "hitting-time": [("family", str, "drift family"), ("params", "floats", "family parameters"),
                     ("from", "level", "start level A"), ("to", "level", "target level N or inf"),
                     ("tol", float, "relative tolerance")],
    "simulate": [("family", str, "drift family"), ("params", "floats", "drift parameters"),
                 ("sigma", float, "constant diffusion"), ("seed", int, "noise seed"),
                 ("stride", int, "frame stride"), ("truncate", float, "truncation level")],
    "ladder": [("family", str, "drift family"), ("params", "floats", "drift parameters"),
               ("sigma", float, "constant diffusion"), ("seed", int, "noise seed"),
               ("levels", "floats", "truncation levels"), ("threshold", str, "'half' or a number")],
    "blowup-scan": [("family", str, "drift family"), ("params", "floats", "drift parameters"),
                    ("sigma", float, "constant diffusion"), ("seed", int, "first noise seed"),
                    ("levels", "floats", "truncation levels"),
                    ("threshold", str, "'half' or a number"), ("seeds", int, "number of seeds"),
                    ("M", float, "offset in the ODE prediction")],
    "verify-tails": [("c", float, "constant integrand"), ("t", float, "evaluation time"),
                     ("lambdas", "floats", "lambda grid"), ("reps", int, "replicates"),
                     ("seed", int, "noise seed")],
    "verify-moments": [("c0", float, "integrand bound"), ("k", "floats", "moment orders"),
                       ("reps", int, "replicates"), ("seed", int, "noise seed"),
                       ("direction", str, "spatial, temporal, combined or all")],
    "verify-covariance": [("c", float, "constant integrand"), ("t", float, "evaluation time"),
                          ("x", "floats", "separations"), ("g", "strs", "g functions"),
                          ("reps", int, "replicates"), ("seed", int, "noise seed")],
    "growth-scan": [("c1", float, "lower integrand bound"), ("c2", float, "upper bound"),
                    ("a", float, "window start time"), ("epsilon", float, "window scale"),
                    ("L", "floats", "domain lengths"), ("reps", int, "replicates"),
                    ("seed", int, "noise seed")],
    "kernel-selftest": [("n", int, "random tuples"), ("seed", int, "rng seed")],
}


class CheckFailed(Exception):
    pass


# ---------------------------------------------------------------- config

def _level(text):
    return math.inf if str(text).lower() in ("inf", "infinity") else float(text)


def _merge(base, over, location):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown key {key!r}", f"{location}.{key}" if location else key)
        if isinstance(base[key], dict) and isinstance(val, dict) and key not in ("drift",):
            out[key] = _merge(base[key], val, f"{location}.{key}" if location else key)
        else:
            out[key] = val
    return out


def load_config(path, command):
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found", "config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "config") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", "config")
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError(f"expected version {CONFIG_VERSION}, got {doc.get('version')!r}",
                          "config.version")
    if doc.get("command", command) != command:
        raise ConfigError(f"config is for {doc['command']!r}, not {command!r}", "config.command")
    body = {k: v for k, v in doc.items() if k not in ("version", "command", "require")}
    return body, doc.get("require")


def resolve(command, file_cfg, flags):
    cfg = _merge(DEFAULTS[command], file_cfg or {}, "")
    for key, val in flags.items():
        if val is None:
            continue
        if key == "family":
            drift_key = "drift" if "drift" in cfg else None
            if drift_key:
                cfg["drift"] = {"family": val, "params": cfg["drift"].get("params", [])
                                if cfg["drift"].get("family") == val else []}
            else:
                cfg["family"] = val
                if "params" not in flags or flags["params"] is None:
                    cfg["params"] = []
        elif key == "params":
            if "drift" in cfg:
                cfg["drift"]["params"] = val
            else:
                cfg["params"] = val
        elif key == "sigma":
            cfg["diffusion"] = val
        else:
            cfg[key] = val
    return cfg


def _drift(cfg, location="drift"):
    if "drift" in cfg:
        return DriftSpec.from_config(cfg["drift"], location)
    return DriftSpec.from_config({"family": cfg["family"], "params": cfg["params"]}, location)


def _grid(g):
    try:
        dt, dx = float(g["dt"]), float(g["dx"])
        n_t = int(g["n_t"]) if "n_t" in g else int(round(float(g["t_max"]) / dt))
        n_x = int(g["n_x"]) if "n_x" in g else int(round(float(g["length"]) / dx))
        return GridSpec(dt=dt, dx=dx, n_t=n_t, n_x=n_x, x_min=float(g.get("x_min", 0.0)))
    except (KeyError, TypeError, ValueError, ShelabError) as exc:
        raise ConfigError(str(exc), "grid") from exc


def _problem(cfg):
    drift = _drift(cfg)
    diffusion = DiffusionSpec.from_config(cfg["diffusion"])
    rep = validate(diffusion)
    if not rep.accepted:
        raise ConfigError(f"diffusion rejected: {rep.violations[:3]}", "diffusion")
    rep = validate(drift)
    if not rep.accepted:
        raise ConfigError(f"drift rejected: {rep.violations[:3]}", "drift")
    try:
        u0 = InitialData.from_config(cfg["u0"])
        return SpdeProblem(drift, diffusion, u0, _grid(cfg["grid"]), cfg["boundary"],
                           int(cfg["seed"]))
    except ConfigError:
        raise
    except (ShelabError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "problem") from exc


def _threshold(cfg):
    th = cfg["threshold"]
    if th in (None, "half"):
        return None
    try:
        value = _level(th)
    except ValueError as exc:
        raise ConfigError(f"threshold must be 'half' or a number, got {th!r}",
                          "threshold") from exc
    return lambda n: value


# ---------------------------------------------------------------- output

class _TableReport:
    def __init__(self, schema, data, header, rows):
        self.schema = schema
        self._data = data
        self._header = header
        self._rows = rows

    def to_dict(self):
        return {"schema": self.schema, "schema_version": vf.SCHEMA_VERSION,
                **vf._jsonable(self._data)}

    def rows(self):
        return self._header, self._rows


def _out_dir(arg):
    return Path(arg or os.environ.get(ENV_OUTPUT) or "shelab-out")


# ---------------------------------------------------------------- commands

def cmd_osgood(cfg):
    b = _drift(cfg)
    v = osgood_integral(b, lower=float(cfg["lower"]), tol=float(cfg["tol"]))
    checks = {}
    exp = cfg.get("expect")
    if exp:
        if "finite" in exp:
            checks["finite"] = v.finite == exp["finite"]
        if "value" in exp:
            checks["value"] = abs(v.value - exp["value"]) <= exp.get("tol", 1e-8)
    val = "inf" if math.isinf(v.value) else f"{v.value:.6f}"
    summary = f"osgood-check: {v.status}, {val} ({v.tail_bound_used})"
    report = _TableReport("osgood", v.to_dict(),
                          ["status [verdict]", "value [time]", "lower [level]"],
                          [[v.status, v.value, v.lower_limit]])
    return report, checks, summary


def _rate(cfg):
    # the comparison rate B is a plain power: "power" means G^p here, not 1 + u^p
    if cfg.get("family") == "power":
        exponent = cfg["params"][0] if cfg.get("params") else 2.0
        return DriftSpec.from_config({"family": "monomial", "params": [exponent, 1.0]}, "family")
    return _drift(cfg)


def cmd_hitting(cfg):
    b = _rate(cfg)
    try:
        p = HittingProblem(b, _level(cfg["from"]), _level(cfg["to"]))
    except ShelabError as exc:
        raise ConfigError(str(exc), "from/to") from exc
    T = hitting_time(p, tol=float(cfg["tol"]))
    checks = {}
    exp = cfg.get("expect")
    if exp and "value" in exp:
        checks["value"] = abs(T - exp["value"]) <= exp.get("tol", 1e-6)
    summary = f"hitting-time: {'inf' if math.isinf(T) else f'{T:.10g}'}"
    report = _TableReport("hitting_time", {"A": p.A, "N": p.N, "T": T},
                          ["A [level]", "N [level]", "T [time]"], [[p.A, p.N, T]])
    return report, checks, summary


def cmd_simulate(cfg):
    p = _problem(cfg)
    if cfg.get("truncate") is not None:
        p = p.with_drift(truncate(p.drift, float(cfg["truncate"])))
    traj = solve(p, stride=int(cfg["stride"]))
    header = ["t [time]", "sup_u [field]", "inf_u [field]", "ceiling_hit [flag]"]
    hit_steps = {int(round(t / p.grid.dt)) for t, _ in traj.ceiling_hits}
    rows = [[t, s, i, int(k in hit_steps)]
            for k, (t, s, i) in enumerate(zip(traj.times, traj.sup, traj.inf))]
    data = {"problem": p.to_config(), "n_steps": traj.n_steps,
            "ceiling_hits": traj.ceiling_hits[:100], "final_sup": traj.sup[-1],
            "final_inf": traj.inf[-1]}
    summary = (f"simulate: {traj.n_steps} steps, final sup {traj.sup[-1]:.6g}, "
               f"inf {traj.inf[-1]:.6g}, ceiling hits {len(traj.ceiling_hits)}")
    return _TableReport("trajectory", data, header, rows), {}, summary, traj


def cmd_ladder(cfg):
    p = _problem(cfg)
    lad = minimal_ladder(p, cfg["levels"], _threshold(cfg), stride=int(cfg["stride"]))
    header = ["t [time]"] + [f"sup_u_n={n:g} [field]" for n in lad.levels]
    n = min(tr.n_steps for tr in lad.trajectories)
    rows = [[lad.trajectories[0].times[k]] + [tr.sup[k] for tr in lad.trajectories]
            for k in range(n + 1)]
    data = {"problem": p.to_config(), "levels": lad.levels, "thresholds": lad.thresholds,
            "escalation": lad.escalation, "strictly_decreasing": lad.strictly_decreasing(),
            "monotone": True}
    checks = {"monotone": True}
    if cfg.get("require_decreasing"):
        checks["strictly_decreasing"] = lad.strictly_decreasing()
    esc = ", ".join("-" if t is None else f"{t:.4g}" for t in lad.escalation)
    summary = f"ladder: monotone ok; escalation times [{esc}]"
    return _TableReport("ladder", data, header, rows), checks, summary


def cmd_blowup(cfg):
    p = _problem(cfg)
    rule = _threshold(cfg)
    seeds = range(int(cfg["seed"]), int(cfg["seed"]) + int(cfg["seeds"]))
    scans = [blowup_scan(p.with_seed(s), cfg["levels"], rule, M=float(cfg["M"])) for s in seeds]
    levels = [r.level for r in scans[0].rows]
    header = ["seed [index]"] + [f"tau_n={n:g} [time]" for n in levels]
    rows = [[sc.seed] + [r.tau for r in sc.rows] for sc in scans]
    medians = []
    for i in range(len(levels)):
        taus = [math.inf if sc.rows[i].tau is None else sc.rows[i].tau for sc in scans]
        medians.append(float(np.median(taus)))
    data = {"problem": p.to_config(), "levels": levels, "median_tau": medians,
            "prediction": [r.prediction for r in scans[0].rows],
            "scans": [sc.to_dict() for sc in scans]}
    med = ", ".join("not reached" if math.isinf(m) else f"{m:.4g}" for m in medians)
    summary = f"blowup-scan: median escalation per level [{med}] over {len(scans)} seeds"
    return _TableReport("blowup_scan", data, header, rows), {}, summary


def cmd_tails(cfg):
    rep = vf.tail_report(float(cfg["c"]), float(cfg["t"]), cfg["lambdas"], int(cfg["reps"]),
                         int(cfg["seed"]), dt=cfg["dt"], dx=cfg["dx"])
    checks = {f"lambda={lam:g}": bool(w or u)
              for lam, w, u in zip(rep.lambda_grid, rep.within, rep.underpowered)}
    summary = "verify-tails: " + ", ".join(
        f"l={lam:g} {e:.5f} (oracle {o:.5f})"
        for lam, e, o in zip(rep.lambda_grid, rep.empirical, rep.oracle))
    return rep, checks, summary


def cmd_moments(cfg):
    k = cfg["k"]
    c0, reps, seed = float(cfg["c0"]), int(cfg["reps"]), int(cfg["seed"])
    direction = cfg["direction"]
    if direction not in ("spatial", "temporal", "combined", "all"):
        raise ConfigError(f"unknown direction {direction!r}", "direction")
    reports = {}
    if direction in ("spatial", "all"):
        s = cfg["spatial"]
        reports["spatial"] = vf.spatial_moment_report(c0, s["t"], s["pairs"], k, reps, seed,
                                                      dt=s["dt"], dx=s["dx"])
    if direction in ("temporal", "all"):
        s = cfg["temporal"]
        reports["temporal"] = vf.temporal_moment_report(c0, s["x"], s["t_pairs"], k, reps,
                                                        seed, dt=s["dt"], dx=s["dx"])
    if direction in ("combined", "all"):
        s = cfg["combined"]
        reports["combined"] = vf.combined_modulus_report(c0, s["window"], k, reps, seed,
                                                         dt=s["dt"], dx=s["dx"])
    header = ["direction [name]"] + reports[next(iter(reports))].rows()[0]
    rows = [[name, *row] for name, rep in reports.items() for row in rep.rows()[1]]
    data = {name: rep.to_dict() for name, rep in reports.items()}
    checks = {name: rep.passed for name, rep in reports.items()}
    summary = "verify-moments: " + ", ".join(
        f"{n} {'ok' if ok else 'FAIL'}" for n, ok in checks.items())
    return _TableReport("moments_bundle", data, header, rows), checks, summary


def cmd_covariance(cfg):
    t = float(cfg["t"])
    rep = vf.covariance_decay(float(cfg["c"]), t, cfg["x"], cfg["g"], int(cfg["reps"]),
                              int(cfg["seed"]), dt=cfg["dt"], dx=cfg["dx"])
    checks = {}
    for gi, name in enumerate(rep.g_names):
        for xi, x in enumerate(rep.x_list):
            if name == "identity":
                checks[f"identity x={x:g} matches oracle"] = bool(rep.within[gi][xi])
            if abs(x) >= 10 * math.sqrt(t):
                checks[f"{name} x={x:g} below floor"] = bool(rep.below_floor[gi][xi])
    data = {"covariance": rep.to_dict()}
    if cfg["shifts"]:
        st = vf.stationarity_test(float(cfg["c"]), t, cfg["shifts"], int(cfg["reps"]),
                                  int(cfg["seed"]), dt=cfg["dt"], dx=cfg["dx"])
        data["stationarity"] = st.to_dict()
        checks["stationarity"] = st.passed
    header, rows = rep.rows()
    summary = "verify-covariance: " + ", ".join(
        f"x={x:g} {e:.5f} (oracle {o:.5f})"
        for x, e, o in zip(rep.x_list, rep.empirical[0], rep.oracle))
    return _TableReport("covariance_bundle", data, header, rows), checks, summary


def cmd_growth(cfg):
    rep = vf.growth_scan(float(cfg["c1"]), float(cfg["c2"]), a=float(cfg["a"]),
                         epsilon=float(cfg["epsilon"]), L_list=cfg["L"], reps=int(cfg["reps"]),
                         seed=int(cfg["seed"]))
    gain = rep.strict_gain()
    frac = sum(gain) / len(gain)
    checks = {"monotone": all(rep.monotone()),
              "strict_gain": frac >= float(cfg["min_fraction"])}
    med = ", ".join(f"{m:.4g}" for m in rep.medians())
    summary = (f"growth-scan: medians [{med}] for L={rep.L_list}; "
               f"strict gain in {frac:.0%} of replicates")
    return rep, checks, summary


def cmd_selftest(cfg):
    rng = np.random.default_rng(int(cfg["seed"]))
    n = int(cfg["n"])
    r1 = r2 = 0.0
    for _ in range(n):
        t = rng.uniform(0.1, 10.0)
        s = t * rng.uniform(0.01, 0.99)
        x, y, z = rng.uniform(-3, 3, 3)
        r1 = max(r1, product_identity_residual(t, s, x, y, z))
        r2 = max(r2, squared_identity_residual(t, s, s * rng.uniform(0, 0.99), x, z))
    mass = squared_kernel_mass(1.0, 1.0)
    mass_q = squared_kernel_mass_quadrature(1.0, 1.0)
    unit = max(abs(integrate.quad(lambda y: heat_kernel(r, y), -8 * math.sqrt(r),
                                  8 * math.sqrt(r), epsrel=1e-13, epsabs=0)[0] - 1)
               for r in (0.01, 1.0, 100.0))
    checks = {"product identity <= 1e-12": r1 <= 1e-12,
              "squared identity <= 1e-8": r2 <= 1e-8,
              "squared mass quadrature <= 1e-6": abs(mass - mass_q) <= 1e-6,
              "unit mass <= 1e-10": unit <= 1e-10}
    header = ["check [name]", "value [residual]", "passed [flag]"]
    vals = [r1, r2, abs(mass - mass_q), unit]
    rows = [[name, v, ok] for (name, ok), v in zip(checks.items(), vals)]
    summary = (f"kernel-selftest: product {r1:.2e}, squared {r2:.2e}, "
               f"mass {abs(mass - mass_q):.2e}, unit {unit:.2e}")
    return _TableReport("kernel_selftest", {"checks": dict(zip(checks, vals))}, header,
                        rows), checks, summary


COMMANDS = {
    "simulate": (cmd_simulate, "solve the SPDE on one noise realisation"),
    "ladder": (cmd_ladder, "truncation ladder on shared noise"),
    "blowup-scan": (cmd_blowup, "escalation times across seeds with ODE predictions"),
    "osgood-check": (cmd_osgood, "decide and evaluate the Osgood integral"),
    "hitting-time": (cmd_hitting, "hitting time of the comparison ODE"),
    "verify-tails": (cmd_tails, "tail probabilities of the stochastic convolution"),
    "verify-moments": (cmd_moments, "increment moment bounds"),
    "verify-covariance": (cmd_covariance, "covariance decay and stationarity"),
    "growth-scan": (cmd_growth, "window-infimum growth with domain length"),
    "kernel-selftest": (cmd_selftest, "heat-kernel identity residuals"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="shelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"shelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON config file (version 1)")
        sp.add_argument("--output-dir", help=f"artifact directory (default ${ENV_OUTPUT})")
        sp.add_argument("--name", help="artifact file prefix (default: the command name)")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary line")
        for flag, kind, help_text in _FLAGS[name]:
            dest = f"opt_{flag}"
            if kind == "floats":
                sp.add_argument(f"--{flag}", dest=dest, type=float, nargs="+", help=help_text)
            elif kind == "strs":
                sp.add_argument(f"--{flag}", dest=dest, nargs="+", help=help_text)
            elif kind == "level":
                sp.add_argument(f"--{flag}", dest=dest, type=_level, help=help_text)
            else:
                sp.add_argument(f"--{flag}", dest=dest, type=kind, help=help_text)
    return parser


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    flags = {k[4:]: v for k, v in vars(args).items() if k.startswith("opt_")}
    try:
        file_cfg, require = load_config(args.config, command) if args.config else ({}, None)
        cfg = resolve(command, file_cfg, flags)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = _out_dir(args.output_dir)
    stem = args.name or command
    prefix = out / stem
    try:
        result = COMMANDS[command][0](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ShelabError as exc:
        out.mkdir(parents=True, exist_ok=True)
        err_path = prefix.with_suffix(".error.json")
        err = {"command": command, "error": type(exc).__name__, "message": str(exc),
               "witness": vf._jsonable(getattr(exc, "witness", None))}
        err_path.write_text(json.dumps(err, indent=2) + "\n")
        print(f"{command} failed: {exc} (report: {err_path})", file=sys.stderr)
        return 1
    report, checks, summary = result[:3]
    vf.write_report(report, prefix)
    if command == "simulate":
        np.save(prefix.with_suffix(".npy"), result[3].frames)
    resolved = {"version": CONFIG_VERSION, "command": command, **vf._jsonable(cfg)}
    if require is not None:
        resolved["require"] = require
    prefix.with_suffix(".resolved.json").write_text(json.dumps(resolved, indent=2) + "\n")
    required = checks if require is None else {k: checks.get(k, False) for k in require}
    failed = [k for k, ok in required.items() if not ok]
    if not args.quiet:
        print(summary)
        for k in failed:
            print(f"check failed: {k}")
        print(f"artifacts: {prefix}.json, {prefix}.csv")
    return 1 if failed else 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
