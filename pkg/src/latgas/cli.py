"""Command-line driver: ``latgas <command> --config FILE [--seed S] [--replicas R] [--out DIR]``.

Exit status: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import os
import platform
import re
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import NumericalFailure, ValidationError

COMMANDS = ("simulate", "stationary-check", "free-energy", "optimal-path", "current-rate",
            "phase-diagram")
MODELS = ("ssep", "wasep", "kmp", "zero_range", "ginzburg_landau")
FAMILIES = ("linear", "sine-perturbed", "constant", "csv")

# section -> key -> (type, default, help)
KEYS = {
    "run": {
        "command": (str, None, "one of " + ", ".join(COMMANDS) + " (the command line wins)"),
        "seed": (int, None, "base seed; replica r uses the stream spawned with key r (default 0)"),
        "replicas": (int, 1, "independent replicas for microscopic runs"),
        "out": (str, "latgas-out", "output directory"),
    },
    "model": {
        "name": (str, "ssep", "ssep | wasep | kmp | zero_range | ginzburg_landau"),
        "E": (float, None, "wasep field amplitude"),
        "rho_max": (float, None, "kmp / zero_range density cutoff"),
        "psi": (str, None, "zero_range rate family: linear | power | saturating"),
        "c": (float, None, "zero_range family constant"),
        "p": (float, None, "zero_range power exponent"),
        "chi0": (float, None, "ginzburg_landau mobility"),
        "d0": (float, None, "ginzburg_landau D = d0 + d2 rho^2"),
        "d2": (float, None, "ginzburg_landau D = d0 + d2 rho^2"),
        "half_width": (float, None, "ginzburg_landau density range [-L, L]"),
    },
    "geometry": {
        "alpha": (float, None, "left reservoir density"),
        "beta": (float, None, "right reservoir density"),
        "mass": (float, None, "total mass on the ring (periodic geometry)"),
    },
    "lattice": {
        "N": (int, 50, "lattice size (sites 1..N-1)"),
        "t_end": (float, 100.0, "macroscopic simulation time"),
        "sample_interval": (float, 0.1, "snapshot spacing for simulate"),
        "burn_in": (float, 10.0, "discarded initial time for stationary-check"),
        "track_pairs": (bool, None, "estimate two-point correlations (default: N <= 64)"),
    },
    "grid": {
        "M": (int, 200, "grid cells on [0, 1]"),
        "dt": (float, None, "time step (default depends on the command)"),
        "T": (float, None, "time horizon (optimal-path: automatic if unset)"),
    },
    "profile": {
        "family": (str, "sine-perturbed", "linear | sine-perturbed | constant | csv"),
        "amplitude": (float, 0.05, "sine perturbation amplitude"),
        "modes": (int, 1, "sine perturbation mode number"),
        "value": (float, None, "bulk value of the constant family"),
        "file": (str, None, "csv family: two columns u,value"),
    },
    "current": {
        "q": (float, 0.1, "constant current added to the hydrodynamic current"),
    },
    "phase": {
        "q_min": (float, 0.0, "first q"),
        "q_max": (float, 1.0, "last q"),
        "n_q": (int, 25, "number of q points"),
        "K": (int, 6, "Fourier modes of the traveling-wave ansatz"),
        "starts": (int, 8, "traveling-wave starts"),
        "M": (int, 64, "grid cells for the fixed-profile minimization"),
    },
}


@dataclass
class RunConfig:
    command: str
    model: str = "ssep"
    model_params: dict = field(default_factory=dict)
    alpha: Optional[float] = None
    beta: Optional[float] = None
    mass: Optional[float] = None
    N: int = 50
    t_end: float = 100.0
    sample_interval: float = 0.1
    burn_in: float = 10.0
    track_pairs: Optional[bool] = None
    M: int = 200
    dt: Optional[float] = None
    T: Optional[float] = None
    seed: int = 0
    replicas: int = 1
    out: str = "latgas-out"
    profile: dict = field(default_factory=dict)
    q: float = 0.1
    phase: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    source: Optional[str] = None

    def normalized(self):
        d = asdict(self)
        d.pop("warnings")
        return d


class ConfigError(ValidationError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _key_lines(text):
    """(section, key) -> line number, first occurrence."""
    lines = {}
    section = None
    for n, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), n)
            continue
        if s and not s.startswith(("#", ";")) and ("=" in s or ":" in s):
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            lines.setdefault((section, key), n)
    return lines


def _convert(typ, raw):
    if typ is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ is int:
        v = float(raw)
        if v != int(v):
            raise ValueError(f"not an integer: {raw!r}")
        return int(v)
    return typ(raw.strip())


def validate_config(text, command=None, overrides=None):
    """Parse and check a config text; returns RunConfig or raises ConfigError listing every problem."""
    errors = []
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        msg = str(exc).splitlines()[0]
        raise ConfigError([f"line {line}: {msg}" if line else msg])
    where = _key_lines(text)

    def at(section, key=None):
        n = where.get((section, key))
        return f"line {n}: " if n else ""

    vals = {}
    for section in parser.sections():
        if section not in KEYS:
            errors.append(f"{at(section)}unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            entry = KEYS[section].get(key)
            if entry is None:
                errors.append(f"{at(section, key)}unknown key {key!r} in [{section}]")
                continue
            try:
                vals[(section, key)] = _convert(entry[0], raw)
            except ValueError:
                errors.append(f"{at(section, key)}{key} = {raw!r} is not a valid {entry[0].__name__}")

    def get(section, key):
        if (section, key) in vals:
            return vals[(section, key)]
        return KEYS[section][key][1]

    overrides = overrides or {}
    cmd = command or get("run", "command")
    warn = []
    if cmd is None:
        errors.append("no command given")
    elif cmd not in COMMANDS:
        errors.append(f"{at('run', 'command')}unknown command {cmd!r}")
    elif command and ("run", "command") in vals and vals[("run", "command")] != command:
        warn.append(f"config command {vals[('run', 'command')]!r} overridden by {command!r}")

    seed = overrides.get("seed")
    if seed is None:
        seed = get("run", "seed")
    if seed is None:
        seed = 0
        warn.append("seed not set; using 0")
    replicas = overrides.get("replicas")
    if replicas is None:
        replicas = get("run", "replicas")
    out = overrides.get("out") or get("run", "out")

    name = get("model", "name")
    mparams = {k: vals[("model", k)] for k in KEYS["model"] if k != "name" and ("model", k) in vals}
    if name not in MODELS:
        errors.append(f"{at('model', 'name')}unknown model {name!r}")

    alpha, beta, mass = get("geometry", "alpha"), get("geometry", "beta"), get("geometry", "mass")
    model = None
    if name in MODELS:
        from .models import builtin_model
        try:
            model = builtin_model(name, **mparams)
        except ValidationError as exc:
            errors.append(f"{at('model')}{exc}")
    lo, hi = model.density_range if model is not None else (0.0, 1.0)
    for key, v in (("alpha", alpha), ("beta", beta), ("mass", mass)):
        if v is not None and not lo < v < hi:
            rng = "(0,1)" if (lo, hi) == (0.0, 1.0) else f"({lo:g},{hi:g})"
            errors.append(f"{at('geometry', key)}{key} must lie in {rng}")
    boundary = alpha is not None or beta is not None
    if boundary and (alpha is None or beta is None):
        errors.append(f"{at('geometry')}alpha and beta must be given together")
    if boundary and mass is not None:
        errors.append(f"{at('geometry', 'mass')}give either alpha/beta or mass, not both")

    needs_boundary = ("simulate", "stationary-check", "free-energy", "optimal-path")
    if cmd in needs_boundary and not boundary:
        errors.append(f"{cmd} needs alpha and beta in [geometry]")
    if cmd == "phase-diagram" and mass is None:
        errors.append("phase-diagram needs mass in [geometry]")
    if cmd == "current-rate" and not boundary and mass is None:
        errors.append("current-rate needs alpha/beta or mass in [geometry]")
    if cmd in needs_boundary and name != "ssep":
        errors.append(f"{at('model', 'name')}{cmd} is implemented for ssep only")
    if cmd == "optimal-path" and boundary and alpha is not None and alpha == beta:
        errors.append(f"{at('geometry', 'beta')}optimal-path needs alpha != beta")

    N = get("lattice", "N")
    t_end = get("lattice", "t_end")
    si = get("lattice", "sample_interval")
    burn = get("lattice", "burn_in")
    if N < 2:
        errors.append(f"{at('lattice', 'N')}N must be an integer >= 2")
    if not t_end > 0:
        errors.append(f"{at('lattice', 't_end')}t_end must be positive")
    if not si > 0:
        errors.append(f"{at('lattice', 'sample_interval')}sample_interval must be positive")
    if burn < 0:
        errors.append(f"{at('lattice', 'burn_in')}burn_in must be nonnegative")
    if cmd == "stationary-check" and t_end <= burn:
        errors.append(f"{at('lattice', 't_end')}t_end must exceed burn_in")
    if replicas < 1:
        errors.append(f"{at('run', 'replicas')}replicas must be at least 1")

    M = get("grid", "M")
    dt, T = get("grid", "dt"), get("grid", "T")
    if M < 16:
        errors.append(f"{at('grid', 'M')}M must be at least 16")
    if dt is not None and not dt > 0:
        errors.append(f"{at('grid', 'dt')}dt must be positive")
    if T is not None and not T > 0:
        errors.append(f"{at('grid', 'T')}T must be positive")

    prof = {k: get("profile", k) for k in KEYS["profile"]}
    if prof["family"] not in FAMILIES:
        errors.append(f"{at('profile', 'family')}unknown profile family {prof['family']!r}")
    if prof["family"] == "constant" and prof["value"] is None:
        errors.append(f"{at('profile')}constant profile needs value")
    if prof["family"] == "constant" and prof["value"] is not None and not lo < prof["value"] < hi:
        errors.append(f"{at('profile', 'value')}value must lie inside the density range")
    if prof["family"] == "csv":
        if prof["file"] is None:
            errors.append(f"{at('profile')}csv profile needs file")
        elif not Path(prof["file"]).is_file():
            errors.append(f"{at('profile', 'file')}profile file {prof['file']!r} not found")
    if prof["family"] == "linear" and mass is not None and not boundary:
        errors.append(f"{at('profile', 'family')}linear profile needs alpha and beta")
    if prof["modes"] < 1:
        errors.append(f"{at('profile', 'modes')}modes must be at least 1")

    ph = {k: get("phase", k) for k in KEYS["phase"]}
    if cmd == "phase-diagram":
        if ph["n_q"] < 2:
            errors.append(f"{at('phase', 'n_q')}n_q must be at least 2")
        if not ph["q_max"] > ph["q_min"]:
            errors.append(f"{at('phase', 'q_max')}q_max must exceed q_min")
        if ph["K"] < 2:
            errors.append(f"{at('phase', 'K')}K must be at least 2")
        if ph["starts"] < 1:
            errors.append(f"{at('phase', 'starts')}starts must be at least 1")
        if ph["M"] < 16:
            errors.append(f"{at('phase', 'M')}M must be at least 16")

    if errors:
        raise ConfigError(errors)
    if boundary and alpha > beta:
        warn.append("alpha > beta: signs follow through, the usual convention is alpha <= beta")
    return RunConfig(cmd, name, mparams, alpha, beta, mass, N, t_end, si, burn,
                     get("lattice", "track_pairs"), M, dt, T, int(seed), int(replicas), out,
                     prof, get("current", "q"), ph, warn)


# command implementations

def _model(cfg):
    from .models import Boundary, Periodic, builtin_model
    geom = Boundary(cfg.alpha, cfg.beta) if cfg.alpha is not None else Periodic(cfg.mass)
    return builtin_model(cfg.model, geom, **cfg.model_params)


def _profile(cfg, grid):
    """Initial / target profile as a GridFunction on ``grid``."""
    from .io import read_profile_csv
    from .pde import GridFunction
    p = cfg.profile
    u = grid.nodes
    if cfg.alpha is not None:
        base = cfg.alpha + (cfg.beta - cfg.alpha) * u
        fam = p["family"]
        if fam == "linear":
            vals = base
        elif fam == "sine-perturbed":
            vals = base + p["amplitude"] * np.sin(p["modes"] * np.pi * u)
        elif fam == "constant":
            # bulk value joined smoothly to the boundary data
            s = 1 - (1 - 2 * u) ** 8
            vals = base + (p["value"] - base) * s
        else:
            return read_profile_csv(p["file"], grid)
    else:
        fam = p["family"]
        if fam == "constant":
            vals = np.full(u.size, p["value"])
        elif fam == "sine-perturbed":
            vals = cfg.mass + p["amplitude"] * np.sin(2 * np.pi * p["modes"] * u)
        elif fam == "csv":
            return read_profile_csv(p["file"], grid)
        else:
            vals = np.full(u.size, cfg.mass)
    return GridFunction(grid, vals, "density")


def _workers(cfg):
    return max(1, min(cfg.replicas, os.cpu_count() or 1))


def _sim_params(cfg, t_end=None):
    from .microsim import SimParams
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SimParams(cfg.N, cfg.alpha, cfg.beta, t_end or cfg.t_end, cfg.seed, cfg.replicas,
                         cfg.sample_interval)


def cmd_simulate(cfg, out):
    from .io import write_json, write_trajectory_ndjson
    from .microsim import simulate
    from .pde import Grid
    init = None
    if "family" in cfg.profile and cfg.profile.get("family") != "linear":
        gf = _profile(cfg, Grid(max(16, cfg.N)))
        init = gf
    trajs = simulate(_sim_params(cfg), init, workers=_workers(cfg))
    write_trajectory_ndjson(trajs, out / "trajectories.ndjson")
    summary = {"replicas": [{"replica": t.replica, "n_events": t.n_events,
                             "final_density": float(t.eta[-1].mean()),
                             "final_current_per_bond": float(t.W[-1].mean() / (cfg.N * t.times[-1]))
                             if t.times[-1] > 0 else None} for t in trajs],
               "n_samples": len(trajs[0])}
    write_json(summary, out / "summary.json")
    return ["trajectories.ndjson", "summary.json"], summary


def cmd_stationary_check(cfg, out):
    from .io import write_correlation_csv, write_json, write_profile_stats_csv
    from .microsim import estimate_stationary, exact_correlation, exact_profile
    track = cfg.track_pairs if cfg.track_pairs is not None else cfg.N <= 64
    st = estimate_stationary(_sim_params(cfg), burn_in=cfg.burn_in, track_pairs=track,
                             workers=_workers(cfg))
    exact = exact_profile(cfg.N, cfg.alpha, cfg.beta)
    write_profile_stats_csv(st, out / "profile.csv", exact)
    files = ["profile.csv"]
    if track:
        write_correlation_csv(st, out / "correlations.csv",
                              exact=lambda x, y: exact_correlation(cfg.N, cfg.alpha, cfg.beta, x, y))
        files.append("correlations.csv")
    err = st.mean - exact
    z = err / st.mean_stderr
    summary = {"N": cfg.N, "max_abs_error": float(np.max(np.abs(err))),
               "max_abs_z": float(np.max(np.abs(z))),
               "all_within_3se": bool(np.all(np.abs(z) <= 3)),
               "mean_current": st.mean_current, "mean_current_stderr": st.mean_current_stderr,
               "mean_current_expected": (cfg.alpha - cfg.beta) / 2,
               "n_batches": st.n_batches, "batch_time": st.batch_time, "n_events": st.n_events}
    write_json(summary, out / "summary.json")
    return files + ["summary.json"], summary


def _rho_bar(cfg, grid):
    from .pde import linear_profile
    return linear_profile(grid, cfg.alpha, cfg.beta)


def cmd_free_energy(cfg, out):
    import csv
    from scipy.special import logit
    from .density_ldf import free_energy_F0, solve_F_bvp
    from .io import write_json
    from .pde import Grid
    from .quasipotential import verify_quasipotential
    grid = Grid(cfg.M)
    gamma = _profile(cfg, grid)
    rb = _rho_bar(cfg, grid)
    F0 = free_energy_F0(gamma, rb)
    res = {"F0": F0}
    Fv = None
    if cfg.alpha != cfg.beta:
        fsol = solve_F_bvp(gamma, cfg.alpha, cfg.beta)
        Fv = fsol.F.values
        res.update(F=fsol.value, bvp_residual=fsol.residual, method=fsol.method)
    else:
        res.update(F=F0, bvp_residual=0.0, method="local")
    chk = verify_quasipotential(gamma, cfg.alpha, cfg.beta, T=cfg.T, dt=cfg.dt)
    res.update(dynamical_cost=chk.cost, gap_to_dynamical=chk.relative_gap, T=chk.T)
    write_json(res, out / "free_energy.json")
    with open(out / "profile.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "gamma", "rho_bar", "F", "phi"])
        for i, u in enumerate(grid.nodes):
            F = Fv[i] if Fv is not None else rb.values[i]
            w.writerow([repr(float(u)), repr(float(gamma.values[i])), repr(float(rb.values[i])),
                        repr(float(F)), repr(float(logit(F)))])
    return ["free_energy.json", "profile.csv"], res


def _subsample(path, n=101):
    from .pde import SpaceTimePath
    K = path.times.size
    if K <= n:
        return path
    step = int(np.ceil((K - 1) / (n - 1)))
    idx = np.arange(0, K, step)
    return SpaceTimePath(path.grid, path.times[idx], path.frames[idx], path.kind, path.loc)


def cmd_optimal_path(cfg, out):
    from .density_ldf import rate_density
    from .io import write_json, write_path_binary, write_path_csv
    from .pde import Grid
    from .quasipotential import adjoint_path
    grid = Grid(cfg.M)
    gamma = _profile(cfg, grid)
    adj = adjoint_path(gamma, cfg.alpha, cfg.beta, T=cfg.T, dt=cfg.dt)
    cost = rate_density(adj.optimal_path, _model(cfg)).cost
    write_path_binary(adj.optimal_path, out / "optimal_path.bin")
    write_path_csv(_subsample(adj.optimal_path), out / "optimal_path.csv")
    write_path_csv(_subsample(adj.rho_path), out / "relaxation_path.csv")
    res = {"cost": cost, "free_energy": adj.fsol.value,
           "relative_gap": abs(cost - adj.fsol.value) / max(adj.fsol.value, 1e-12),
           "T": adj.T, "dt": adj.optimal_path.dt, "relaxation_error": adj.relaxation_error,
           "reconstruction_spread": adj.reconstruction_error}
    write_json(res, out / "optimal_path.json")
    return ["optimal_path.bin", "optimal_path.csv", "relaxation_path.csv", "optimal_path.json"], res


def cmd_current_rate(cfg, out):
    from .current_ldf import rate_current
    from .io import write_json, write_path_csv
    from .pde import Grid, SpaceTimePath, model_current, solve_hydro
    model = _model(cfg)
    periodic = cfg.mass is not None
    grid = Grid(cfg.M, periodic=periodic)
    gamma = _profile(cfg, grid)
    T = cfg.T or 1.0
    dt = cfg.dt or 1e-3
    n = max(1, int(round(T / dt)))
    hyd = solve_hydro(model, gamma, n * (T / n), dt=T / n)
    J = model_current(hyd, model)
    w = SpaceTimePath(grid, J.times, J.frames + cfg.q, "current", "cell")
    ev = rate_current(w, gamma, model)
    res = {"cost": ev.cost, "q": cfg.q, "T": float(w.times[-1]), "reason": ev.reason}
    if periodic and np.ptp(gamma.values) == 0 and not model.has_field:
        res["closed_form"] = float(w.times[-1]) * cfg.q**2 / (2 * float(model.chi(gamma.values[0])))
    write_json(res, out / "current_rate.json")
    write_path_csv(_subsample(w), out / "current_path.csv")
    write_path_csv(_subsample(ev.density), out / "density_path.csv")
    return ["current_rate.json", "current_path.csv", "density_path.csv"], res


def cmd_phase_diagram(cfg, out):
    from .io import write_json, write_phase_csv
    from .phase import phase_report, traveling_wave_rate_check, traveling_wave_search
    model = _model(cfg)
    ph = cfg.phase
    q = np.linspace(ph["q_min"], ph["q_max"], ph["n_q"])
    rep = phase_report(model, cfg.mass, q, K=ph["K"], M=ph["M"], seed=cfg.seed,
                       n_starts=ph["starts"], workers=1)
    write_phase_csv(rep, out / "phase.csv")
    res = {"q_star": rep.q_star, "K": rep.K, "m": cfg.mass, "labels": rep.labels,
           "velocity": rep.velocity, "k_doubling": rep.k_doubling}
    gains = rep.U - rep.traveling_wave
    i = int(np.argmax(gains))
    if rep.labels[i] == "traveling-wave":
        wave = traveling_wave_search(q[i], cfg.mass, model, ph["K"], ph["starts"], cfg.seed)
        red, gen, rel = traveling_wave_rate_check(wave, model)
        res["wave_check"] = {"q": float(q[i]), "reduced": red, "generic": gen, "relative": rel}
    write_json(res, out / "phase.json")
    return ["phase.csv", "phase.json"], res


HANDLERS = {
    "simulate": cmd_simulate,
    "stationary-check": cmd_stationary_check,
    "free-energy": cmd_free_energy,
    "optimal-path": cmd_optimal_path,
    "current-rate": cmd_current_rate,
    "phase-diagram": cmd_phase_diagram,
}


def _versions():
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "numba", "latgas"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def run(cfg):
    """Execute a validated config; returns the exit status. Always writes manifest.json."""
    from .io import write_json
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    manifest = {"command": cfg.command, "config": cfg.normalized(), "seed": cfg.seed,
                "replica_streams": [[cfg.seed, r] for r in range(cfg.replicas)],
                "versions": _versions(), "warnings": list(cfg.warnings), "outputs": []}
    status = 0
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            files, result = HANDLERS[cfg.command](cfg, out)
        manifest["warnings"] += [str(w.message) for w in caught]
        manifest["outputs"] = files
        manifest["status"] = "ok"
    except ValidationError as exc:
        status = 1
        manifest.update(status="invalid", error=str(exc))
    except NumericalFailure as exc:
        status = 2
        manifest.update(status="numerical-failure", error=str(exc), diagnostics=exc.diagnostics)
    manifest["wall_time_s"] = time.perf_counter() - t0
    write_json(manifest, out / "manifest.json")
    if status:
        print(f"latgas: {manifest['error']}", file=sys.stderr)
    return status


def _help_epilog():
    lines = ["config keys (INI sections, key = value):"]
    for section, keys in KEYS.items():
        lines.append(f"  [{section}]")
        for key, (typ, default, text) in keys.items():
            d = "" if default is None else f" (default {default})"
            lines.append(f"    {key} : {typ.__name__}{d}  {text}")
    return "\n".join(lines)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser():
    p = _Parser(prog="latgas", description="Boundary-driven lattice gases: simulation and "
                "large-deviation numerics.", epilog=_help_epilog(),
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI-style config file")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--replicas", type=int, help="override [run] replicas")
    p.add_argument("--out", help="override [run] out")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"latgas: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = validate_config(text, args.command,
                              {"seed": args.seed, "replicas": args.replicas, "out": args.out})
    except ConfigError as exc:
        for e in exc.errors:
            print(f"latgas: {args.config}: {e}", file=sys.stderr)
        return 1
    cfg.source = str(args.config)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
