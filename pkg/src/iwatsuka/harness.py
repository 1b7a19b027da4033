"""Experiment orchestration: configuration, initial-data presets, and the
simulate / effective / converge / identity / polarized / normequiv runs."""
from __future__ import annotations

import copy
import json
import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import _kernels
from .averaging import ThetaRule, identity_residual
from .coupling import ParseError, parse
from .field import (SpectralField, apply_dy, apply_x, basis_field, from_profile, make_grid,
                    random_field, sigma_eps_norm, sigma_norm)
from .io import write_json, write_snapshot, write_trajectory_csv
from .propagators import build_displacement
from .solvers import (NONLINEAR_STEPS, ModelParams, compare_to_effective, filter_trajectory, polarized_exact,
                      solve_effective, solve_full)

log = logging.getLogger(__name__)

EXPERIMENTS = ("simulate", "effective", "converge", "identity", "polarized", "normequiv")

DEFAULTS = {
    "experiment": "simulate",
    "output": "results",
    "b": 1.0,
    "sigma": 1,
    "lambda": "1",
    "epsilon": 0.1,
    "epsilons": [0.2, 0.1, 0.05, 0.025],
    "N_h": 32,
    "N_y": 64,
    "L_y": 16.0,
    "T": 0.5,
    "dt": 1e-3,
    "out_every": 10,
    "initial": "standard",
    "n": 0,
    "alpha0": "gaussian",
    "seed": 0,
    "n_theta": None,
    "snapshots": False,
    "samples_per_period": 16,
    "ensemble": 100,
    "m_values": [1, 2, 3],
    "eps_max": 1.0,
    "nonlinear_step": "midpoint",
}

_INITIAL = re.compile(r"^\s*(standard|polarized\((\d+)\)|eigenmode\((\d+)\)|random\((\d+)\))\s*$")


class ConfigError(ValueError):
    pass


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def resolve_config(raw=None, **overrides):
    """Merge a raw config dict onto the defaults and validate it."""
    raw = dict(raw or {})
    raw.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = copy.deepcopy(DEFAULTS)
    cfg.update(raw)

    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg["experiment"] in EXPERIMENTS, f"experiment must be one of {EXPERIMENTS}")
    need(isinstance(cfg["output"], str), "output must be a string path")
    need(_is_num(cfg["b"]) and cfg["b"] > 0, "b must be a positive number")
    need(_is_int(cfg["sigma"]) and cfg["sigma"] >= 1, "sigma must be a positive integer")
    if _is_num(cfg["lambda"]):
        cfg["lambda"] = repr(float(cfg["lambda"]))
    need(isinstance(cfg["lambda"], str), "lambda must be an expression string or a real number")
    try:
        parse(cfg["lambda"])
    except ParseError as exc:
        raise ConfigError(f"lambda: {exc}") from None
    need(_is_num(cfg["epsilon"]) and cfg["epsilon"] > 0, "epsilon must be positive")
    need(isinstance(cfg["epsilons"], list) and all(_is_num(e) and e > 0 for e in cfg["epsilons"]),
         "epsilons must be a list of positive numbers")
    need(_is_int(cfg["N_h"]) and cfg["N_h"] >= 2, "N_h must be an integer >= 2")
    need(_is_int(cfg["N_y"]) and cfg["N_y"] >= 4 and cfg["N_y"] % 2 == 0, "N_y must be an even integer >= 4")
    need(_is_num(cfg["L_y"]) and cfg["L_y"] > 0, "L_y must be positive")
    need(_is_num(cfg["T"]) and cfg["T"] > 0, "T must be positive")
    need(_is_num(cfg["dt"]) and cfg["dt"] > 0, "dt must be positive")
    need(_is_int(cfg["out_every"]) and cfg["out_every"] >= 1, "out_every must be a positive integer")
    need(isinstance(cfg["initial"], str) and _INITIAL.match(cfg["initial"]) is not None,
         "initial must be standard, polarized(n), eigenmode(n) or random(seed)")
    need(_is_int(cfg["n"]) and 0 <= cfg["n"] < cfg["N_h"], "n must be a mode index below N_h")
    need(cfg["alpha0"] in ("gaussian", "constant"), "alpha0 must be 'gaussian' or 'constant'")
    need(_is_int(cfg["seed"]) and 0 <= cfg["seed"] < 2 ** 64, "seed must be an unsigned 64-bit integer")
    need(cfg["n_theta"] is None or (_is_int(cfg["n_theta"]) and cfg["n_theta"] >= 2),
         "n_theta must be null or an integer >= 2")
    need(isinstance(cfg["snapshots"], bool), "snapshots must be true/false")
    need(_is_int(cfg["samples_per_period"]) and cfg["samples_per_period"] >= 8,
         "samples_per_period must be an integer >= 8")
    need(_is_int(cfg["ensemble"]) and cfg["ensemble"] >= 1, "ensemble must be a positive integer")
    need(isinstance(cfg["m_values"], list) and all(_is_int(m) and m >= 0 for m in cfg["m_values"]),
         "m_values must be a list of non-negative integers")
    need(_is_num(cfg["eps_max"]) and cfg["eps_max"] > 0, "eps_max must be positive")
    need(cfg["nonlinear_step"] in NONLINEAR_STEPS, "nonlinear_step must be 'midpoint' or 'phase'")
    return cfg


def load_config(path, **overrides):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a flat JSON object")
    return resolve_config(raw, **overrides)


# -- building blocks ------------------------------------------------------------

def grid_from(cfg):
    return make_grid(cfg["b"], cfg["N_h"], cfg["N_y"], cfg["L_y"])


def params_from(cfg, grid=None, eps=None):
    return ModelParams(grid or grid_from(cfg), cfg["sigma"], parse(cfg["lambda"]), eps)


def gaussian_profile(y):
    return math.pi ** -0.25 * np.exp(-0.5 * y ** 2)


def constant_profile(y):
    return np.ones_like(y)


def profile_from(cfg):
    return gaussian_profile if cfg["alpha0"] == "gaussian" else constant_profile


def initial_field(cfg, grid):
    """Named initial data.

    standard      2^{-1/2} (chi_0 + chi_1)(x) pi^{-1/4} e^{-y^2/2}
    polarized(n)  alpha_0(y) chi_n(x), alpha_0 per the ``alpha0`` key
    eigenmode(n)  chi_n(x) times the unit-norm constant in y (no y dependence)
    random(seed)  seeded smooth random field of unit norm
    """
    m = _INITIAL.match(cfg["initial"])
    name = m.group(1)
    if name == "standard":
        c = (from_profile(grid, gaussian_profile, 0).coeffs
             + from_profile(grid, gaussian_profile, 1).coeffs) / math.sqrt(2.0)
        return SpectralField(grid, c)
    if m.group(2) is not None:
        return from_profile(grid, profile_from(cfg), _mode(int(m.group(2)), grid))
    if m.group(3) is not None:
        return basis_field(grid, _mode(int(m.group(3)), grid), 0)
    return random_field(grid, np.random.default_rng(int(m.group(4))))


def _mode(n, grid):
    if n >= grid.N_h:
        raise ConfigError(f"mode {n} is outside the {grid.N_h}-mode basis")
    return n


def sample_plan(T, dt_out_target, dt_target):
    """Sample spacing dividing T and an inner step dividing the spacing.

    Returns (dt, steps_per_sample, n_samples).
    """
    n_out = max(1, math.ceil(T / dt_out_target - 1e-9))
    dt_out = T / n_out
    per = max(1, math.ceil(dt_out / dt_target - 1e-9))
    return dt_out / per, per, n_out


def full_dt_target(cfg, eps):
    return min(cfg["dt"], eps ** 2 * (2 * math.pi / cfg["b"]) / 64)


def fit_loglog(xs, ys):
    """OLS fit of log(y) = slope log(x) + intercept; returns slope, intercept, rms residual."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2)))


def _max_workers():
    try:
        return max(0, int(os.environ.get("IWSK_THREADS", "0")))
    except ValueError:
        return 0


def _map(fn, items):
    """Ordered map; process-parallel when IWSK_THREADS > 1."""
    workers = _max_workers()
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _summary(cfg, **payload):
    payload["config"] = cfg
    payload["backend"] = _kernels.BACKEND
    return payload


def _outdir(cfg):
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- experiments ----------------------------------------------------------------

def run_full(cfg, eps, dt_out_target=None, grid=None):
    grid = grid or grid_from(cfg)
    params = params_from(cfg, grid, eps)
    psi0 = initial_field(cfg, grid)
    if dt_out_target is None:
        dt_out_target = cfg["dt"] * cfg["out_every"]
    dt, per, _ = sample_plan(cfg["T"], dt_out_target, full_dt_target(cfg, eps))
    table = build_displacement(grid, eps)
    traj = solve_full(params, psi0, cfg["T"], dt, per, table=table, nonlinear=cfg["nonlinear_step"])
    return traj, {"dt": dt, "out_every": per, "shift_flagged": table.flagged,
                  "max_shift": float(np.abs(table.shifts).max())}


def run_effective(cfg, grid=None):
    grid = grid or grid_from(cfg)
    params = params_from(cfg, grid)
    psi0 = initial_field(cfg, grid)
    dt, per, _ = sample_plan(cfg["T"], cfg["dt"] * cfg["out_every"], cfg["dt"])
    rule = ThetaRule(cfg["n_theta"], cfg["b"]) if cfg["n_theta"] else None
    return solve_effective(params, psi0, cfg["T"], dt, rule, per), {"dt": dt, "out_every": per}


def _write_traj(cfg, out, stem, traj):
    write_trajectory_csv(out / f"{stem}.csv", traj)
    if cfg["snapshots"]:
        for i in range(len(traj)):
            write_snapshot(out / f"{stem}_snapshots" / f"snap_{i:05d}.iwsk", traj[i])


def cmd_simulate(cfg):
    out = _outdir(cfg)
    eps = cfg["epsilon"]
    traj, info = run_full(cfg, eps)
    _write_traj(cfg, out, "trajectory", traj)
    summary = _summary(cfg, epsilon=eps, final_time=float(traj.times[-1]), samples=len(traj),
                       mass_drift=traj.mass_drift(), **info)
    write_json(out / "simulate.json", summary)
    return summary


def cmd_effective(cfg):
    out = _outdir(cfg)
    traj, info = run_effective(cfg)
    _write_traj(cfg, out, "effective", traj)
    summary = _summary(cfg, final_time=float(traj.times[-1]), samples=len(traj),
                       mass_drift=traj.mass_drift(), **info)
    write_json(out / "effective.json", summary)
    return summary


def _converge_one(args):
    cfg, eps = args
    traj, info = run_full(cfg, eps)
    return traj.times, traj.coeffs, info, traj.mass_drift()


def cmd_converge(cfg):
    eps_list = [float(e) for e in cfg["epsilons"]]
    if len(eps_list) < 3:
        raise ConfigError("converge needs at least 3 epsilon values")
    out = _outdir(cfg)
    grid = grid_from(cfg)
    eff, _ = run_effective(cfg, grid)
    results = _map(_converge_one, [(cfg, e) for e in eps_list])
    errors, drifts, infos = [], [], []
    from .solvers import Trajectory
    for eps, (times, coeffs, info, drift) in zip(eps_list, results):
        full = Trajectory(grid, times, coeffs)
        errors.append(compare_to_effective(full, eff, eps))
        drifts.append(drift)
        infos.append(info)
    floor = max(1e-10, max(drifts), eff.mass_drift())
    below = [e < 10 * floor for e in errors]
    slope, intercept, resid = fit_loglog(eps_list, errors) if all(e > 0 for e in errors) else (
        float("nan"), float("nan"), float("nan"))
    order = np.argsort(eps_list)[::-1]
    decreasing = bool(all(errors[order[i + 1]] < errors[order[i]] for i in range(len(order) - 1)))
    summary = _summary(cfg, epsilons=eps_list, errors=errors, slope=slope, intercept=intercept,
                       fit_residual=resid, strictly_decreasing=decreasing, noise_floor=floor,
                       below_noise_floor=any(below), mass_drifts=drifts, runs=infos)
    if any(below):
        summary["flag"] = "below noise floor"
    write_json(out / "converge.json", summary)
    return summary


def identity_trajectory(cfg, eps, samples_per_period=None):
    spp = samples_per_period or cfg["samples_per_period"]
    # at least spp samples per fast period and never fewer than 8 over the run
    dt_out = min(eps ** 2 * (2 * math.pi / cfg["b"]) / spp, cfg["T"] / 8)
    traj, info = run_full(cfg, eps, dt_out_target=dt_out)
    return filter_trajectory(traj, eps), info


def _identity_one(args):
    cfg, eps = args
    phi, info = identity_trajectory(cfg, eps)
    info["final_time_residual"] = identity_residual(phi, eps, cfg["b"], mode="final")
    return identity_residual(phi, eps, cfg["b"], mode="sup"), info


def cmd_identity(cfg):
    eps_list = [float(e) for e in cfg["epsilons"]]
    if len(eps_list) < 2:
        raise ConfigError("identity needs at least 2 epsilon values")
    out = _outdir(cfg)
    results = _map(_identity_one, [(cfg, e) for e in eps_list])
    residuals = [r for r, _ in results]
    degenerate = all(r <= 1e-10 for r in residuals)
    if degenerate:
        slope = intercept = resid = float("nan")
    else:
        slope, intercept, resid = fit_loglog(eps_list, residuals)
    summary = _summary(cfg, epsilons=eps_list, residuals=residuals, slope=slope,
                       intercept=intercept, fit_residual=resid, degenerate=degenerate,
                       runs=[i for _, i in results])
    write_json(out / "identity.json", summary)
    return summary


def polarized_check(cfg):
    """Effective trajectory from alpha_0 chi_n against the closed form at every sample."""
    grid = grid_from(cfg)
    n = cfg["n"]
    pcfg = dict(cfg, initial=f"polarized({n})")
    traj, info = run_effective(pcfg, grid)
    params = params_from(cfg, grid)
    prof = profile_from(cfg)
    devs, leaks = [], []
    for i, t in enumerate(traj.times):
        exact = polarized_exact(prof, n, float(t), params)
        c = traj.coeffs[i]
        devs.append(float(np.linalg.norm(c - exact.coeffs)))
        rest = np.delete(c, n, axis=0)
        leaks.append(float(np.linalg.norm(rest) / max(np.linalg.norm(c), 1e-300)))
    return traj, {"max_deviation": max(devs), "max_leakage": max(leaks),
                  "deviations": devs, "mass_drift": traj.mass_drift(), **info}


def cmd_polarized(cfg):
    out = _outdir(cfg)
    traj, res = polarized_check(cfg)
    devs = res.pop("deviations")
    const = float(np.max(np.abs(traj.coeffs - traj.coeffs[0])))
    summary = _summary(cfg, n=cfg["n"], constant_in_time=const <= 1e-14, **res)
    write_json(out / "polarized.json", summary)
    write_trajectory_csv(out / "polarized.csv", traj)
    (out / "polarized_deviation.csv").write_text(
        "t,deviation\n" + "".join(f"{t!r},{d!r}\n" for t, d in zip(traj.times.tolist(), devs)))
    return summary


def sandwich_ratios(fields, m, eps):
    """Ratios ||u||_{Sigma_eps^m}^2 / ||u||_{Sigma^m}^2 for each field."""
    return np.array([sigma_eps_norm(u, m, eps) ** 2 / sigma_norm(u, m) ** 2 for u in fields])


def sandwich_holds(fields, m, eps):
    r = sandwich_ratios(fields, m, eps)
    return bool(np.all((r >= 0.5) & (r <= 2.0)))


def largest_eps(fields, m, eps_max=1.0, iters=50):
    """Bisection for the largest eps <= eps_max at which the two-sided bound holds.

    Returns 0.0 when it fails even at eps = eps_max * 2^-iters.
    """
    if sandwich_holds(fields, m, eps_max):
        return float(eps_max)
    lo, hi = 0.0, float(eps_max)
    if not sandwich_holds(fields, m, hi * 2.0 ** -iters):
        return 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if sandwich_holds(fields, m, mid):
            lo = mid
        else:
            hi = mid
    return lo


def ensemble(grid, size, seed, xi_free=False):
    rng = np.random.default_rng(seed)
    return [random_field(grid, rng, xi_free=xi_free) for _ in range(size)]


def multiplier_constant(fields, m):
    return float(max((sigma_norm(apply_x(u), m) + sigma_norm(apply_dy(u), m)) / sigma_norm(u, m + 1)
                     for u in fields))


def cmd_normequiv(cfg):
    out = _outdir(cfg)
    grid = grid_from(cfg)
    fields = ensemble(grid, cfg["ensemble"], cfg["seed"])
    rows = {}
    for m in cfg["m_values"]:
        eps_m = largest_eps(fields, m, cfg["eps_max"])
        ratios = sandwich_ratios(fields, m, eps_m) if eps_m > 0 else np.array([np.nan])
        rows[str(m)] = {"eps_m": eps_m, "ratio_min": float(ratios.min()),
                        "ratio_max": float(ratios.max()),
                        "multiplier_constant": multiplier_constant(fields, m)}
    summary = _summary(cfg, results=rows, ensemble_size=len(fields))
    write_json(out / "normequiv.json", summary)
    return summary


COMMANDS = {
    "simulate": cmd_simulate,
    "effective": cmd_effective,
    "converge": cmd_converge,
    "identity": cmd_identity,
    "polarized": cmd_polarized,
    "normequiv": cmd_normequiv,
}
