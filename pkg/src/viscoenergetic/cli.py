"""Command-line driver: ``viscoenergetic {run,refine,jump,stability,sweep}``.

Every command reads one JSON config (unknown keys are rejected), fills in
all defaults, echoes the effective config into its JSON summary and writes
plot-ready CSV files. Exit codes: 0 ok, 1 config error, 2 invalid run.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .core import LoadProfile
from .models import (AllenCahnParams, DoubleWellParams, MarginalModelParams, allen_cahn_model,
                     convex_quadratic_model, double_well_model, marginal_model, predicted_jump)
from .optim import MinimizeConfig
from .scheme import (InvalidRunError, Partition, check_apriori_bounds, check_discrete_energy_identity,
                     check_discrete_stability, refinement_study, solve_incremental)
from .stability import TOL_STABLE, residuals
from .transitions import TransitionConfig, jump_cost, transition_residuals
from .variation import CurveConfig, curve_from_trajectory, energy_balance_report, extract_limit_curve

CONFIG_SCHEMA = "viscoenergetic.config/1"
SUMMARY_SCHEMA = "viscoenergetic.summary/1"

EXIT_OK, EXIT_CONFIG, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    """The configuration is malformed or inconsistent."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

_LOAD = {"intercept": None, "slope": 1.0}

MODEL_DEFAULTS = {
    "double_well": {"alpha_plus": 1.0, "alpha_minus": 1.0, "mu": 2.0, "u0": -1.5,
                    "box": [-3.0, 3.0], "horizon": None, "load": _LOAD},
    "convex_quadratic": {"a": 1.0, "alpha": 1.0, "mu": 1.0, "box": [-5.0, 5.0],
                         "horizon": 2.0, "load": {"intercept": 0.0, "slope": 1.0}},
    "marginal": {"alpha": 1.0, "mu": 1.0, "box": [-3.0, 3.0], "horizon": 2.0,
                 "load": {"intercept": 0.0, "slope": 1.0}},
    "marginal_reduced": {"alpha": 1.0, "mu": 1.0, "box": [-3.0, 3.0], "horizon": 2.0,
                         "load": {"intercept": 0.0, "slope": 1.0}},
    "allen_cahn": {"nodes": 32, "mu": 1.0, "alpha": 1.0, "load_rate": 3.0, "box": [-2.0, 2.0],
                   "horizon": 1.0},
}

DEFAULTS = {
    "schema": CONFIG_SCHEMA,
    "model": "convex_quadratic",
    "params": {},
    "u0": None,
    "T": None,
    "N": 1000,
    "meshes": [125, 250, 500, 1000, 2000],
    "seed": 20170417,
    "solver": {"grid_points": None, "refine_iters": 60, "multistart": None, "tol_x": 1e-10,
               "tol_f": 1e-12, "max_candidates": 8, "max_sweeps": 400},
    "checks": {"stability_samples": 1000, "tol_stable": TOL_STABLE},
    "jump": {"t": None, "u_minus": None, "u_plus": None, "oracle": True},
    "stability": {"times": [0.0], "lo": None, "hi": None, "points": 101, "states": None},
    "sweep": {"mu_list": [0.0, 0.25, 1.0 / 3.0, 0.5, 0.75, 1.0, 2.0], "meshes": [250, 500, 1000]},
}


def _merge(defaults: dict, given: dict, where: str) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(defaults[k], dict) and defaults[k] is not None and k != "params":
            out[k] = _merge(defaults[k], v, f"{where}.{k}" if where else k)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _number(v, name, positive=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name} must be a finite number")
    if positive and v <= 0:
        raise ConfigError(f"{name} must be positive")
    return float(v)


def _count(v, name, minimum=1):
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}")
    return v


def _vector(v, name, dim=None):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{name} must be a number or a nonempty list of numbers")
    out = [_number(x, f"{name}[{i}]") for i, x in enumerate(v)]
    if dim is not None and len(out) != dim:
        raise ConfigError(f"{name} must have {dim} entries")
    return out


def load_config(source, seed: int | None = None) -> dict:
    """Parse and validate a config (path, JSON text or dict) into the effective config."""
    if isinstance(source, dict):
        raw = copy.deepcopy(source)
    else:
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
    cfg = _merge(DEFAULTS, raw, "")
    if cfg["schema"] != CONFIG_SCHEMA:
        raise ConfigError(f"unsupported schema {cfg['schema']!r}; expected {CONFIG_SCHEMA!r}")
    name = cfg["model"]
    if name not in MODEL_DEFAULTS:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODEL_DEFAULTS)}")
    params = _merge(MODEL_DEFAULTS[name], cfg["params"], "params")
    if "load" in params:
        params["load"] = _merge(MODEL_DEFAULTS[name]["load"], params["load"], "params.load")
    cfg["params"] = params
    if seed is not None:
        cfg["seed"] = seed
    s = cfg["seed"]
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    cfg["N"] = _count(cfg["N"], "N")
    if not isinstance(cfg["meshes"], list) or not cfg["meshes"]:
        raise ConfigError("meshes must be a nonempty list of step counts")
    for i, n in enumerate(cfg["meshes"]):
        _count(n, f"meshes[{i}]")
    solver = cfg["solver"]
    if solver["multistart"] is None:
        # the Allen-Cahn step problem is certified convex: local descent suffices
        solver["multistart"] = 0 if name == "allen_cahn" else 8
    # build everything once so that every error surfaces as a config error
    try:
        model = build_model(cfg)
        minimize_config(cfg)
        if cfg["u0"] is None:
            cfg["u0"] = default_u0(cfg, model.dim)
        cfg["u0"] = _vector(cfg["u0"], "u0", model.dim)
        if not model.in_box(np.array(cfg["u0"])):
            raise ConfigError("u0 lies outside the search box")
        if cfg["T"] is None:
            cfg["T"] = float(model.horizon)
        cfg["T"] = _number(cfg["T"], "T", positive=True)
        if name == "double_well" and params["horizon"] is None:
            params["horizon"] = float(model.horizon)
        if name == "double_well" and params["load"]["intercept"] is None:
            params["load"]["intercept"] = float(_double_well_params(params).load.intercept)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _load(entry: dict) -> LoadProfile:
    return LoadProfile.linear(_number(entry["intercept"], "load.intercept"),
                              _number(entry["slope"], "load.slope"))


def _box(v):
    b = _vector(v, "box", 2)
    if b[0] >= b[1]:
        raise ConfigError("box must be [lo, hi] with lo < hi")
    return tuple(b)


def _double_well_params(p: dict, mu: float | None = None) -> DoubleWellParams:
    load = None if p["load"]["intercept"] is None else _load(p["load"])
    if load is None and _number(p["load"]["slope"], "load.slope") != 1.0:
        raise ConfigError("a custom load slope needs an explicit load intercept")
    return DoubleWellParams(alpha_plus=_number(p["alpha_plus"], "alpha_plus", True),
                            alpha_minus=_number(p["alpha_minus"], "alpha_minus", True),
                            mu=_number(p["mu"] if mu is None else mu, "mu"),
                            load=load, u0=_number(p["u0"], "params.u0"),
                            horizon=_number(p["horizon"], "horizon", True, allow_none=True),
                            box=_box(p["box"]))


def build_model(cfg: dict, mu: float | None = None):
    """The RIS model named in ``cfg`` (``mu`` overrides the configured viscosity)."""
    name, p = cfg["model"], cfg["params"]
    if name == "double_well":
        return double_well_model(_double_well_params(p, mu))
    if name == "convex_quadratic":
        return convex_quadratic_model(a=_number(p["a"], "a", True), load=_load(p["load"]),
                                      alpha=_number(p["alpha"], "alpha", True),
                                      mu=_number(p["mu"], "mu"), box=_box(p["box"]),
                                      horizon=_number(p["horizon"], "horizon", True))
    if name in ("marginal", "marginal_reduced"):
        mp = MarginalModelParams(alpha=_number(p["alpha"], "alpha", True), mu=_number(p["mu"], "mu"),
                                 load=_load(p["load"]), box=_box(p["box"]),
                                 horizon=_number(p["horizon"], "horizon", True))
        full, reduced = marginal_model(mp)
        return full if name == "marginal" else reduced
    ap = AllenCahnParams(nodes=_count(p["nodes"], "nodes"), mu=_number(p["mu"], "mu"),
                         alpha=_number(p["alpha"], "alpha", True),
                         load_rate=_number(p["load_rate"], "load_rate"), box=_box(p["box"]),
                         horizon=_number(p["horizon"], "horizon", True))
    return allen_cahn_model(ap)


def default_u0(cfg: dict, dim: int) -> list:
    if cfg["model"] == "double_well":
        return [float(cfg["params"]["u0"])]
    return [0.0] * dim


def minimize_config(cfg: dict) -> MinimizeConfig:
    s = cfg["solver"]
    gp = s["grid_points"]
    if gp is not None:
        gp = _count(gp, "solver.grid_points", 3)
    return MinimizeConfig(grid_points=gp, refine_iters=_count(s["refine_iters"], "solver.refine_iters"),
                          multistart=_count(s["multistart"], "solver.multistart", 0),
                          tol_x=_number(s["tol_x"], "solver.tol_x", True),
                          tol_f=_number(s["tol_f"], "solver.tol_f", True),
                          max_candidates=_count(s["max_candidates"], "solver.max_candidates"),
                          max_sweeps=_count(s["max_sweeps"], "solver.max_sweeps"),
                          seed=cfg["seed"])


def curve_config(cfg: dict) -> CurveConfig:
    tol = _number(cfg["checks"]["tol_stable"], "checks.tol_stable", True)
    return CurveConfig(tol_stable=tol, transitions=TransitionConfig(tol_stable=tol))


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def fmt(x) -> str:
    """Round-trip text for a float: 17 significant digits, '.' as separator."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def write_summary(path: Path, command: str, cfg: dict, body: dict) -> None:
    doc = {"schema": SUMMARY_SCHEMA, "command": command, "config": cfg}
    doc.update(body)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def trace_rows(traj):
    times, U = traj.times, traj.states
    V, Wt = traj.V_tau, traj.W_tau
    for n in range(U.shape[0]):
        rec = (0.0, 0.0, 0.0) if n == 0 else (traj.d_step[n - 1], traj.delta_step[n - 1],
                                               traj.residual_prev[n - 1])
        yield [n, times[n], *U[n], traj.energy[n], *rec, V[n], Wt[n]]


def trace_header(dim: int) -> list:
    return (["step", "t"] + [f"u[{i}]" for i in range(dim)]
            + ["E", "d_step", "delta_step", "residual_prev", "V_tau", "W_tau"])


def write_trace(path: Path, traj) -> None:
    write_csv(path, trace_header(traj.states.shape[1]), trace_rows(traj))


def _jump_dict(j) -> dict:
    return {"t": j.t, "u_minus": j.u_minus, "u_mid": j.u_mid, "u_plus": j.u_plus,
            "cost_minus": j.cost_minus, "cost_plus": j.cost_plus, "node": j.node,
            "cluster": list(j.cluster) if j.cluster else None}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_run(cfg: dict, out: Path, threads: int = 1) -> int:
    model, mconf = build_model(cfg), minimize_config(cfg)
    part = Partition.uniform(cfg["T"], cfg["N"])
    traj = solve_incremental(model, part, cfg["u0"], mconf)
    write_trace(out / "trace.csv", traj)
    body = {"valid": traj.valid, "steps": int(traj.states.shape[0] - 1),
            "identity_residual": check_discrete_energy_identity(model, traj)}
    if not traj.valid:
        body.update(invalid_step=traj.invalid_step, message=traj.message)
        write_summary(out / "summary.json", "run", cfg, body)
        print(f"invalid run: {traj.message}", file=sys.stderr)
        return EXIT_INVALID
    stab = check_discrete_stability(model, traj, cfg["checks"]["stability_samples"], seed=cfg["seed"])
    ap = check_apriori_bounds(model, traj)
    cc = curve_config(cfg)
    curve = curve_from_trajectory(model, traj, None, cc, mconf)
    bal = energy_balance_report(model, curve, cc)
    body.update(
        stability={"violations": len(stab.violations), "checked": stab.checked, "min_margin": stab.min_margin},
        apriori={"ok": ap.ok, "envelope_ok": ap.envelope_ok, "sum_ok": ap.sum_ok,
                 "dissipation_sum": ap.dissipation_sum, "C1": ap.C1, "C2": ap.C2,
                 "energy_nonincreasing": ap.energy_nonincreasing},
        balance_residual=bal.max_residual,
        jumps=[_jump_dict(j) for j in curve.jumps],
        warnings=curve.warnings,
    )
    write_summary(out / "summary.json", "run", cfg, body)
    return EXIT_OK


def _orders(h, e):
    out = []
    for i in range(len(e) - 1):
        if e[i] > 0 and e[i + 1] > 0 and h[i] != h[i + 1]:
            out.append(math.log(e[i] / e[i + 1]) / math.log(h[i] / h[i + 1]))
        else:
            out.append(None)
    return out


def closed_form_quadratic(cfg: dict, times) -> np.ndarray | None:
    """u(t) = max(u0, (l(t) - alpha)/a) for the convex model under an increasing load."""
    if cfg["model"] != "convex_quadratic":
        return None
    p = cfg["params"]
    a, alpha, load = p["a"], p["alpha"], p["load"]
    u0 = cfg["u0"][0]
    if load["slope"] < 0 or abs(a * u0 - load["intercept"]) > alpha:
        return None
    return np.maximum(u0, (load["intercept"] + load["slope"] * np.asarray(times) - alpha) / a)


def cmd_refine(cfg: dict, out: Path, threads: int = 1) -> int:
    meshes = sorted(cfg["meshes"])
    if len(meshes) < 2 or len(set(meshes)) != len(meshes):
        raise ConfigError("refine needs at least two distinct meshes")
    model, mconf = build_model(cfg), minimize_config(cfg)
    try:
        study = refinement_study(model, cfg["u0"], meshes, mconf, cfg["T"], threads, curve_config(cfg))
    except InvalidRunError as exc:
        write_summary(out / "summary.json", "refine", cfg,
                      {"valid": False, "invalid_step": exc.step, "run": exc.run_index, "message": str(exc)})
        print(f"invalid run: {exc}", file=sys.stderr)
        return EXIT_INVALID
    rows = []
    for e in study:
        write_trace(out / f"trace_N{e.steps}.csv", e.trajectory)
        rows.append({"N": e.steps, "mesh": e.mesh, "balance_residual": e.balance_residual,
                     "identity_residual": check_discrete_energy_identity(model, e.trajectory),
                     "jumps": [_jump_dict(j) for j in e.curve.jumps], "warnings": e.curve.warnings})
    h = [e.mesh for e in study]
    # successive differences at the coarse nodes: N_{k+1} is a multiple of N_k
    diffs = []
    for c, f in zip(study, study[1:]):
        ratio = f.steps // c.steps if f.steps % c.steps == 0 else None
        diffs.append(float(np.max(np.abs(c.trajectory.states - f.trajectory.states[::ratio])))
                     if ratio else None)
    body = {"valid": True, "meshes": rows,
            "balance_orders": _orders(h, [e.balance_residual for e in study]),
            "successive_differences": diffs,
            "successive_difference_orders": _orders(h[1:], diffs) if None not in diffs else None}
    exact = [closed_form_quadratic(cfg, e.trajectory.times) for e in study]
    if exact[0] is not None:
        errs = [float(np.max(np.abs(e.trajectory.states[:, 0] - x))) for e, x in zip(study, exact)]
        body.update(closed_form_errors=errs, closed_form_orders=_orders(h, errs))
    if len(study) >= 3:
        limit = extract_limit_curve(model, study, curve_config(cfg), mconf)
        body["limit_jumps"] = [_jump_dict(j) for j in limit.jumps]
    write_csv(out / "refinement.csv", ["N", "mesh", "balance_residual", "identity_residual", "jumps"],
              [[r["N"], r["mesh"], r["balance_residual"], r["identity_residual"], len(r["jumps"])]
               for r in rows])
    write_summary(out / "summary.json", "refine", cfg, body)
    return EXIT_OK


def cmd_jump(cfg: dict, out: Path, threads: int = 1) -> int:
    model, mconf = build_model(cfg), minimize_config(cfg)
    j = cfg["jump"]
    if j["t"] is None or j["u_minus"] is None or j["u_plus"] is None:
        raise ConfigError("jump needs jump.t, jump.u_minus and jump.u_plus")
    t = _number(j["t"], "jump.t")
    um = np.array(_vector(j["u_minus"], "jump.u_minus", model.dim))
    up = np.array(_vector(j["u_plus"], "jump.u_plus", model.dim))
    tcfg = TransitionConfig(tol_stable=curve_config(cfg).tol_stable)
    jc = jump_cost(model, t, um, up, mconf, tcfg, oracle=bool(j["oracle"]))
    w = jc.witness
    R = transition_residuals(model, w, mconf)
    K = max(w.K, 1)
    write_csv(out / "witness.csv", ["s"] + [f"theta[{i}]" for i in range(model.dim)] + ["R"],
              ([k / K, *w.states[k], R[k]] for k in range(w.states.shape[0])))
    drop = float(model.E(t, um)) - float(model.E(t, up))
    body = {"cost": jc.cost, "energy_drop": drop, "d": float(model.d(um, up)),
            "lower_bounds_ok": jc.lower_bounds_ok,
            "breakdown": {"var": jc.breakdown.var_part, "gap": jc.breakdown.gap_part,
                          "residual": jc.breakdown.residual_part},
            "candidates": {k: v for k, v in sorted(jc.candidates.items())},
            "witness_points": int(w.states.shape[0])}
    write_summary(out / "summary.json", "jump", cfg, body)
    return EXIT_OK


def cmd_stability(cfg: dict, out: Path, threads: int = 1) -> int:
    model, mconf = build_model(cfg), minimize_config(cfg)
    s = cfg["stability"]
    times = [_number(t, "stability.times[]") for t in (s["times"] if isinstance(s["times"], list) else [s["times"]])]
    if s["states"] is not None:
        if not isinstance(s["states"], list) or not s["states"]:
            raise ConfigError("stability.states must be a nonempty list of states")
        X = np.array([_vector(x, "stability.states[]", model.dim) for x in s["states"]])
    else:
        if model.dim != 1:
            raise ConfigError("a state grid needs a one-dimensional model; give stability.states instead")
        box = model.search_box[0]
        lo = box[0] if s["lo"] is None else _number(s["lo"], "stability.lo")
        hi = box[1] if s["hi"] is None else _number(s["hi"], "stability.hi")
        X = np.linspace(lo, hi, _count(s["points"], "stability.points", 2))[:, None]
    tol = curve_config(cfg).tol_stable
    rows, counts = [], []
    for t in times:
        R = residuals(model, t, X, mconf)
        counts.append(int(np.sum(R <= tol)))
        rows += [[t, *x, r, bool(r <= tol)] for x, r in zip(X, R)]
    write_csv(out / "stability.csv", ["t"] + [f"x[{i}]" if model.dim > 1 else "x" for i in range(model.dim)]
              + ["R", "stable"], rows)
    write_summary(out / "summary.json", "stability", cfg, {"times": times, "stable_counts": counts,
                                                          "points": int(X.shape[0])})
    return EXIT_OK


def _sweep_one(cfg, mu, meshes, mconf):
    params = _double_well_params(cfg["params"], mu)
    model = double_well_model(params)
    study = refinement_study(model, cfg["u0"], meshes, mconf, None, 1, curve_config(cfg))
    curve = extract_limit_curve(model, study, curve_config(cfg), mconf) if len(study) >= 3 else study[-1].curve
    oracle = predicted_jump(params)
    j = curve.jumps[0] if curve.jumps else None
    return [mu, params.regime, oracle.u_minus, oracle.u_plus_final, oracle.jump_time,
            j.u_minus[0] if j else math.nan, j.u_plus[0] if j else math.nan, j.t if j else math.nan,
            len(curve.jumps)]


def cmd_sweep(cfg: dict, out: Path, threads: int = 1) -> int:
    if cfg["model"] != "double_well":
        raise ConfigError("sweep runs the double-well model")
    mus = [_number(m, "sweep.mu_list[]") for m in cfg["sweep"]["mu_list"]]
    if not mus or any(m < 0 for m in mus):
        raise ConfigError("sweep.mu_list must list nonnegative viscosities")
    meshes = sorted(_count(n, "sweep.meshes[]") for n in cfg["sweep"]["meshes"])
    mconf = minimize_config(cfg)
    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(lambda m: _sweep_one(cfg, m, meshes, mconf), mus))
        else:
            rows = [_sweep_one(cfg, m, meshes, mconf) for m in mus]
    except InvalidRunError as exc:
        write_summary(out / "summary.json", "sweep", cfg, {"valid": False, "message": str(exc)})
        print(f"invalid run: {exc}", file=sys.stderr)
        return EXIT_INVALID
    header = ["mu", "regime", "onset_predicted", "landing_predicted", "t_predicted",
              "u_minus", "u_plus", "t_jump", "jumps"]
    write_csv(out / "sweep.csv", header, rows)
    write_summary(out / "summary.json", "sweep", cfg, {"valid": True, "rows": [dict(zip(header, r)) for r in rows]})
    return EXIT_OK


COMMANDS = {"run": cmd_run, "refine": cmd_refine, "jump": cmd_jump,
            "stability": cmd_stability, "sweep": cmd_sweep}


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="viscoenergetic", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="JSON config (defaults apply when omitted)")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--seed", type=_u64, help="override the config seed")
    ap.add_argument("--threads", type=_positive, default=1, help="worker threads for meshes and sweeps")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config if args.config is not None else {}, seed=args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
