"""Command-line drivers.

    llkit <command> [--config PATH] [--out DIR] [--seed N] [--threads N]

Commands: profile, angle-map, evolve, regime, rough, soliton-report.
Each run writes CSV/JSON/SVG outputs and a manifest.json listing them.
Exit codes: 0 completed or guard-aborted, 2 configuration error,
3 numerical failure or resource-cap breach.
"""

import argparse
import json
import os
import sys
import time

import jsonschema
import numpy as np

from .io import Manifest, svg_plot, svg_sphere_curves, write_csv, write_json

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COMMANDS = ("profile", "angle-map", "evolve", "regime", "rough", "soliton-report")

# figure ids named in manifests
FIGURES = {
    ("profile", "expander"): "expander-profiles",
    ("profile", "shrinker"): "shrinker-profile-circles",
    ("angle-map", None): "limit-angle-map",
}


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    pass


# ------------------------------------------------------------------ schemas

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_ALPHA = {"type": "number", "minimum": 0, "maximum": 1}
_INT1 = {"type": "integer", "minimum": 1}

_COMMON = {
    "command": {"type": "string"},
    "label": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "caps": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"max_steps": _INT1, "wall_time": _POS},
    },
}


def _schema(props, required):
    return {"type": "object", "additionalProperties": False,
            "properties": {**_COMMON, **props}, "required": list(required)}


SCHEMAS = {
    "profile": _schema({
        "kind": {"enum": ["expander", "shrinker"]},
        "c": {"type": "number", "minimum": 0},
        "alpha": {"oneOf": [_ALPHA, {"type": "array", "items": _ALPHA, "minItems": 1}]},
        "x_max": _POS,
        "tol": {"type": "number", "exclusiveMinimum": 1e-14, "exclusiveMaximum": 1e-4},
        "h": _POS,
        "stride": _INT1,
    }, ["kind", "c", "alpha"]),
    "angle-map": _schema({
        "alpha": _ALPHA,
        "c_max": _POS,
        "n": {"type": "integer", "minimum": 2},
        "tol": {"type": "number", "exclusiveMinimum": 1e-14, "exclusiveMaximum": 1e-4},
    }, ["alpha"]),
    "evolve": _schema({
        "formulation": {"enum": ["ll", "llg", "hydro", "dnls"]},
        "data": {"enum": ["soliton", "solitons", "self-similar"]},
        "c": _NUM,
        "alpha": _ALPHA,
        "lam1": {"type": "number", "minimum": 0},
        "lam3": {"type": "number", "minimum": 0},
        "perturb": {"type": "number", "minimum": 0},
        "solitons": {"type": "array", "minItems": 1, "items": {
            "type": "object", "additionalProperties": False, "required": ["c", "a"],
            "properties": {"c": _NUM, "a": _NUM, "s": {"enum": [1, -1]}}}},
        "x_half": _POS,
        "n": {"type": "integer", "minimum": 16},
        "h": _POS,
        "t0": _POS,
        "T": {"type": "number", "minimum": 0},
        "dt": _POS,
        "cfl": _POS,
        "n_snapshots": {"type": "integer", "minimum": 2},
        "stride": _INT1,
        "energy_orders": {"type": "array", "items": {"enum": [2, 3, 4]}},
    }, ["formulation", "data", "T"]),
    "regime": _schema({
        "study": {"enum": ["sg-sweep", "sg-time", "wave", "cls-sweep"]},
        "eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "minItems": 1},
        "sigma": {"type": "number", "minimum": 0},
        "sigma_list": {"type": "array", "items": _POS, "minItems": 2},
        "t_star": {"type": "number", "minimum": 0},
        "t_list": {"type": "array", "items": _POS, "minItems": 2},
        "family": {"enum": ["gaussian", "gaussian-u", "psi-gaussian"]},
        "amplitude": _POS,
        "k": {"type": "integer", "minimum": 0},
        "m": {"type": "integer", "minimum": 0},
        "eps_small": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "norm": {"enum": ["L2", "energy", "Hk-3"]},
        "n": {"type": "integer", "minimum": 16},
        "length": _POS,
    }, ["study"]),
    "rough": _schema({
        "experiment": {"enum": ["jump", "multiplicity", "norms", "picard", "calibrate"]},
        "c": {"type": "number", "minimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "theta": {"type": "number", "exclusiveMinimum": 0, "maximum": 3.141592653589794},
        "k_wanted": _INT1,
        "c_max": _POS,
        "n_scan": {"type": "integer", "minimum": 2},
        "amplitudes": {"type": "array", "items": _POS, "minItems": 1},
        "T": _POS,
        "h": _POS,
        "x_half": _POS,
        "tol": _POS,
    }, ["experiment"]),
    "soliton-report": _schema({
        "c": {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1}]},
        "x_half": _POS,
        "h": _POS,
    }, ["c"]),
}


def load_config(command, path):
    if path is None:
        cfg = {}
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    validate_config(command, cfg)
    return cfg


def validate_config(command, cfg):
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}")
    return cfg


def _wall_check(cfg, t_start):
    cap = cfg.get("caps", {}).get("wall_time")
    if cap is not None and time.perf_counter() - t_start > cap:
        raise NumericalFailure(f"wall-time cap of {cap:g} s exceeded")


def _max_steps(cfg, default=5_000_000):
    return cfg.get("caps", {}).get("max_steps", default)


# ------------------------------------------------------------------ profile

def cmd_profile(cfg, out, seed=None):
    from .frenet_profiles import (EXPANDER, LimitExtractionError, ProfileIntegrationError,
                                  ProfileParams, integrate_profile, limit_vectors, limit_x_max,
                                  shrinker_limit_circles)

    kind = cfg["kind"]
    alphas = cfg["alpha"] if isinstance(cfg["alpha"], list) else [cfg["alpha"]]
    c = cfg["c"]
    x_max = cfg.get("x_max", 10.0)
    tol = cfg.get("tol", 1e-11)
    # shrinker circles need the finer step to resolve the growing phase
    h = cfg.get("h", 0.01 if kind == "expander" else 2e-4)
    stride = cfg.get("stride", max(1, int(round(0.01 / h))))
    man = Manifest(out, "profile", cfg, FIGURES[("profile", kind)])
    man.data["tolerances"] = {"integrator": tol, "h": h}
    curves = []
    for i, a in enumerate(alphas):
        try:
            params = ProfileParams(c, a)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        try:
            prof = integrate_profile(kind, params, x_max, tol=tol, h=h,
                                     max_steps=_max_steps(cfg, 2_000_000))
        except ProfileIntegrationError as exc:
            raise NumericalFailure(str(exc)) from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        sel = slice(None, None, stride)
        k, tau = prof.k, prof.tau
        rows = [(xx, *mm, kk, tt) for xx, mm, kk, tt in
                zip(prof.x[sel], prof.m[sel], k[sel], tau[sel])]
        write_csv(man.path(f"profile_{i}.csv"), ["x", "m1", "m2", "m3", "curvature", "torsion"], rows)
        limits = {"c": c, "alpha": a, "kind": kind, "x_cap": prof.meta.get("x_cap")}
        try:
            if kind == EXPANDER:
                long = (integrate_profile(kind, params, limit_x_max(params), tol=tol, h=h,
                                         max_steps=_max_steps(cfg, 2_000_000)) if c > 0 else prof)
                limits["limits"] = limit_vectors(long).to_json()
            elif c > 0 and a > 0:
                limits["limits"] = shrinker_limit_circles(prof).to_json()
        except LimitExtractionError as exc:
            limits["limits_error"] = str(exc)
        write_json(man.path(f"limits_{i}.json"), limits)
        curves.append((f"alpha={a:g}", prof.m))
        man.run(f"alpha={a:g}", "completed", x_cap=prof.meta.get("x_cap"))
    svg_sphere_curves(man.path("profile.svg"), curves, title=f"{kind} profiles, c={c:g}")
    man.write()
    return EXIT_OK


# ------------------------------------------------------------------ angle map

def cmd_angle_map(cfg, out, seed=None):
    from .frenet_profiles import ProfileParams, limit_angle

    alpha = cfg["alpha"]
    c_max = cfg.get("c_max", 3.0)
    n = cfg.get("n", 60)
    tol = cfg.get("tol", 1e-11)
    man = Manifest(out, "angle-map", cfg, FIGURES[("angle-map", None)])
    man.data["tolerances"] = {"integrator": tol}
    cs = np.linspace(c_max / n, c_max, n)
    rows, th, closed = [], [], []
    n_fail = 0
    for c in cs:
        cf = float(np.arccos(np.cos(2 * c * np.sqrt(np.pi)))) if alpha == 1 else float("nan")
        try:
            t = limit_angle(ProfileParams(float(c), alpha), tol=tol)
            ok = True
        except Exception as exc:  # per-point failures are recorded, not fatal
            t, ok = float("nan"), False
            n_fail += 1
            man.run(f"c={c:.6g}", "failed", message=str(exc))
        rows.append((c, t, cf, ok))
        th.append(t)
        closed.append(cf)
    write_csv(man.path("angle_map.csv"), ["c", "theta", "theta_closed_form", "ok"], rows)
    series = [("computed", cs, th)]
    if alpha == 1:
        series.append(("closed form", cs, closed, "dash"))
    svg_plot(man.path("angle_map.svg"), series, title=f"limit angle, alpha={alpha:g}",
             xlabel="c", ylabel="theta")
    man.data["failed_points"] = n_fail
    if n_fail == 0:
        man.run("sweep", "completed")
    man.write()
    return EXIT_OK


# ------------------------------------------------------------------ evolve

def _trajectory_rows(times, fields, x, stride):
    for t, m in zip(times, fields):
        for xx, mm in zip(x[::stride], np.asarray(m)[::stride]):
            yield (t, xx, *mm)


def _diag_rows(diag, extra):
    arrs = diag.arrays()
    cols = ["t", "E"] + (["P"] if "P" in arrs else []) + sorted(k for k in arrs if k.startswith("E_")) \
        + ["sqrt_t_grad_sup"]
    cols = [c for c in cols if c in arrs and len(arrs[c]) == len(arrs["t"])]
    data = [arrs[c] for c in cols]
    for name, vals in extra.items():
        cols.append(name)
        data.append(np.asarray(vals))
    return cols, list(zip(*data))


def cmd_evolve(cfg, out, seed=None):
    from .evolution import (SolverConfig, SpinField, evolve_dnls, evolve_hydro, evolve_ll,
                            evolve_llg, hydro_to_spin, perturb_state)
    from .frenet_profiles import EXPANDER, ProfileParams, integrate_profile
    from .geometry import inverse_stereographic, project_stereographic
    from .numerics import Grid1D
    from .solitons import HydroState, SolitonSpec, hydro_soliton, soliton_profile, sum_solitons

    form, data, T = cfg["formulation"], cfg["data"], cfg["T"]
    seed = seed if seed is not None else cfg.get("seed", 0)
    stride = cfg.get("stride", 1)
    man = Manifest(out, "evolve", cfg)
    man.data["seed"] = seed
    base = dict(n_snapshots=cfg.get("n_snapshots", 11), max_steps=_max_steps(cfg))
    if "dt" in cfg:
        base["dt"] = cfg["dt"]
    if "cfl" in cfg:
        base["cfl"] = cfg["cfl"]
    extra = {}
    profile_ref = None

    if form == "hydro":
        if data not in ("soliton", "solitons"):
            raise ConfigError("hydro runs take soliton or solitons data")
        x_half = cfg.get("x_half", 60.0)
        n = cfg.get("n", 600)
        grid = Grid1D.periodic(-x_half, x_half, n)
        if data == "soliton":
            c = cfg.get("c")
            if c is None:
                raise ConfigError("soliton data needs c")
            try:
                v, w = hydro_soliton(c, grid.x)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            st = HydroState(grid.x, v, w)
        else:
            try:
                specs = [SolitonSpec(s["c"], s["a"], s=s.get("s", 1)) for s in cfg["solitons"]]
                st = sum_solitons(specs, grid.x).state()
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad soliton list: {exc}") from exc
        if cfg.get("perturb", 0) > 0:
            st = perturb_state(st, cfg["perturb"], seed=seed)
        sc = SolverConfig(spatial="spectral", **base)
        traj = evolve_hydro(st, cfg.get("lam3", 1.0), T, sc, grid)
        fields = []
        for s in traj.states:
            v, w = (s.v, s.w) if isinstance(s, HydroState) else s
            fields.append(hydro_to_spin(v, w, grid))
        E = np.array(traj.diagnostics.energy)
        P = np.array(traj.diagnostics.momentum)
        extra = {"E_drift": E - E[0], "P_drift": P - P[0]}
        man.data["grid"] = {"kind": "periodic", "x_min": grid.x_min, "x_max": grid.x_max, "n": grid.n}
    else:
        h = cfg.get("h", 0.05)
        x_half = cfg.get("x_half", 30.0 if data == "soliton" else 24.0)
        grid = Grid1D.pinned(-x_half, x_half, h)
        x = grid.x
        if data == "soliton":
            if form != "ll":
                raise ConfigError("soliton data is defined for the ll formulation")
            c = cfg.get("c")
            if c is None:
                raise ConfigError("soliton data needs c")
            try:
                m0 = soliton_profile(c, x)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        elif data == "self-similar":
            c, alpha = cfg.get("c"), cfg.get("alpha")
            if c is None or alpha is None or alpha == 0:
                raise ConfigError("self-similar data needs c and alpha > 0")
            t0 = cfg.get("t0", 1.0)
            reach = x_half / np.sqrt(t0) + 2.0
            profile_ref = integrate_profile(EXPANDER, ProfileParams(c, alpha), max(reach, 21.0),
                                            tol=1e-12, h=0.01)
            m0 = profile_ref.m_at(x / np.sqrt(t0))
            base["t0"] = t0
        else:
            raise ConfigError(f"{form} runs do not take {data!r} data")
        sc = SolverConfig(**base, energy_orders=tuple(cfg.get("energy_orders", ())))
        if form == "ll":
            traj = evolve_ll(SpinField(grid, m0), cfg.get("lam1", 0.0), cfg.get("lam3", 1.0 if data == "soliton" else 0.0), T, sc)
            fields = traj.states
        elif form == "llg":
            if data != "self-similar":
                raise ConfigError("llg runs take self-similar data")
            traj = evolve_llg(SpinField(grid, m0), cfg["alpha"], T, sc)
            fields = traj.states
        else:
            u0 = project_stereographic(m0)
            traj = evolve_dnls(u0, cfg["alpha"], T, sc, grid)
            fields = [inverse_stereographic(u) for u in traj.states]
        if profile_ref is not None:
            errs = [float(np.max(np.linalg.norm(np.asarray(f) - profile_ref.m_at(x / np.sqrt(t)), axis=1)))
                    for t, f in zip(traj.t, fields)]
            man.data["profile_error_final"] = errs[-1]
            extra_t = {"profile_sup_error": errs}
        else:
            extra_t = {}
        man.data["grid"] = {"kind": "pinned", "x_min": grid.x_min, "x_max": grid.x_max, "h": grid.h}
    man.data["scheme"] = {"dt": traj.dt, "steps": traj.steps, "kind": traj.kind}
    write_csv(man.path("trajectory.csv"), ["t", "x", "m1", "m2", "m3"],
              _trajectory_rows(traj.t, fields, grid.x, stride))
    cols, rows = _diag_rows(traj.diagnostics, extra)
    if form != "hydro" and extra_t and len(traj.diagnostics.t) == len(traj.t):
        cols.append("profile_sup_error")
        rows = [r + (e,) for r, e in zip(rows, extra_t["profile_sup_error"])]
    write_csv(man.path("diagnostics.csv"), cols, rows)
    man.run(traj.kind, traj.status, message=traj.message)
    man.write()
    return EXIT_OK


# ------------------------------------------------------------------ regime

def cmd_regime(cfg, out, seed=None):
    from . import regimes as rg

    study = cfg["study"]
    man = Manifest(out, "regime", cfg)
    n, length = cfg.get("n", 256), cfg.get("length", 40.0)
    eps = cfg.get("eps", [0.2, 0.1, 0.05, 0.025])
    rcfg = rg.RegimeSolverConfig(n_snapshots=2, max_steps=_max_steps(cfg, 2_000_000))
    try:
        if study == "sg-sweep":
            rep = rg.sg_convergence_study(cfg.get("family", "gaussian"), eps, cfg.get("sigma", 1.0),
                                          cfg.get("t_star", 1.0), cfg.get("k", 2), cfg.get("norm", "L2"),
                                          rg.regime_grid(length, n), rcfg,
                                          amplitude=cfg.get("amplitude", 1.0))
            size_name, size = "K", rep.K
        elif study == "cls-sweep":
            rep = rg.cls_convergence_study(cfg.get("family", "psi-gaussian"), eps, cfg.get("t_star", 0.5),
                                           cfg.get("k", 3), rg.regime_grid(length, n), rcfg,
                                           amplitude=cfg.get("amplitude", 1.0))
            size_name, size = "S", rep.S
        elif study == "wave":
            rep = rg.wave_regime_study(eps, cfg.get("sigma_list", [1e-2, 1e-3, 1e-4]), cfg.get("t_star", 1.0),
                                       cfg.get("m", 1), cfg.get("eps_small", 1e-3),
                                       cfg.get("amplitude", 1.0), n, length, rcfg)
            size_name, size = "K", rep.K
        else:
            if len(eps) != 1:
                raise ConfigError("sg-time takes a single eps")
            t, errs, A, C = rg.sg_time_sweep(eps[0], cfg.get("t_list", [0.25, 0.5, 1.0, 2.0]),
                                             cfg.get("family", "gaussian"), cfg.get("sigma", 1.0),
                                             cfg.get("norm", "L2"), rg.regime_grid(length, n), rcfg,
                                             amplitude=cfg.get("amplitude", 1.0))
            write_csv(man.path("report.csv"), ["t", "error", "envelope"],
                      [(a, b, A * np.exp(C * a)) for a, b in zip(t, errs)])
            write_json(man.path("report.json"), {"t": t, "errors": errs, "A": A, "C": C, "eps": eps[0]})
            svg_plot(man.path("report.svg"), [("error", t, errs), ("A exp(C t)", t, A * np.exp(C * t), "dash")],
                     title="error growth", xlabel="t", ylabel="error", logy=True)
            man.run(study, "completed")
            man.write()
            return EXIT_OK
    except ValueError as exc:
        if "max_steps" in str(exc):
            raise NumericalFailure(f"resource cap: {exc}") from exc
        raise ConfigError(str(exc)) from exc
    err = rep.errors[rep.norm]
    param = rep.eps
    pname = "sigma" if study == "wave" else "eps"
    rows = [(p, e, s, rep.slope) for p, e, s in zip(param, err, size)]
    write_csv(man.path("report.csv"), [pname, "error", size_name, "slope"], rows)
    body = {"study": study, pname: param, "errors": rep.errors, "slope": rep.slope,
            "intercept": rep.intercept, "used": rep.used, size_name: size, "t_star": rep.t_star,
            "norm": rep.norm, "notes": rep.notes, "audit": rep.audit, "extra": rep.extra}
    write_json(man.path("report.json"), body)
    series = [("error", param, err)]
    svg_plot(man.path("report.svg"), series, title=f"{study}: slope {rep.slope:.3f}",
             xlabel=pname, ylabel="error", logx=True, logy=True)
    man.data["calibrated_defaults"] = {"sg_C": rg.DEFAULT_SG_C, "cls_A": rg.DEFAULT_CLS_A}
    for note in rep.notes:
        if "excluded" in note:
            man.run(note.split(" ")[0], "guard-aborted", message=note)
    man.run(study, "completed")
    man.write()
    return EXIT_OK


# ------------------------------------------------------------------ rough

def cmd_rough(cfg, out, seed=None):
    from . import rough_data as rd
    from .frenet_profiles import EXPANDER, ProfileParams, integrate_profile, limit_vectors, limit_x_max
    from .numerics import Grid1D

    exp = cfg["experiment"]
    man = Manifest(out, "rough", cfg)
    man.data["calibrated_defaults"] = {"audit_C": rd.DEFAULT_AUDIT_C}
    if exp in ("jump", "norms"):
        if "c" not in cfg or "alpha" not in cfg:
            raise ConfigError(f"{exp} needs c and alpha")
    c, alpha = cfg.get("c", 0.1), cfg.get("alpha", 0.5)
    if exp == "jump":
        params = ProfileParams(c, alpha)
        lim = limit_vectors(integrate_profile(EXPANDER, params, limit_x_max(params), tol=1e-11))
        jump = rd.JumpData(lim.A_plus, lim.A_minus)
        from .evolution import SolverConfig

        res = rd.jump_experiment(jump, alpha, tol=cfg.get("tol", 1e-3), h=cfg.get("h", 0.02),
                                 x_half=cfg.get("x_half", 16.0),
                                 config=SolverConfig(n_snapshots=2, cfl=0.25, max_steps=_max_steps(cfg)))
        res["c_true"] = c
        res["R_error"] = float(np.max(np.abs(res["R_fit"] - np.eye(3))))
        write_json(man.path("jump.json"), res)
        write_csv(man.path("jump.csv"), ["c_true", "c_fit", "residual", "R_error", "angle"],
                  [(c, res["c_fit"], res["residual"], res["R_error"], res["angle"])])
        man.run("jump", res["status"])
    elif exp == "multiplicity":
        if "theta" not in cfg:
            raise ConfigError("multiplicity needs theta")
        roots, note = rd.multiplicity_scan(cfg["theta"], alpha if "alpha" in cfg else 1.0,
                                           cfg.get("k_wanted", 3), cfg.get("c_max", 4.0),
                                           cfg.get("n_scan", 80))
        write_csv(man.path("roots.csv"), ["j", "c"], [(j, r) for j, r in enumerate(roots)])
        write_json(man.path("roots.json"), {"roots": roots, "note": note, "theta": cfg["theta"],
                                            "alpha": cfg.get("alpha", 1.0)})
        man.run("multiplicity", "completed", note=note)
    elif exp == "norms":
        params = ProfileParams(c, alpha)
        prof = integrate_profile(EXPANDER, params, 30.0, tol=1e-11, h=0.01)
        x = np.linspace(-20, 20, 801)
        grad = rd.self_similar_gradient(prof)
        sup_grad = max(float(np.sqrt(t) * np.max(np.linalg.norm(grad(x, t), axis=1)))
                       for t in np.geomspace(1e-4, 100, 41))
        bmo = rd.bmo_seminorm(prof.m_at(x), x)
        carl = rd.self_similar_carleson(c, alpha)
        bounds = {"bmo": 2 * c * np.sqrt(2 * np.pi) / np.sqrt(alpha), "X": 4 * c / alpha ** 0.25}
        body = {"sup_sqrt_t_grad": sup_grad, "bmo": bmo, "carleson": carl, "X": sup_grad + carl,
                "bounds": bounds, "c": c, "alpha": alpha}
        write_json(man.path("norms.json"), body)
        write_csv(man.path("norms.csv"), ["quantity", "value", "bound"],
                  [("sup_sqrt_t_grad", sup_grad, c), ("bmo", bmo, bounds["bmo"]),
                   ("X", sup_grad + carl, bounds["X"])])
        man.run("norms", "completed")
    elif exp == "picard":
        h, x_half, T = cfg.get("h", 0.05), cfg.get("x_half", 20.0), cfg.get("T", 1.0)
        grid = Grid1D.pinned(-x_half, x_half, h)
        rows = []
        for a in cfg.get("amplitudes", [0.5, 1.0, 2.0, 4.0, 8.0]):
            u0 = a * np.exp(-grid.x ** 2)
            bmo = rd.bmo_seminorm(u0, grid.x)
            passes = rd.audit_smallness(bmo)[0]
            r = rd.duhamel_solve(u0, alpha, T, grid, tol=1e-10, n_t=60, max_iter=40)
            rows.append((a, bmo, passes, r.converged, r.rate, r.iterations))
        write_csv(man.path("picard.csv"), ["amplitude", "bmo", "audit_passes", "converged", "rate",
                                           "iterations"], rows)
        man.run("picard", "completed")
    else:
        C, eps_crit, a_crit = rd.calibrate_audit_constant(alpha=alpha, x_half=cfg.get("x_half", 20.0),
                                                          h=cfg.get("h", 0.05), T=cfg.get("T", 1.0))
        write_json(man.path("calibration.json"), {"C": C, "eps_crit": eps_crit, "a_crit": a_crit,
                                                  "alpha": alpha})
        write_csv(man.path("calibration.csv"), ["C", "eps_crit", "a_crit"], [(C, eps_crit, a_crit)])
        man.run("calibrate", "completed")
    man.write()
    return EXIT_OK


# ------------------------------------------------------------------ soliton report

def cmd_soliton_report(cfg, out, seed=None):
    from .solitons import soliton_report

    cs = cfg["c"] if isinstance(cfg["c"], list) else [cfg["c"]]
    man = Manifest(out, "soliton-report", cfg)
    rows, reports = [], {}
    for c in cs:
        if not 0 < abs(c) < 1:
            raise ConfigError("soliton speeds must satisfy 0 < |c| < 1")
        r = soliton_report(c, cfg.get("x_half", 40.0), cfg.get("h", 1e-3))
        reports[f"{c:.6g}"] = r
        rows.append((c, r["E"], r["E_closed"], r["P"], r["P_closed"], r["dPdc"], r["dPdc_closed"],
                     r["eig_kernel"], r["eig_negative"], r["n_negative"], r["Lambda_c"]))
        man.run(f"c={c:g}", "completed")
    write_csv(man.path("soliton_report.csv"),
              ["c", "E", "E_closed", "P", "P_closed", "dPdc", "dPdc_closed", "eig_kernel",
               "eig_negative", "n_negative", "Lambda_c"], rows)
    write_json(man.path("soliton_report.json"), reports)
    man.write()
    return EXIT_OK


HANDLERS = {
    "profile": cmd_profile,
    "angle-map": cmd_angle_map,
    "evolve": cmd_evolve,
    "regime": cmd_regime,
    "rough": cmd_rough,
    "soliton-report": cmd_soliton_report,
}


def _limit_threads(n):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return None
    return threadpool_limits(limits=n)


def build_parser():
    p = argparse.ArgumentParser(prog="llkit", description="Landau-Lifshitz numerical experiments")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="JSON experiment configuration")
    p.add_argument("--out", metavar="DIR", default=None, help="output directory (default: out/<command>)")
    p.add_argument("--seed", type=int, default=None, help="random seed for perturbation experiments")
    p.add_argument("--threads", type=int, default=1, help="BLAS/FFT thread cap (runs are serial)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    out = args.out or os.path.join("out", args.command)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG
    _limit_threads(args.threads)
    t_start = time.perf_counter()
    try:
        if args.config is None:
            raise ConfigError(f"{args.command} needs --config")
        cfg = load_config(args.command, args.config)
        code = HANDLERS[args.command](cfg, out, args.seed)
        _wall_check(cfg, t_start)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        if "max_steps" in str(exc):
            print(f"resource cap: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        # parameter validation inside the library
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
