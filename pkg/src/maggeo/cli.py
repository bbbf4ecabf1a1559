"""Scenario-driven command line entry point.

Subcommands: geometry-check, flow, descend, minimax, index, cylinder,
mane, experiment.  Each reads one JSON config, writes its artifacts into
the output directory, and is deterministic given config and seed.

Exit codes: 0 success, 2 config error, 3 numerical failure (details in
failure.json).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import action as act
from . import dynamics as dyn
from . import experiment as exp
from . import geometry as geo
from . import index as idx
from . import jsonio
from . import localmin
from . import mane
from . import minimax
from . import scenarios
from .config import RunConfig, load_config, run_config_from_dict, ConfigError
from .continuation import continue_cylinder, write_cylinder_csv
from .errors import MagGeoError
from .loops import load_loop, save_loop
from .refine import orbit_to_loop


def surface_from_config(raw: dict, config_dir: str) -> geo.SurfaceModel:
    spec = raw.get("surface")
    if spec is None:
        raise ConfigError("config needs a 'surface' section")
    if "name" in spec:
        try:
            return scenarios.by_name(spec["name"])
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    if "file" in spec:
        path = spec["file"]
        if not os.path.isabs(path):
            path = os.path.join(config_dir, path)
        return geo.load_surface(path)
    return geo.surface_from_dict(spec)


def _need(raw: dict, key: str):
    if key not in raw:
        raise ConfigError(f"config needs '{key}' for this subcommand")
    return raw[key]


def cmd_geometry_check(surface, raw, cfg: RunConfig, out: str) -> dict:
    rng = np.random.default_rng(cfg.seed)
    pts = rng.random((100, 2))
    vecs = rng.standard_normal((100, 2))
    iso = rot_defect = 0.0
    fd_err = 0.0
    h = 1e-5
    for p, v in zip(pts, vecs):
        g = geo.eval_geometry(surface, p)
        iv = geo.rotate90(surface, p, v)
        iso = max(iso, abs(geo.metric_inner(surface, p, iv, iv)
                           - geo.metric_inner(surface, p, v, v)))
        rot_defect = max(rot_defect, abs(geo.metric_inner(surface, p, iv, v)))
        # centered-difference exterior derivative of theta
        ty_x = (surface.theta_y.eval(p + [h, 0]) - surface.theta_y.eval(p - [h, 0])) / (2 * h)
        tx_y = (surface.theta_x.eval(p + [0, h]) - surface.theta_x.eval(p - [0, h])) / (2 * h)
        fd_err = max(fd_err, abs((ty_x - tx_y) - g.dtheta_density))
    report = {
        "isometry_defect": iso,
        "rotation_orthogonality_defect": rot_defect,
        "exterior_derivative_fd_error": fd_err,
        "mean_f_area": geo.mean_f_area(surface),
        "surface": surface.to_dict(),
    }
    jsonio.dump(report, os.path.join(out, "geometry_report.json"))
    return report


def cmd_flow(surface, raw, cfg: RunConfig, out: str) -> dict:
    flow = raw.get("flow", {})
    x = flow.get("x", [0.0, 0.0])
    v = flow.get("v", [1.0, 0.0])
    t_final = float(flow.get("time", 10.0))
    n_samp = int(flow.get("samples", 512))
    state = dyn.PhasePoint.of(x, v)
    states = dyn.write_trajectory(os.path.join(out, "trajectory.csv"),
                                  surface, state, t_final, n_samp, cfg)
    e0 = dyn.energy(surface, state)
    energies = [dyn.energy(surface, dyn.PhasePoint.from_z(z)) for z in states]
    p_x = [float(dyn.legendre(surface, dyn.PhasePoint.from_z(z))[1][0]) for z in states]
    report = {
        "energy_initial": e0,
        "energy_drift_rel": float(np.max(np.abs(np.array(energies) - e0)) / e0),
        "noether_px_drift": float(np.max(np.abs(np.array(p_x) - p_x[0]))),
        "time": t_final,
    }
    jsonio.dump(report, os.path.join(out, "flow_report.json"))
    return report


def cmd_descend(surface, raw, cfg: RunConfig, out: str) -> dict:
    kappa = float(_need(raw, "kappa"))
    alpha = localmin.find_alpha(surface, kappa, cfg)
    save_loop(alpha.loop, os.path.join(out, "alpha_loop.json"))
    jsonio.dump(alpha.orbit.to_dict(), os.path.join(out, "alpha_orbit.json"))
    registry = {
        "kappa": kappa,
        "orbits": [{
            "action": alpha.action,
            "free_index": alpha.free_index.negative,
            "free_marginal": alpha.free_index.marginal,
            "energy_rel_error": dyn.orbit_energy_residual(surface, alpha.orbit, cfg),
            "orbit": alpha.orbit.to_dict(),
        }],
        "scan": alpha.scanned,
    }
    jsonio.dump(registry, os.path.join(out, "minimizer_registry.json"))
    return registry


def cmd_minimax(surface, raw, cfg: RunConfig, out: str) -> dict:
    kappa = float(_need(raw, "kappa"))
    alpha = localmin.find_alpha(surface, kappa, cfg)
    mu = minimax.deep_loop(surface, kappa, alpha.loop, alpha.action,
                           margin=0.25 * abs(alpha.action), cfg=cfg)
    u1 = minimax.linear_path(alpha.loop, mu, 12)
    _, probe = minimax.bangert_path(surface, kappa, alpha.loop, mu, u1, 1, cfg)
    n0 = probe.minimal_negative_iterate() or 1
    nodes, bound = minimax.bangert_path(surface, kappa, alpha.loop, mu, u1, n0, cfg)
    path = minimax.thin_path(nodes, cfg.discretization.path_nodes, bound.node_actions)
    record, _ = minimax.mountain_pass(surface, kappa, path, cfg, n_label=n0)
    report = record.to_dict()
    report["bound"] = {"n": bound.n, "A": bound.constant_A, "bound": bound.bound,
                       "measured_max": bound.measured_max}
    report["alpha_action"] = alpha.action
    jsonio.dump(report, os.path.join(out, "minimax_report.json"))
    if record.orbit is not None:
        jsonio.dump(record.orbit.to_dict(), os.path.join(out, "beta_orbit.json"))
    return report


def _load_orbit(raw, config_dir):
    path = _need(raw, "orbit_file")
    if not os.path.isabs(path):
        path = os.path.join(config_dir, path)
    with open(path) as fh:
        return dyn.orbit_from_dict(json.load(fh))


def cmd_index(surface, raw, cfg: RunConfig, out: str, config_dir: str) -> dict:
    orbit = _load_orbit(raw, config_dir)
    report, cyl, mult = exp.index_with_optional_cylinder(
        surface, orbit, orbit.kappa, cfg)
    d = report.to_dict()
    d["unit_eigenvalue_multiplicity"] = mult
    jsonio.dump(d, os.path.join(out, "index_report.json"))
    samples = idx.LambdaSamples(np.array(report.lambda_angles),
                                np.array(report.lambda_values),
                                np.zeros(len(report.lambda_angles), dtype=int))
    idx.write_lambda_csv(os.path.join(out, "bott_samples.csv"), samples)
    return d


def cmd_cylinder(surface, raw, cfg: RunConfig, out: str, config_dir: str) -> dict:
    orbit = _load_orbit(raw, config_dir)
    eps = float(raw.get("cylinder_eps", 0.08 * orbit.kappa))
    cyl = continue_cylinder(surface, orbit, orbit.kappa, eps,
                            steps=int(raw.get("cylinder_steps", 4)), cfg=cfg)
    write_cylinder_csv(os.path.join(out, "cylinder.csv"), cyl)
    report = {
        "kappa": orbit.kappa,
        "t_prime": cyl.t_prime,
        "t_prime_consistency": cyl.t_prime_consistency,
        "zeta": list(cyl.zeta),
        "zeta_consistency": cyl.zeta_consistency,
        "truncated": cyl.truncated,
        "kappas": list(cyl.kappas),
        "periods": list(cyl.periods),
        "actions": list(cyl.actions),
    }
    jsonio.dump(report, os.path.join(out, "cylinder_report.json"))
    return report


def cmd_mane(surface, raw, cfg: RunConfig, out: str) -> dict:
    window = raw.get("kappa_window", [0.0, 1.0])
    cu = mane.bracket_cu(surface, window, cfg)
    c0 = mane.bracket_c0(surface, window, cfg)
    for rep in (cu, c0):
        for kap, _, loop in rep.witnesses:
            assert mane.revalidate_witness(surface, kap, loop)
    report = {"c_u": cu.to_dict(), "c_0": c0.to_dict()}
    jsonio.dump(report, os.path.join(out, "mane_report.json"))
    return report


def _experiment_one(args):
    surface_dict, kappa, cfg_dict, bound = args
    surface = geo.surface_from_dict(surface_dict)
    cfg = run_config_from_dict(cfg_dict)
    rep = exp.three_orbit_run(surface, kappa, cfg, certified_upper_energy=bound)
    return kappa, rep.to_dict()


def cmd_experiment(surface, raw, cfg: RunConfig, out: str) -> dict:
    kappas = raw.get("kappa_grid")
    if kappas is None:
        kappas = [float(_need(raw, "kappa"))]
    bound = raw.get("certified_upper_energy")
    args = [(surface.to_dict(), float(k),
             {"discretization": vars(cfg.discretization),
              "tolerances": vars(cfg.tolerances),
              "budgets": vars(cfg.budgets),
              "seed": cfg.seed}, bound) for k in kappas]
    if cfg.workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_experiment_one, args))
    else:
        results = [_experiment_one(a) for a in args]
    results.sort(key=lambda kv: kv[0])
    report = {"runs": [r for _, r in results]}
    if "n_ladder" in raw:
        report["infinitude"] = exp.infinitude_probe(
            surface, float(kappas[0]), tuple(raw["n_ladder"]), cfg)
    jsonio.dump(report, os.path.join(out, "run_report.json"))
    with open(os.path.join(out, "summary.csv"), "w") as fh:
        fh.write("kappa,n_orbits,alpha_action,beta_action,gamma_action,"
                 "beta_i_free,beta_stability\n")
        for kappa, r in results:
            found = sum(1 for k in ("alpha", "beta", "gamma") if r.get(k))
            ir = (r.get("beta") or {}).get("index_report", {})
            fh.write(
                f"{kappa:.12g},{found},"
                f"{(r.get('alpha') or {}).get('action', '')},"
                f"{(r.get('beta') or {}).get('action', '')},"
                f"{(r.get('gamma') or {}).get('action', '')},"
                f"{ir.get('i_free', '')},{ir.get('stability', '')}\n")
    return report


COMMANDS = ("geometry-check", "flow", "descend", "minimax", "index",
            "cylinder", "mane", "experiment")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="maggeo",
        description="Closed magnetic geodesics on tori: search and classify.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg, raw = load_config(args.config)
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.workers is not None:
            raw["workers"] = args.workers
        cfg = run_config_from_dict(raw)
        surface = surface_from_config(raw, os.path.dirname(os.path.abspath(args.config)))
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(args.out, exist_ok=True)
    config_dir = os.path.dirname(os.path.abspath(args.config))
    try:
        if args.command == "geometry-check":
            report = cmd_geometry_check(surface, raw, cfg, args.out)
        elif args.command == "flow":
            report = cmd_flow(surface, raw, cfg, args.out)
        elif args.command == "descend":
            report = cmd_descend(surface, raw, cfg, args.out)
        elif args.command == "minimax":
            report = cmd_minimax(surface, raw, cfg, args.out)
        elif args.command == "index":
            report = cmd_index(surface, raw, cfg, args.out, config_dir)
        elif args.command == "cylinder":
            report = cmd_cylinder(surface, raw, cfg, args.out, config_dir)
        elif args.command == "mane":
            report = cmd_mane(surface, raw, cfg, args.out)
        else:
            report = cmd_experiment(surface, raw, cfg, args.out)
    except MagGeoError as exc:
        failure = {"error_type": type(exc).__name__, "message": str(exc)}
        if hasattr(exc, "report"):
            failure["report"] = exc.report
        jsonio.dump(failure, os.path.join(args.out, "failure.json"))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if args.verbose:
        print(jsonio.dumps(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
