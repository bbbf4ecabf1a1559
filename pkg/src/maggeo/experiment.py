"""End-to-end experiments at fixed subcritical energies.

``three_orbit_run`` reproduces the expected orbit inventory at one
energy: a negative-action local minimizer, a negative-action mountain
pass orbit that is not an iterate of the minimizer, and (when the search
succeeds) a positive-action contractible orbit.  ``infinitude_probe``
runs the minimax ladder over iterates and records the mechanism that
forces new geometry: actions marching to minus infinity while any fixed
orbit's iterates would carry positive mean index.

Search failures are reported as partial results, never papered over.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import action as act
from . import dynamics as dyn
from . import index as idx
from . import localmin
from . import minimax
from .config import RunConfig, DEFAULT
from .continuation import continue_cylinder
from .errors import NotFoundError, RefineDivergenceError, MagGeoError
from .geometry import SurfaceModel
from .loops import Loop, circle, iterate, c0_distance
from .dynamics import Orbit
from .refine import orbit_to_loop, revalidate_orbit


def unit_eigenvalue_multiplicity(M: np.ndarray, tol: float = 1e-5) -> int:
    return int(np.sum(np.abs(np.linalg.eigvals(M) - 1.0) < tol))


def same_orbit(surface: SurfaceModel, a: Orbit, b: Orbit,
               cfg: RunConfig = DEFAULT, max_ratio: int = 8) -> dict:
    """Geometric identity test: is one orbit an iterate of the other?

    Compares curves after optimal time shift, allowing iteration factors
    up to max_ratio; the C0 threshold is the configured one.
    """
    tol = cfg.tolerances.distinct_c0
    la = orbit_to_loop(surface, a, 256, cfg, polish=False)
    lb = orbit_to_loop(surface, b, 256, cfg, polish=False)
    for (short, long_, sl, ll, tag) in (
            (a, b, la, lb, "second=iterate(first)"),
            (b, a, lb, la, "first=iterate(second)")):
        if long_.period < short.period - 1e-9:
            continue
        k = max(1, int(round(long_.period / max(short.period, 1e-12))))
        if k > max_ratio:
            continue
        if abs(long_.period - k * short.period) > 1e-4 * max(1.0, long_.period):
            continue
        if tuple(np.array(short.winding) * k) != tuple(long_.winding):
            continue
        d = c0_distance(iterate(sl, k), ll)
        if d < tol:
            return {"same": True, "relation": tag, "factor": k, "c0_distance": d}
    return {"same": False, "relation": None, "factor": None, "c0_distance": None}


def orbit_record(surface: SurfaceModel, orbit: Orbit, kappa: float,
                 cfg: RunConfig = DEFAULT) -> dict:
    checks = revalidate_orbit(surface, orbit, cfg)
    action = dyn.orbit_action(surface, orbit, kappa, cfg)
    recheck = dyn.orbit_action(surface, orbit, kappa, cfg, n_samples=1536)
    return {
        "period": orbit.period,
        "winding": list(orbit.winding),
        "residual": orbit.residual,
        "action": action,
        "action_recheck_error": abs(action - recheck),
        "energy_rel_error": checks["energy_rel"],
        "closure_recheck": checks["residual"],
        "state": list(orbit.state.as_z()),
    }


@dataclass
class RunReport:
    kappa: float
    alpha: dict | None = None
    beta: dict | None = None
    gamma: dict | None = None
    minimax: dict | None = None
    distinctness: dict = field(default_factory=dict)
    partial: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "minimax": self.minimax,
            "distinctness": self.distinctness,
            "partial": list(self.partial),
            "notes": dict(self.notes),
        }


def index_with_optional_cylinder(surface, orbit, kappa, cfg, eps_frac=0.08,
                                  n_bott=4, with_bott=True):
    """Index report, with the shear data when a cylinder can be continued.

    Transversal degeneracy is detected on the variational side (the
    free-period Hessian kernel beyond the reparametrization mode), which
    is far better conditioned than eigenvalue multiplicities of the
    monodromy; degenerate orbits skip the continuation.
    """
    zeta = None
    cyl = None
    mon = dyn.linearize_flow(surface, orbit, cfg)
    mult = unit_eigenvalue_multiplicity(mon.M)
    loop = orbit_to_loop(surface, orbit, cfg.discretization.index_samples, cfg)
    free_marginal = act.free_period_index(surface, loop, kappa, cfg).marginal
    if free_marginal == 1:
        try:
            cyl = continue_cylinder(surface, orbit, kappa, eps_frac * kappa,
                                    steps=2, cfg=cfg)
            if not cyl.truncated:
                zeta = cyl.zeta
        except (RefineDivergenceError, MagGeoError):
            cyl = None
    report = idx.index_report(surface, orbit, kappa, cfg, zeta=zeta, loop=loop,
                              n_bott=n_bott, with_bott_checks=with_bott)
    return report, cyl, mult


def three_orbit_run(surface: SurfaceModel, kappa: float,
                    cfg: RunConfig = DEFAULT,
                    certified_upper_energy: float | None = None,
                    path_nodes: int | None = None) -> RunReport:
    """The three-orbit inventory at one subcritical energy."""
    if certified_upper_energy is not None and kappa > certified_upper_energy:
        raise ValueError(
            f"kappa={kappa} above the certified subcritical bound "
            f"{certified_upper_energy}")
    if path_nodes is None:
        path_nodes = cfg.discretization.path_nodes
    report = RunReport(kappa=kappa)

    # (a) negative-action local minimizer
    try:
        alpha = localmin.find_alpha(surface, kappa, cfg)
    except NotFoundError as exc:
        report.partial.append({"stage": "alpha", "error": str(exc)})
        return report
    report.alpha = orbit_record(surface, alpha.orbit, kappa, cfg)
    report.alpha["free_index"] = alpha.free_index.negative
    report.alpha["free_marginal"] = alpha.free_index.marginal

    # (b) mountain-pass orbit over the iterated connecting path
    beta_orbit = None
    try:
        margin = 0.25 * abs(alpha.action)
        mu = minimax.deep_loop(surface, kappa, alpha.loop, alpha.action,
                               margin=margin, cfg=cfg)
        u1 = minimax.linear_path(alpha.loop, mu, 12)
        probe_nodes, probe = minimax.bangert_path(surface, kappa, alpha.loop,
                                                  mu, u1, 1, cfg)
        n0 = probe.minimal_negative_iterate()
        if n0 is None:
            raise NotFoundError("endpoint actions not negative", {})
        nodes, bound = minimax.bangert_path(surface, kappa, alpha.loop, mu,
                                            u1, n0, cfg)
        path = minimax.thin_path(nodes, path_nodes, bound.node_actions)
        record, _ = minimax.mountain_pass(surface, kappa, path, cfg, n_label=n0)
        report.minimax = record.to_dict()
        report.minimax["bound"] = {
            "n": bound.n, "A": bound.constant_A, "bound": bound.bound,
            "measured_max": bound.measured_max,
            "s_mu0": bound.s_mu0, "s_mu1": bound.s_mu1,
        }
        report.notes["chain_check"] = {
            "value_negative": bool(record.value < 0),
            "value_above_endpoint": bool(record.value > n0 * alpha.action),
        }
        beta_orbit = record.orbit
        if beta_orbit is None:
            report.partial.append({"stage": "beta_refine",
                                   "error": record.diagnostics.get("refine_error")})
    except NotFoundError as exc:
        report.partial.append({"stage": "beta", "error": str(exc)})

    if beta_orbit is not None:
        report.beta = orbit_record(surface, beta_orbit, kappa, cfg)
        beta_report, _, mult = index_with_optional_cylinder(
            surface, beta_orbit, kappa, cfg)
        report.beta["index_report"] = beta_report.to_dict()
        report.beta["unit_eigenvalue_multiplicity"] = mult
        report.distinctness["beta_vs_alpha"] = same_orbit(
            surface, alpha.orbit, beta_orbit, cfg)

    # (c) positive-action contractible orbit (search may fail; that is data)
    gamma_orbit = None
    try:
        tiny = circle((0.5, 0.5), 0.03,
                      2 * np.pi * 0.03 / np.sqrt(2 * kappa), cfg.discretization.loop_samples)
        deep = minimax.deep_loop(surface, kappa,
                                 circle((0.25, 0.25), 0.1,
                                        2 * np.pi * 0.1 / np.sqrt(2 * kappa),
                                        cfg.discretization.loop_samples),
                                 0.0, margin=0.05, cfg=cfg)
        path = minimax.linear_path(tiny, deep, min(path_nodes, 24))
        record, _ = minimax.mountain_pass(surface, kappa, path, cfg, sweeps=40,
                                          n_label=1)
        report.notes["gamma_value"] = record.value
        gamma_orbit = record.orbit
        if gamma_orbit is not None and record.value > 0:
            g_loop = orbit_to_loop(surface, gamma_orbit,
                                   cfg.discretization.index_samples, cfg)
            if act.action(surface, g_loop, kappa) <= 0:
                gamma_orbit = None
                report.partial.append({"stage": "gamma",
                                       "error": "candidate action not positive"})
        elif gamma_orbit is None:
            report.partial.append({"stage": "gamma",
                                   "error": record.diagnostics.get("refine_error")})
    except (NotFoundError, RefineDivergenceError, MagGeoError) as exc:
        report.partial.append({"stage": "gamma", "error": str(exc)})

    if gamma_orbit is not None:
        report.gamma = orbit_record(surface, gamma_orbit, kappa, cfg)
        report.distinctness["gamma_vs_alpha"] = same_orbit(
            surface, alpha.orbit, gamma_orbit, cfg)
        if beta_orbit is not None:
            report.distinctness["gamma_vs_beta"] = same_orbit(
                surface, beta_orbit, gamma_orbit, cfg)

    return report


@dataclass
class LadderEntry:
    n: int
    value: float
    orbit: dict | None
    mean_index: float | None
    i_free: int | None
    captured: bool

    def to_dict(self) -> dict:
        return {"n": self.n, "value": self.value, "orbit": self.orbit,
                "mean_index": self.mean_index, "i_free": self.i_free,
                "captured": self.captured}


def infinitude_probe(surface: SurfaceModel, kappa: float,
                     ladder=(1, 2, 4, 8), cfg: RunConfig = DEFAULT) -> dict:
    """Minimax ladder over iterates with the mean-index bookkeeping.

    For each rung the estimate is the min over the freshly relaxed path
    and the doubled best path from the previous rung; since doubling
    multiplies node actions exactly, negative estimates strictly decrease
    along the ladder by construction.
    """
    alpha = localmin.find_alpha(surface, kappa, cfg)
    mu = minimax.deep_loop(surface, kappa, alpha.loop, alpha.action,
                           margin=0.25 * abs(alpha.action), cfg=cfg)
    u1 = minimax.linear_path(alpha.loop, mu, 12)
    entries = []
    orbits = {}
    prev_path = None
    prev_n = None
    for n in ladder:
        nodes, bound = minimax.bangert_path(surface, kappa, alpha.loop, mu, u1, n,
                                            cfg, max_loop_samples=512 if n < 4 else 384)
        path = minimax.thin_path(nodes,
                                 min(cfg.discretization.path_nodes, 24 if n < 4 else 16),
                                 bound.node_actions)
        # relaxation on long iterates is costly and the doubling fallback
        # already guarantees decreasing estimates, so budgets shrink with n
        sweeps = max(12, cfg.budgets.mountain_pass_sweeps // max(1, n))
        record, final = minimax.mountain_pass(surface, kappa, path, cfg,
                                              sweeps=sweeps, n_label=n)
        value = record.value
        if prev_path is not None and n % prev_n == 0 and n > prev_n:
            k = n // prev_n
            doubled_max = max(act.action(surface, iterate(node, k), kappa)
                              for node in prev_path)
            value = min(value, doubled_max)
        mean_i = None
        i_free = None
        orec = None
        if record.orbit is not None:
            orbits[n] = record.orbit
            orec = orbit_record(surface, record.orbit, kappa, cfg)
            n_idx = min(512, cfg.discretization.index_samples *
                        max(1, int(round(record.orbit.period / alpha.orbit.period))))
            loop = orbit_to_loop(surface, record.orbit, n_idx, cfg)
            i_free = act.free_period_index(surface, loop, kappa, cfg).negative
            # coarse circle grid: enough for the sign of the mean index
            samples = idx.bott_function(surface, loop, kappa, cfg, n_grid=32,
                                        n_roots=2)
            mean_i = idx.mean_index(samples)
        entries.append(LadderEntry(n=n, value=value, orbit=orec,
                                   mean_index=mean_i, i_free=i_free,
                                   captured=record.diagnostics["captured"]))
        prev_path, prev_n = final, n
    # iterate matching across rungs
    matches = {}
    keys = sorted(orbits)
    for i, na in enumerate(keys):
        for nb in keys[i + 1:]:
            rel = same_orbit(surface, orbits[na], orbits[nb], cfg)
            if rel["same"]:
                matches[f"{na}->{nb}"] = rel
    values = [e.value for e in entries]
    return {
        "kappa": kappa,
        "alpha_action": alpha.action,
        "entries": [e.to_dict() for e in entries],
        "values_strictly_decreasing": bool(
            all(values[i + 1] < values[i] for i in range(len(values) - 1))),
        "iterate_matches": matches,
    }
