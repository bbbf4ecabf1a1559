"""Negative-action local minimizers: descent, broken-arc projection, barriers.

The descent runs in the period-weighted loop metric.  The projection map
replaces each of h sub-arcs (break nodes kept fixed) by the discrete
action minimizer with the same time schedule; it never increases the
action and has refined orbits as fixed points, so it doubles as a cheap
accelerator inside the descent loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import action as act
from .config import RunConfig, DEFAULT
from .errors import NotFoundError, SubdivisionError
from .geometry import SurfaceModel
from .loops import Loop, LoopTangent, circle, straight_loop, iterate  # noqa: F401  (iterate re-exported)
from .dynamics import Orbit
from .refine import polish_loop, refine_orbit, orbit_to_loop

MINIMIZER = "minimizer"
COLLAPSED = "collapsed_to_point"
MAX_ITER = "max_iter"
UNBOUNDED = "unbounded"


@dataclass
class DescentResult:
    status: str
    loop: Loop
    action: float
    grad_norm: float
    iterations: int
    trace: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


def smooth_project(surface: SurfaceModel, loop: Loop, kappa: float, h: int,
                   cfg: RunConfig = DEFAULT, newton_iter: int = 30) -> Loop:
    """Replace each of h arcs by the discrete fixed-endpoint minimizer.

    Requires h to divide N with at least 2 samples per arc, and each arc
    short enough that its interior Hessian is positive definite (the
    short-arc condition); otherwise raises SubdivisionError.
    """
    n = loop.n
    if h < 1 or n % h != 0 or n // h < 2:
        raise SubdivisionError(f"h={h} incompatible with N={n}")
    m = n // h
    pts = loop.closed_points().copy()
    dt = loop.dt
    for j in range(h):
        arc = pts[j * m:(j + 1) * m + 1].copy()
        if arc.shape[0] < 3:
            continue
        val0 = act.open_arc_value(surface, arc, dt)
        val = val0
        for _ in range(newton_iter):
            g = act.open_arc_gradient(surface, arc, dt)
            if float(np.max(np.abs(g))) <= 1e-12 * max(1.0, abs(val)):
                break
            H = act.open_arc_hessian(surface, arc, dt)
            try:
                step = -cho_solve(cho_factor(H, lower=True), g.reshape(-1)).reshape(-1, 2)
            except np.linalg.LinAlgError:
                raise SubdivisionError(
                    "arc Hessian not positive definite: h too small") from None
            lam, moved = 1.0, False
            for _ in range(25):
                cand = arc.copy()
                cand[1:-1] += lam * step
                val_new = act.open_arc_value(surface, cand, dt)
                if val_new < val:
                    arc, val, moved = cand, val_new, True
                    break
                lam *= 0.5
            if not moved:
                break
        else:
            raise SubdivisionError("arc solver did not converge: h too small")
        if val <= val0:
            pts[j * m + 1:(j + 1) * m] = arc[1:-1]
    return Loop(pts[:n], loop.period, loop.winding)


def descend(surface: SurfaceModel, loop: Loop, kappa: float,
            cfg: RunConfig = DEFAULT, max_iter: int | None = None,
            grad_tol: float | None = None) -> DescentResult:
    """Weighted-metric gradient descent with backtracking line search.

    Outcomes: ``minimizer`` (gradient below tolerance, Newton-polished),
    ``collapsed_to_point`` (period under T_min with near-zero action),
    ``unbounded`` (action fell through the floor), ``max_iter``.
    """
    tol = cfg.tolerances
    if max_iter is None:
        max_iter = cfg.budgets.descend_max_iter
    if grad_tol is None:
        grad_tol = tol.grad_descent
    cur = loop
    S = act.action(surface, cur, kappa)
    trace = [S]
    eta = 0.05
    it = 0
    gn = np.inf
    for it in range(1, max_iter + 1):
        if it % cfg.budgets.project_every == 0:
            for h in (8, 16):
                if cur.n % h == 0 and cur.n // h >= 2:
                    try:
                        cand = smooth_project(surface, cur, kappa, h, cfg)
                    except SubdivisionError:
                        continue
                    S_cand = act.action(surface, cand, kappa)
                    if S_cand <= S:
                        cur, S = cand, S_cand
                    break
        step, gn, (dS_x, dS_T), metric = act.descent_data(surface, cur, kappa)
        if cur.period < tol.period_min and abs(S) < tol.action_collapse:
            return DescentResult(COLLAPSED, cur, S, gn, it, trace)
        if S < tol.action_ceiling:
            return DescentResult(UNBOUNDED, cur, S, gn, it, trace)
        if gn < max(grad_tol, tol.capture_grad):
            # quadratic tail: Newton polish from inside the basin
            polished, _ = polish_loop(surface, cur, kappa, cfg)
            S_pol = act.action(surface, polished, kappa)
            if S_pol <= S + 1e-9 * max(1.0, abs(S)):
                gn_pol = act.grad_norm(surface, polished, kappa)
                if gn_pol < grad_tol:
                    return DescentResult(MINIMIZER, polished, S_pol, gn_pol, it, trace)
        if gn < grad_tol:
            return DescentResult(MINIMIZER, cur, S, gn, it, trace)
        # first-order decrease of the step direction (product-metric descent)
        slope = float(np.sum(dS_x * step.xi) + dS_T * step.tau)
        eta_try = min(eta * 2.0, 2.0)
        moved = False
        while eta_try > 1e-14:
            T_new = cur.period - eta_try * step.tau
            if T_new > 1e-9:
                cand = Loop(cur.samples - eta_try * step.xi, T_new, cur.winding)
                S_new = act.action(surface, cand, kappa)
                if S_new <= S - 1e-4 * eta_try * slope:
                    cur, S, eta, moved = cand, S_new, eta_try, True
                    break
            eta_try *= 0.5
        trace.append(S)
        if not moved:
            break
    return DescentResult(MAX_ITER, cur, S, gn, it, trace)


# -- seed families -------------------------------------------------------


def seed_family(surface: SurfaceModel, kappa: float, cfg: RunConfig = DEFAULT):
    """Deterministic scan family: geodesic circles and winding lines."""
    n = cfg.discretization.loop_samples
    speed = np.sqrt(2.0 * kappa)
    factors = np.array([0.6, 0.8, 1.0, 1.3, 1.7])[: cfg.budgets.seed_trial_periods]
    seeds = []
    radii = np.geomspace(0.04, 0.4, 8)
    centers = [(cx, cy) for cx in (1 / 6, 1 / 2, 5 / 6) for cy in (1 / 6, 1 / 2, 5 / 6)]
    for r in radii:
        for cpt in centers:
            for orient in (+1, -1):
                T0 = 2.0 * np.pi * r / speed
                for fac in factors:
                    seeds.append(circle(cpt, r, fac * T0, n, orient))
    offsets = np.arange(8) / 8.0
    for w in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        for off in offsets:
            base = (0.0, off) if w[1] == 0 else (off, 0.0)
            probe = straight_loop(base, w, 1.0, n)
            T0 = act.loop_length(surface, probe) / speed
            for fac in factors:
                seeds.append(straight_loop(base, w, fac * T0, n))
    return seeds


@dataclass
class AlphaResult:
    orbit: Orbit
    loop: Loop
    action: float
    free_index: act.IndexCount
    scanned: dict


def find_alpha(surface: SurfaceModel, kappa: float, cfg: RunConfig = DEFAULT,
               max_descents: int = 14) -> AlphaResult:
    """Search the seed family for a negative-action local minimizer.

    Seeds are ranked by initial action and descended in order until a
    negative minimizer appears; the best one is closed by shooting.
    Raises NotFoundError (with the scan report) when the family fails:
    existence of such an orbit below the critical value is a theorem, the
    scan is not.
    """
    seeds = seed_family(surface, kappa, cfg)
    ranked = sorted(range(len(seeds)),
                    key=lambda i: act.action(surface, seeds[i], kappa))
    report = {"n_seeds": len(seeds), "descents": []}
    found = []
    for idx in ranked[:max_descents]:
        res = descend(surface, seeds[idx], kappa, cfg)
        report["descents"].append(
            {"seed": idx, "status": res.status, "action": res.action,
             "grad_norm": res.grad_norm})
        if res.status == MINIMIZER and res.action < 0:
            found.append(res)
            if len(found) >= 3:
                break
    if not found:
        raise NotFoundError(f"no negative-action minimizer at kappa={kappa}", report)
    best = min(found, key=lambda r: r.action)
    orbit = refine_orbit(surface, best.loop, kappa, cfg)
    loop = orbit_to_loop(surface, orbit, cfg.discretization.index_samples, cfg)
    return AlphaResult(
        orbit=orbit,
        loop=loop,
        action=act.action(surface, loop, kappa),
        free_index=act.free_period_index(surface, loop, kappa, cfg),
        scanned=report,
    )


def strictness_barrier(surface: SurfaceModel, loop: Loop, kappa: float,
                       radius: float, cfg: RunConfig = DEFAULT,
                       n_probes: int = 12, refine_steps: int = 10,
                       rng=None) -> float:
    """Estimated inf of S over a metric sphere around the minimizer's orbit.

    Positive return means numerically strict.  Heuristic estimator: random
    tangent probes orthogonal to the reparametrization direction, pushed
    down along the sphere by projected gradient steps.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    metric = act.LoopMetric(surface, loop)
    base_S = act.action(surface, loop, kappa)
    phase = act.phase_direction(loop)
    phase_sq = metric.inner(phase, phase)

    def deflate(tan: LoopTangent, against=None) -> LoopTangent:
        c = metric.inner(tan, phase) / phase_sq
        out = LoopTangent(tan.xi - c * phase.xi, tan.tau)
        if against is not None:
            c2 = metric.inner(out, against) / (radius * radius)
            out = LoopTangent(out.xi - c2 * against.xi, out.tau - c2 * against.tau)
        return out

    def to_sphere(tan: LoopTangent) -> LoopTangent:
        return tan.scaled(radius / metric.norm(tan))

    def probe_of(tan: LoopTangent) -> Loop:
        return Loop(loop.samples + tan.xi, max(loop.period + tan.tau, 1e-6),
                    loop.winding)

    def value(tan: LoopTangent) -> float:
        return act.action(surface, probe_of(tan), kappa)

    best = np.inf
    n = loop.n
    starts = [LoopTangent(np.zeros((n, 2)), 1.0),
              LoopTangent(np.zeros((n, 2)), -1.0)]   # pure period probes:
    # the x and T blocks can decouple exactly, so gradients never rotate a
    # position probe into the period direction
    while len(starts) < n_probes + 2:
        raw = rng.standard_normal((n, 2))
        for _ in range(2):                      # mild smoothing of the direction
            raw = 0.5 * raw + 0.25 * (np.roll(raw, 1, axis=0) + np.roll(raw, -1, axis=0))
        starts.append(LoopTangent(raw, float(rng.standard_normal())))
    for start in starts:
        tan = to_sphere(deflate(start))
        S = value(tan)
        # two-plane minimization on the sphere: rotate toward the
        # metric-preconditioned downhill direction within span(tan, dir)
        for _ in range(refine_steps):
            dS_x, dS_T = act.differential(surface, probe_of(tan), kappa)
            g = LoopTangent(metric.solve(dS_x.reshape(-1)).reshape(-1, 2) / metric.weight,
                            dS_T)
            v = deflate(g, against=tan)
            nv = metric.norm(v)
            if nv < 1e-14:
                break
            v = v.scaled(radius / nv)
            dpsi = 0.4
            moved = False
            for _ in range(6):
                cands = {}
                for psi in (-dpsi, dpsi):
                    cand = LoopTangent(np.cos(psi) * tan.xi + np.sin(psi) * v.xi,
                                       np.cos(psi) * tan.tau + np.sin(psi) * v.tau)
                    cands[psi] = (cand, value(cand))
                psi_best, (cand, S_cand) = min(cands.items(), key=lambda kv: kv[1][1])
                if S_cand < S:
                    tan, S, moved = cand, S_cand, True
                    break
                dpsi *= 0.35
            if not moved:
                break
        best = min(best, S)
    return float(best - base_S)
