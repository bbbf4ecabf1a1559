"""Minimax machinery: deep loops, iterated connecting paths, mountain pass.

The path builder implements the classical construction that connects the
n-th iterates of two homotopic loops by pulling one copy at a time along
the track of base points, never reparametrizing the pieces.  Because the
pieces are glued as chains (each keeping its own time schedule), the
action of every built path node is the exact sum of its pieces, and the
n-uniform upper bound

    max action over the path <= n max{S(mu0), S(mu1)} + A

holds by arithmetic, with the constant A assembled from the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import action as act
from .config import RunConfig, DEFAULT
from .errors import NotFoundError, NotApplicableError, RefineDivergenceError
from .geometry import SurfaceModel
from .loops import (Loop, Chain, chain_concat, loop_to_chain, chain_to_loop,
                    split_chain_at_time, iterate, resample, concat,
                    shift_samples, straight_loop)
from .dynamics import Orbit
from . import dynamics as dyn
from .refine import refine_orbit, polish_loop, orbit_to_loop  # noqa: F401 (re-exported)


# -- path utilities ------------------------------------------------------


def common_n(nodes: list[Loop]) -> list[Loop]:
    n = max(node.n for node in nodes)
    return [resample(node, n) for node in nodes]


def product_gap(a: Loop, b: Loop) -> float:
    """Product-metric surrogate distance between neighboring path nodes."""
    if a.winding != b.winding:
        return np.inf
    n = max(a.n, b.n)
    aa, bb = resample(a, n), resample(b, n)
    d = aa.samples - bb.samples
    h = 1.0 / n
    dd = (np.roll(d, -1, axis=0) - d) / h
    h1 = float(np.sum(d * d) * h + np.sum(dd * dd) * h)
    w = act.period_weight(0.5 * (a.period + b.period))
    return float(np.sqrt((a.period - b.period) ** 2 + w * h1))


def interpolate_nodes(a: Loop, b: Loop, s: float) -> Loop:
    if a.winding != b.winding:
        raise ValueError("cannot interpolate loops in different classes")
    n = max(a.n, b.n)
    aa, bb = resample(a, n), resample(b, n)
    return Loop((1 - s) * aa.samples + s * bb.samples,
                (1 - s) * aa.period + s * bb.period, a.winding)


def linear_path(a: Loop, b: Loop, m: int) -> list[Loop]:
    """Straight homotopy between same-class loops, m+1 nodes."""
    return [interpolate_nodes(a, b, i / m) for i in range(m + 1)]


def thin_path(nodes: list[Loop], m_target: int, actions=None) -> list[Loop]:
    """Subselect ~m_target+1 existing nodes, keeping endpoints and the argmax.

    Selection (rather than interpolation) preserves the property that every
    kept node's action was measured on the built path.
    """
    if len(nodes) <= m_target + 1:
        return list(nodes)
    idx = set(np.round(np.linspace(0, len(nodes) - 1, m_target + 1)).astype(int))
    if actions is not None:
        idx.add(int(np.argmax(actions)))
    return [nodes[i] for i in sorted(idx)]


def equidistribute(nodes: list[Loop]) -> list[Loop]:
    """Re-space interior nodes uniformly in the product metric."""
    m = len(nodes) - 1
    gaps = [product_gap(nodes[i], nodes[i + 1]) for i in range(m)]
    cum = np.concatenate([[0.0], np.cumsum(gaps)])
    total = cum[-1]
    if total <= 0:
        return nodes
    targets = np.linspace(0.0, total, m + 1)
    out = [nodes[0]]
    for t in targets[1:-1]:
        k = int(np.searchsorted(cum, t, side="right") - 1)
        k = min(k, m - 1)
        s = (t - cum[k]) / max(cum[k + 1] - cum[k], 1e-30)
        out.append(interpolate_nodes(nodes[k], nodes[k + 1], s))
    out.append(nodes[-1])
    return out


# -- deep loops ----------------------------------------------------------


def flux_rectangle(base, width: float, height: float, speed: float, dt: float,
                   horizontal: bool = True, orientation: int = +1) -> Loop:
    """Contractible rectangle loop traversed at constant chart speed.

    ``orientation`` flips the traversal sense (hence the sign of the
    enclosed flux).  Sampled with time-per-sample dt so it can be glued
    onto loops with the same sampling rate.
    """
    b = np.asarray(base, dtype=float)
    if horizontal:
        corners = [b, b + (width, 0.0), b + (width, height), b + (0.0, height), b]
    else:
        corners = [b, b + (0.0, width), b + (height, width), b + (height, 0.0), b]
    corners = np.array(corners)
    if orientation < 0:
        corners = corners[::-1]
    seg = corners[1:] - corners[:-1]
    lens = np.linalg.norm(seg, axis=1)
    perim = float(np.sum(lens))
    n = max(16, int(round(perim / speed / dt)))
    arc = np.concatenate([[0.0], np.cumsum(lens)])
    t_new = perim * np.arange(n) / n
    pts = np.empty((n, 2))
    for c in range(2):
        pts[:, c] = np.interp(t_new, arc, corners[:, c])
    return Loop(pts, n * dt, (0, 0))


def deep_loop(surface: SurfaceModel, kappa: float, alpha_loop: Loop,
              target_action: float, margin: float = 0.1,
              cfg: RunConfig = DEFAULT) -> Loop:
    """A non-critical loop in alpha's class with action below target - margin.

    Glues flux-collecting rectangles of growing width onto the loop; the
    action of the glued loop is the exact sum, so the scan certifies
    itself.  Raises NotFoundError when the family is exhausted, which is
    the expected outcome above the critical value.
    """
    speed = np.sqrt(2.0 * kappa)
    dt = alpha_loop.dt
    tried = []
    best = None
    for width in range(1, cfg.budgets.mane_probe_widths + 1):
        for horizontal in (True, False):
            for orientation in (+1, -1):
                rect = flux_rectangle(alpha_loop.samples[0], float(width), 0.5,
                                      speed, dt, horizontal, orientation)
                cand = concat(alpha_loop, rect)
                S = act.action(surface, cand, kappa)
                tried.append({"width": width, "horizontal": horizontal,
                              "orientation": orientation, "action": S})
                if best is None or S < best[0]:
                    best = (S, cand)
                if S < target_action - margin:
                    return cand
    # fall back on descending the best candidate until it drops below target
    S, cand = best
    for _ in range(cfg.budgets.deep_loop_max_iter):
        step, gn, (dS_x, dS_T), _ = act.descent_data(surface, cand, kappa)
        if gn < cfg.tolerances.grad_descent:
            break
        slope = float(np.sum(dS_x * step.xi) + dS_T * step.tau)
        eta, moved = 0.1, False
        while eta > 1e-12:
            T_new = cand.period - eta * step.tau
            if T_new > 1e-9:
                nxt = Loop(cand.samples - eta * step.xi, T_new, cand.winding)
                S_new = act.action(surface, nxt, kappa)
                if S_new <= S - 1e-4 * eta * slope:
                    cand, S, moved = nxt, S_new, True
                    break
            eta *= 0.5
        if not moved:
            break
        if S < target_action - margin:
            return cand
    raise NotFoundError(
        f"no loop below {target_action - margin:.6g} found at kappa={kappa} "
        "(consistent with kappa at or above the critical value)",
        {"tried": tried, "best_action": S})


# -- iterated connecting path --------------------------------------------


@dataclass
class PathBound:
    """The n-uniform upper bound data measured on a built path."""

    n: int
    s_mu0: float
    s_mu1: float
    constant_A: float
    bound: float
    measured_max: float
    node_actions: list = field(default_factory=list)

    def minimal_negative_iterate(self) -> int | None:
        """Smallest n with n max{S0, S1} + A < 0, if any."""
        top = max(self.s_mu0, self.s_mu1)
        if top >= 0:
            return None
        return max(1, int(np.floor(self.constant_A / (-top))) + 1)


def _chain_pow(chain: Chain, k: int) -> Chain | None:
    if k <= 0:
        return None
    return chain_concat(*([chain] * k))


def _juxt(*parts) -> Chain:
    kept = [p for p in parts if p is not None and p.durations.size > 0]
    return chain_concat(*kept)


def bangert_path(surface: SurfaceModel, kappa: float, mu0: Loop, mu1: Loop,
                 u1: list[Loop], n: int, cfg: RunConfig = DEFAULT,
                 max_loop_samples: int = 1024) -> tuple[list[Loop], PathBound]:
    """Path from mu0^n to mu1^n obtained by pulling one loop at a time.

    ``u1`` is a path of loops connecting mu0 to mu1; the track of its base
    points is the connecting curve along which copies are transported.
    Returns uniform Loop nodes (endpoints are exact iterates) plus the
    measured bound data.
    """
    if mu0.winding != mu1.winding:
        raise ValueError("endpoints live in different free homotopy classes")
    mu1 = resample(mu1, mu0.n)
    s0 = act.action(surface, mu0, kappa)
    s1 = act.action(surface, mu1, kappa)

    # track of base points, traversed at the energy speed
    tau_pts = np.array([node.samples[0] for node in u1])
    seg = np.linalg.norm(tau_pts[1:] - tau_pts[:-1], axis=1)
    speed = np.sqrt(2.0 * kappa)
    durs = np.maximum(seg / speed, 1e-9)
    tau = Chain(tau_pts, durs)
    tau_hat = tau.reverse()
    m = len(u1) - 1

    gammas = [loop_to_chain(node) for node in u1]
    c0 = loop_to_chain(mu0)
    c1 = loop_to_chain(mu1)

    s_tau_prefix = [0.0] + [act.chain_action(surface, tau.prefix(i), kappa)
                            for i in range(1, m + 1)]
    s_gammas = [act.chain_action(surface, g, kappa) for g in gammas]
    A = (-min(s0, s1) + max(s_tau_prefix) + act.chain_action(surface, tau_hat, kappa)
         + max(s_gammas))

    if n == 1:
        nodes = common_n(u1)
        actions = [act.action(surface, node, kappa) for node in nodes]
        bound = PathBound(1, s0, s1, A, max(s0, s1) + A, max(actions), actions)
        return nodes, bound

    chains: list[Chain] = []
    for i in range(m + 1):                       # grow the tether pair
        if i == 0:
            chains.append(_chain_pow(c0, n))
        else:
            pre = tau.prefix(i)
            chains.append(_juxt(_chain_pow(c0, n), pre, pre.reverse()))
    for h in range(n - 1, -1, -1):               # transport one copy at a time
        for i in range(1, m + 1):
            chains.append(_juxt(_chain_pow(c0, h),
                                tau.prefix(i) if i > 0 else None,
                                gammas[i],
                                tau.suffix(i) if i < m else None,
                                _chain_pow(c1, n - 1 - h),
                                tau_hat))
    for i in range(1, m + 1):                    # shrink the remaining tether
        if i == m:
            chains.append(_chain_pow(c1, n))
        else:
            suf = tau.suffix(i)
            chains.append(_juxt(suf, _chain_pow(c1, n), suf.reverse()))

    actions = [act.chain_action(surface, c, kappa) for c in chains]
    bound_val = n * max(s0, s1) + A
    measured = max(actions)
    if measured > bound_val + 1e-9 * max(1.0, abs(bound_val)):
        raise AssertionError("path construction violated its own bound")

    n_node = min(max_loop_samples, max(cfg.discretization.loop_samples, n * 64))
    nodes = [iterate(mu0, n)]
    nodes += [chain_to_loop(c, n_node) for c in chains[1:-1]]
    nodes.append(iterate(mu1, n))
    bound = PathBound(n, s0, s1, A, bound_val, measured, actions)
    return nodes, bound


# -- mountain pass -------------------------------------------------------


@dataclass
class MinimaxRecord:
    kappa: float
    n: int
    value: float
    argmax_index: int
    orbit: Orbit | None
    value_trace: list = field(default_factory=list)
    path_actions: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "kappa": self.kappa,
            "n": self.n,
            "value": self.value,
            "argmax_index": self.argmax_index,
            "value_trace": list(self.value_trace),
            "path_actions": list(self.path_actions),
            "diagnostics": dict(self.diagnostics),
        }
        if self.orbit is not None:
            d["orbit"] = {
                "x": list(self.orbit.state.x),
                "v": list(self.orbit.state.v),
                "period": self.orbit.period,
                "kappa": self.orbit.kappa,
                "residual": self.orbit.residual,
                "winding": list(self.orbit.winding),
            }
        return d


def mountain_pass(surface: SurfaceModel, kappa: float, path: list[Loop],
                  cfg: RunConfig = DEFAULT, sweeps: int | None = None,
                  n_label: int = 1) -> tuple[MinimaxRecord, list[Loop]]:
    """Relax a path's interior nodes, track the min-over-sweeps of the max.

    Endpoints stay fixed (they sit at or below the levels where the
    deformation is frozen).  The reported value is an upper bound for the
    true minimax level: the infimum over the paths actually explored.
    Returns the record and the final path.
    """
    if sweeps is None:
        sweeps = cfg.budgets.mountain_pass_sweeps
    nodes = common_n(path)
    m = len(nodes) - 1
    etas = np.full(m + 1, 0.05)
    actions = [act.action(surface, node, kappa) for node in nodes]
    value = max(actions)
    trace = [value]
    end_level = max(actions[0], actions[-1])
    captured = None
    gn_max = np.inf
    stall = 0
    for sweep in range(sweeps):
        for i in range(1, m):
            for _ in range(2):
                node = nodes[i]
                S = actions[i]
                step, gn, (dS_x, dS_T), _ = act.descent_data(surface, node, kappa)
                slope = float(np.sum(dS_x * step.xi) + dS_T * step.tau)
                eta = min(etas[i] * 2.0, 1.0)
                moved = False
                while eta > 1e-13:
                    T_new = node.period - eta * step.tau
                    if T_new > 1e-9:
                        cand = Loop(node.samples - eta * step.xi, T_new, node.winding)
                        S_new = act.action(surface, cand, kappa)
                        if S_new <= S - 1e-4 * eta * slope:
                            nodes[i], actions[i], etas[i] = cand, S_new, eta
                            moved = True
                            break
                    eta *= 0.5
                if not moved:
                    break
        if (sweep + 1) % 3 == 0:
            nodes = equidistribute(nodes)
            actions = [act.action(surface, node, kappa) for node in nodes]
        mx = max(actions)
        improved = mx < value - 1e-10 * max(1.0, abs(value))
        stall = 0 if improved else stall + 1
        value = min(value, mx)
        trace.append(value)
        amax = int(np.argmax(actions))
        # capture: Newton from the ridge toward the adjacent critical point
        if sweep >= 2 and (sweep % 3 == 0 or stall >= 6):
            gn_max = act.grad_norm(surface, nodes[amax], kappa)
            polished, res = polish_loop(surface, nodes[amax], kappa, cfg)
            S_pol = act.action(surface, polished, kappa)
            if (res < 1e-9 * max(1.0, abs(S_pol))
                    and end_level + 1e-9 < S_pol <= mx + 1e-6 * max(1.0, abs(mx))):
                captured = polished
                break
        if stall >= cfg.budgets.mountain_pass_stall:
            break
    amax = int(np.argmax(actions))
    candidate = captured if captured is not None else nodes[amax]
    orbit = None
    refine_error = None
    try:
        orbit = refine_orbit(surface, candidate, kappa, cfg, max_iter=18)
    except RefineDivergenceError as exc:
        refine_error = str(exc)
    record = MinimaxRecord(
        kappa=kappa,
        n=n_label,
        value=value,
        argmax_index=amax,
        orbit=orbit,
        value_trace=trace,
        path_actions=actions,
        diagnostics={
            "sweeps_run": sweep + 1 if sweeps else 0,
            "captured": captured is not None,
            "grad_norm_at_max": gn_max,
            "degenerate_pass": bool(value <= end_level + 1e-9),
            "refine_error": refine_error,
        },
    )
    return record, nodes


def evaluate_pool(surface: SurfaceModel, kappa: float,
                  pool: list[list[Loop]]) -> float:
    """min over stored paths of (max action at this kappa).

    Every stored path is a valid competitor at every kappa (fixed
    endpoints), and each node's action is affine increasing in kappa, so
    estimates from a shared pool are monotone in kappa by construction.
    """
    best = np.inf
    for path in pool:
        mx = max(act.action(surface, node, kappa) for node in path)
        best = min(best, mx)
    return float(best)


# -- split diagnostics ----------------------------------------------------


@dataclass
class SplitReport:
    split_time: float
    refined: Chain
    sub_chains: tuple[Chain, Chain]
    sub_loops: tuple[Loop, Loop]
    shift_time: float
    closure_adjustment: float
    transverse_samples: list


def _tube_coordinates(surface: SurfaceModel, orbit: Orbit, dense: int,
                      cfg: RunConfig):
    ts = orbit.period * np.arange(dense) / dense
    states = dyn.sample_flow(surface, orbit.state, ts, cfg)
    pos = states[:, :2]
    vel = states[:, 2:]
    speed = np.linalg.norm(vel, axis=1)
    tang = vel / speed[:, None]
    norm = np.stack([-tang[:, 1], tang[:, 0]], axis=-1)
    return ts, pos, tang, norm, speed


def detect_split(surface: SurfaceModel, loop: Loop, base: Orbit, n: int,
                 cfg: RunConfig = DEFAULT, tube_width: float = 0.08,
                 dense: int = 2048) -> SplitReport:
    """Factor a loop C1-close to the n-th iterate of a base orbit.

    Finds a time shift and an interior split time S_h so the loop breaks
    into two closed sub-loops near the base orbit and its (n-1)-st
    iterate; their chain actions add up to the refined input's exactly.
    Raises NotApplicableError when the loop leaves the tubular annulus or
    does not wind n times around the base curve.
    """
    if n < 2:
        raise ValueError("need n >= 2 to split")
    T = base.period
    ts, pos, tang, norm, speed = _tube_coordinates(surface, base, dense, cfg)

    def project(p):
        d = p - pos
        d -= np.round(d)                       # torus-nearest representative
        dist2 = np.sum(d * d, axis=1)
        k = int(np.argmin(dist2))
        rel = d[k]
        t_loc = ts[k] + float(np.dot(rel, tang[k])) / max(speed[k], 1e-12)
        lam = float(np.dot(rel, norm[k]))
        return t_loc % T, lam, float(np.sqrt(dist2[k]))

    t_list, lam_list = [], []
    for p in loop.samples:
        t_loc, lam, dist = project(p)
        if abs(lam) > tube_width or dist > 2.0 * tube_width:
            raise NotApplicableError(
                f"loop leaves the annulus (|lambda|={abs(lam):.3g} > {tube_width})")
        t_list.append(t_loc)
        lam_list.append(lam)

    # unwrap the angular coordinate along the loop
    theta = np.empty(loop.n + 1)
    theta[0] = t_list[0]
    for j in range(1, loop.n):
        inc = (t_list[j] - t_list[j - 1] + 0.5 * T) % T - 0.5 * T
        theta[j] = theta[j - 1] + inc
    theta[loop.n] = theta[0] + n * T
    if np.any(np.diff(theta) <= 0):
        raise NotApplicableError("angular coordinate not monotone along the loop")
    total = theta[-1] - theta[0]
    if abs(total - n * T) > 0.25 * T:
        raise NotApplicableError(
            f"loop winds {total / T:.3f} times around the base, expected {n}")

    times = loop.period * np.arange(loop.n + 1) / loop.n
    lam_ext = np.array(lam_list + [lam_list[0]])

    def theta_inv(q):
        base_q = theta[0]
        k, qq = divmod(q - base_q, n * T)
        return float(np.interp(qq + base_q, theta, times)) + k * loop.period

    def lam_at(t):
        tt = t % loop.period
        return float(np.interp(tt, times, lam_ext))

    mu = np.array([lam_at(theta_inv(theta[0] + j * T)) for j in range(n)])
    k_star = int(np.argmax(mu))

    def f(sigma):
        return (lam_at(theta_inv(theta[0] + (k_star + sigma) * T))
                - lam_at(theta_inv(theta[0] + (k_star - 1 + sigma) * T)))

    lo, hi = 0.0, 1.0
    f_lo = f(lo)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f(mid) * np.sign(f_lo if f_lo != 0 else 1.0) >= 0:
            lo = mid
        else:
            hi = mid
    sigma = 0.5 * (lo + hi)
    s1 = theta_inv(theta[0] + (k_star - 1 + sigma) * T) % loop.period
    s2 = theta_inv(theta[0] + (k_star + sigma) * T) % loop.period
    split_len = (s2 - s1) % loop.period
    if split_len <= 0 or split_len >= loop.period:
        raise NotApplicableError("degenerate split interval")

    chain = loop_to_chain(loop)
    if s1 > 1e-12 * loop.period:
        _, head, tail = split_chain_at_time(chain, s1)
        chain = chain_concat(tail, head)
    refined, sub1, sub2 = split_chain_at_time(chain, split_len)

    # snap the split node onto the start point so both sub-chains close
    start = refined.points[0]
    cut = sub1.points.shape[0] - 1
    gap = refined.points[cut] - start
    gap -= np.round(gap)
    adjust = float(np.linalg.norm(gap))
    pts = refined.points.copy()
    pts[cut] -= gap
    refined = Chain(pts, refined.durations)
    sub1 = refined.prefix(cut)
    sub2 = refined.suffix(cut)

    n_sub = max(32, loop.n // max(n - 1, 1))
    return SplitReport(
        split_time=split_len,
        refined=refined,
        sub_chains=(sub1, sub2),
        sub_loops=(chain_to_loop(sub1, n_sub), chain_to_loop(sub2, max(n_sub, loop.n // 2))),
        shift_time=s1,
        closure_adjustment=adjust,
        transverse_samples=list(mu),
    )
