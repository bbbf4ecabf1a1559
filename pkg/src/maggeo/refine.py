"""Closure of near-critical candidates: discrete Newton polish and shooting.

Two refinement levels coexist.  ``polish_loop`` drives a Loop to a critical
point of the *discrete* free-period action (bordered Newton with a phase
condition), which makes gradient-norm and Hessian-index queries on loops
exact to solver tolerance.  ``refine_orbit`` closes a trajectory of the
continuous-time flow (single shooting with energy and phase rows, solved
by least squares) and is the source of Orbit records.
"""

from __future__ import annotations

import numpy as np

from . import action as act
from . import dynamics as dyn
from .config import RunConfig, DEFAULT
from .errors import RefineDivergenceError
from .geometry import SurfaceModel
from .loops import Loop
from .dynamics import Orbit, PhasePoint


def polish_loop(surface: SurfaceModel, loop: Loop, kappa: float,
                cfg: RunConfig = DEFAULT, max_iter: int = 30,
                tol: float = 1e-12) -> tuple[Loop, float]:
    """Newton-polish a loop to a discrete critical point of S_kappa.

    The linear system is bordered with the reparametrization direction to
    remove the phase gauge; works at minimizers and saddles alike.
    Returns the polished loop and the final sup-norm of the differential.
    """
    cur = loop
    dS_x, dS_T = act.differential(surface, cur, kappa)
    res = max(float(np.max(np.abs(dS_x))), abs(dS_T))
    scale = max(1.0, abs(act.action(surface, cur, kappa)))
    for _ in range(max_iter):
        if res <= tol * scale:
            break
        n = cur.n
        H = act.free_period_hessian(surface, cur)
        d = np.concatenate([act.phase_direction(cur).xi.reshape(-1), [0.0]])
        A = np.zeros((2 * n + 2, 2 * n + 2))
        A[:2 * n + 1, :2 * n + 1] = H
        A[:2 * n + 1, -1] = d
        A[-1, :2 * n + 1] = d
        rhs = np.concatenate([-dS_x.reshape(-1), [-dS_T, 0.0]])
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        step_x = sol[:2 * n].reshape(-1, 2)
        step_T = sol[2 * n]
        # damped update: keep the period positive and the residual shrinking
        lam = 1.0
        improved = False
        for _ in range(20):
            T_new = cur.period + lam * step_T
            if T_new > 0:
                cand = Loop(cur.samples + lam * step_x, T_new, cur.winding)
                gx, gT = act.differential(surface, cand, kappa)
                res_new = max(float(np.max(np.abs(gx))), abs(gT))
                if res_new < res:
                    cur, dS_x, dS_T, res = cand, gx, gT, res_new
                    improved = True
                    break
            lam *= 0.5
        if not improved:
            break
    return cur, res


def orbit_to_loop(surface: SurfaceModel, orbit: Orbit, n_samples: int,
                  cfg: RunConfig = DEFAULT, polish: bool = True) -> Loop:
    """Sample the orbit uniformly in time and polish to a discrete critical point."""
    times = orbit.period * np.arange(n_samples) / n_samples
    states = dyn.sample_flow(surface, orbit.state, times, cfg)
    loop = Loop(states[:, :2].copy(), orbit.period, orbit.winding)
    if polish:
        loop, _ = polish_loop(surface, loop, orbit.kappa, cfg)
    return loop


def _energy_row(surface: SurfaceModel, z: np.ndarray) -> np.ndarray:
    x, v = z[:2], z[2:]
    e2u = float(surface.conformal(x))
    du = surface.grad_u(x)
    vsq = float(np.dot(v, v))
    return np.concatenate([e2u * vsq * du, e2u * v])


def loop_initial_state(surface: SurfaceModel, loop: Loop, kappa: float | None = None
                       ) -> PhasePoint:
    """Phase point at sample 0 with centered velocity (optionally rescaled to kappa)."""
    ext_prev = loop.samples[-1] - loop.winding_vec()
    v = (loop.samples[1] - ext_prev) / (2.0 * loop.dt)
    state = PhasePoint.of(loop.samples[0], v)
    if kappa is not None:
        e = dyn.energy(surface, state)
        if e > 0:
            state = PhasePoint(state.x, state.v * np.sqrt(kappa / e))
    return state


def refine_orbit(surface: SurfaceModel, seed, kappa: float,
                 cfg: RunConfig = DEFAULT, max_iter: int | None = None,
                 segments: int | None = None,
                 anchor: tuple[PhasePoint, np.ndarray] | None = None) -> Orbit:
    """Multiple-shooting Newton closure of a near-periodic candidate.

    ``seed`` is a Loop or a (PhasePoint, period) pair.  The period is cut
    into shooting segments so that strongly unstable orbits stay inside
    the Newton basin; unknowns are the segment start states plus the
    period, equations are the junction matches, the energy of the first
    state, and a phase condition.  Solved by damped least squares.
    """
    if isinstance(seed, Loop):
        loop = seed
        period = loop.period
        expected_winding = loop.winding_vec()
    else:
        state0, period = seed
        probe = dyn.integrate_flow(surface, state0, period, cfg)
        expected_winding = np.round(probe.x - state0.x)
        loop = None
    if max_iter is None:
        max_iter = cfg.budgets.newton_max_iter
    if segments is None:
        segments = int(min(16, max(4, np.ceil(period / 0.4))))
    K = segments

    # segment start states
    zs = np.empty((K, 4))
    if loop is not None:
        stride = loop.n // K if loop.n >= 2 * K else 0
        if stride == 0:
            base = loop_initial_state(surface, loop, kappa)
            ts = period * np.arange(K) / K
            states = dyn.sample_flow(surface, base, ts, cfg)
            zs[:] = states
        else:
            for i in range(K):
                shifted = np.vstack([loop.samples[i * stride:],
                                     loop.samples[:i * stride] + loop.winding_vec()])
                sub = Loop(shifted, loop.period, loop.winding)
                zs[i] = loop_initial_state(surface, sub, kappa).as_z()
    else:
        ts = period * np.arange(K) / K
        zs[:] = dyn.sample_flow(surface, state0, ts, cfg)
    T = float(period)
    if anchor is None:
        anchor_z = zs[0].copy()
        flow_dir = dyn.el_field(surface, PhasePoint.from_z(anchor_z))
    else:
        anchor_z = anchor[0].as_z()
        flow_dir = np.asarray(anchor[1], dtype=float)
    wvec = np.concatenate([expected_winding, [0.0, 0.0]])
    tol = cfg.tolerances.refine_residual
    history = []

    n_unknown = 4 * K + 1
    n_eq = 4 * K + 2

    def residual_only(zz, TT):
        # cheap variant for line searches: no variational integration
        F = np.zeros(n_eq)
        h = TT / K
        for i in range(K):
            ze = dyn.integrate_flow(surface, PhasePoint.from_z(zz[i]), h, cfg).as_z()
            nxt = (i + 1) % K
            F[4 * i:4 * i + 4] = ze - zz[nxt] - (wvec if i == K - 1 else 0.0)
        F[4 * K] = dyn.energy(surface, PhasePoint.from_z(zz[0])) - kappa
        F[4 * K + 1] = float(np.dot(zz[0] - anchor_z, flow_dir))
        return F

    def assemble(zz, TT):
        F = np.zeros(n_eq)
        J = np.zeros((n_eq, n_unknown))
        h = TT / K
        for i in range(K):
            endpoint, M = dyn.flow_with_jacobian(
                surface, PhasePoint.from_z(zz[i]), h, cfg)
            ze = endpoint.as_z()
            nxt = (i + 1) % K
            r = ze - zz[nxt] - (wvec if i == K - 1 else 0.0)
            F[4 * i:4 * i + 4] = r
            J[4 * i:4 * i + 4, 4 * i:4 * i + 4] = M
            J[4 * i:4 * i + 4, 4 * nxt:4 * nxt + 4] -= np.eye(4)
            J[4 * i:4 * i + 4, -1] = dyn.el_field(surface, endpoint) / K
        F[4 * K] = dyn.energy(surface, PhasePoint.from_z(zz[0])) - kappa
        J[4 * K, :4] = _energy_row(surface, zz[0])
        F[4 * K + 1] = float(np.dot(zz[0] - anchor_z, flow_dir))
        J[4 * K + 1, :4] = flow_dir
        return F, J

    F, J = assemble(zs, T)
    best = float(np.linalg.norm(F))
    for it in range(max_iter):
        closure = float(np.max(np.abs(F[:4 * K])))
        history.append({"iter": it, "closure": closure, "energy_err": abs(F[4 * K])})
        if (closure <= tol and abs(F[4 * K]) <= 1e-12 * max(1.0, abs(kappa))
                and abs(F[4 * K + 1]) <= tol):
            break
        step, *_ = np.linalg.lstsq(J, -F, rcond=1e-12)
        lam, moved = 1.0, False
        for _ in range(15):
            zs_new = zs + lam * step[:4 * K].reshape(K, 4)
            T_new = T + lam * step[-1]
            if T_new > cfg.tolerances.period_min:
                F_new = residual_only(zs_new, T_new)
                if float(np.linalg.norm(F_new)) < best:
                    zs, T = zs_new, T_new
                    F, J = assemble(zs, T)
                    best = float(np.linalg.norm(F))
                    moved = True
                    break
            lam *= 0.5
        if not moved:
            raise RefineDivergenceError(
                f"shooting stalled at closure {float(np.max(np.abs(F[:4 * K]))):.3e}",
                history)
    else:
        raise RefineDivergenceError(
            f"no convergence in {max_iter} iterations "
            f"(closure {float(np.max(np.abs(F[:4 * K]))):.3e})", history)

    winding = (int(round(expected_winding[0])), int(round(expected_winding[1])))
    return Orbit(
        state=PhasePoint.from_z(zs[0]),
        period=T,
        kappa=kappa,
        residual=float(np.max(np.abs(F[:4 * K]))),
        winding=winding,
        checkpoints=zs.copy(),
    )


def revalidate_orbit(surface: SurfaceModel, orbit: Orbit, cfg: RunConfig = DEFAULT) -> dict:
    """Independent re-checks of an orbit record.

    The closure certificate is the stored multiple-shooting chain: every
    checkpoint must flow into the next (fresh integration).  A plain
    full-period sweep is also reported; for strongly unstable orbits its
    defect is conditioning-limited and scales with the monodromy norm.
    """
    sweep = dyn.return_residual(surface, orbit.state, orbit.period, cfg,
                                winding=orbit.winding)
    if orbit.checkpoints is not None and orbit.checkpoints.shape[0] >= 2:
        zs = orbit.checkpoints
        K = zs.shape[0]
        h = orbit.period / K
        wvec = np.concatenate([np.array(orbit.winding, dtype=float), [0.0, 0.0]])
        defect = 0.0
        for i in range(K):
            ze = dyn.integrate_flow(surface, dyn.PhasePoint.from_z(zs[i]), h, cfg).as_z()
            target = zs[(i + 1) % K] + (wvec if i == K - 1 else 0.0)
            defect = max(defect, float(np.max(np.abs(ze - target))))
        residual = defect
    else:
        residual = sweep
    return {
        "residual": residual,
        "full_sweep_closure": sweep,
        "energy_rel": dyn.orbit_energy_residual(surface, orbit, cfg),
    }
