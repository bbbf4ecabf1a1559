"""Free-period action on discrete loops: values, gradients, Hessians, indices.

The discrete action treats each segment as traversed at constant velocity
over its time slice, with the metric and 1-form evaluated at segment
midpoints:

    S_kappa = sum_j [ e^{2u(m_j)} |d_j|^2 / (2 dt) + theta(m_j) . d_j ] + kappa T.

This makes three identities exact (not just to truncation order):
juxtaposition additivity at shared nodes, S(x^n, nT) = n S(x, T), and
S_{k2} - S_{k1} = (k2 - k1) T.

Morse indices come from the exact Hessian of this discrete functional.
The z-twisted index applies the boundary condition xi(s+1) = z xi(s) to
complexified variations; the twisted spectra of a loop block-diagonalize
the periodic Hessian of its n-th iterate over the n-th roots of unity, so
the iteration formula for indices holds as an integer identity here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .config import RunConfig, DEFAULT
from .geometry import SurfaceModel
from .loops import Loop, LoopTangent, Chain

# -- period weight ------------------------------------------------------

# C^2 monotone quintic bridging T^2 (T <= 1/2) to 1 (T >= 1).
_BLEND = None


def _blend_coeffs():
    global _BLEND
    if _BLEND is None:
        # match value/slope/curvature of T^2 at 1/2 and of 1 at 1
        A = np.array([[0.5 ** k for k in range(6)],
                      [k * 0.5 ** (k - 1) if k >= 1 else 0.0 for k in range(6)],
                      [k * (k - 1) * 0.5 ** (k - 2) if k >= 2 else 0.0 for k in range(6)],
                      [1.0] * 6,
                      [float(k) for k in range(6)],
                      [float(k * (k - 1)) for k in range(6)]])
        rhs = np.array([0.25, 1.0, 2.0, 1.0, 0.0, 0.0])
        _BLEND = np.linalg.solve(A, rhs)
    return _BLEND


def period_weight(T: float) -> float:
    """Weight of the loop part of the metric on H^1(T,M) x (0,inf)."""
    if T <= 0.5:
        return T * T
    if T >= 1.0:
        return 1.0
    return float(np.polyval(_blend_coeffs()[::-1], T))


def period_weight_prime(T: float) -> float:
    if T <= 0.5:
        return 2.0 * T
    if T >= 1.0:
        return 0.0
    c = _blend_coeffs()
    return float(sum(k * c[k] * T ** (k - 1) for k in range(1, 6)))


# -- segment data -------------------------------------------------------


def _segment_fields(surface: SurfaceModel, mids: np.ndarray, order: int):
    """Midpoint geometry shared by value/derivative/Hessian assembly."""
    out = {"w": surface.conformal(mids), "theta": surface.theta(mids)}
    if order >= 1:
        out["du"] = surface.grad_u(mids)
        out["jac"] = surface.dtheta_jac(mids)   # jac[.., a, b] = d theta_a / d x_b
    if order >= 2:
        out["d2u"] = surface.hess_u(mids)
        out["d2theta"] = surface.theta_hess(mids)
    return out


def action(surface: SurfaceModel, loop: Loop, kappa: float) -> float:
    """Free-period action S_kappa of a uniform loop."""
    d = loop.deltas()
    f = _segment_fields(surface, loop.midpoints(), 0)
    kin = float(np.sum(f["w"] * np.sum(d * d, axis=1))) / (2.0 * loop.dt)
    circ = float(np.sum(f["theta"] * d))
    val = kin + circ + kappa * loop.period
    if not np.isfinite(val):
        raise ValueError("non-finite action (malformed loop)")
    return val


def chain_action(surface: SurfaceModel, chain: Chain, kappa: float) -> float:
    """Free-period action of a chain, segment durations honored."""
    d = chain.points[1:] - chain.points[:-1]
    mids = 0.5 * (chain.points[1:] + chain.points[:-1])
    f = _segment_fields(surface, mids, 0)
    kin = float(np.sum(f["w"] * np.sum(d * d, axis=1) / (2.0 * chain.durations)))
    circ = float(np.sum(f["theta"] * d))
    return kin + circ + kappa * chain.total_time


def kinetic(surface: SurfaceModel, loop: Loop) -> float:
    d = loop.deltas()
    w = surface.conformal(loop.midpoints())
    return float(np.sum(w * np.sum(d * d, axis=1))) / (2.0 * loop.dt)


def loop_length(surface: SurfaceModel, loop: Loop) -> float:
    d = loop.deltas()
    w = np.sqrt(surface.conformal(loop.midpoints()))
    return float(np.sum(w * np.linalg.norm(d, axis=1)))


def theta_integral(surface: SurfaceModel, loop: Loop) -> float:
    """Discrete line integral of the 1-form along the loop."""
    return float(np.sum(surface.theta(loop.midpoints()) * loop.deltas()))


def _grad_core(surface: SurfaceModel, d: np.ndarray, mids: np.ndarray, dt: float):
    """Per-segment first derivatives (dVa, dVb) and the kinetic sum."""
    f = _segment_fields(surface, mids, 1)
    w, du, th, jac = f["w"], f["du"], f["theta"], f["jac"]
    p = np.sum(d * d, axis=1) / (2.0 * dt)                  # |d|^2 / (2 dt)
    jac_d = np.einsum("jab,ja->jb", jac, d)                 # (d_b theta_a) d_a
    dVb = w[:, None] * (du * p[:, None] + d / dt) + th + 0.5 * jac_d
    dVa = w[:, None] * (du * p[:, None] - d / dt) - th + 0.5 * jac_d
    return dVa, dVb, float(np.sum(w * p))


def differential(surface: SurfaceModel, loop: Loop, kappa: float):
    """Exact differential of the discrete action: (dS_x (N,2), dS_T)."""
    dVa, dVb, kin = _grad_core(surface, loop.deltas(), loop.midpoints(), loop.dt)
    grad_x = dVa + np.roll(dVb, 1, axis=0)                  # dV_{j-1}/db + dV_j/da
    dS_T = float(-kin / (loop.n * loop.dt) + kappa)
    return grad_x, dS_T


def open_arc_value(surface: SurfaceModel, pts: np.ndarray, dt: float) -> float:
    """Fixed-schedule action of an open polyline (no kappa term)."""
    d = pts[1:] - pts[:-1]
    mids = 0.5 * (pts[1:] + pts[:-1])
    f = _segment_fields(surface, mids, 0)
    return float(np.sum(f["w"] * np.sum(d * d, axis=1)) / (2.0 * dt)
                 + np.sum(f["theta"] * d))


def open_arc_gradient(surface: SurfaceModel, pts: np.ndarray, dt: float) -> np.ndarray:
    """Gradient of the open-arc action w.r.t. interior points, shape (M-1, 2)."""
    d = pts[1:] - pts[:-1]
    mids = 0.5 * (pts[1:] + pts[:-1])
    dVa, dVb, _ = _grad_core(surface, d, mids, dt)
    return dVa[1:] + dVb[:-1]


# -- weighted loop metric ------------------------------------------------


class LoopMetric:
    """The H^1 Gram matrix of a loop, with the period-weighted product.

    <(xi1, t1), (xi2, t2)> = t1 t2 + phi(T) * xi1^T G xi2, where G is the
    discrete Sobolev form Q[g(xi, eta) + g(D xi, D eta)] with covariant
    along-the-curve derivatives.
    """

    def __init__(self, surface: SurfaceModel, loop: Loop):
        self.loop = loop
        self.weight = period_weight(loop.period)
        n = loop.n
        h = 1.0 / n
        g_node = surface.conformal(loop.samples)
        mids = loop.midpoints()
        g_mid = surface.conformal(mids)
        du = surface.grad_u(mids)
        wvec = loop.deltas() / h                            # ds-velocity
        alpha = np.sum(du * wvec, axis=1)
        beta = du[:, 1] * wvec[:, 0] - du[:, 0] * wvec[:, 1]

        eye = np.eye(2)
        rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
        C = alpha[:, None, None] * eye + beta[:, None, None] * rot   # Gamma(m_j)(w_j, .)
        A = -eye / h + 0.5 * C
        B = eye / h + 0.5 * C
        wgt = (h * g_mid)[:, None, None]
        AtA = wgt * np.einsum("jca,jcb->jab", A, A)
        AtB = wgt * np.einsum("jca,jcb->jab", A, B)
        BtB = wgt * np.einsum("jca,jcb->jab", B, B)

        G = np.zeros((2 * n, 2 * n))
        idx = np.arange(n)
        nxt = (idx + 1) % n
        rows_j = (2 * idx)[:, None, None] + np.array([[0, 0], [1, 1]])[None]
        cols_j = (2 * idx)[:, None, None] + np.array([[0, 1], [0, 1]])[None]
        rows_k = (2 * nxt)[:, None, None] + np.array([[0, 0], [1, 1]])[None]
        cols_k = (2 * nxt)[:, None, None] + np.array([[0, 1], [0, 1]])[None]
        np.add.at(G, (rows_j, cols_j), AtA)
        np.add.at(G, (rows_j, cols_k), AtB)
        np.add.at(G, (rows_k, cols_j), AtB.transpose(0, 2, 1))
        np.add.at(G, (rows_k, cols_k), BtB)
        G[2 * idx, 2 * idx] += h * g_node
        G[2 * idx + 1, 2 * idx + 1] += h * g_node
        self.G = G
        self._cho = cho_factor(G, lower=True, check_finite=False)

    def inner(self, t1: LoopTangent, t2: LoopTangent) -> float:
        a = t1.xi.reshape(-1)
        b = t2.xi.reshape(-1)
        return float(t1.tau * t2.tau + self.weight * (a @ self.G @ b))

    def norm(self, t: LoopTangent) -> float:
        return float(np.sqrt(max(self.inner(t, t), 0.0)))

    def solve(self, covec: np.ndarray) -> np.ndarray:
        return cho_solve(self._cho, covec, check_finite=False)


def gradient(surface: SurfaceModel, loop: Loop, kappa: float,
             metric: LoopMetric | None = None) -> tuple[LoopTangent, LoopMetric]:
    """Gradient of S_kappa in the period-weighted metric."""
    if metric is None:
        metric = LoopMetric(surface, loop)
    dS_x, dS_T = differential(surface, loop, kappa)
    xi = metric.solve(dS_x.reshape(-1)).reshape(-1, 2) / metric.weight
    return LoopTangent(xi, dS_T), metric


def descent_data(surface: SurfaceModel, loop: Loop, kappa: float):
    """One Gram solve worth of descent information.

    Returns (step_dir, weighted_norm, dS_pair, metric): step_dir is the
    product-metric (weight-free) preconditioned direction, better behaved
    for explicit stepping near T -> 0, while weighted_norm is the gradient
    norm in the period-weighted metric used by every stopping rule.  Both
    come from the same linear solve.
    """
    metric = LoopMetric(surface, loop)
    dS_x, dS_T = differential(surface, loop, kappa)
    xi_pre = metric.solve(dS_x.reshape(-1))
    wnorm = float(np.sqrt(max(float(dS_x.reshape(-1) @ xi_pre) / metric.weight
                              + dS_T * dS_T, 0.0)))
    step = LoopTangent(xi_pre.reshape(-1, 2), dS_T)
    return step, wnorm, (dS_x, dS_T), metric


def grad_norm(surface: SurfaceModel, loop: Loop, kappa: float,
              metric: LoopMetric | None = None) -> float:
    g, m = gradient(surface, loop, kappa, metric)
    return m.norm(g)


def directional_derivative(surface: SurfaceModel, loop: Loop, kappa: float,
                           tangent: LoopTangent) -> float:
    dS_x, dS_T = differential(surface, loop, kappa)
    return float(np.sum(dS_x * tangent.xi) + dS_T * tangent.tau)


def phase_direction(loop: Loop) -> LoopTangent:
    """Tangent along the reparametrization orbit (centered velocity)."""
    ext = np.vstack([loop.samples[-1] - loop.winding_vec(),
                     loop.samples,
                     loop.samples[0] + loop.winding_vec()])
    xi = 0.5 * (ext[2:] - ext[:-2])
    return LoopTangent(xi, 0.0)


# -- Hessians and index counts -------------------------------------------


def _hess_core(surface: SurfaceModel, d: np.ndarray, mids: np.ndarray, dt: float):
    """Exact second derivatives of the per-segment action term.

    Returns (Haa, Hab, Hbb, c_a, c_b, gam): position blocks (M, 2, 2),
    the mixed dt-position rows, and the (M,) array of d2V/d dt^2.
    """
    f = _segment_fields(surface, mids, 2)
    w, du, jac = f["w"], f["du"], f["jac"]
    d2u, d2th = f["d2u"], f["d2theta"]

    p = np.sum(d * d, axis=1) / (2.0 * dt)

    uu = np.einsum("jc,je->jce", du, du)
    core = w[:, None, None] * (p[:, None, None] * (uu + 0.5 * d2u))
    ud = np.einsum("jc,je->jce", du, d) / dt
    du_d = w[:, None, None] * (ud + ud.transpose(0, 2, 1))       # w (u_c d_e + u_e d_c)/dt
    du_m = w[:, None, None] * (ud - ud.transpose(0, 2, 1))       # w (u_c d_e - u_e d_c)/dt
    kron = (w / dt)[:, None, None] * np.eye(2)[None, :, :]
    th_dd = 0.25 * np.einsum("jace,ja->jce", d2th, d)
    # jac[j, a, b] = d_b theta_a; symmetric and antisymmetric parts in (c, e)
    js = 0.5 * (jac.transpose(0, 2, 1) + jac)
    ja = 0.5 * (jac.transpose(0, 2, 1) - jac)

    Hbb = core + du_d + kron + th_dd + js
    Haa = core - du_d + kron + th_dd - js
    Hab = core + du_m - kron + th_dd + ja

    # dt couplings
    q = w[:, None] * (du * p[:, None])
    r = w[:, None] * (d / dt)
    c_a = -(q - r) / dt                                           # d2V / d dt d a
    c_b = -(q + r) / dt                                           # d2V / d dt d b
    gam = 2.0 * w * p / (dt * dt)                                 # d2V / d dt^2
    return Haa, Hab, Hbb, c_a, c_b, gam


def _segment_hessian_blocks(surface: SurfaceModel, loop: Loop):
    return _hess_core(surface, loop.deltas(), loop.midpoints(), loop.dt)


def open_arc_hessian(surface: SurfaceModel, pts: np.ndarray, dt: float) -> np.ndarray:
    """Hessian of the open-arc action in the interior points, dense symmetric."""
    d = pts[1:] - pts[:-1]
    mids = 0.5 * (pts[1:] + pts[:-1])
    Haa, Hab, Hbb, _, _, _ = _hess_core(surface, d, mids, dt)
    m = pts.shape[0] - 2                                          # interior count
    H = np.zeros((2 * m, 2 * m))
    for i in range(m):
        ii = 2 * i
        H[ii:ii + 2, ii:ii + 2] += Hbb[i] + Haa[i + 1]
        if i + 1 < m:
            H[ii:ii + 2, ii + 2:ii + 4] += Hab[i + 1]
            H[ii + 2:ii + 4, ii:ii + 2] += Hab[i + 1].T
    return H


_ROW_PAT = np.array([[0, 0], [1, 1]])
_COL_PAT = np.array([[0, 1], [0, 1]])


def _scatter_blocks(H, rows, cols, blocks):
    np.add.at(H, ((2 * rows)[:, None, None] + _ROW_PAT[None],
                  (2 * cols)[:, None, None] + _COL_PAT[None]), blocks)


def twisted_hessian(surface: SurfaceModel, loop: Loop, z: complex) -> np.ndarray:
    """Hermitian matrix of the fixed-period second variation, z-twisted."""
    Haa, Hab, Hbb, _, _, _ = _segment_hessian_blocks(surface, loop)
    n = loop.n
    idx = np.arange(n)
    nxt = (idx + 1) % n
    if abs(complex(z) - 1.0) < 1e-15:
        H = np.zeros((2 * n, 2 * n))
        _scatter_blocks(H, idx, idx, Haa)
        _scatter_blocks(H, nxt, nxt, Hbb)
        _scatter_blocks(H, idx, nxt, Hab)
        _scatter_blocks(H, nxt, idx, Hab.transpose(0, 2, 1))
        return H.astype(complex)
    zc = complex(z)
    H = np.zeros((2 * n, 2 * n), dtype=complex)
    _scatter_blocks(H, idx, idx, Haa.astype(complex))
    _scatter_blocks(H, nxt, nxt, Hbb.astype(complex))
    wrap = np.ones(n, dtype=complex)
    wrap[n - 1] = zc                       # the closing segment carries the twist
    _scatter_blocks(H, idx, nxt, Hab * wrap[:, None, None])
    _scatter_blocks(H, nxt, idx, Hab.transpose(0, 2, 1) * np.conj(wrap)[:, None, None])
    return H


def free_period_hessian(surface: SurfaceModel, loop: Loop) -> np.ndarray:
    """Real symmetric (2N+1) Hessian of S_kappa in (samples, T)."""
    Haa, Hab, Hbb, c_a, c_b, gam = _segment_hessian_blocks(surface, loop)
    n = loop.n
    H = np.zeros((2 * n + 1, 2 * n + 1))
    H[:2 * n, :2 * n] = twisted_hessian(surface, loop, 1.0).real
    col = (c_a + np.roll(c_b, 1, axis=0)).reshape(-1) / n         # d/dT = (1/N) d/d dt
    H[:2 * n, -1] = col
    H[-1, :2 * n] = col
    H[-1, -1] = float(np.sum(gam)) / (n * n)
    return H


@dataclass(frozen=True)
class IndexCount:
    """Negative/zero eigenvalue counts with the degeneracy policy applied."""

    negative: int
    marginal: int
    scale: float
    min_abs: float

    @property
    def clean(self) -> bool:
        return self.marginal == 0


def count_inertia(eigs: np.ndarray, degeneracy_rel: float) -> IndexCount:
    scale = float(np.max(np.abs(eigs))) if eigs.size else 0.0
    tol = degeneracy_rel * scale
    neg = int(np.sum(eigs < -tol))
    marg = int(np.sum(np.abs(eigs) <= tol))
    return IndexCount(neg, marg, scale, float(np.min(np.abs(eigs))) if eigs.size else 0.0)


def twisted_index(surface: SurfaceModel, loop: Loop, kappa: float, z: complex,
                  cfg: RunConfig = DEFAULT) -> IndexCount:
    """Morse index of the fixed-period action under the z-twist.

    At z = 1 the reparametrization symmetry forces a kernel, so the wide
    degeneracy band applies and its marginal count is expected.  Away
    from z = 1 no kernel is forced and only a roundoff-level band is
    used; otherwise the quadratically-small eigenvalues that carry the
    splitting numbers would be swallowed.
    """
    if abs(abs(z) - 1.0) > 1e-9:
        raise ValueError("twist must lie on the unit circle")
    H = twisted_hessian(surface, loop, z)
    eigs = np.linalg.eigvalsh(H)
    at_one = abs(complex(z) - 1.0) < 1e-12
    rel = cfg.tolerances.degeneracy_rel if at_one else cfg.tolerances.twist_degeneracy_rel
    return count_inertia(eigs, rel)


def fixed_period_index(surface: SurfaceModel, loop: Loop, kappa: float,
                       cfg: RunConfig = DEFAULT) -> IndexCount:
    return twisted_index(surface, loop, kappa, 1.0, cfg)


def free_period_index(surface: SurfaceModel, loop: Loop, kappa: float,
                      cfg: RunConfig = DEFAULT) -> IndexCount:
    H = free_period_hessian(surface, loop)
    eigs = np.linalg.eigvalsh(H)
    return count_inertia(eigs, cfg.tolerances.degeneracy_rel)
