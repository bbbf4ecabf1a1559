"""Magnetic geodesic flow: integration, Legendre transform, monodromy.

Positions live on the universal cover R^2 (the Fourier data is periodic,
so no chart reduction is ever needed); integer windings are read off at
period close.  Monodromy matrices are reported in cotangent chart
coordinates (x, y, p_x, p_y), where the symplectic form is the constant
matrix J below and eigenvalue computations are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _flowcore
from .config import RunConfig, DEFAULT
from .errors import FlowBlowupError
from .geometry import SurfaceModel

# omega(a, b) = a^T J_SYMP b in coordinates (q1, q2, p1, p2)
J_SYMP = np.array(
    [
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ]
)


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    v: np.ndarray

    @staticmethod
    def of(x, v) -> "PhasePoint":
        return PhasePoint(np.asarray(x, dtype=float).copy(), np.asarray(v, dtype=float).copy())

    def as_z(self) -> np.ndarray:
        return np.concatenate([self.x, self.v])

    @staticmethod
    def from_z(z) -> "PhasePoint":
        z = np.asarray(z, dtype=float)
        return PhasePoint(z[:2].copy(), z[2:].copy())


@dataclass(frozen=True)
class Orbit:
    """A refined periodic solution.

    ``checkpoints`` holds the multiple-shooting segment starts (K x 4);
    they are the orbit's closure certificate: each flows into the next
    over T/K, the last into the first shifted by the winding.  Keeping
    them makes revalidation meaningful for strongly unstable orbits,
    where a single full-period sweep is conditioning-limited.
    """

    state: PhasePoint
    period: float
    kappa: float
    residual: float
    winding: tuple[int, int]
    checkpoints: np.ndarray | None = None

    def to_dict(self) -> dict:
        d = {
            "x": [float(v) for v in self.state.x],
            "v": [float(v) for v in self.state.v],
            "period": self.period,
            "kappa": self.kappa,
            "residual": self.residual,
            "winding": list(self.winding),
        }
        if self.checkpoints is not None:
            d["checkpoints"] = [[float(v) for v in row] for row in self.checkpoints]
        return d


def orbit_from_dict(data: dict) -> Orbit:
    cp = data.get("checkpoints")
    return Orbit(
        state=PhasePoint.of(data["x"], data["v"]),
        period=float(data["period"]),
        kappa=float(data["kappa"]),
        residual=float(data.get("residual", np.nan)),
        winding=(int(data["winding"][0]), int(data["winding"][1])),
        checkpoints=None if cp is None else np.array(cp, dtype=float),
    )


@dataclass(frozen=True)
class Monodromy:
    """Differential of the flow over one period, cotangent trivialization."""

    M: np.ndarray               # 4x4, coordinates (x, y, p_x, p_y)
    M_tangent: np.ndarray       # same map in (x, y, v_x, v_y) coordinates
    basepoint: PhasePoint
    period: float


def energy(surface: SurfaceModel, state: PhasePoint) -> float:
    """Kinetic energy E = |v|^2_g / 2."""
    return 0.5 * float(surface.conformal(state.x)) * float(np.dot(state.v, state.v))


def el_field(surface: SurfaceModel, state: PhasePoint) -> np.ndarray:
    """Right-hand side of the second-order system, as a 4-vector."""
    return _flowcore.rhs(state.as_z(), _flowcore.surface_arrays(surface))


def _nsteps(t: float, cfg: RunConfig) -> int:
    d = cfg.discretization
    return max(d.min_flow_steps, int(math.ceil(abs(t) / d.dt_max)))


def integrate_flow(surface: SurfaceModel, state: PhasePoint, t: float,
                   cfg: RunConfig = DEFAULT, project_energy: bool = False) -> PhasePoint:
    """Flow the phase point for time t with fixed-step RK4.

    ``project_energy`` rescales |v| at the end so the kinetic energy
    matches the initial one exactly; keep it off when the map is being
    differentiated.
    """
    if not math.isfinite(t):
        raise FlowBlowupError("non-finite integration time")
    if t == 0.0:
        return state
    arrs = _flowcore.surface_arrays(surface)
    z = _flowcore.rk4(state.as_z(), t, _nsteps(t, cfg), arrs)
    if not np.all(np.isfinite(z)):
        raise FlowBlowupError(f"trajectory blew up within time {t}")
    out = PhasePoint.from_z(z)
    if project_energy:
        e0 = energy(surface, state)
        e1 = energy(surface, out)
        if e1 > 0.0:
            out = PhasePoint(out.x, out.v * math.sqrt(e0 / e1))
    return out


def sample_flow(surface: SurfaceModel, state: PhasePoint, times,
                cfg: RunConfig = DEFAULT) -> np.ndarray:
    """States (len(times), 4) at the given increasing times starting from 0."""
    times = np.asarray(times, dtype=float)
    arrs = _flowcore.surface_arrays(surface)
    out = np.empty((times.size, 4))
    z = state.as_z()
    t_prev = 0.0
    for i, t in enumerate(times):
        dt = t - t_prev
        if dt < 0:
            raise ValueError("times must be non-decreasing")
        if dt > 0:
            z = _flowcore.rk4(z, dt, _nsteps(dt, cfg), arrs)
            t_prev = t
        out[i] = z
    if not np.all(np.isfinite(out)):
        raise FlowBlowupError("trajectory blew up while sampling")
    return out


def flow_with_jacobian(surface: SurfaceModel, state: PhasePoint, t: float,
                       cfg: RunConfig = DEFAULT) -> tuple[PhasePoint, np.ndarray]:
    """Flow map and its exact Jacobian in tangent coordinates.

    The variational equations ride along the same RK4 stages, so the
    Jacobian is the derivative of the discrete flow map itself.
    """
    arrs = _flowcore.surface_arrays(surface)
    z, M = _flowcore.rk4_var(state.as_z(), np.eye(4), t, _nsteps(t, cfg), arrs)
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(M))):
        raise FlowBlowupError("variational integration blew up")
    return PhasePoint.from_z(z), M


# -- Legendre transform ------------------------------------------------


def legendre(surface: SurfaceModel, state: PhasePoint) -> tuple[np.ndarray, np.ndarray]:
    """(x, p) with p = g v + theta."""
    p = float(surface.conformal(state.x)) * state.v + surface.theta(state.x)
    return state.x.copy(), p


def legendre_inverse(surface: SurfaceModel, x, p) -> PhasePoint:
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    v = (p - surface.theta(x)) / float(surface.conformal(x))
    return PhasePoint(x.copy(), v)


def hamiltonian(surface: SurfaceModel, x, p) -> float:
    """H(x, p) = |p - theta|^2_* / 2 (dual metric norm)."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(p, dtype=float) - surface.theta(x)
    return 0.5 * float(np.dot(w, w)) / float(surface.conformal(x))


def legendre_jacobian(surface: SurfaceModel, state: PhasePoint) -> np.ndarray:
    """Jacobian of (x, v) -> (x, p) at the given phase point."""
    e2u = float(surface.conformal(state.x))
    du = surface.grad_u(state.x)
    jac_theta = surface.dtheta_jac(state.x)
    A = 2.0 * e2u * np.outer(state.v, du) + jac_theta
    D = np.eye(4)
    D[2:, :2] = A
    D[2:, 2:] = e2u * np.eye(2)
    return D


def hamiltonian_field(surface: SurfaceModel, state: PhasePoint) -> np.ndarray:
    """X_H at the Legendre image of the phase point, cotangent coordinates."""
    D = legendre_jacobian(surface, state)
    return D @ el_field(surface, state)


def linearize_flow(surface: SurfaceModel, orbit: Orbit, cfg: RunConfig = DEFAULT) -> Monodromy:
    """Monodromy over one period along the orbit.

    Integrated in tangent coordinates and conjugated to cotangent chart
    coordinates at the basepoint (start = end for a closed orbit), where
    M is symplectic with respect to the constant form J_SYMP.
    """
    end, M_tan = flow_with_jacobian(surface, orbit.state, orbit.period, cfg)
    D = legendre_jacobian(surface, orbit.state)
    M_cot = D @ M_tan @ np.linalg.inv(D)
    return Monodromy(M=M_cot, M_tangent=M_tan, basepoint=orbit.state, period=orbit.period)


def omega(a, b) -> float:
    """Standard symplectic pairing in (q, p) chart coordinates."""
    return float(np.asarray(a) @ J_SYMP @ np.asarray(b))


def symplectic_defect(M: np.ndarray) -> float:
    return float(np.max(np.abs(M.T @ J_SYMP @ M - J_SYMP)))


def lagrangian(surface: SurfaceModel, states: np.ndarray) -> np.ndarray:
    """L = |v|^2_g / 2 + theta(v) evaluated on an array of (x, v) rows."""
    states = np.atleast_2d(states)
    x, v = states[:, :2], states[:, 2:]
    kin = 0.5 * surface.conformal(x) * np.sum(v * v, axis=1)
    circ = np.sum(surface.theta(x) * v, axis=1)
    return kin + circ


def orbit_action(surface: SurfaceModel, orbit: Orbit, kappa: float | None = None,
                 cfg: RunConfig = DEFAULT, n_samples: int = 1024) -> float:
    """Free-period action of the continuous orbit.

    Uniform trapezoid over the period; for a smooth periodic integrand
    this converges spectrally, so the value is integrator-limited.
    """
    if kappa is None:
        kappa = orbit.kappa
    ts = orbit.period * np.arange(n_samples) / n_samples
    states = sample_flow(surface, orbit.state, ts, cfg)
    return float(orbit.period * (np.mean(lagrangian(surface, states)) + kappa))


def orbit_energy_residual(surface: SurfaceModel, orbit: Orbit,
                          cfg: RunConfig = DEFAULT, samples: int = 16) -> float:
    """max |E - kappa| / kappa along the orbit."""
    ts = np.linspace(0.0, orbit.period, samples, endpoint=False)
    states = sample_flow(surface, orbit.state, ts, cfg)
    errs = [abs(energy(surface, PhasePoint.from_z(z)) - orbit.kappa) for z in states]
    return max(errs) / abs(orbit.kappa)


def return_residual(surface: SurfaceModel, state: PhasePoint, period: float,
                    cfg: RunConfig = DEFAULT, winding=None) -> float:
    """Closure defect of a candidate orbit, modulo the winding translation."""
    out = integrate_flow(surface, state, period, cfg)
    d = out.as_z() - state.as_z()
    if winding is None:
        d[:2] -= np.round(d[:2])
    else:
        d[:2] -= np.asarray(winding, dtype=float)
    return float(np.linalg.norm(d))


def write_trajectory(path, surface: SurfaceModel, state: PhasePoint, t_final: float,
                     n_samples: int, cfg: RunConfig = DEFAULT) -> np.ndarray:
    """Dump t, x, y, v_x, v_y, E rows; returns the sampled states."""
    times = np.linspace(0.0, t_final, n_samples)
    states = sample_flow(surface, state, times, cfg)
    with open(path, "w") as fh:
        fh.write("t,x,y,v_x,v_y,E\n")
        for t, z in zip(times, states):
            e = energy(surface, PhasePoint.from_z(z))
            fh.write(
                f"{t:.12g},{z[0]:.12g},{z[1]:.12g},{z[2]:.12g},{z[3]:.12g},{e:.12g}\n"
            )
    return states
