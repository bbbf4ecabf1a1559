"""Orbit cylinders: continue a closed orbit in energy, extract T(kappa) data.

A transversally non-degenerate orbit sits in a unique one-parameter
family of closed orbits parametrized by energy.  The continuation keeps a
fixed transverse section (phase anchored at the seed orbit), so the
family's initial points are comparable across energies; the section
derivative -dz/dkappa and the period slope T'(kappa) come from central
finite differences with a Richardson consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from . import action as act
from .config import RunConfig, DEFAULT
from .errors import RefineDivergenceError
from .geometry import SurfaceModel
from .dynamics import Orbit, PhasePoint
from .refine import refine_orbit, orbit_to_loop


@dataclass
class OrbitCylinder:
    kappas: np.ndarray
    orbits: list
    periods: np.ndarray
    actions: np.ndarray
    anchor_index: int
    zeta: np.ndarray                  # -d z_kappa(0) / d kappa, cotangent coords
    zeta_consistency: float           # Richardson defect of the difference quotient
    t_prime: float                    # T'(kappa) at the anchor
    t_prime_consistency: float
    truncated: bool = False
    notes: dict = field(default_factory=dict)

    def sample(self, i: int) -> tuple[float, Orbit]:
        return float(self.kappas[i]), self.orbits[i]


def continue_cylinder(surface: SurfaceModel, orbit: Orbit, kappa_bar: float,
                      eps: float, steps: int = 4,
                      cfg: RunConfig = DEFAULT) -> OrbitCylinder:
    """Predictor-corrector continuation over [kappa - eps, kappa + eps].

    The corrector is the multiple-shooting closure with the phase section
    pinned at the seed orbit.  Finite-difference offsets eps/8 and eps/16
    are always included so the derivative data is available.
    """
    if abs(orbit.kappa - kappa_bar) > 1e-9 * max(1.0, kappa_bar):
        raise ValueError("orbit energy disagrees with kappa_bar")
    fd = eps / 8.0
    base = {round(eps * j / steps, 15) for j in range(1, steps + 1)}
    base |= {fd, fd / 2.0}
    offsets = sorted(base)
    anchor_state = orbit.state
    anchor_dir = dyn.el_field(surface, orbit.state)

    samples: dict[float, Orbit] = {0.0: orbit}
    truncated = False
    notes = {}
    for side in (+1.0, -1.0):
        prev_off, prev = 0.0, orbit
        prev2 = None
        for off in offsets:
            kap = kappa_bar + side * off
            state = prev.state
            period = prev.period
            if prev2 is not None:
                # secant predictor in (state, period)
                o2, orb2 = prev2
                frac = (side * off - prev_off * side) / (prev_off * side - o2 * side) \
                    if prev_off != o2 else 0.0
                dz = prev.state.as_z() - orb2.state.as_z()
                state = PhasePoint.from_z(prev.state.as_z() + frac * dz)
                period = prev.period + frac * (prev.period - orb2.period)
            try:
                refined = refine_orbit(surface, (state, period), kap, cfg,
                                       anchor=(anchor_state, anchor_dir))
            except RefineDivergenceError as exc:
                truncated = True
                notes[f"truncated_side_{int(side)}"] = str(exc)
                break
            samples[side * off] = refined
            prev2 = (prev_off, prev)
            prev_off, prev = side * off, refined

    offs = np.array(sorted(samples))
    orbits = [samples[o] for o in offs]
    kappas = kappa_bar + offs
    periods = np.array([o.period for o in orbits])
    anchor_index = int(np.argmin(np.abs(offs)))

    def cot(o: Orbit) -> np.ndarray:
        x, p = dyn.legendre(surface, o.state)
        return np.concatenate([x, p])

    required = {fd, -fd, fd / 2, -fd / 2}
    if required <= set(np.round(offs, 15)):
        def at(o):
            return samples[min(samples, key=lambda k: abs(k - o))]

        def tp(d):
            return (at(d).period - at(-d).period) / (2 * d)

        def zt(d):
            return -(cot(at(d)) - cot(at(-d))) / (2 * d)

        tp1, tp2 = tp(fd), tp(fd / 2)
        z1, z2 = zt(fd), zt(fd / 2)
        t_prime = (4 * tp2 - tp1) / 3.0
        zeta = (4 * z2 - z1) / 3.0
        t_prime_cons = abs(tp2 - tp1)
        zeta_cons = float(np.max(np.abs(z2 - z1)))
    else:
        t_prime = np.nan
        zeta = np.full(4, np.nan)
        t_prime_cons = np.inf
        zeta_cons = np.inf
        truncated = True
        notes["derivative_offsets_missing"] = True

    actions = np.array([dyn.orbit_action(surface, o, cfg=cfg) for o in orbits])
    return OrbitCylinder(
        kappas=kappas,
        orbits=orbits,
        periods=periods,
        actions=actions,
        anchor_index=anchor_index,
        zeta=zeta,
        zeta_consistency=zeta_cons,
        t_prime=t_prime,
        t_prime_consistency=t_prime_cons,
        truncated=truncated,
        notes=notes,
    )


def nondegeneracy_margin(P: np.ndarray) -> float:
    """min |lambda - 1| over the spectrum of the reduced return map."""
    return float(np.min(np.abs(np.linalg.eigvals(np.asarray(P)) - 1.0)))


def write_cylinder_csv(path, cyl: OrbitCylinder, indices=None) -> None:
    with open(path, "w") as fh:
        fh.write("kappa,T,action,index\n")
        for i in range(len(cyl.kappas)):
            idx = "" if indices is None else indices[i]
            fh.write(f"{cyl.kappas[i]:.12g},{cyl.periods[i]:.12g},"
                     f"{cyl.actions[i]:.12g},{idx}\n")
