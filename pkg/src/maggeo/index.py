"""Index theory for closed orbits: monodromy reduction, twisted-index
function on the unit circle, splitting numbers, mean index, stability.

The reduction splits the tangent space at the orbit into the plane V
spanned by the flow direction and the energy-section derivative zeta
(where the return map is a unit shear with entry T'(kappa)) and its
symplectic complement W carrying the reduced return map P.  The index
function z -> Lambda(z) comes from the variational side (twisted-boundary
Morse indices of the discrete fixed-period action), so the iteration
formula is an exact integer identity by block diagonalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import action as act
from . import dynamics as dyn
from .config import RunConfig, DEFAULT
from .geometry import SurfaceModel
from .loops import Loop, iterate
from .dynamics import Monodromy, Orbit


class Stability(str, Enum):
    NONHYPERBOLIC = "non_hyperbolic"            # spectrum of P on the unit circle
    ODD_HYPERBOLIC = "odd_hyperbolic"           # real spectrum in (-inf, 0) \ {-1}
    EVEN_HYPERBOLIC = "even_hyperbolic"         # real spectrum in (0, inf) \ {1}
    TRANSVERSALLY_DEGENERATE = "transversally_degenerate"  # 1 in spec(P)
    BORDERLINE = "borderline"


@dataclass
class ReducedPoincare:
    P: np.ndarray                  # 2x2 reduced return map on W
    shear: float                   # T'(kappa) entry of the V-block
    flow_dir: np.ndarray           # X_H at the base point (cotangent coords)
    zeta: np.ndarray               # section derivative (cotangent coords)
    w_basis: np.ndarray            # (2, 4) symplectic basis of W
    omega_pairing: float           # omega(X_H, zeta), should be 1
    unit_coeff: float              # coefficient of zeta in M zeta, should be 1
    v_leakage: float               # size of the V-component of M restricted to W
    degenerate: bool


def poincare_reduce(surface: SurfaceModel, monodromy: Monodromy,
                    zeta: np.ndarray, cfg: RunConfig = DEFAULT) -> ReducedPoincare:
    """Split the monodromy along V = span(X_H, zeta) and W = V^omega."""
    M = monodromy.M
    e1 = dyn.hamiltonian_field(surface, monodromy.basepoint)
    e2 = np.asarray(zeta, dtype=float)
    pairing = dyn.omega(e1, e2)

    me2 = M @ e2
    shear = dyn.omega(me2, e2) / pairing
    unit_coeff = dyn.omega(e1, me2) / pairing

    # W = null space of v -> (omega(e1, v), omega(e2, v))
    A = np.vstack([e1 @ dyn.J_SYMP, e2 @ dyn.J_SYMP])
    _, _, vt = np.linalg.svd(A)
    w1, w2 = vt[2], vt[3]
    c = dyn.omega(w1, w2)
    w2 = w2 / c
    P = np.empty((2, 2))
    leak = 0.0
    for j, w in enumerate((w1, w2)):
        mw = M @ w
        P[0, j] = dyn.omega(mw, w2)
        P[1, j] = dyn.omega(w1, mw)
        leak = max(leak,
                   abs(dyn.omega(mw, e2) / pairing),
                   abs(dyn.omega(e1, mw) / pairing))
    eigs = np.linalg.eigvals(P)
    degenerate = bool(np.min(np.abs(eigs - 1.0)) < cfg.tolerances.unit_circle_rel)
    return ReducedPoincare(P=P, shear=float(shear), flow_dir=e1, zeta=e2,
                           w_basis=np.vstack([w1, w2]),
                           omega_pairing=float(pairing),
                           unit_coeff=float(unit_coeff),
                           v_leakage=float(leak), degenerate=degenerate)


@dataclass
class LambdaSamples:
    """Index function samples on the unit circle: angle -> Lambda(e^{i angle})."""

    angles: np.ndarray
    values: np.ndarray
    marginal: np.ndarray

    def at_angle(self, phi: float) -> int:
        k = int(np.argmin(np.abs(self.angles - phi % (2 * np.pi))))
        return int(self.values[k])

    def jump_angles(self) -> np.ndarray:
        dv = np.diff(self.values)
        return self.angles[1:][dv != 0]


def bott_function(surface: SurfaceModel, loop: Loop, kappa: float,
                  cfg: RunConfig = DEFAULT, n_grid: int | None = None,
                  n_roots: int = 4, extra_angles=()) -> LambdaSamples:
    """Twisted Morse index over the unit circle.

    Samples all n-th roots of unity for n <= n_roots, a uniform grid, and
    any requested extra angles; conjugation symmetry Lambda(conj z) =
    Lambda(z) halves the work.
    """
    if n_grid is None:
        n_grid = cfg.discretization.bott_grid
    angles = set()
    for k in range(n_grid // 2 + 1):
        angles.add(2 * np.pi * k / n_grid)
    for n in range(1, n_roots + 1):
        for k in range(n + 1):
            a = 2 * np.pi * k / n
            angles.add(min(a, 2 * np.pi - a) % (2 * np.pi))
    for a in extra_angles:
        a = a % (2 * np.pi)
        angles.add(min(a, 2 * np.pi - a))
    half = np.array(sorted(a for a in angles if a <= np.pi + 1e-12))
    vals = np.empty(half.size, dtype=int)
    marg = np.empty(half.size, dtype=int)
    for i, a in enumerate(half):
        cnt = act.twisted_index(surface, loop, kappa, np.exp(1j * a), cfg)
        vals[i] = cnt.negative
        marg[i] = cnt.marginal
    # mirror to the lower half circle
    mask = (half > 1e-12) & (half < np.pi - 1e-12)
    angles_full = np.concatenate([half, 2 * np.pi - half[mask][::-1]])
    vals_full = np.concatenate([vals, vals[mask][::-1]])
    marg_full = np.concatenate([marg, marg[mask][::-1]])
    order = np.argsort(angles_full)
    return LambdaSamples(angles_full[order], vals_full[order], marg_full[order])


def splitting_numbers(surface: SurfaceModel, loop: Loop, kappa: float,
                      cfg: RunConfig = DEFAULT) -> tuple[int, int, bool]:
    """One-sided jumps of the index function at z = 1.

    Evaluated on a ladder of shrinking angles (halved twice); returns
    (S_plus, S_minus, stabilized).  Non-negativity is a theorem; the
    ladder guards against reading a jump off a too-coarse angle.
    """
    eps0 = cfg.tolerances.split_eps_base
    lam1 = act.twisted_index(surface, loop, kappa, 1.0, cfg).negative
    plus, minus = [], []
    for eps in (eps0, eps0 / 2, eps0 / 4):
        plus.append(act.twisted_index(surface, loop, kappa, np.exp(1j * eps), cfg).negative)
        minus.append(act.twisted_index(surface, loop, kappa, np.exp(-1j * eps), cfg).negative)
    stabilized = len(set(plus)) == 1 and len(set(minus)) == 1
    return plus[-1] - lam1, minus[-1] - lam1, stabilized


def mean_index(samples: LambdaSamples) -> float:
    """Average of the index function over the unit circle (trapezoid)."""
    a = np.concatenate([samples.angles, [samples.angles[0] + 2 * np.pi]])
    v = np.concatenate([samples.values, [samples.values[0]]]).astype(float)
    return float(np.trapezoid(v, a) / (2 * np.pi))


def classify(reduced: ReducedPoincare, cfg: RunConfig = DEFAULT) -> Stability:
    """Stability class from the reduced return map's spectrum."""
    tol = cfg.tolerances.unit_circle_rel
    eigs = np.linalg.eigvals(reduced.P)
    if np.min(np.abs(eigs - 1.0)) <= tol:
        return Stability.TRANSVERSALLY_DEGENERATE
    on_circle = np.abs(np.abs(eigs) - 1.0) <= tol
    if np.all(on_circle):
        return Stability.NONHYPERBOLIC
    if np.any(on_circle):
        return Stability.BORDERLINE
    if np.max(np.abs(eigs.imag)) <= tol * np.max(np.abs(eigs)):
        re = eigs.real
        if np.all(re < 0):
            return Stability.ODD_HYPERBOLIC
        if np.all(re > 0):
            return Stability.EVEN_HYPERBOLIC
    return Stability.BORDERLINE


def index_relation_check(i_free: int, i_fixed: int, shear: float,
                         shear_tol: float = 1e-6) -> dict:
    """The free-vs-fixed index branch rule driven by the sign of T'(kappa).

    shear >= 0 forces i = i_T + 1; shear < 0 forces i = i_T.  A shear
    within tolerance of zero is evaluated under the >= 0 branch and
    flagged marginal rather than asserted.
    """
    marginal = abs(shear) < shear_tol
    branch = "nonnegative" if shear >= 0 or marginal else "negative"
    expected = i_fixed + 1 if branch == "nonnegative" else i_fixed
    return {
        "consistent": bool(i_free == expected),
        "difference_in_range": bool(0 <= i_free - i_fixed <= 1),
        "branch": branch,
        "expected_free_index": int(expected),
        "marginal_shear": bool(marginal),
    }


@dataclass
class IndexReport:
    kappa: float
    period: float
    winding: tuple
    i_fixed: int
    i_free: int
    fixed_marginal: int
    free_marginal: int
    mean_index: float
    s_plus: int | None = None
    s_minus: int | None = None
    splitting_stable: bool | None = None
    shear: float | None = None
    stability: Stability | None = None
    relation: dict = field(default_factory=dict)
    bott_checks: dict = field(default_factory=dict)
    lambda_angles: list = field(default_factory=list)
    lambda_values: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "period": self.period,
            "winding": list(self.winding),
            "i_fixed": self.i_fixed,
            "i_free": self.i_free,
            "fixed_marginal": self.fixed_marginal,
            "free_marginal": self.free_marginal,
            "mean_index": self.mean_index,
            "s_plus": self.s_plus,
            "s_minus": self.s_minus,
            "splitting_stable": self.splitting_stable,
            "shear": self.shear,
            "stability": None if self.stability is None else self.stability.value,
            "relation": dict(self.relation),
            "bott_checks": dict(self.bott_checks),
            "lambda_angles": [float(a) for a in self.lambda_angles],
            "lambda_values": [int(v) for v in self.lambda_values],
        }


def bott_iteration_check(surface: SurfaceModel, loop: Loop, kappa: float,
                         samples: LambdaSamples, cfg: RunConfig = DEFAULT,
                         n_max: int = 4) -> dict:
    """Iterate index vs sum of the index function over roots of unity.

    The identity is exact for the discrete functional; any mismatch is a
    bug, a marginal eigenvalue, or insufficient sampling, and is reported
    verbatim.
    """
    out = {}
    for n in range(2, n_max + 1):
        direct = act.fixed_period_index(surface, iterate(loop, n), kappa, cfg)
        total = 0
        for k in range(n):
            total += samples.at_angle(2 * np.pi * k / n)
        out[n] = {
            "iterate_index": direct.negative,
            "roots_sum": int(total),
            "match": bool(direct.negative == total),
            "iterate_marginal": direct.marginal,
        }
    return out


def index_report(surface: SurfaceModel, orbit: Orbit, kappa: float,
                 cfg: RunConfig = DEFAULT, zeta: np.ndarray | None = None,
                 loop: Loop | None = None, n_bott: int = 4,
                 with_bott_checks: bool = True) -> IndexReport:
    """Full index workup of a refined orbit.

    ``zeta`` (the energy-section derivative, cotangent coordinates)
    unlocks the monodromy reduction: shear sign, splitting-number
    prediction, stability class.  Without it the variational data is
    still computed.
    """
    if loop is None:
        loop = orbit_to_loop_cached(surface, orbit, cfg)
    i_fix = act.fixed_period_index(surface, loop, kappa, cfg)
    i_fre = act.free_period_index(surface, loop, kappa, cfg)

    mon = dyn.linearize_flow(surface, orbit, cfg)
    extra = tuple(np.angle(ev) for ev in np.linalg.eigvals(mon.M)
                  if abs(abs(ev) - 1.0) < 1e-3)
    samples = bott_function(surface, loop, kappa, cfg, n_roots=n_bott,
                            extra_angles=extra)
    mi = mean_index(samples)
    sp, sm, stab = splitting_numbers(surface, loop, kappa, cfg)

    report = IndexReport(
        kappa=kappa, period=orbit.period, winding=orbit.winding,
        i_fixed=i_fix.negative, i_free=i_fre.negative,
        fixed_marginal=i_fix.marginal, free_marginal=i_fre.marginal,
        mean_index=mi, s_plus=sp, s_minus=sm, splitting_stable=stab,
        lambda_angles=list(samples.angles), lambda_values=list(samples.values),
    )
    if with_bott_checks:
        report.bott_checks = bott_iteration_check(surface, loop, kappa, samples, cfg)
    if zeta is not None:
        red = poincare_reduce(surface, mon, zeta, cfg)
        report.shear = red.shear
        report.stability = classify(red, cfg)
        report.relation = index_relation_check(i_fre.negative, i_fix.negative, red.shear)
    return report


def orbit_to_loop_cached(surface: SurfaceModel, orbit: Orbit,
                         cfg: RunConfig = DEFAULT) -> Loop:
    from .refine import orbit_to_loop
    return orbit_to_loop(surface, orbit, cfg.discretization.index_samples, cfg)


def write_lambda_csv(path, samples: LambdaSamples) -> None:
    with open(path, "w") as fh:
        fh.write("angle,lambda,marginal\n")
        for a, v, m in zip(samples.angles, samples.values, samples.marginal):
            fh.write(f"{a:.12g},{int(v)},{int(m)}\n")
