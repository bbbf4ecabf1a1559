import numpy as np
import pytest

from maggeo import action as act
from maggeo import continuation as cont
from maggeo import dynamics as dyn
from maggeo import index as idx
from maggeo.config import DEFAULT
from maggeo.dynamics import PhasePoint
from maggeo.refine import refine_orbit, orbit_to_loop


def test_cylinder_anchor_and_energy(line_bundle):
    cyl = line_bundle["cylinder"]
    orbit = line_bundle["orbit"]
    i0 = cyl.anchor_index
    assert cyl.periods[i0] == orbit.period
    for k, o in zip(cyl.kappas, cyl.orbits):
        assert abs(dyn.energy(line_bundle["surface"], o.state) - k) <= 1e-10
        assert o.residual <= 1e-8


def test_period_curve_closed_form(line_bundle):
    # line family: T(kappa) = 1 / sqrt(2 kappa)
    cyl = line_bundle["cylinder"]
    assert np.allclose(cyl.periods, 1.0 / np.sqrt(2.0 * cyl.kappas), atol=1e-9)
    assert cyl.t_prime == pytest.approx(-(2 * 0.2) ** (-1.5), rel=1e-6)
    assert cyl.t_prime_consistency < 1e-3
    assert cyl.zeta_consistency < 1e-3


def test_action_slope_equals_period(line_bundle, gyration_bundle):
    # d/dkappa S_kappa(orbit_kappa) = T(kappa) along the cylinder;
    # symmetric pairs around the anchor keep the difference second order
    for b in (line_bundle, gyration_bundle):
        cyl = b["cylinder"]
        i0 = cyl.anchor_index
        k0 = cyl.kappas[i0]
        offs = cyl.kappas - k0
        slopes = []
        for j, off in enumerate(offs):
            if off <= 0:
                continue
            match = np.where(np.isclose(offs, -off, rtol=1e-9, atol=1e-15))[0]
            if match.size:
                m = match[0]
                slopes.append(((cyl.actions[j] - cyl.actions[m]) / (2 * off), off))
        assert len(slopes) >= 2
        slopes.sort(key=lambda so: so[1])
        (s1, d1), (s2, d2) = slopes[0], slopes[1]
        assert d2 == pytest.approx(2 * d1)
        richardson = (4 * s1 - s2) / 3.0
        assert abs(richardson - cyl.periods[i0]) <= 1e-5


def test_monotone_chain_along_cylinder(line_bundle):
    """S_{k0}(orbit_k) is increasing in k up to k0, matching the chain
    used by the monotonicity argument of the iterated minimax values."""
    cyl = line_bundle["cylinder"]
    order = np.argsort(cyl.kappas)
    ks = cyl.kappas[order]
    acts = cyl.actions[order]
    Ts = cyl.periods[order]
    k0 = ks[0]
    # affine re-evaluation at the lowest energy: S_{k0} = S_k - (k - k0) T
    at_k0 = acts - (ks - k0) * Ts
    assert np.all(np.diff(at_k0) >= -1e-9)
    # g(k) = S_k(orbit_k) itself is increasing since g' = T > 0
    assert np.all(np.diff(acts) > 0)


def test_nondegeneracy_margin_basics(line_bundle):
    assert cont.nondegeneracy_margin(np.diag([2.0, 0.5])) == pytest.approx(0.5)
    assert cont.nondegeneracy_margin(np.eye(2)) == 0.0
    assert cont.nondegeneracy_margin(line_bundle["reduced"].P) > 0.5


def test_flat_geodesic_degenerate_family(flat_surface):
    """Zero-field straight geodesics form a 2-parameter family; the
    reduced return map has unit eigenvalues and zero margin."""
    kappa = 0.5
    v = np.sqrt(2 * kappa)
    orbit = refine_orbit(flat_surface,
                         (PhasePoint.of([0.0, 0.33], [v, 0.0]), 1.0 / v), kappa)
    mon = dyn.linearize_flow(flat_surface, orbit)
    # analytic section derivative of the family z_k = (x0, sqrt(2k) e_x)
    zeta = -np.array([0.0, 0.0, 1.0 / v, 0.0])
    red = idx.poincare_reduce(flat_surface, mon, zeta)
    assert red.omega_pairing == pytest.approx(1.0, abs=1e-9)
    assert cont.nondegeneracy_margin(red.P) <= 1e-6
    assert red.degenerate


def test_cylinder_csv(tmp_path, line_bundle):
    path = tmp_path / "cyl.csv"
    cont.write_cylinder_csv(path, line_bundle["cylinder"])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "kappa,T,action,index"
    assert len(lines) == len(line_bundle["cylinder"].kappas) + 1
