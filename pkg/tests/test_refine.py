import numpy as np
import pytest
from scipy.special import ellipk

from maggeo import action as act
from maggeo import dynamics as dyn
from maggeo import scenarios
from maggeo.config import DEFAULT
from maggeo.dynamics import PhasePoint
from maggeo.refine import (loop_initial_state, orbit_to_loop, polish_loop,
                           refine_orbit, revalidate_orbit)


def test_refine_residual_contract(line_bundle, gyration_bundle):
    for b in (line_bundle, gyration_bundle):
        assert b["orbit"].residual <= 1e-10
        checks = revalidate_orbit(b["surface"], b["orbit"])
        assert checks["residual"] <= 1e-10
        assert checks["energy_rel"] <= 1e-8


def test_refine_pendulum_period_oracle(ref_surface):
    """Reduced 1D oracle: the symmetric trapped orbit's period is a
    complete elliptic integral, T = (2/pi) K(m) with m = 2 kappa."""
    kappa = 0.08
    T_exact = 2.0 * ellipk(2 * kappa) / np.pi
    st = PhasePoint.of([0.3, 0.0], [0.0, np.sqrt(2 * kappa)])
    orbit = refine_orbit(ref_surface, (st, 1.05), kappa)
    assert orbit.period == pytest.approx(T_exact, abs=1e-8)
    assert orbit.residual <= 1e-10
    assert orbit.winding == (0, 0)


def test_refine_seeded_with_refined_orbit(line_bundle):
    b = line_bundle
    again = refine_orbit(b["surface"], (b["orbit"].state, b["orbit"].period),
                         b["kappa"])
    assert again.period == pytest.approx(b["orbit"].period, abs=1e-10)
    assert np.allclose(again.state.as_z(), b["orbit"].state.as_z(), atol=1e-9)


def test_refine_from_loop_seed(ref_surface, ref_alpha):
    orbit = refine_orbit(ref_surface, ref_alpha.loop, 0.2)
    assert orbit.residual <= 1e-10
    assert orbit.winding == ref_alpha.orbit.winding


def test_polish_drives_gradient_to_solver_floor(ref_surface):
    from maggeo.loops import straight_loop
    # start slightly off the critical line
    loop = straight_loop((0.0, 0.748), (1, 0), 1.59, 128)
    polished, res = polish_loop(ref_surface, loop, 0.2)
    assert res <= 1e-12
    dS_x, dS_T = act.differential(ref_surface, polished, 0.2)
    assert max(np.max(np.abs(dS_x)), abs(dS_T)) <= 1e-11


def test_orbit_to_loop_energy_consistency(gyration_bundle):
    b = gyration_bundle
    loop = orbit_to_loop(b["surface"], b["orbit"], 96, DEFAULT)
    # discrete period criticality: mean discrete kinetic energy == kappa
    _, dS_T = act.differential(b["surface"], loop, b["kappa"])
    assert abs(dS_T) <= 1e-10


def test_initial_state_velocity_scaling(ref_alpha, ref_surface):
    st = loop_initial_state(ref_surface, ref_alpha.loop, 0.2)
    assert dyn.energy(ref_surface, st) == pytest.approx(0.2, abs=1e-12)
