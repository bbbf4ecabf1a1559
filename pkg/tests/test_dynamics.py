import numpy as np
import pytest

from maggeo import dynamics as dyn
from maggeo import action as act
from maggeo import scenarios
from maggeo.config import DEFAULT
from maggeo.dynamics import PhasePoint
from maggeo.geometry import FourierSeries2D, SurfaceModel
from maggeo.refine import orbit_to_loop


def test_straight_geodesic_flat(flat_surface):
    out = dyn.integrate_flow(flat_surface, PhasePoint.of([0, 0], [1, 0]), 1.0)
    assert np.allclose(out.x, [1.0, 0.0], atol=1e-10)
    assert np.allclose(out.v, [1.0, 0.0], atol=1e-10)


def test_energy_conservation_ten_periods(gyration_bundle):
    b = gyration_bundle
    orbit = b["orbit"]
    state = orbit.state
    e0 = dyn.energy(b["surface"], state)
    out = dyn.integrate_flow(b["surface"], state, 10 * orbit.period)
    assert abs(dyn.energy(b["surface"], out) - e0) / e0 <= 1e-8


def test_noether_momentum_y_only():
    # u and theta depending only on y: p_x = dL/dxdot is a first integral
    s = SurfaceModel(FourierSeries2D([(0, 1, 0.12, 0.0)]),
                     FourierSeries2D([(0, 1, 0.0, 1.0)]),
                     FourierSeries2D([]), K=8, name="y_only")
    state = PhasePoint.of([0.1, 0.35], [0.4, 0.5])
    times = np.linspace(0.0, 8.0, 60)
    states = dyn.sample_flow(s, state, times)
    px = [dyn.legendre(s, PhasePoint.from_z(z))[1][0] for z in states]
    assert np.max(np.abs(np.array(px) - px[0])) <= 1e-8


def test_legendre_trivial_and_roundtrip(flat_surface, bumpy_surface):
    x, p = dyn.legendre(flat_surface, PhasePoint.of([0.3, 0.3], [1, 0]))
    assert np.allclose(p, [1, 0])
    rng = np.random.default_rng(5)
    for _ in range(20):
        st = PhasePoint.of(rng.random(2), rng.standard_normal(2))
        x, p = dyn.legendre(bumpy_surface, st)
        # dual identity: H(x, p) equals the kinetic energy
        assert abs(dyn.hamiltonian(bumpy_surface, x, p)
                   - dyn.energy(bumpy_surface, st)) < 1e-12
        back = dyn.legendre_inverse(bumpy_surface, x, p)
        assert np.allclose(back.v, st.v, atol=1e-12)


def test_hamiltonian_field_consistent(bumpy_surface):
    # X_H via the Legendre jacobian must match X_H from the dual Hamiltonian
    st = PhasePoint.of([0.2, 0.7], [0.3, -0.4])
    xh = dyn.hamiltonian_field(bumpy_surface, st)
    x, p = dyn.legendre(bumpy_surface, st)
    h = 1e-6

    def ham(q):
        return dyn.hamiltonian(bumpy_surface, q[:2], q[2:])

    z = np.concatenate([x, p])
    grad = np.array([(ham(z + h * e) - ham(z - h * e)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(xh, [grad[2], grad[3], -grad[0], -grad[1]], atol=1e-8)


def test_monodromy_invariants(gyration_bundle):
    mon = gyration_bundle["monodromy"]
    assert dyn.symplectic_defect(mon.M) <= 1e-7
    assert abs(np.linalg.det(mon.M) - 1.0) <= 1e-7
    xh = dyn.hamiltonian_field(gyration_bundle["surface"], mon.basepoint)
    assert np.max(np.abs(mon.M @ xh - xh)) <= 1e-7 * max(1.0, np.max(np.abs(xh)))
    eigs = np.linalg.eigvals(mon.M)
    assert int(np.sum(np.abs(eigs - 1.0) < 1e-5)) >= 2


def _fd_jacobian(surface, orbit, eps=1e-6):
    z0 = orbit.state.as_z()
    M_fd = np.empty((4, 4))
    for j in range(4):
        dz = np.zeros(4)
        dz[j] = eps
        zp = dyn.integrate_flow(surface, PhasePoint.from_z(z0 + dz), orbit.period).as_z()
        zm = dyn.integrate_flow(surface, PhasePoint.from_z(z0 - dz), orbit.period).as_z()
        M_fd[:, j] = (zp - zm) / (2 * eps)
    return M_fd


def test_monodromy_vs_fd_jacobian(gyration_bundle):
    # elliptic specimen: no hyperbolic amplification of difference noise
    M_fd = _fd_jacobian(gyration_bundle["surface"], gyration_bundle["orbit"])
    assert np.max(np.abs(M_fd - gyration_bundle["monodromy"].M_tangent)) <= 1e-4


def test_monodromy_vs_fd_jacobian_hyperbolic(line_bundle):
    # strongly hyperbolic orbit: differences carry amplified integrator
    # noise, so the comparison is scale-relative
    mon = line_bundle["monodromy"]
    M_fd = _fd_jacobian(line_bundle["surface"], line_bundle["orbit"])
    scale = np.max(np.abs(mon.M_tangent))
    assert np.max(np.abs(M_fd - mon.M_tangent)) <= 1e-4 * scale


def test_field_matches_discrete_action_stationarity(gyration_bundle):
    """Convention cross-check: sampled orbits are near-critical for the
    discrete action, at the discretization's consistency order."""
    surface, orbit = gyration_bundle["surface"], gyration_bundle["orbit"]
    norms = []
    for n in (64, 128):
        loop = orbit_to_loop(surface, orbit, n, DEFAULT, polish=False)
        dS_x, dS_T = act.differential(surface, loop, orbit.kappa)
        norms.append(max(float(np.max(np.abs(dS_x))) * n, abs(dS_T)))
    assert norms[0] < 2e-2
    assert norms[1] < norms[0] / 2.5  # better than first order in h


def test_energy_projection_flag(gyration_bundle):
    b = gyration_bundle
    out = dyn.integrate_flow(b["surface"], b["orbit"].state, 3.7,
                             project_energy=True)
    assert abs(dyn.energy(b["surface"], out) - b["kappa"]) < 1e-13


def test_trajectory_csv(tmp_path, ref_surface):
    path = tmp_path / "traj.csv"
    dyn.write_trajectory(path, ref_surface, PhasePoint.of([0, 0.75], [0.63, 0]),
                         1.0, 16)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,x,y,v_x,v_y,E"
    assert len(lines) == 17


def test_nonfinite_time_rejected(flat_surface):
    from maggeo.errors import FlowBlowupError
    with pytest.raises(FlowBlowupError):
        dyn.integrate_flow(flat_surface, PhasePoint.of([0, 0], [1, 0]), np.inf)
