import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import j1 as bessel_j1

from maggeo import action as act
from maggeo import scenarios
from maggeo.config import DEFAULT
from maggeo.geometry import FourierSeries2D, SurfaceModel
from maggeo.loops import Loop, LoopTangent, circle, constant_loop, straight_loop, iterate


def random_loop(rng, n=48):
    base = circle(rng.random(2), 0.1 + 0.2 * rng.random(), 0.4 + rng.random(), n)
    return base.with_samples(base.samples + 0.05 * rng.standard_normal((n, 2)))


# -- values ---------------------------------------------------------------


def test_constant_loop_action(flat_surface):
    # S = kappa T for a point curve
    assert act.action(flat_surface, constant_loop((0.3, 0.4), 2.0, 64), 0.5) == 1.0


def test_straight_winding_loop_flat(flat_surface):
    # l^2/(2T) + kappa T at l = T = 1, kappa = 1/2
    loop = straight_loop((0.0, 0.25), (1, 0), 1.0, 64)
    assert act.action(flat_surface, loop, 0.5) == pytest.approx(1.0, abs=1e-15)


def test_circle_flux_oracle():
    """theta-term of a small circle against the enclosed flux (Stokes).

    For theta = A sin(2 pi y) dx the flux through a disk has the closed
    form -2 pi A cos(2 pi y0) pi R^2 * 2 J1(2 pi R)/(2 pi R); quadrature in
    polar coordinates reproduces it, and the discrete line integral must
    approach it at second order in the loop mesh.
    """
    A, c, R = 0.7, np.array([0.3, 0.4]), 0.1
    s = SurfaceModel(FourierSeries2D([]), FourierSeries2D([(0, 1, 0.0, A)]),
                     FourierSeries2D([]), K=8)
    # polar quadrature oracle (independent of the loop machinery)
    nr, nphi = 512, 512
    r_nodes = (np.arange(nr) + 0.5) * R / nr
    phi = 2 * np.pi * np.arange(nphi) / nphi
    rr, pp = np.meshgrid(r_nodes, phi, indexing="ij")
    pts = np.stack([c[0] + rr * np.cos(pp), c[1] + rr * np.sin(pp)], axis=-1)
    dens = s.dtheta_density(pts.reshape(-1, 2)).reshape(nr, nphi)
    flux_quad = float(np.sum(dens * rr) * (R / nr) * (2 * np.pi / nphi))
    flux_exact = (-2 * np.pi * A * np.cos(2 * np.pi * c[1])
                  * np.pi * R ** 2 * 2 * bessel_j1(2 * np.pi * R) / (2 * np.pi * R))
    assert flux_quad == pytest.approx(flux_exact, abs=5e-8)
    # counterclockwise circle: oriented boundary of the disk
    loop = circle(c, R, 1.0, 512, orientation=+1)
    assert act.theta_integral(s, loop) == pytest.approx(flux_exact, abs=1e-5)
    # and the kinetic part is (2 pi R)^2 / 2 for T = 1
    kin = act.kinetic(s, loop)
    assert kin == pytest.approx((2 * np.pi * R) ** 2 / 2.0, rel=1e-4)
    total = act.action(s, loop, 0.0)
    assert total == pytest.approx(kin + flux_exact, abs=1e-5)


def test_kappa_affinity_exact(bumpy_surface):
    rng = np.random.default_rng(2)
    loop = random_loop(rng)
    s1 = act.action(bumpy_surface, loop, 0.3)
    s2 = act.action(bumpy_surface, loop, 0.9)
    assert s2 - s1 == pytest.approx(0.6 * loop.period, abs=1e-14)


def test_length_lower_bound(bumpy_surface):
    # S >= sqrt(2 kappa) l + int theta, per-segment arithmetic-geometric mean
    rng = np.random.default_rng(4)
    for _ in range(25):
        loop = random_loop(rng)
        kappa = 0.1 + rng.random()
        lhs = act.action(bumpy_surface, loop, kappa)
        rhs = (np.sqrt(2 * kappa) * act.loop_length(bumpy_surface, loop)
               + act.theta_integral(bumpy_surface, loop))
        assert lhs >= rhs - 1e-12 * max(1.0, abs(lhs))


# -- first and second derivatives ----------------------------------------


@given(st.integers(0, 2**32 - 1))
def test_gradient_matches_fd(seed):
    rng = np.random.default_rng(seed)
    s = scenarios.bumpy()
    loop = random_loop(rng)
    kappa = 0.1 + rng.random()
    xi = rng.standard_normal(loop.samples.shape)
    tau = float(rng.standard_normal())
    t = 1e-6
    sp = act.action(s, Loop(loop.samples + t * xi, loop.period + t * tau,
                            loop.winding), kappa)
    sm = act.action(s, Loop(loop.samples - t * xi, loop.period - t * tau,
                            loop.winding), kappa)
    fd = (sp - sm) / (2 * t)
    an = act.directional_derivative(s, loop, kappa, LoopTangent(xi, tau))
    assert abs(fd - an) <= 1e-6 * max(1.0, abs(an))


def test_gradient_tau_at_constant_loop(flat_surface):
    loop = constant_loop((0.5, 0.5), 1.5, 64)
    _, dS_T = act.differential(flat_surface, loop, 0.7)
    assert dS_T == pytest.approx(0.7, abs=1e-15)


def test_gradient_norm_small_at_refined_orbit(line_bundle):
    b = line_bundle
    assert act.grad_norm(b["surface"], b["loop"], b["kappa"]) <= 1e-6


def test_hessian_matches_fd_of_gradient(bumpy_surface):
    rng = np.random.default_rng(9)
    loop = random_loop(rng)
    kappa = 0.4
    H = act.free_period_hessian(bumpy_surface, loop)
    xi = rng.standard_normal(loop.samples.shape)
    tau = float(rng.standard_normal())
    v = np.concatenate([xi.reshape(-1), [tau]])
    t = 1e-6

    def dvec(tt):
        lp2 = Loop(loop.samples + tt * xi, loop.period + tt * tau, loop.winding)
        a, b = act.differential(bumpy_surface, lp2, kappa)
        return np.concatenate([a.reshape(-1), [b]])

    fd = (dvec(t) - dvec(-t)) / (2 * t)
    assert np.max(np.abs(fd - H @ v)) <= 1e-6 * max(1.0, np.max(np.abs(H @ v)))


def test_twisted_hessian_conjugation_symmetry(bumpy_surface):
    rng = np.random.default_rng(13)
    loop = random_loop(rng, n=32)
    z = np.exp(1j * 0.9)
    e1 = np.linalg.eigvalsh(act.twisted_hessian(bumpy_surface, loop, z))
    e2 = np.linalg.eigvalsh(act.twisted_hessian(bumpy_surface, loop, np.conj(z)))
    assert np.allclose(e1, e2, atol=1e-10)


def test_flat_geodesic_twisted_index_zero(flat_surface):
    # flat straight geodesics minimize under every twist: no conjugate points
    loop = straight_loop((0.0, 0.3), (1, 0), 1.0, 64)
    for z in (1.0, np.exp(1j * 0.5), -1.0, np.exp(2j)):
        assert act.twisted_index(flat_surface, loop, 0.5, z).negative == 0


def test_interlacing_free_vs_fixed(line_bundle, gyration_bundle):
    for b in (line_bundle, gyration_bundle):
        i_fix = act.fixed_period_index(b["surface"], b["loop"], b["kappa"])
        i_fre = act.free_period_index(b["surface"], b["loop"], b["kappa"])
        assert 0 <= i_fre.negative - i_fix.negative <= 1


def test_index_mesh_convergence(gyration_bundle):
    from maggeo.refine import orbit_to_loop
    b = gyration_bundle
    counts = []
    for n in (96, 192):
        loop = orbit_to_loop(b["surface"], b["orbit"], n, DEFAULT)
        counts.append((act.fixed_period_index(b["surface"], loop, b["kappa"]).negative,
                       act.free_period_index(b["surface"], loop, b["kappa"]).negative))
    assert counts[0] == counts[1]


def test_bott_block_diagonalization_exact(bumpy_surface):
    # spectrum of the n-iterate Hessian == union of twisted spectra
    rng = np.random.default_rng(21)
    loop = random_loop(rng, n=24)
    n = 3
    big = np.linalg.eigvalsh(act.twisted_hessian(bumpy_surface, iterate(loop, n), 1.0))
    parts = [np.linalg.eigvalsh(act.twisted_hessian(bumpy_surface, loop,
                                                    np.exp(2j * np.pi * k / n)))
             for k in range(n)]
    assert np.allclose(np.sort(big), np.sort(np.concatenate(parts)), atol=1e-9)


def test_period_weight_profile():
    assert act.period_weight(0.3) == pytest.approx(0.09)
    assert act.period_weight(2.0) == 1.0
    # C^1 joints and monotonicity across the blend
    for T in (0.5, 1.0):
        h = 1e-7
        left = (act.period_weight(T) - act.period_weight(T - h)) / h
        right = (act.period_weight(T + h) - act.period_weight(T)) / h
        assert left == pytest.approx(right, abs=1e-5)
    grid = np.linspace(0.45, 1.05, 200)
    vals = [act.period_weight(t) for t in grid]
    assert np.all(np.diff(vals) >= -1e-12)


def test_metric_positive_definite(bumpy_surface):
    rng = np.random.default_rng(17)
    loop = random_loop(rng)
    metric = act.LoopMetric(bumpy_surface, loop)
    assert np.all(np.linalg.eigvalsh(metric.G) > 0)
    tan = LoopTangent(rng.standard_normal(loop.samples.shape), 1.3)
    assert metric.inner(tan, tan) > 0
