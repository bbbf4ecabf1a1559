import numpy as np
import pytest

from maggeo import action as act
from maggeo import dynamics as dyn
from maggeo import index as idx
from maggeo.config import DEFAULT
from maggeo.index import Stability
from maggeo.loops import iterate


def test_poincare_reduce_invariants(line_bundle, gyration_bundle):
    for b in (line_bundle, gyration_bundle):
        red = b["reduced"]
        assert red.omega_pairing == pytest.approx(1.0, abs=1e-6)
        assert red.unit_coeff == pytest.approx(1.0, abs=1e-6)
        assert abs(np.linalg.det(red.P) - 1.0) <= 1e-6
        assert red.v_leakage <= 1e-4
        # eigenvalues of the monodromy = {1, 1} + spectrum of P
        full = np.sort_complex(np.linalg.eigvals(b["monodromy"].M))
        reduced = np.sort_complex(np.concatenate([[1.0, 1.0],
                                                  np.linalg.eigvals(red.P)]))
        assert np.max(np.abs(full - reduced)) <= 1e-4


def test_shear_matches_period_slope(line_bundle, gyration_bundle):
    for b in (line_bundle, gyration_bundle):
        assert abs(b["reduced"].shear - b["cylinder"].t_prime) <= 1e-4


def test_line_orbit_shear_closed_form(line_bundle):
    # T(kappa) = 1/sqrt(2 kappa) for the line family
    expect = -(2 * line_bundle["kappa"]) ** (-1.5)
    assert line_bundle["reduced"].shear == pytest.approx(expect, rel=1e-5)


def test_lambda_at_one_is_fixed_index(line_bundle, gyration_bundle, line_report,
                                      gyration_report):
    for b, rep in ((line_bundle, line_report), (gyration_bundle, gyration_report)):
        lam1 = act.twisted_index(b["surface"], b["loop"], b["kappa"], 1.0).negative
        assert lam1 == rep.i_fixed
        angles = np.array(rep.lambda_angles)
        values = np.array(rep.lambda_values)
        assert values[np.argmin(np.abs(angles))] == rep.i_fixed


def test_hyperbolic_lambda_constant(line_report):
    # even-hyperbolic specimen: no unit-circle spectrum besides 1, so the
    # index function is constant on the complement of z = 1
    values = np.array(line_report.lambda_values)
    angles = np.array(line_report.lambda_angles)
    off_one = np.abs(np.exp(1j * angles) - 1.0) > 1e-6
    assert np.all(values[off_one] == values[off_one][0])
    assert np.all(values == 0)


def test_bott_iteration_formula(line_bundle, gyration_bundle, line_report,
                                gyration_report):
    for rep in (line_report, gyration_report):
        for n, chk in rep.bott_checks.items():
            assert chk["match"], (n, chk)


def test_splitting_numbers_by_shear_sign(line_report, gyration_report):
    assert line_report.shear < 0
    assert (line_report.s_plus, line_report.s_minus) == (0, 0)
    assert gyration_report.shear > 0
    assert (gyration_report.s_plus, gyration_report.s_minus) == (1, 1)
    for rep in (line_report, gyration_report):
        assert rep.splitting_stable
        assert rep.s_plus >= 0 and rep.s_minus >= 0


def test_mean_index_values(line_report, gyration_report):
    assert line_report.mean_index == 0.0
    assert gyration_report.mean_index > 0.01


def test_mean_index_iterate_scaling(gyration_bundle):
    b = gyration_bundle
    base = idx.bott_function(b["surface"], b["loop"], b["kappa"], n_grid=128)
    it2 = iterate(b["loop"], 2)
    doubled = idx.bott_function(b["surface"], it2, b["kappa"], n_grid=128)
    m1 = idx.mean_index(base)
    m2 = idx.mean_index(doubled)
    assert m2 == pytest.approx(2 * m1, abs=4 * (2 * np.pi / 128))


def test_mean_index_vs_fourth_iterate(gyration_bundle, gyration_report):
    b = gyration_bundle
    i4 = act.fixed_period_index(b["surface"], iterate(b["loop"], 4),
                                b["kappa"]).negative
    assert abs(gyration_report.mean_index - i4 / 4) <= 2 / 4


def test_discontinuities_at_monodromy_spectrum(gyration_bundle, gyration_report):
    eigs = np.linalg.eigvals(gyration_bundle["monodromy"].M)
    unit_args = np.array([np.angle(ev) for ev in eigs
                          if abs(abs(ev) - 1.0) < 1e-4]) % (2 * np.pi)
    angles = np.array(gyration_report.lambda_angles)
    values = np.array(gyration_report.lambda_values)
    jumps = angles[1:][np.diff(values) != 0]
    spacing = 2 * np.pi / 128
    for j in jumps:
        d = np.min(np.abs(np.exp(1j * j) - np.exp(1j * unit_args)))
        assert d <= 2 * spacing, f"jump at angle {j} away from unit spectrum"


def test_index_relation_branches(line_report, gyration_report):
    assert line_report.relation["branch"] == "negative"
    assert line_report.relation["consistent"]
    assert line_report.i_free == line_report.i_fixed == 0
    assert gyration_report.relation["branch"] == "nonnegative"
    assert gyration_report.relation["consistent"]
    assert gyration_report.i_free == gyration_report.i_fixed + 1 == 1
    for rep in (line_report, gyration_report):
        assert rep.relation["difference_in_range"]


def test_classify_synthetic(line_bundle):
    red = line_bundle["reduced"]

    def with_P(P):
        return idx.ReducedPoincare(P=np.array(P, dtype=float), shear=red.shear,
                                   flow_dir=red.flow_dir, zeta=red.zeta,
                                   w_basis=red.w_basis, omega_pairing=1.0,
                                   unit_coeff=1.0, v_leakage=0.0, degenerate=False)

    th = 0.3
    rot = [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
    assert idx.classify(with_P(rot)) == Stability.NONHYPERBOLIC
    assert idx.classify(with_P([[-2, 0], [0, -0.5]])) == Stability.ODD_HYPERBOLIC
    assert idx.classify(with_P([[2, 0], [0, 0.5]])) == Stability.EVEN_HYPERBOLIC
    assert idx.classify(with_P(np.eye(2))) == Stability.TRANSVERSALLY_DEGENERATE


def test_classify_specimens(line_bundle, gyration_bundle):
    assert idx.classify(line_bundle["reduced"]) == Stability.EVEN_HYPERBOLIC
    assert idx.classify(gyration_bundle["reduced"]) == Stability.NONHYPERBOLIC


def test_positive_mean_index_for_nonneg_shear(gyration_bundle, gyration_report):
    # transversally non-degenerate with T' >= 0 forces conjugate points
    assert gyration_report.shear >= 0
    assert gyration_report.mean_index > 0.01
    # mechanism: the index function is positive just off z = 1 (checked at
    # the splitting-ladder scale, below which the jump eigenvalue drowns
    # in roundoff)
    b = gyration_bundle
    for eps in (2e-3, 4e-3):
        for sign in (+1, -1):
            cnt = act.twisted_index(b["surface"], b["loop"], b["kappa"],
                                    np.exp(sign * 1j * eps))
            assert cnt.negative > 0


def test_report_serialization(gyration_report):
    d = gyration_report.to_dict()
    assert d["stability"] == "non_hyperbolic"
    assert isinstance(d["lambda_values"][0], int)
