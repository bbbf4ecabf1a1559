"""Acceptance suite: one test per criterion, at the pinned tolerances.

Each test prints a [PASS] line on success so a -s run reads as a
checklist.  Expensive artifacts come from the session fixtures and are
shared with the unit modules.
"""

import json
import os
import time

import numpy as np
import pytest

from maggeo import action as act
from maggeo import cli
from maggeo import dynamics as dyn
from maggeo import index as idx
from maggeo import mane
from maggeo import minimax
from maggeo import scenarios
from maggeo.config import DEFAULT
from maggeo.dynamics import PhasePoint
from maggeo.geometry import FourierSeries2D, SurfaceModel
from maggeo.loops import Loop, circle, straight_loop


def _report(msg):
    print(f"\n[PASS] {msg}")


# -- criterion 1: flow correctness ----------------------------------------


def test_criterion_1_flow_correctness(gyration_bundle, flat_surface):
    t0 = time.time()
    b = gyration_bundle
    state = b["orbit"].state
    e0 = dyn.energy(b["surface"], state)
    out = dyn.integrate_flow(b["surface"], state, 10 * b["orbit"].period)
    drift = abs(dyn.energy(b["surface"], out) - e0) / e0
    assert drift <= 1e-8

    y_only = SurfaceModel(FourierSeries2D([(0, 1, 0.12, 0.0)]),
                          FourierSeries2D([(0, 1, 0.0, 1.0)]),
                          FourierSeries2D([]), K=8)
    times = np.linspace(0.0, 8.0, 80)
    states = dyn.sample_flow(y_only, PhasePoint.of([0.1, 0.35], [0.4, 0.5]), times)
    px = np.array([dyn.legendre(y_only, PhasePoint.from_z(z))[1][0] for z in states])
    noether = float(np.max(np.abs(px - px[0])))
    assert noether <= 1e-8

    end = dyn.integrate_flow(flat_surface, PhasePoint.of([0, 0], [1, 0]), 1.0)
    straight = max(np.max(np.abs(end.x - [1, 0])), np.max(np.abs(end.v - [1, 0])))
    assert straight <= 1e-10
    elapsed = time.time() - t0
    assert elapsed < 60
    _report(f"criterion 1: energy drift {drift:.2e}, Noether drift {noether:.2e}, "
            f"straightness {straight:.2e} in {elapsed:.1f}s")


# -- criterion 2: gradient / Hessian fidelity ------------------------------


def test_criterion_2_gradient_and_jacobian(bumpy_surface, gyration_bundle):
    t0 = time.time()
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(100):
        base = circle(rng.random(2), 0.1 + 0.2 * rng.random(),
                      0.4 + rng.random(), 48)
        loop = base.with_samples(base.samples + 0.05 * rng.standard_normal((48, 2)))
        kappa = 0.1 + rng.random()
        xi = rng.standard_normal((48, 2))
        tau = float(rng.standard_normal())
        t = 1e-6
        sp = act.action(bumpy_surface, Loop(loop.samples + t * xi,
                                            loop.period + t * tau, loop.winding), kappa)
        sm = act.action(bumpy_surface, Loop(loop.samples - t * xi,
                                            loop.period - t * tau, loop.winding), kappa)
        fd = (sp - sm) / (2 * t)
        an = float(np.sum(act.differential(bumpy_surface, loop, kappa)[0] * xi)
                   + act.differential(bumpy_surface, loop, kappa)[1] * tau)
        worst = max(worst, abs(fd - an) / max(1.0, abs(an)))
    assert worst <= 1e-6

    b = gyration_bundle
    eps = 1e-6
    z0 = b["orbit"].state.as_z()
    M_fd = np.empty((4, 4))
    for j in range(4):
        dz = np.zeros(4)
        dz[j] = eps
        zp = dyn.integrate_flow(b["surface"], PhasePoint.from_z(z0 + dz),
                                b["orbit"].period).as_z()
        zm = dyn.integrate_flow(b["surface"], PhasePoint.from_z(z0 - dz),
                                b["orbit"].period).as_z()
        M_fd[:, j] = (zp - zm) / (2 * eps)
    jac_err = float(np.max(np.abs(M_fd - b["monodromy"].M_tangent)))
    assert jac_err <= 1e-4
    elapsed = time.time() - t0
    assert elapsed < 300
    _report(f"criterion 2: gradient FD rel {worst:.2e} (100 loops), "
            f"monodromy FD {jac_err:.2e} in {elapsed:.1f}s")


# -- criterion 3: symplectic invariants ------------------------------------


def test_criterion_3_symplectic_invariants(line_bundle, gyration_bundle):
    worst = {"symp": 0.0, "detP": 0.0, "omega": 0.0}
    for b in (line_bundle, gyration_bundle):
        mon, red = b["monodromy"], b["reduced"]
        worst["symp"] = max(worst["symp"], dyn.symplectic_defect(mon.M))
        worst["detP"] = max(worst["detP"], abs(np.linalg.det(red.P) - 1.0))
        worst["omega"] = max(worst["omega"], abs(red.omega_pairing - 1.0))
        eigs = np.linalg.eigvals(mon.M)
        assert int(np.sum(np.abs(eigs - 1.0) < 1e-5)) >= 2
    assert worst["symp"] <= 1e-7
    assert worst["detP"] <= 1e-6
    assert worst["omega"] <= 1e-6
    _report(f"criterion 3: |M'JM - J| {worst['symp']:.2e}, |det P - 1| "
            f"{worst['detP']:.2e}, |omega(X_H, zeta) - 1| {worst['omega']:.2e}, "
            "unit eigenvalue pair present")


# -- criterion 4: Bott machinery -------------------------------------------


def test_criterion_4_bott_machinery(line_bundle, gyration_bundle,
                                    line_report, gyration_report):
    for b, rep in ((line_bundle, line_report), (gyration_bundle, gyration_report)):
        lam1 = act.twisted_index(b["surface"], b["loop"], b["kappa"], 1.0).negative
        assert lam1 == rep.i_fixed
        for n, chk in rep.bott_checks.items():
            assert chk["match"], (n, chk)
    assert gyration_report.shear >= 0
    assert (gyration_report.s_plus, gyration_report.s_minus) == (1, 1)
    assert line_report.shear < 0
    assert (line_report.s_plus, line_report.s_minus) == (0, 0)
    _report("criterion 4: Lambda(1) = i_T, iteration formula exact for "
            "n = 2, 3, 4, splitting numbers (1,1)/(0,0) by shear sign")


# -- criterion 5: index relations -------------------------------------------


def test_criterion_5_index_relations(line_bundle, gyration_bundle,
                                     line_report, gyration_report, three_orbit):
    reports = [line_report, gyration_report]
    d = three_orbit["report"].to_dict()
    if d["beta"]:
        ir = d["beta"]["index_report"]
        assert 0 <= ir["i_free"] - ir["i_fixed"] <= 1
    for rep in reports:
        assert 0 <= rep.i_free - rep.i_fixed <= 1
        assert rep.relation["consistent"]
    for b, rep in ((line_bundle, line_report), (gyration_bundle, gyration_report)):
        assert abs(rep.shear - b["cylinder"].t_prime) <= 1e-4
    assert gyration_report.shear >= 0
    assert gyration_report.mean_index > 0.01
    _report(f"criterion 5: 0 <= i - i_T <= 1 everywhere, branch rule holds on "
            f"both continued orbits, mean index {gyration_report.mean_index:.3f} "
            f"> 0.01 at shear {gyration_report.shear:+.3f}, "
            f"|shear - T'_fd| <= 1e-4")


# -- criterion 6: minimax pipeline -------------------------------------------


def test_criterion_6_minimax_pipeline(three_orbit, ref_brackets_session):
    d = three_orbit["report"].to_dict()
    cu = ref_brackets_session
    assert d["kappa"] <= cu.lower
    assert d["alpha"] is not None and d["alpha"]["action"] < 0
    assert d["alpha"]["free_index"] == 0
    bound = d["minimax"]["bound"]
    assert bound["measured_max"] <= bound["bound"] + 1e-9
    assert d["beta"] is not None
    ir = d["beta"]["index_report"]
    assert d["beta"]["action"] < 0
    assert ir["i_free"] == 1
    assert not d["distinctness"]["beta_vs_alpha"]["same"]
    # non-hyperbolic or odd hyperbolic; transversal degeneracy (extra
    # free-period kernel) is the non-hyperbolic case with 1 in spec(P)
    stability = ir["stability"]
    degenerate = ir["free_marginal"] >= 2
    assert degenerate or stability in ("non_hyperbolic", "odd_hyperbolic",
                                       "transversally_degenerate")
    assert three_orbit["elapsed"] <= 600
    _report(f"criterion 6: alpha S={d['alpha']['action']:.4f} i=0; path bound "
            f"{bound['measured_max']:.4f} <= {bound['bound']:.4f} (A = "
            f"{bound['A']:.4f}); beta S={d['beta']['action']:.4f} i=1, distinct "
            f"from alpha, class={'degenerate->non-hyperbolic' if degenerate else stability}; "
            f"{three_orbit['elapsed']:.0f}s <= 600s")


# -- criterion 7: monotonicity ------------------------------------------------


def test_criterion_7_monotonicity(dwell_surface, dwell_minimizers, ladder):
    res = dwell_minimizers
    lift = res.loop.translate((0.0, 1.0))
    pool = [minimax.linear_path(res.loop, lift, 16)]
    _, final = minimax.mountain_pass(dwell_surface, 0.5,
                                     minimax.linear_path(res.loop, lift, 16),
                                     sweeps=10)
    pool.append(final)
    kappas = np.linspace(0.3, 0.7, 5)
    vals = [minimax.evaluate_pool(dwell_surface, k, pool) for k in kappas]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    lvals = [e["value"] for e in ladder["entries"]]
    assert ladder["values_strictly_decreasing"]
    _report(f"criterion 7: minimax estimates non-decreasing over 5 energies "
            f"(shared pool), ladder values strictly decreasing: "
            f"{[round(v, 4) for v in lvals]}")


# -- criterion 8: critical-value brackets -------------------------------------


@pytest.fixture(scope="session")
def ref_brackets_session(ref_surface):
    return mane.bracket_cu(ref_surface, (0.0, 1.0))


def test_criterion_8_critical_brackets(flat_surface, ref_surface,
                                       ref_brackets_session):
    cu0 = mane.bracket_cu(flat_surface, (0.0, 0.5))
    c00 = mane.bracket_c0(flat_surface, (0.0, 0.5))
    assert cu0.lower == 0.0 and cu0.upper <= 0.01
    assert c00.lower == 0.0 and c00.upper <= 0.01

    cu = ref_brackets_session
    c0 = mane.bracket_c0(ref_surface, (0.0, 1.0))
    assert abs(cu.lower - c0.lower) <= DEFAULT.tolerances.bracket_width
    for rep in (cu, c0):
        for kap, S, loop in rep.witnesses:
            assert mane.revalidate_witness(ref_surface, kap, loop)
    _report(f"criterion 8: zero-field brackets collapse to [0, {cu0.upper:.3g}]; "
            f"magnetic torus lower brackets agree ({cu.lower:.4f} vs "
            f"{c0.lower:.4f}); all witnesses re-validate")


# -- criterion 9: determinism --------------------------------------------------


def test_criterion_9_determinism(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"surface": {"name": "reference"},
                                    "kappa": 0.2, "seed": 7}))
    blobs = []
    for tag in ("r1", "r2"):
        out = str(tmp_path / tag)
        assert cli.main(["descend", "--config", str(cfg_path), "--out", out]) == 0
        blobs.append((open(os.path.join(out, "minimizer_registry.json"), "rb").read(),
                      open(os.path.join(out, "alpha_loop.json"), "rb").read()))
    assert blobs[0] == blobs[1]
    _report("criterion 9: repeated runs produce byte-identical artifacts")
