"""Shared fixtures: specimen orbits, cylinders, and pipeline runs.

The expensive artifacts (refined orbits, continuations, the mountain-pass
pipeline) are session-scoped and reused across test modules, including
the acceptance suite.
"""

import time

import numpy as np
import pytest
import hypothesis

from maggeo import scenarios, localmin, minimax, experiment
from maggeo.config import DEFAULT
from maggeo.continuation import continue_cylinder
from maggeo.dynamics import PhasePoint, linearize_flow
from maggeo.index import poincare_reduce, index_report
from maggeo.refine import refine_orbit, orbit_to_loop

hypothesis.settings.register_profile(
    "ci", max_examples=25, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("ci")

REF_KAPPA = 0.2
GYR_KAPPA = 0.05


@pytest.fixture(scope="session")
def flat_surface():
    return scenarios.zero_field()


@pytest.fixture(scope="session")
def ref_surface():
    return scenarios.reference()


@pytest.fixture(scope="session")
def pert_surface():
    return scenarios.perturbed()


@pytest.fixture(scope="session")
def bumpy_surface():
    return scenarios.bumpy()


@pytest.fixture(scope="session")
def dwell_surface():
    return scenarios.double_well()


@pytest.fixture(scope="session")
def line_bundle(ref_surface):
    """The winding-line orbit of the reference scenario: T'(kappa) < 0."""
    v = np.sqrt(2 * REF_KAPPA)
    orbit = refine_orbit(ref_surface, (PhasePoint.of([0.0, 0.75], [v, 0.0]), 1.0 / v),
                         REF_KAPPA, DEFAULT)
    loop = orbit_to_loop(ref_surface, orbit, 128, DEFAULT)
    cyl = continue_cylinder(ref_surface, orbit, REF_KAPPA, 0.02, steps=2)
    mon = linearize_flow(ref_surface, orbit, DEFAULT)
    red = poincare_reduce(ref_surface, mon, cyl.zeta, DEFAULT)
    return {"surface": ref_surface, "kappa": REF_KAPPA, "orbit": orbit,
            "loop": loop, "cylinder": cyl, "monodromy": mon, "reduced": red}


@pytest.fixture(scope="session")
def gyration_bundle(pert_surface):
    """Gyration orbit near the field maximum: T'(kappa) > 0, elliptic."""
    b = float(pert_surface.magnetic_function(np.array([0.5, 0.0])))
    r = np.sqrt(2 * GYR_KAPPA) / abs(b)
    orbit = refine_orbit(
        pert_surface,
        (PhasePoint.of([0.5 + r, 0.0], [0.0, np.sqrt(2 * GYR_KAPPA)]),
         2 * np.pi / abs(b)),
        GYR_KAPPA, DEFAULT)
    loop = orbit_to_loop(pert_surface, orbit, 128, DEFAULT)
    cyl = continue_cylinder(pert_surface, orbit, GYR_KAPPA, 0.008, steps=2)
    mon = linearize_flow(pert_surface, orbit, DEFAULT)
    red = poincare_reduce(pert_surface, mon, cyl.zeta, DEFAULT)
    return {"surface": pert_surface, "kappa": GYR_KAPPA, "orbit": orbit,
            "loop": loop, "cylinder": cyl, "monodromy": mon, "reduced": red}


@pytest.fixture(scope="session")
def line_report(line_bundle):
    return index_report(line_bundle["surface"], line_bundle["orbit"],
                        line_bundle["kappa"], DEFAULT,
                        zeta=line_bundle["cylinder"].zeta,
                        loop=line_bundle["loop"])


@pytest.fixture(scope="session")
def gyration_report(gyration_bundle):
    return index_report(gyration_bundle["surface"], gyration_bundle["orbit"],
                        gyration_bundle["kappa"], DEFAULT,
                        zeta=gyration_bundle["cylinder"].zeta,
                        loop=gyration_bundle["loop"])


@pytest.fixture(scope="session")
def ref_alpha(ref_surface):
    return localmin.find_alpha(ref_surface, REF_KAPPA, DEFAULT)


@pytest.fixture(scope="session")
def three_orbit(ref_surface):
    """Full pipeline run on the reference scenario, with wall time."""
    t0 = time.time()
    report = experiment.three_orbit_run(ref_surface, REF_KAPPA, DEFAULT)
    elapsed = time.time() - t0
    return {"report": report, "elapsed": elapsed}


@pytest.fixture(scope="session")
def ladder(ref_surface):
    return experiment.infinitude_probe(ref_surface, REF_KAPPA,
                                       ladder=(1, 2, 4, 8), cfg=DEFAULT)


@pytest.fixture(scope="session")
def dwell_minimizers(dwell_surface):
    from maggeo.loops import straight_loop
    res = localmin.descend(dwell_surface,
                           straight_loop((0.0, 0.5), (1, 0), np.exp(0.25), 128),
                           0.5, DEFAULT)
    assert res.status == localmin.MINIMIZER
    return res
