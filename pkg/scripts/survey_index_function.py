#!/usr/bin/env python3
"""Index-function survey of the two specimen orbits.

Refines the winding line orbit (period slope negative) and the gyration
orbit near the field maximum of the perturbed scenario (period slope
positive), continues both in energy, and dumps angle/index CSVs suitable
for plotting the unit-circle index function.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from maggeo import scenarios, refine, continuation, index as idx, jsonio
from maggeo.config import DEFAULT
from maggeo.dynamics import PhasePoint

OUT = os.path.join(os.path.dirname(__file__), "..", "out", "index_survey")


def specimen_line(kappa=0.2):
    surface = scenarios.reference()
    v = np.sqrt(2 * kappa)
    orbit = refine.refine_orbit(
        surface, (PhasePoint.of([0.0, 0.75], [v, 0.0]), 1.0 / v), kappa, DEFAULT)
    return surface, orbit


def specimen_gyration(kappa=0.05):
    surface = scenarios.perturbed()
    b = float(surface.magnetic_function(np.array([0.5, 0.0])))
    r = np.sqrt(2 * kappa) / abs(b)
    orbit = refine.refine_orbit(
        surface, (PhasePoint.of([0.5 + r, 0.0], [0.0, np.sqrt(2 * kappa)]),
                  2 * np.pi / abs(b)), kappa, DEFAULT)
    return surface, orbit


def main():
    os.makedirs(OUT, exist_ok=True)
    for tag, (surface, orbit) in (("line", specimen_line()),
                                  ("gyration", specimen_gyration())):
        cyl = continuation.continue_cylinder(surface, orbit, orbit.kappa,
                                             0.05 * orbit.kappa, steps=2)
        report = idx.index_report(surface, orbit, orbit.kappa, DEFAULT,
                                  zeta=cyl.zeta)
        jsonio.dump(report.to_dict(), os.path.join(OUT, f"{tag}_report.json"))
        samples = idx.LambdaSamples(np.array(report.lambda_angles),
                                    np.array(report.lambda_values),
                                    np.zeros(len(report.lambda_angles), int))
        idx.write_lambda_csv(os.path.join(OUT, f"{tag}_lambda.csv"), samples)
        print(f"{tag}: T'={report.shear:+.4f} i_T={report.i_fixed} "
              f"i={report.i_free} mean={report.mean_index:.4f} "
              f"S+-=({report.s_plus},{report.s_minus}) {report.stability}")


if __name__ == "__main__":
    main()
