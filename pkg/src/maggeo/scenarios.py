"""Built-in surface scenarios used by tests, scripts and the CLI.

All of them are small Fourier tables on the unit-square torus chart.
"""

from __future__ import annotations

from .geometry import FourierSeries2D, SurfaceModel


def zero_field() -> SurfaceModel:
    """Flat torus, no magnetic field."""
    return SurfaceModel(FourierSeries2D([]), FourierSeries2D([]), FourierSeries2D([]),
                        K=8, name="zero_field")


def reference(a: float = 1.0) -> SurfaceModel:
    """Flat torus with theta = a sin(2 pi y) dx.

    Integrable (x-translation symmetry): the momentum v_x + a sin(2 pi y)
    is conserved.  The lines y = 1/4 (run in -x) and y = 3/4 (run in +x)
    are closed orbits at every energy with free-period action
    sqrt(2 kappa) - a, and both critical values c_u = c_0 equal a^2/2.
    """
    return SurfaceModel(
        FourierSeries2D([]),
        FourierSeries2D([(0, 1, 0.0, a)]),
        FourierSeries2D([]),
        K=8,
        name="reference",
    )


def perturbed(a: float = 1.0, b: float = 0.35) -> SurfaceModel:
    """Two-mode field theta = a sin(2 pi y) dx + b sin(2 pi x) dy.

    Breaks the translation symmetry of ``reference``; gyration orbits near
    the field maximum at (1/2, 0) become transversally non-degenerate.
    """
    return SurfaceModel(
        FourierSeries2D([]),
        FourierSeries2D([(0, 1, 0.0, a)]),
        FourierSeries2D([(1, 0, 0.0, b)]),
        K=8,
        name="perturbed",
    )


def double_well(depth: float = 0.25) -> SurfaceModel:
    """Zero field, conformal factor u = depth cos(2 pi y).

    The straight (1,0) line at y = 1/2 is the minimizing closed geodesic
    and the line at y = 0 is an index-1 saddle.  Connecting the minimizer
    to its (0,1)-translate on the cover gives a mountain-pass problem
    whose value is exactly sqrt(2 kappa) e^{depth} (the saddle line's
    action), the oracle used by the tests.
    """
    return SurfaceModel(
        FourierSeries2D([(0, 1, depth, 0.0)]),
        FourierSeries2D([]),
        FourierSeries2D([]),
        K=8,
        name="double_well",
    )


def bumpy() -> SurfaceModel:
    """Generic low-mode surface with nothing special about it.

    Fixed coefficients (no randomness) so oracle tests are reproducible.
    """
    u = [
        (1, 0, 0.08, -0.05),
        (0, 1, -0.06, 0.04),
        (1, 1, 0.03, 0.02),
        (2, 1, -0.015, 0.01),
    ]
    tx = [
        (0, 1, 0.11, 0.52),
        (1, 0, -0.07, 0.09),
        (1, 2, 0.04, -0.03),
    ]
    ty = [
        (1, 0, 0.06, 0.21),
        (0, 2, -0.05, 0.04),
        (2, 1, 0.02, 0.03),
    ]
    return SurfaceModel(FourierSeries2D(u), FourierSeries2D(tx), FourierSeries2D(ty),
                        K=8, name="bumpy")


BUILTIN = {
    "zero_field": zero_field,
    "reference": reference,
    "perturbed": perturbed,
    "double_well": double_well,
    "bumpy": bumpy,
}


def by_name(name: str) -> SurfaceModel:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise KeyError(f"unknown scenario '{name}', have {sorted(BUILTIN)}") from None
