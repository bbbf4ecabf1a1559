"""Conformally flat torus geometry from truncated double Fourier data.

The chart is the unit square on T^2 = R^2/Z^2.  The metric is
g = e^{2u(x,y)} (dx^2 + dy^2) and the magnetic 1-form is
theta = theta_x dx + theta_y dy, with u, theta_x, theta_y given as real
double Fourier series

    f(x, y) = sum_k [ c_k cos(2 pi (m_k x + n_k y)) + s_k sin(2 pi (m_k x + n_k y)) ].

Everything downstream differentiates these series analytically; no finite
differences enter the geometry.  Conventions fixed once for the whole
package: (d/dx, d/dy) is positively oriented, the Hodge star satisfies
star(dx ^ dy) = e^{-2u}, and rotate90 is the +90 degree rotation.

Surface description files are JSON with fields ``K``, ``fourier_u``,
``fourier_theta_x``, ``fourier_theta_y``; each series is a list of
``[m, n, cos_coeff, sin_coeff]`` entries with integer modes ``|m|,|n| <= K``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi


class FourierSeries2D:
    """Real truncated double Fourier series with exact partial derivatives."""

    def __init__(self, entries):
        entries = [(int(m), int(n), float(c), float(s)) for (m, n, c, s) in entries]
        if entries:
            self.m = np.array([e[0] for e in entries], dtype=float)
            self.n = np.array([e[1] for e in entries], dtype=float)
            # c*cos(phi) + s*sin(phi) = Re[(c - i s) e^{i phi}]
            self.w = np.array([e[2] - 1j * e[3] for e in entries])
        else:
            self.m = np.zeros(0)
            self.n = np.zeros(0)
            self.w = np.zeros(0, dtype=complex)
        self.entries = entries
        self._dcache: dict[tuple[int, int], np.ndarray] = {}

    def is_zero(self) -> bool:
        return self.m.size == 0 or not np.any(self.w)

    def max_mode(self) -> int:
        if self.m.size == 0:
            return 0
        return int(max(np.max(np.abs(self.m)), np.max(np.abs(self.n))))

    def _weights(self, dx: int, dy: int) -> np.ndarray:
        key = (dx, dy)
        got = self._dcache.get(key)
        if got is None:
            got = self.w * (1j * TWO_PI * self.m) ** dx * (1j * TWO_PI * self.n) ** dy
            self._dcache[key] = got
        return got

    def phases(self, points: np.ndarray) -> np.ndarray:
        """e^{i phi} for every (point, mode) pair; points has shape (..., 2)."""
        pts = np.asarray(points, dtype=float)
        phi = TWO_PI * (pts[..., 0, None] * self.m + pts[..., 1, None] * self.n)
        return np.exp(1j * phi)

    def eval(self, points, dx: int = 0, dy: int = 0, phases=None):
        """Value of d^dx/dx^dx d^dy/dy^dy of the series at the given points."""
        pts = np.asarray(points, dtype=float)
        if self.m.size == 0:
            return np.zeros(pts.shape[:-1])
        ph = self.phases(pts) if phases is None else phases
        return (ph @ self._weights(dx, dy)).real


def _as_series(obj) -> FourierSeries2D:
    if isinstance(obj, FourierSeries2D):
        return obj
    return FourierSeries2D(obj or [])


@dataclass(frozen=True)
class SurfaceModel:
    """Immutable torus surface: conformal factor series and 1-form series.

    Safe to share across threads; every operation below is pure.
    """

    u: FourierSeries2D
    theta_x: FourierSeries2D
    theta_y: FourierSeries2D
    K: int = 8
    name: str = "surface"

    def __post_init__(self):
        for label, series in (("u", self.u), ("theta_x", self.theta_x), ("theta_y", self.theta_y)):
            if series.max_mode() > self.K:
                raise ConfigError(f"series '{label}' exceeds max mode K={self.K}")

    # -- pointwise data -------------------------------------------------

    def conformal(self, points):
        """e^{2u}: the single metric coefficient of g = e^{2u} I."""
        return np.exp(2.0 * self.u.eval(points))

    def grad_u(self, points):
        pts = np.asarray(points, dtype=float)
        ph = self.u.phases(pts)
        return np.stack(
            [self.u.eval(pts, 1, 0, phases=ph), self.u.eval(pts, 0, 1, phases=ph)], axis=-1
        )

    def hess_u(self, points):
        pts = np.asarray(points, dtype=float)
        ph = self.u.phases(pts)
        uxx = self.u.eval(pts, 2, 0, phases=ph)
        uxy = self.u.eval(pts, 1, 1, phases=ph)
        uyy = self.u.eval(pts, 0, 2, phases=ph)
        out = np.empty(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = uxx
        out[..., 0, 1] = uxy
        out[..., 1, 0] = uxy
        out[..., 1, 1] = uyy
        return out

    def theta(self, points):
        pts = np.asarray(points, dtype=float)
        return np.stack([self.theta_x.eval(pts), self.theta_y.eval(pts)], axis=-1)

    def dtheta_jac(self, points):
        """J[a, b] = d theta_a / d x_b."""
        pts = np.asarray(points, dtype=float)
        phx = self.theta_x.phases(pts)
        phy = self.theta_y.phases(pts)
        out = np.empty(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = self.theta_x.eval(pts, 1, 0, phases=phx)
        out[..., 0, 1] = self.theta_x.eval(pts, 0, 1, phases=phx)
        out[..., 1, 0] = self.theta_y.eval(pts, 1, 0, phases=phy)
        out[..., 1, 1] = self.theta_y.eval(pts, 0, 1, phases=phy)
        return out

    def theta_hess(self, points):
        """H[a, b, c] = d^2 theta_a / d x_b d x_c."""
        pts = np.asarray(points, dtype=float)
        out = np.empty(pts.shape[:-1] + (2, 2, 2))
        for a, series in enumerate((self.theta_x, self.theta_y)):
            ph = series.phases(pts)
            fxx = series.eval(pts, 2, 0, phases=ph)
            fxy = series.eval(pts, 1, 1, phases=ph)
            fyy = series.eval(pts, 0, 2, phases=ph)
            out[..., a, 0, 0] = fxx
            out[..., a, 0, 1] = fxy
            out[..., a, 1, 0] = fxy
            out[..., a, 1, 1] = fyy
        return out

    def dtheta_density(self, points):
        """Coefficient b of d theta = b dx ^ dy."""
        pts = np.asarray(points, dtype=float)
        return self.theta_y.eval(pts, 1, 0) - self.theta_x.eval(pts, 0, 1)

    def magnetic_function(self, points):
        """f = star(d theta) = b e^{-2u}."""
        return self.dtheta_density(points) * np.exp(-2.0 * self.u.eval(points))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "K": self.K,
            "fourier_u": [list(e) for e in self.u.entries],
            "fourier_theta_x": [list(e) for e in self.theta_x.entries],
            "fourier_theta_y": [list(e) for e in self.theta_y.entries],
        }


def surface_from_dict(data: dict) -> SurfaceModel:
    try:
        return SurfaceModel(
            u=_as_series(data.get("fourier_u")),
            theta_x=_as_series(data.get("fourier_theta_x")),
            theta_y=_as_series(data.get("fourier_theta_y")),
            K=int(data.get("K", 8)),
            name=str(data.get("name", "surface")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad surface description: {exc}") from exc


def load_surface(path) -> SurfaceModel:
    with open(path) as fh:
        return surface_from_dict(json.load(fh))


def save_surface(surface: SurfaceModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(surface.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class GeometryEval:
    """Pointwise cache of metric, Christoffel, 1-form and field data."""

    point: np.ndarray
    g: np.ndarray                  # 2x2 metric components
    christoffel: np.ndarray        # Gamma[k, i, j]
    f: float                       # star(d theta)
    theta: np.ndarray              # covector components
    dtheta_density: float          # coefficient of dx ^ dy in d theta


def eval_geometry(surface: SurfaceModel, point) -> GeometryEval:
    """All pointwise geometric data, from exact derivatives of the series."""
    pt = np.asarray(point, dtype=float)
    e2u = float(surface.conformal(pt))
    ux, uy = surface.grad_u(pt)
    gamma = np.array(
        [
            [[ux, uy], [uy, -ux]],
            [[-uy, ux], [ux, uy]],
        ]
    )
    b = float(surface.dtheta_density(pt))
    return GeometryEval(
        point=pt,
        g=e2u * np.eye(2),
        christoffel=gamma,
        f=b / e2u,
        theta=surface.theta(pt),
        dtheta_density=b,
    )


def rotate90(surface: SurfaceModel, point, vector) -> np.ndarray:
    """The almost complex structure i: +90 degree rotation in the metric.

    For a conformal metric the chart rotation is already the metric
    rotation, so the point only fixes which tangent space we are in.
    """
    v = np.asarray(vector, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def metric_inner(surface: SurfaceModel, point, v, w) -> float:
    """g_point(v, w) for the conformal metric."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return float(surface.conformal(point)) * float(np.dot(v, w))


def mean_f_area(surface: SurfaceModel, grid: int = 256) -> float:
    """Mean of f * (area density) over the fundamental domain.

    Exactness of d theta forces this to vanish; kept as a cheap Stokes
    diagnostic for surface data.
    """
    xs = (np.arange(grid) + 0.5) / grid
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X, Y], axis=-1).reshape(-1, 2)
    return float(np.mean(surface.dtheta_density(pts)))
