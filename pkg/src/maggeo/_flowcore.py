"""Fixed-step RK4 kernels for the magnetic flow and its linearization.

The flow is the Euler-Lagrange field of L = e^{2u} |v|^2 / 2 + theta(v)
in chart coordinates:

    a_x = -u_x (v_x^2 - v_y^2) - 2 u_y v_x v_y + f v_y
    a_y = -u_y (v_y^2 - v_x^2) - 2 u_x v_x v_y - f v_x

with f = (d_x theta_y - d_y theta_x) e^{-2u}.  The magnetic term enters
with the clockwise rotation of the velocity; this is forced by the
variational principle once the Hodge star and the +90 degree rotation are
fixed, and is cross-checked against discrete action stationarity in the
test suite.

The variational kernel integrates dM/dt = J(z(t)) M with the same RK4
stages, so the returned M is the exact Jacobian of the discrete RK4 flow
map (up to roundoff); finite differences of the flow map reproduce it.

A numba-compiled version is used when numba imports cleanly; the numpy
fallback is semantically identical.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def _py_geom(x, y, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty):
    """u value/grad/hess, theta jacobian rows needed by f, and grad of the
    dx^dy density b.  Returns 12 floats."""
    u = ux = uy = uxx = uxy = uyy = 0.0
    for k in range(m_u.size):
        am = TWO_PI * m_u[k]
        an = TWO_PI * n_u[k]
        ph = am * x + an * y
        cp = math.cos(ph)
        sp = math.sin(ph)
        base = c_u[k] * cp + s_u[k] * sp
        dbase = -c_u[k] * sp + s_u[k] * cp
        u += base
        ux += am * dbase
        uy += an * dbase
        uxx -= am * am * base
        uxy -= am * an * base
        uyy -= an * an * base
    # b = d_x theta_y - d_y theta_x and its gradient
    b = bx = by = 0.0
    for k in range(m_tx.size):
        am = TWO_PI * m_tx[k]
        an = TWO_PI * n_tx[k]
        ph = am * x + an * y
        cp = math.cos(ph)
        sp = math.sin(ph)
        base = c_tx[k] * cp + s_tx[k] * sp
        dbase = -c_tx[k] * sp + s_tx[k] * cp
        b -= an * dbase
        bx += am * an * base
        by += an * an * base
    for k in range(m_ty.size):
        am = TWO_PI * m_ty[k]
        an = TWO_PI * n_ty[k]
        ph = am * x + an * y
        cp = math.cos(ph)
        sp = math.sin(ph)
        base = c_ty[k] * cp + s_ty[k] * sp
        dbase = -c_ty[k] * sp + s_ty[k] * cp
        b += am * dbase
        bx -= am * am * base
        by -= am * an * base
    return u, ux, uy, uxx, uxy, uyy, b, bx, by


def _py_rhs(z, arrs):
    x, y, vx, vy = z[0], z[1], z[2], z[3]
    u, ux, uy, _, _, _, b, _, _ = _py_geom(x, y, *arrs)
    f = b * math.exp(-2.0 * u)
    out = np.empty(4)
    out[0] = vx
    out[1] = vy
    out[2] = -ux * (vx * vx - vy * vy) - 2.0 * uy * vx * vy + f * vy
    out[3] = -uy * (vy * vy - vx * vx) - 2.0 * ux * vx * vy - f * vx
    return out


def _py_jac(z, arrs):
    x, y, vx, vy = z[0], z[1], z[2], z[3]
    u, ux, uy, uxx, uxy, uyy, b, bx, by = _py_geom(x, y, *arrs)
    e = math.exp(-2.0 * u)
    f = b * e
    fx = e * (bx - 2.0 * ux * b)
    fy = e * (by - 2.0 * uy * b)
    J = np.zeros((4, 4))
    J[0, 2] = 1.0
    J[1, 3] = 1.0
    J[2, 0] = -uxx * (vx * vx - vy * vy) - 2.0 * uxy * vx * vy + fx * vy
    J[2, 1] = -uxy * (vx * vx - vy * vy) - 2.0 * uyy * vx * vy + fy * vy
    J[2, 2] = -2.0 * ux * vx - 2.0 * uy * vy
    J[2, 3] = 2.0 * ux * vy - 2.0 * uy * vx + f
    J[3, 0] = -uxy * (vy * vy - vx * vx) - 2.0 * uxx * vx * vy - fx * vx
    J[3, 1] = -uyy * (vy * vy - vx * vx) - 2.0 * uxy * vx * vy - fy * vx
    J[3, 2] = 2.0 * uy * vx - 2.0 * ux * vy - f
    J[3, 3] = -2.0 * uy * vy - 2.0 * ux * vx
    return J


def _py_rk4(z0, t, nsteps, arrs):
    z = z0.copy()
    h = t / nsteps
    for _ in range(nsteps):
        k1 = _py_rhs(z, arrs)
        k2 = _py_rhs(z + 0.5 * h * k1, arrs)
        k3 = _py_rhs(z + 0.5 * h * k2, arrs)
        k4 = _py_rhs(z + h * k3, arrs)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return z


def _py_rk4_var(z0, M0, t, nsteps, arrs):
    z = z0.copy()
    M = M0.copy()
    h = t / nsteps
    for _ in range(nsteps):
        k1 = _py_rhs(z, arrs)
        K1 = _py_jac(z, arrs) @ M
        z2 = z + 0.5 * h * k1
        M2 = M + 0.5 * h * K1
        k2 = _py_rhs(z2, arrs)
        K2 = _py_jac(z2, arrs) @ M2
        z3 = z + 0.5 * h * k2
        M3 = M + 0.5 * h * K2
        k3 = _py_rhs(z3, arrs)
        K3 = _py_jac(z3, arrs) @ M3
        z4 = z + h * k3
        M4 = M + h * K3
        k4 = _py_rhs(z4, arrs)
        K4 = _py_jac(z4, arrs) @ M4
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        M = M + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
    return z, M


try:
    from numba import njit

    _geom = njit(cache=True)(_py_geom)

    @njit(cache=True)
    def _nb_rhs(z, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty):
        x, y, vx, vy = z[0], z[1], z[2], z[3]
        u, ux, uy, _, _, _, b, _, _ = _geom(
            x, y, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty)
        f = b * math.exp(-2.0 * u)
        out = np.empty(4)
        out[0] = vx
        out[1] = vy
        out[2] = -ux * (vx * vx - vy * vy) - 2.0 * uy * vx * vy + f * vy
        out[3] = -uy * (vy * vy - vx * vx) - 2.0 * ux * vx * vy - f * vx
        return out

    @njit(cache=True)
    def _nb_jac(z, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty):
        x, y, vx, vy = z[0], z[1], z[2], z[3]
        u, ux, uy, uxx, uxy, uyy, b, bx, by = _geom(
            x, y, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty)
        e = math.exp(-2.0 * u)
        f = b * e
        fx = e * (bx - 2.0 * ux * b)
        fy = e * (by - 2.0 * uy * b)
        J = np.zeros((4, 4))
        J[0, 2] = 1.0
        J[1, 3] = 1.0
        J[2, 0] = -uxx * (vx * vx - vy * vy) - 2.0 * uxy * vx * vy + fx * vy
        J[2, 1] = -uxy * (vx * vx - vy * vy) - 2.0 * uyy * vx * vy + fy * vy
        J[2, 2] = -2.0 * ux * vx - 2.0 * uy * vy
        J[2, 3] = 2.0 * ux * vy - 2.0 * uy * vx + f
        J[3, 0] = -uxy * (vy * vy - vx * vx) - 2.0 * uxx * vx * vy - fx * vx
        J[3, 1] = -uyy * (vy * vy - vx * vx) - 2.0 * uxy * vx * vy - fy * vx
        J[3, 2] = 2.0 * uy * vx - 2.0 * ux * vy - f
        J[3, 3] = -2.0 * uy * vy - 2.0 * ux * vx
        return J

    @njit(cache=True)
    def _nb_rk4(z0, t, nsteps, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx,
                m_ty, n_ty, c_ty, s_ty):
        z = z0.copy()
        h = t / nsteps
        for _ in range(nsteps):
            k1 = _nb_rhs(z, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty)
            k2 = _nb_rhs(z + 0.5 * h * k1, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx,
                         m_ty, n_ty, c_ty, s_ty)
            k3 = _nb_rhs(z + 0.5 * h * k2, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx,
                         m_ty, n_ty, c_ty, s_ty)
            k4 = _nb_rhs(z + h * k3, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx,
                         m_ty, n_ty, c_ty, s_ty)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return z

    @njit(cache=True)
    def _nb_rk4_var(z0, M0, t, nsteps, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx,
                    m_ty, n_ty, c_ty, s_ty):
        z = z0.copy()
        M = M0.copy()
        h = t / nsteps
        for _ in range(nsteps):
            k1 = _nb_rhs(z, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty)
            K1 = _nb_jac(z, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty) @ M
            z2 = z + 0.5 * h * k1
            M2 = M + 0.5 * h * K1
            k2 = _nb_rhs(z2, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty)
            K2 = _nb_jac(z2, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty) @ M2
            z3 = z + 0.5 * h * k2
            M3 = M + 0.5 * h * K2
            k3 = _nb_rhs(z3, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty)
            K3 = _nb_jac(z3, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty) @ M3
            z4 = z + h * k3
            M4 = M + h * K3
            k4 = _nb_rhs(z4, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty)
            K4 = _nb_jac(z4, m_u, n_u, c_u, s_u, m_tx, n_tx, c_tx, s_tx, m_ty, n_ty, c_ty, s_ty) @ M4
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            M = M + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
        return z, M

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def surface_arrays(surface):
    """Packed coefficient arrays consumed by the kernels."""

    def pack(series):
        if series.m.size == 0:
            return (np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))
        return (
            np.ascontiguousarray(series.m),
            np.ascontiguousarray(series.n),
            np.ascontiguousarray(series.w.real),
            np.ascontiguousarray(-series.w.imag),
        )

    return pack(surface.u) + pack(surface.theta_x) + pack(surface.theta_y)


def rk4(z0, t, nsteps, arrs):
    if HAVE_NUMBA:
        return _nb_rk4(np.asarray(z0, dtype=float), float(t), int(nsteps), *arrs)
    return _py_rk4(np.asarray(z0, dtype=float), float(t), int(nsteps), arrs)


def rk4_var(z0, M0, t, nsteps, arrs):
    if HAVE_NUMBA:
        return _nb_rk4_var(np.asarray(z0, dtype=float), np.asarray(M0, dtype=float),
                           float(t), int(nsteps), *arrs)
    return _py_rk4_var(np.asarray(z0, dtype=float), np.asarray(M0, dtype=float),
                       float(t), int(nsteps), arrs)


def rhs(z, arrs):
    if HAVE_NUMBA:
        return _nb_rhs(np.asarray(z, dtype=float), *arrs)
    return _py_rhs(np.asarray(z, dtype=float), arrs)
