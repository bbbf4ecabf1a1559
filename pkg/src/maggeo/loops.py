"""Discrete closed curves with free period.

A Loop is the discrete point of H^1(T, M) x (0, inf): N uniformly spaced
samples stored on the universal cover R^2, an integer winding pair, and a
period T > 0.  The implicit closing sample is samples[0] + winding.

A Chain is an open or closed polyline with its own duration per segment.
Chains are what loop juxtaposition produces: gluing keeps each piece's
parametrization, so chain actions add exactly.  Uniform loops are the
special case of equal segment durations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MIN_SAMPLES = 16


@dataclass(frozen=True)
class Loop:
    samples: np.ndarray          # (N, 2) universal-cover points
    period: float
    winding: tuple[int, int]

    def __post_init__(self):
        pts = np.asarray(self.samples, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("samples must have shape (N, 2)")
        if pts.shape[0] < MIN_SAMPLES:
            raise ValueError(f"need at least {MIN_SAMPLES} samples, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)) or not np.isfinite(self.period):
            raise ValueError("non-finite loop data")
        if self.period <= 0:
            raise ValueError("period must be positive")
        object.__setattr__(self, "samples", pts)
        object.__setattr__(self, "winding", (int(self.winding[0]), int(self.winding[1])))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dt(self) -> float:
        return self.period / self.n

    def winding_vec(self) -> np.ndarray:
        return np.array(self.winding, dtype=float)

    def closed_points(self) -> np.ndarray:
        """Samples with the closing point appended: shape (N+1, 2)."""
        return np.vstack([self.samples, self.samples[0] + self.winding_vec()])

    def deltas(self) -> np.ndarray:
        pts = self.closed_points()
        return pts[1:] - pts[:-1]

    def midpoints(self) -> np.ndarray:
        pts = self.closed_points()
        return 0.5 * (pts[1:] + pts[:-1])

    def velocities(self) -> np.ndarray:
        """Piecewise velocity per segment, d position / d time."""
        return self.deltas() / self.dt

    def with_samples(self, samples) -> "Loop":
        return Loop(samples, self.period, self.winding)

    def with_period(self, period: float) -> "Loop":
        return Loop(self.samples, period, self.winding)

    def translate(self, vec) -> "Loop":
        return Loop(self.samples + np.asarray(vec, dtype=float), self.period, self.winding)

    def to_dict(self) -> dict:
        return {
            "N": self.n,
            "T": self.period,
            "winding": list(self.winding),
            "samples": [float(v) for v in self.samples.reshape(-1)],
        }


def loop_from_dict(data: dict) -> Loop:
    pts = np.array(data["samples"], dtype=float).reshape(int(data["N"]), 2)
    wx, wy = data["winding"]
    return Loop(pts, float(data["T"]), (int(wx), int(wy)))


def load_loop(path) -> Loop:
    with open(path) as fh:
        return loop_from_dict(json.load(fh))


def save_loop(loop: Loop, path) -> None:
    with open(path, "w") as fh:
        json.dump(loop.to_dict(), fh)
        fh.write("\n")


# -- constructors ------------------------------------------------------


def circle(center, radius: float, period: float, n: int = 128,
           orientation: int = +1, phase: float = 0.0) -> Loop:
    s = 2.0 * np.pi * (np.arange(n) / n * orientation + phase)
    c = np.asarray(center, dtype=float)
    pts = c + radius * np.stack([np.cos(s), np.sin(s)], axis=-1)
    return Loop(pts, period, (0, 0))


def straight_loop(base, winding, period: float, n: int = 128) -> Loop:
    w = np.array(winding, dtype=float)
    pts = np.asarray(base, dtype=float) + np.outer(np.arange(n) / n, w)
    return Loop(pts, period, (int(winding[0]), int(winding[1])))


def constant_loop(point, period: float, n: int = 128) -> Loop:
    return Loop(np.tile(np.asarray(point, dtype=float), (n, 1)), period, (0, 0))


# -- structural operations ---------------------------------------------


def iterate(loop: Loop, n: int) -> Loop:
    """The n-th iterate: n copies in time, windings and period scale by n."""
    if n < 1:
        raise ValueError("iterate count must be >= 1")
    if n == 1:
        return loop
    w = loop.winding_vec()
    blocks = [loop.samples + k * w for k in range(n)]
    return Loop(np.vstack(blocks), n * loop.period, (n * loop.winding[0], n * loop.winding[1]))


def shift_samples(loop: Loop, j: int) -> Loop:
    """Cyclic time shift: start the loop at sample j (universal cover kept)."""
    j = int(j) % loop.n
    if j == 0:
        return loop
    w = loop.winding_vec()
    pts = np.vstack([loop.samples[j:], loop.samples[:j] + w])
    pts = pts - np.floor(pts[0] - loop.samples[0])  # keep base point in a fixed cell
    return Loop(pts, loop.period, loop.winding)


def resample(loop: Loop, n: int) -> Loop:
    """Periodic piecewise-linear resampling to n uniform samples."""
    if n == loop.n:
        return loop
    pts = loop.closed_points()
    s_old = np.arange(loop.n + 1) / loop.n
    s_new = np.arange(n) / n
    out = np.empty((n, 2))
    for c in range(2):
        out[:, c] = np.interp(s_new, s_old, pts[:, c])
    return Loop(out, loop.period, loop.winding)


def concat(a: Loop, b: Loop, dt_tol: float = 1e-9) -> Loop:
    """Juxtapose two loops sharing base point and sampling rate.

    Requires equal time-per-sample (the discrete analogue of gluing curves
    without reparametrizing) and that b starts at a's end point modulo the
    lattice.  The result's action is exactly the sum of the pieces'.
    """
    if abs(a.dt - b.dt) > dt_tol * max(a.dt, b.dt):
        raise ValueError("concat requires equal time-per-sample")
    a_end = a.samples[0] + a.winding_vec()
    off = a_end - b.samples[0]
    off_int = np.round(off)
    if not np.allclose(off, off_int, atol=1e-9):
        raise ValueError("loops do not share the junction point on the torus")
    pts = np.vstack([a.samples, b.samples + off_int])
    return Loop(pts, a.period + b.period,
                (a.winding[0] + b.winding[0], a.winding[1] + b.winding[1]))


def align_shift(a: Loop, b: Loop) -> int:
    """Sample shift of a minimizing the L2 mismatch against b (same N)."""
    if a.n != b.n:
        raise ValueError("align_shift needs equal sample counts")
    best, best_j = np.inf, 0
    for j in range(a.n):
        d = shift_samples(a, j).samples - b.samples
        d = d - np.round(np.mean(d, axis=0))  # compare modulo deck transformations
        val = float(np.sum(d * d))
        if val < best:
            best, best_j = val, j
    return best_j


def point_at(loop: Loop, s) -> np.ndarray:
    """Universal-cover position at loop parameter s (fraction of a period).

    Piecewise linear between samples; s may be any real, with
    x(s + 1) = x(s) + winding.
    """
    s = np.asarray(s, dtype=float)
    k = np.floor(s)
    frac = s - k
    pts = loop.closed_points()
    grid = np.arange(loop.n + 1) / loop.n
    out = np.empty(s.shape + (2,))
    for c in range(2):
        out[..., c] = np.interp(frac, grid, pts[:, c])
    return out + k[..., None] * loop.winding_vec()


def c0_distance(a: Loop, b: Loop, n: int = 256) -> float:
    """sup distance between the curves after phase alignment (torus metric).

    Alignment is refined to fractional sample shifts (golden section on
    the mean-square mismatch), so resampling phase does not limit the
    resolution of "same curve" decisions.
    """
    aa, bb = resample(a, n), resample(b, n)
    j = align_shift(aa, bb)
    grid = np.arange(n) / n
    offset = None

    def mismatch(tau):
        nonlocal offset
        y = point_at(aa, grid + tau / n)
        d = y - bb.samples
        if offset is None:
            offset = np.round(np.mean(d, axis=0))
        d = d - offset
        d = d - np.round(d)    # pointwise nearest lattice representative
        return d

    def l2(tau):
        d = mismatch(tau)
        return float(np.sum(d * d))

    lo, hi = j - 1.0, j + 1.0
    gr = 0.5 * (np.sqrt(5.0) - 1.0)
    x1 = hi - gr * (hi - lo)
    x2 = lo + gr * (hi - lo)
    f1, f2 = l2(x1), l2(x2)
    for _ in range(50):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - gr * (hi - lo)
            f1 = l2(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + gr * (hi - lo)
            f2 = l2(x2)
    tau = 0.5 * (lo + hi)
    d = mismatch(tau)
    return float(np.max(np.linalg.norm(d, axis=1)))


@dataclass(frozen=True)
class LoopTangent:
    xi: np.ndarray               # (N, 2)
    tau: float

    def scaled(self, c: float) -> "LoopTangent":
        return LoopTangent(self.xi * c, self.tau * c)


# -- chains -------------------------------------------------------------


@dataclass(frozen=True)
class Chain:
    """Polyline with per-segment durations; open unless stated otherwise."""

    points: np.ndarray           # (M+1, 2)
    durations: np.ndarray        # (M,)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        dur = np.asarray(self.durations, dtype=float)
        if pts.shape[0] != dur.shape[0] + 1:
            raise ValueError("need one more point than durations")
        if np.any(dur <= 0):
            raise ValueError("segment durations must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "durations", dur)

    @property
    def total_time(self) -> float:
        return float(np.sum(self.durations))

    def reverse(self) -> "Chain":
        return Chain(self.points[::-1].copy(), self.durations[::-1].copy())

    def prefix(self, k: int) -> "Chain":
        """First k segments."""
        return Chain(self.points[: k + 1], self.durations[:k])

    def suffix(self, k: int) -> "Chain":
        """Segments from k on."""
        return Chain(self.points[k:], self.durations[k:])


def chain_concat(*chains: Chain) -> Chain:
    parts = [c for c in chains if c.durations.size > 0]
    if not parts:
        raise ValueError("nothing to concatenate")
    pts = [parts[0].points]
    durs = [parts[0].durations]
    for c in parts[1:]:
        off = pts[-1][-1] - c.points[0]
        off_int = np.round(off)
        if not np.allclose(off, off_int, atol=1e-9):
            raise ValueError("chain junction points disagree on the torus")
        pts.append(c.points[1:] + off_int)
        durs.append(c.durations)
    return Chain(np.vstack(pts), np.concatenate(durs))


def loop_to_chain(loop: Loop) -> Chain:
    return Chain(loop.closed_points(), np.full(loop.n, loop.dt))


def chain_to_loop(chain: Chain, n: int) -> Loop:
    """Resample a closed chain (end - start in Z^2) to a uniform loop."""
    off = chain.points[-1] - chain.points[0]
    w = np.round(off)
    if not np.allclose(off, w, atol=1e-8):
        raise ValueError("chain is not closed on the torus")
    t_knots = np.concatenate([[0.0], np.cumsum(chain.durations)])
    t_new = chain.total_time * np.arange(n) / n
    out = np.empty((n, 2))
    for c in range(2):
        out[:, c] = np.interp(t_new, t_knots, chain.points[:, c])
    return Loop(out, chain.total_time, (int(w[0]), int(w[1])))


def split_chain_at_time(chain: Chain, t: float) -> tuple[Chain, Chain, Chain]:
    """Insert a node at time t; returns (refined chain, head, tail).

    The refined chain's action equals head's plus tail's exactly, because
    head and tail are its sub-chains sharing the inserted node.
    """
    if not 0.0 < t < chain.total_time:
        raise ValueError("split time must be interior")
    t_knots = np.concatenate([[0.0], np.cumsum(chain.durations)])
    k = int(np.searchsorted(t_knots, t, side="right") - 1)
    t0, t1 = t_knots[k], t_knots[k + 1]
    lam = (t - t0) / (t1 - t0)
    if lam < 1e-12:   # already on a node
        head = chain.prefix(k)
        tail = chain.suffix(k)
        return chain, head, tail
    node = chain.points[k] + lam * (chain.points[k + 1] - chain.points[k])
    pts = np.vstack([chain.points[: k + 1], node[None, :], chain.points[k + 1:]])
    durs = np.concatenate(
        [chain.durations[:k], [t - t0, t1 - t], chain.durations[k + 1:]])
    refined = Chain(pts, durs)
    return refined, refined.prefix(k + 1), refined.suffix(k + 1)
