"""Quadrature on full cells, cut cells and immersed boundaries.

Cut cells are integrated by choosing a height axis along which the zero
set of the level set is a single-valued graph inside the cell.  The base
edge is partitioned wherever the boundary enters or leaves through the
cell edges facing the height direction; on each base subinterval a 1D
Gauss rule is laid out, every node spawns a column in the height
direction, and the part of the column on the requested side of the level
set is again integrated with a 1D Gauss rule.  The boundary itself is
integrated over the same base partition with the arc length Jacobian
sqrt(1 + gamma'^2) obtained from implicit differentiation.

All rules report physical points and weights; weights of a volume rule
sum to the covered area, weights of a surface rule to the arc length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss, legder, legroots
from scipy.optimize import brentq

# Relative tolerance (in units of the cell size) for locating boundary
# crossings and for merging nearly coincident partition points.
ROOT_XTOL = 1e-14
MERGE_TOL = 1e-12

_GAUSS_MAX = 30


class QuadratureError(RuntimeError):
    """Raised when a cut rule cannot be constructed on a cell."""


@dataclass(frozen=True)
class QuadratureRule:
    """Plain point/weight rule; points are physical (n, 2) coordinates."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class SurfaceQuadratureRule:
    """Boundary rule carrying a unit normal per point.

    Normals follow the gradient of the level set, i.e. they point from
    the negative side towards the positive side.
    """

    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.size


def gauss_rule_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes and weights on [0, 1]."""
    if not 1 <= n <= _GAUSS_MAX:
        raise ValueError(f"gauss point count {n} outside [1, {_GAUSS_MAX}]")
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_lobatto_nodes(p: int) -> np.ndarray:
    """p + 1 Gauss-Lobatto points on [0, 1], endpoints included.

    Interior points are the roots of the derivative of the Legendre
    polynomial of degree p; the set is symmetrized about 1/2 to kill the
    last bits of root-finder noise.
    """
    if not 1 <= p <= 5:
        raise ValueError(f"element order {p} outside [1, 5]")
    if p == 1:
        return np.array([0.0, 1.0])
    coeff = np.zeros(p + 1)
    coeff[p] = 1.0
    interior = legroots(legder(coeff))
    nodes = np.concatenate([[-1.0], np.sort(interior), [1.0]])
    nodes = 0.5 * (nodes + 1.0)
    return 0.5 * (nodes + (1.0 - nodes[::-1]))


def _n_1d(degree: int) -> int:
    return max(1, degree // 2 + 1)


def full_cell_rule(bounds, degree: int) -> QuadratureRule:
    """Tensor Gauss rule exact for tensor polynomials up to degree."""
    x0, y0, x1, y1 = bounds
    gx, gw = gauss_rule_1d(_n_1d(degree))
    xs = x0 + (x1 - x0) * gx
    ys = y0 + (y1 - y0) * gx
    wx = gw * (x1 - x0)
    wy = gw * (y1 - y0)
    xx, yy = np.meshgrid(xs, ys)
    ww = np.outer(wy, wx)
    return QuadratureRule(np.column_stack([xx.ravel(), yy.ravel()]), ww.ravel())


def segment_rule(p0, p1, degree: int) -> QuadratureRule:
    """Gauss rule along a straight segment, weights measure arc length."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    gx, gw = gauss_rule_1d(_n_1d(degree))
    pts = p0[None, :] + gx[:, None] * (p1 - p0)[None, :]
    return QuadratureRule(pts, gw * float(np.hypot(*(p1 - p0))))


def _sign(v: float, tie: float) -> float:
    if abs(v) < tie:
        return 1.0
    return 1.0 if v > 0.0 else -1.0


def _segment_roots(phi, p0: np.ndarray, p1: np.ndarray, scan: int = 24) -> list[float]:
    """Parameters t in (0, 1) where phi vanishes on the segment."""
    ts = np.linspace(0.0, 1.0, scan + 1)
    pts = p0[None, :] + ts[:, None] * (p1 - p0)[None, :]
    vals = phi.value(pts)
    scale = float(np.hypot(*(p1 - p0)))

    def f(t: float) -> float:
        q = p0 + t * (p1 - p0)
        return phi.value_at(q[0], q[1])

    roots = []
    for i in range(scan):
        va, vb = vals[i], vals[i + 1]
        if va == 0.0:
            roots.append(ts[i])
            continue
        if va * vb < 0.0:
            roots.append(brentq(f, ts[i], ts[i + 1],
                                xtol=ROOT_XTOL, rtol=8.9e-16))
    if vals[-1] == 0.0:
        roots.append(1.0)
    merged: list[float] = []
    for r in sorted(roots):
        if not merged or r - merged[-1] > MERGE_TOL:
            merged.append(r)
    return merged


def clipped_segment_rule(p0, p1, phi, side: str, degree: int) -> QuadratureRule:
    """Gauss rule on the part of a straight segment lying on one side.

    Used for grid-aligned boundary faces of cut cells, where only a
    portion of the face belongs to the physical domain.  May return an
    empty rule.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    target = -1.0 if side == "inside" else 1.0
    cuts = [0.0] + _segment_roots(phi, p0, p1) + [1.0]
    pts_list = []
    w_list = []
    gx, gw = gauss_rule_1d(_n_1d(degree))
    length = float(np.hypot(*(p1 - p0)))
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= MERGE_TOL:
            continue
        mid = p0 + 0.5 * (a + b) * (p1 - p0)
        if _sign(phi.value_at(mid[0], mid[1]), 0.0) != target:
            continue
        ts = a + (b - a) * gx
        pts_list.append(p0[None, :] + ts[:, None] * (p1 - p0)[None, :])
        w_list.append(gw * (b - a) * length)
    if not pts_list:
        return QuadratureRule(np.zeros((0, 2)), np.zeros(0))
    return QuadratureRule(np.vstack(pts_list), np.concatenate(w_list))


def _column_point(baxis: int, t: float, eta: float) -> tuple[float, float]:
    return (eta, t) if baxis == 1 else (t, eta)


def _interface_samples(bounds, phi, per_axis: int = 10) -> np.ndarray:
    """Points on the zero set inside the cell.

    Edge crossings are found first: a boundary representable as a graph
    must enter and leave through the cell edges, so these exist for any
    genuinely cut cell no matter how small the clipped sliver.  Column
    scans add interior points so curvature is sampled too.
    """
    x0, y0, x1, y1 = bounds
    pts = []
    corners = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    for a, b in zip(corners, corners[1:] + corners[:1]):
        p0 = np.asarray(a, dtype=float)
        p1 = np.asarray(b, dtype=float)
        for t in _segment_roots(phi, p0, p1):
            pts.append(tuple(p0 + t * (p1 - p0)))
    for baxis, (b0, b1, h0, h1) in (
        (0, (x0, x1, y0, y1)),
        (1, (y0, y1, x0, x1)),
    ):
        for t in np.linspace(b0, b1, per_axis + 2)[1:-1]:
            fa = phi.value_at(*_column_point(baxis, t, h0))
            fb = phi.value_at(*_column_point(baxis, t, h1))
            if fa == 0.0:
                pts.append(_column_point(baxis, t, h0))
                continue
            if fa * fb < 0.0:
                root = brentq(
                    lambda eta: phi.value_at(*_column_point(baxis, t, eta)),
                    h0, h1, xtol=ROOT_XTOL, rtol=8.9e-16,
                )
                pts.append(_column_point(baxis, t, root))
    if not pts:
        raise QuadratureError("cell does not intersect the zero set")
    return np.asarray(pts)


def _pick_height_axis(bounds, phi) -> int:
    """Axis along which the boundary is a graph inside the cell.

    The winner maximizes the minimal gradient component magnitude over
    sampled zero-set points, so columns in that direction cross the
    boundary transversally.
    """
    samples = _interface_samples(bounds, phi)
    grads = phi.gradient(samples)
    gx = float(np.min(np.abs(grads[:, 0])))
    gy = float(np.min(np.abs(grads[:, 1])))
    if max(gx, gy) < 1e-8:
        raise QuadratureError("no height direction: gradient degenerate "
                              "on the zero set inside the cell")
    return 0 if gx >= gy else 1


def _base_partition(bounds, phi, haxis: int) -> tuple[float, float, list[float]]:
    """Height interval and partition of the base interval.

    The base is split wherever the boundary crosses one of the two cell
    edges orthogonal to the base direction, i.e. the edges at the height
    extremes.
    """
    x0, y0, x1, y1 = bounds
    if haxis == 1:
        b0, b1, h0, h1 = x0, x1, y0, y1
        lo_a, lo_b = np.array([x0, y0]), np.array([x1, y0])
        hi_a, hi_b = np.array([x0, y1]), np.array([x1, y1])
    else:
        b0, b1, h0, h1 = y0, y1, x0, x1
        lo_a, lo_b = np.array([x0, y0]), np.array([x0, y1])
        hi_a, hi_b = np.array([x1, y0]), np.array([x1, y1])
    cuts = []
    for a, b in ((lo_a, lo_b), (hi_a, hi_b)):
        cuts.extend(b0 + t * (b1 - b0) for t in _segment_roots(phi, a, b))
    tol = MERGE_TOL * (b1 - b0)
    points = [b0]
    for c in sorted(cuts):
        if c - points[-1] > tol and b1 - c > tol:
            points.append(c)
    points.append(b1)
    return h0, h1, points


def cut_cell_volume_rule(bounds, phi, side: str, degree: int) -> QuadratureRule:
    """Rule over the part of a cut cell on one side of the level set.

    Exact for straight boundaries and tensor integrands up to degree;
    for curved boundaries the error is O(h^(degree+1)).  side "inside"
    covers {phi < 0}, "outside" {phi > 0}.
    """
    if side not in ("inside", "outside"):
        raise ValueError("side must be 'inside' or 'outside'")
    target = -1.0 if side == "inside" else 1.0
    haxis = _pick_height_axis(bounds, phi)
    baxis = 1 - haxis
    h0, h1, partition = _base_partition(bounds, phi, haxis)
    n = degree + 1
    gx, gw = gauss_rule_1d(min(n, _GAUSS_MAX))
    pts = []
    wts = []
    for s0, s1 in zip(partition[:-1], partition[1:]):
        base_n = s0 + (s1 - s0) * gx
        base_w = gw * (s1 - s0)
        for t, wb in zip(base_n, base_w):
            fa = phi.value_at(*_column_point(baxis, t, h0))
            fb = phi.value_at(*_column_point(baxis, t, h1))
            sa = _sign(fa, 0.0)
            sb = _sign(fb, 0.0)
            if sa != sb:
                gamma = brentq(
                    lambda eta: phi.value_at(*_column_point(baxis, t, eta)),
                    h0, h1, xtol=ROOT_XTOL, rtol=8.9e-16,
                )
                lo, hi = (h0, gamma) if sa == target else (gamma, h1)
            elif sa == target:
                lo, hi = h0, h1
            else:
                continue
            if hi - lo <= 0.0:
                continue
            etas = lo + (hi - lo) * gx
            for eta, wh in zip(etas, gw * (hi - lo)):
                pts.append(_column_point(baxis, t, eta))
                wts.append(wb * wh)
    if not pts:
        return QuadratureRule(np.zeros((0, 2)), np.zeros(0))
    return QuadratureRule(np.asarray(pts), np.asarray(wts))


def cut_cell_surface_rule(bounds, phi, degree: int) -> SurfaceQuadratureRule:
    """Rule along the zero set inside a cell.

    Each point lies on the boundary to root-finder accuracy; weights
    carry the arc length Jacobian of the height graph, and normals are
    the normalized level set gradient (negative towards positive side).
    """
    haxis = _pick_height_axis(bounds, phi)
    baxis = 1 - haxis
    h0, h1, partition = _base_partition(bounds, phi, haxis)
    n = degree + 1
    gx, gw = gauss_rule_1d(min(n, _GAUSS_MAX))
    pts = []
    wts = []
    for s0, s1 in zip(partition[:-1], partition[1:]):
        tm = 0.5 * (s0 + s1)
        fa = phi.value_at(*_column_point(baxis, tm, h0))
        fb = phi.value_at(*_column_point(baxis, tm, h1))
        if _sign(fa, 0.0) == _sign(fb, 0.0):
            continue
        for t, wb in zip(s0 + (s1 - s0) * gx, gw * (s1 - s0)):
            gamma = brentq(
                lambda eta: phi.value_at(*_column_point(baxis, t, eta)),
                h0, h1, xtol=ROOT_XTOL, rtol=8.9e-16,
            )
            pts.append(_column_point(baxis, t, gamma))
            wts.append(wb)
    if not pts:
        return SurfaceQuadratureRule(np.zeros((0, 2)), np.zeros(0),
                                     np.zeros((0, 2)))
    pts = np.asarray(pts)
    grads = phi.gradient(pts)
    gb = grads[:, baxis]
    gh = grads[:, haxis]
    if np.any(np.abs(gh) < 1e-13):
        raise QuadratureError("boundary tangent to the height direction")
    jac = np.sqrt(1.0 + (gb / gh) ** 2)
    norms = np.hypot(grads[:, 0], grads[:, 1])
    return SurfaceQuadratureRule(pts, np.asarray(wts) * jac,
                                 grads / norms[:, None])


def aligned_face_rule(mesh, face, degree: int) -> SurfaceQuadratureRule:
    """Gauss rule along a full grid face with its canonical +x/+y normal."""
    from .geometry import face_segment

    p0, p1 = face_segment(mesh, face)
    rule = segment_rule(p0, p1, degree)
    normal = np.zeros(2)
    normal[face.axis] = 1.0
    return SurfaceQuadratureRule(rule.points, rule.weights,
                                 np.tile(normal, (rule.n, 1)))
