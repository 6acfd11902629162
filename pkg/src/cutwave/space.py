"""Tensor Lagrange elements on the background grid and their dof layout.

Each covering cell carries the full tensor basis of order p built on
Gauss-Lobatto points, two displacement components per scalar node.  Dofs
are shared across cell boundaries through the global node lattice, so the
space is continuous on each covering region even though the physical
domain only occupies part of it.  Local scalar nodes are ordered y-major
(node (a, b) at flat position b * (p + 1) + a), and the two components of
node s interleave as 2 s and 2 s + 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .geometry import CutTopology
from .mesh import BackgroundMesh
from .quadrature import gauss_lobatto_nodes


class ElementBasis:
    """1D Gauss-Lobatto Lagrange basis of order p, tensorized on demand.

    Every 1D basis polynomial is stored in coefficient form together with
    all derivatives up to order p, which keeps traces of high normal
    derivatives on cell faces exact to roundoff.
    """

    def __init__(self, p: int):
        self.p = int(p)
        self.nodes_1d = gauss_lobatto_nodes(p)
        n = self.p + 1
        # _dcoeffs[k][i] holds the coefficients of the k-th derivative of
        # the i-th Lagrange polynomial.
        base = []
        for i in range(n):
            others = np.delete(self.nodes_1d, i)
            ci = npoly.polyfromroots(others)
            base.append(ci / np.prod(self.nodes_1d[i] - others))
        self._dcoeffs: list[list[np.ndarray]] = [base]
        for _ in range(self.p):
            prev = self._dcoeffs[-1]
            self._dcoeffs.append(
                [npoly.polyder(c) if c.size > 1 else np.zeros(1) for c in prev]
            )

    @property
    def n_scalar(self) -> int:
        return (self.p + 1) ** 2

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_scalar

    def eval_1d(self, xhat: np.ndarray, k: int = 0) -> np.ndarray:
        """Values of the k-th derivative of all 1D shapes at xhat.

        Reference coordinates, derivative also with respect to the
        reference coordinate.  Shape (len(xhat), p + 1).
        """
        if k > self.p:
            raise ValueError(f"derivative order {k} exceeds element order {self.p}")
        xhat = np.atleast_1d(np.asarray(xhat, dtype=float))
        out = np.empty((xhat.size, self.p + 1))
        for i in range(self.p + 1):
            out[:, i] = npoly.polyval(xhat, self._dcoeffs[k][i])
        return out

    def tensor_values(self, ref: np.ndarray) -> np.ndarray:
        """Scalar shape values at reference points, shape (nq, n_scalar)."""
        vx = self.eval_1d(ref[:, 0])
        vy = self.eval_1d(ref[:, 1])
        return np.einsum("qb,qa->qba", vy, vx).reshape(ref.shape[0], -1)

    def tensor_gradients(self, ref: np.ndarray, h: float) -> np.ndarray:
        """Physical gradients at reference points, shape (nq, n_scalar, 2)."""
        vx = self.eval_1d(ref[:, 0])
        vy = self.eval_1d(ref[:, 1])
        dx = self.eval_1d(ref[:, 0], 1)
        dy = self.eval_1d(ref[:, 1], 1)
        g = np.empty((ref.shape[0], self.n_scalar, 2))
        g[:, :, 0] = np.einsum("qb,qa->qba", vy, dx).reshape(ref.shape[0], -1)
        g[:, :, 1] = np.einsum("qb,qa->qba", dy, vx).reshape(ref.shape[0], -1)
        return g / h


def shape_eval(basis: ElementBasis, bounds, pts: np.ndarray
               ) -> tuple[np.ndarray, np.ndarray]:
    """Scalar shape values and physical gradients at physical points."""
    x0, y0, x1, y1 = bounds
    h = x1 - x0
    ref = (np.asarray(pts) - np.array([x0, y0])) / h
    return basis.tensor_values(ref), basis.tensor_gradients(ref, h)


def normal_derivative_eval(basis: ElementBasis, axis: int, end: int,
                           tang_ref: np.ndarray, k: int, h: float) -> np.ndarray:
    """Trace of the k-th derivative along a coordinate axis on a face.

    axis is the derivative direction (0 or 1), end selects the face at
    reference coordinate 0 or 1 along that axis, tang_ref are reference
    coordinates along the face.  Returns (nq, n_scalar) physical values.
    """
    if k > basis.p:
        raise ValueError(f"derivative order {k} exceeds element order {basis.p}")
    endpoint = np.array([0.0 if end == 0 else 1.0])
    dn = basis.eval_1d(endpoint, k)[0] / h**k
    tv = basis.eval_1d(np.asarray(tang_ref, dtype=float))
    nq = tv.shape[0]
    if axis == 0:
        out = np.einsum("qb,a->qba", tv, dn)
    else:
        out = np.einsum("b,qa->qba", dn, tv)
    return out.reshape(nq, -1)


@dataclass
class DofMap:
    """Global numbering of scalar nodes over one covering region.

    Vector dofs interleave components: dof = 2 * node + component.
    """

    p: int
    n_nodes: int
    node_coords: np.ndarray = field(repr=False)
    cell_nodes: dict[int, np.ndarray] = field(repr=False)

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    def cell_dofs(self, cell: int) -> np.ndarray:
        nodes = self.cell_nodes[cell]
        out = np.empty(2 * nodes.size, dtype=np.int64)
        out[0::2] = 2 * nodes
        out[1::2] = 2 * nodes + 1
        return out


def build_dofmap(mesh: BackgroundMesh, topology: CutTopology, p: int) -> DofMap:
    """Number the node lattice over the covering cells of one domain.

    Nodes are identified through the integer lattice (ix * p + a,
    iy * p + b), so neighbouring covering cells share their face nodes
    and the space is continuous across the covering region.
    """
    nodes_1d = gauss_lobatto_nodes(p)
    index: dict[tuple[int, int], int] = {}
    coords: list[tuple[float, float]] = []
    cell_nodes: dict[int, np.ndarray] = {}
    for cell in topology.covering_cells:
        ix, iy = mesh.cell_coords(int(cell))
        x0, y0, _, _ = mesh.cell_bounds(int(cell))
        local = np.empty((p + 1) ** 2, dtype=np.int64)
        s = 0
        for b in range(p + 1):
            for a in range(p + 1):
                key = (ix * p + a, iy * p + b)
                gid = index.get(key)
                if gid is None:
                    gid = len(coords)
                    index[key] = gid
                    coords.append((x0 + nodes_1d[a] * mesh.h,
                                   y0 + nodes_1d[b] * mesh.h))
                local[s] = gid
                s += 1
        cell_nodes[int(cell)] = local
    return DofMap(p=p, n_nodes=len(coords),
                  node_coords=np.asarray(coords), cell_nodes=cell_nodes)


def interpolate(f, dofmap: DofMap) -> np.ndarray:
    """Nodal interpolant of a vector field f(points) -> (n, 2)."""
    vals = np.asarray(f(dofmap.node_coords))
    out = np.empty(dofmap.n_dofs)
    out[0::2] = vals[:, 0]
    out[1::2] = vals[:, 1]
    return out


def _covering_cell_for(mesh: BackgroundMesh, dofmap: DofMap,
                       x: float, y: float) -> int | None:
    ix = int(np.floor((x - mesh.origin[0]) / mesh.h))
    iy = int(np.floor((y - mesh.origin[1]) / mesh.h))
    for jx in (ix, ix - 1):
        for jy in (iy, iy - 1):
            if 0 <= jx < mesh.nx and 0 <= jy < mesh.ny:
                cell = mesh.cell_index(jx, jy)
                if cell in dofmap.cell_nodes:
                    return cell
    return None


def evaluate_field(mesh: BackgroundMesh, dofmap: DofMap, basis: ElementBasis,
                   coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate a coefficient vector at physical points.

    Points outside the covering region come back as NaN.  Points on a
    cell boundary may be evaluated from either neighbouring covering
    cell; the two agree because the space is continuous there.
    """
    pts = np.asarray(pts, dtype=float)
    out = np.full((pts.shape[0], 2), np.nan)
    cells = np.array([
        -1 if c is None else c
        for c in (_covering_cell_for(mesh, dofmap, x, y) for x, y in pts)
    ])
    for cell in np.unique(cells):
        if cell < 0:
            continue
        sel = np.nonzero(cells == cell)[0]
        vals, _ = shape_eval(basis, mesh.cell_bounds(int(cell)), pts[sel])
        dofs = dofmap.cell_dofs(int(cell))
        local = coeffs[dofs].reshape(-1, 2)
        out[sel] = vals @ local
    return out
