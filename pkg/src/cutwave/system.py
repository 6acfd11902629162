"""Problem descriptions, global assembly, projections, time integration.

Assembly produces the semi-discrete system

    M xi'' + A xi = L(t)

with M the stabilized mass operator (density inner product plus the jump
penalty scaled by gamma_mass) and A the stabilized stiffness operator
(elastic energy, Nitsche boundary and interface terms, jump penalty
scaled by gamma_stiffness / h^2).  Boundary and body data enter through
precomputed load operators: each data term stores its quadrature points
and a sparse matrix mapping data values at those points to the load
vector, so evaluating L(t) is one callback plus one matvec per term.

Dirichlet conditions are always imposed weakly; dofs are never
eliminated, including on grid-aligned boundary parts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .forms import (Material, PenaltyConfig, local_body_load_operator,
                    local_bulk, local_dirichlet_load_operator,
                    local_ghost_penalty, local_interface, local_mass,
                    local_neumann_load_operator, local_nitsche_dirichlet)
from .geometry import CellClass, LevelSet, build_topology
from .mesh import BackgroundMesh
from .quadrature import (QuadratureRule, SurfaceQuadratureRule,
                         clipped_segment_rule, cut_cell_surface_rule,
                         cut_cell_volume_rule, full_cell_rule, segment_rule)
from .space import DofMap, ElementBasis, build_dofmap, shape_eval

_OUTWARD = {
    "left": (np.array([-1.0, 0.0]), 0),
    "right": (np.array([1.0, 0.0]), 0),
    "bottom": (np.array([0.0, -1.0]), 1),
    "top": (np.array([0.0, 1.0]), 1),
}


@dataclass
class SingleDomainProblem:
    """Wave problem on one immersed domain.

    side selects which side of the level set is physical.  dirichlet
    data applies on the grid-aligned outer boundary, the cut boundary
    carries either traction data (cut_neumann) or Dirichlet data
    (cut_dirichlet).  Data callables receive (points, t); traction data
    additionally receives the outward unit normals as (points, normals, t).
    """

    mesh: BackgroundMesh
    phi: LevelSet
    side: str
    material: Material
    p: int
    penalty: PenaltyConfig | None = None
    quad_degree: int | None = None
    dirichlet: Callable | None = None
    cut_neumann: Callable | None = None
    cut_dirichlet: Callable | None = None
    body: Callable | None = None
    stabilize: bool = True

    def __post_init__(self):
        if self.penalty is None:
            self.penalty = PenaltyConfig.defaults(self.p, self.material)
        if self.quad_degree is None:
            self.quad_degree = 2 * self.p + 2
        if self.cut_neumann is not None and self.cut_dirichlet is not None:
            raise ValueError("cut boundary takes one condition, not two")


@dataclass
class InterfaceProblem:
    """Two-material wave problem coupled across a level set interface.

    Domain 1 occupies {phi > 0}, domain 2 {phi < 0}; the interface
    normal points from domain 2 into domain 1.  dirichlet holds one data
    callable per domain for the grid-aligned outer boundary.
    """

    mesh: BackgroundMesh
    phi: LevelSet
    materials: tuple[Material, Material]
    p: int
    penalty: PenaltyConfig | None = None
    quad_degree: int | None = None
    dirichlet: tuple[Callable, Callable] | None = None
    body: tuple[Callable, Callable] | None = None
    stabilize: bool = True

    def __post_init__(self):
        if self.penalty is None:
            self.penalty = PenaltyConfig.defaults(
                self.p, self.materials[0], self.materials[1])
        if self.quad_degree is None:
            self.quad_degree = 2 * self.p + 2


@dataclass
class CellQuadrature:
    """Per-cell physical volume rule with shape tables, for reuse in
    right-hand sides and error integration."""

    cell: int
    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    gradients: np.ndarray


@dataclass
class DomainBlock:
    """One computational domain inside the assembled system."""

    index: int
    side: str
    material: Material
    dofmap: DofMap
    offset: int
    cut_cells: np.ndarray
    volume: list[CellQuadrature] = field(repr=False, default_factory=list)

    def global_dofs(self, cell: int) -> np.ndarray:
        return self.dofmap.cell_dofs(cell) + self.offset


@dataclass
class LoadTerm:
    """One data contribution to L(t): a sparse operator applied to the
    data values at fixed quadrature points."""

    op: sp.csr_matrix
    points: np.ndarray
    normals: np.ndarray | None
    data: Callable

    def __call__(self, t: float) -> np.ndarray:
        if self.normals is None:
            g = self.data(self.points, t)
        else:
            g = self.data(self.points, self.normals, t)
        return self.op @ np.asarray(g).ravel()


@dataclass
class State:
    t: float
    xi: np.ndarray
    xidot: np.ndarray


class _TripletBuffer:
    def __init__(self):
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []

    def add(self, dofs_row: np.ndarray, dofs_col: np.ndarray,
            block: np.ndarray) -> None:
        nr, nc = block.shape
        self.rows.append(np.repeat(dofs_row, nc))
        self.cols.append(np.tile(dofs_col, nr))
        self.vals.append(block.ravel())

    def tocsr(self, n: int) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((n, n))
        mat = sp.coo_matrix(
            (np.concatenate(self.vals),
             (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(n, n),
        )
        return mat.tocsr()


class _LoadBuffer:
    """Accumulates one global load operator: local blocks against a
    growing list of quadrature points."""

    def __init__(self, needs_normals: bool):
        self.needs_normals = needs_normals
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []
        self.points: list[np.ndarray] = []
        self.normals: list[np.ndarray] = []
        self.n_pts = 0

    def add(self, dofs: np.ndarray, block: np.ndarray, pts: np.ndarray,
            normals: np.ndarray | None = None) -> None:
        nq = pts.shape[0]
        if nq == 0:
            return
        cols = 2 * self.n_pts + np.arange(2 * nq)
        self.rows.append(np.repeat(dofs, 2 * nq))
        self.cols.append(np.tile(cols, dofs.size))
        self.vals.append(block.ravel())
        self.points.append(pts)
        if normals is not None:
            self.normals.append(normals)
        self.n_pts += nq

    def to_term(self, n: int, data: Callable) -> LoadTerm | None:
        if self.n_pts == 0:
            return None
        pts = np.vstack(self.points)
        op = sp.coo_matrix(
            (np.concatenate(self.vals),
             (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(n, 2 * self.n_pts),
        ).tocsr()
        normals = np.vstack(self.normals) if self.needs_normals else None
        return LoadTerm(op=op, points=pts, normals=normals, data=data)


@dataclass
class DiscreteSystem:
    """Assembled semi-discrete operators plus evaluation bookkeeping."""

    mesh: BackgroundMesh
    basis: ElementBasis
    p: int
    quad_degree: int
    penalty: PenaltyConfig
    domains: list[DomainBlock]
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    load_terms: list[LoadTerm]
    has_dirichlet: bool
    phi: LevelSet | None = None
    _mass_lu: spla.SuperLU | None = None

    @property
    def n_dofs(self) -> int:
        return self.mass.shape[0]

    @property
    def h(self) -> float:
        return self.mesh.h

    def load(self, t: float) -> np.ndarray:
        out = np.zeros(self.n_dofs)
        for term in self.load_terms:
            out += term(t)
        return out

    def mass_solve(self, b: np.ndarray) -> np.ndarray:
        if self._mass_lu is None:
            self._mass_lu = spla.splu(self.mass.tocsc())
        return self._mass_lu.solve(b)

    def max_wave_speed(self) -> float:
        return max(d.material.c_p for d in self.domains)


def _domain_volume(mesh: BackgroundMesh, basis: ElementBasis, topo, phi,
                   side: str, degree: int) -> list[CellQuadrature]:
    """Physical volume rules and shape tables for every covering cell.

    Uncut cells share one reference table; cut cells get individual
    rules restricted to the physical side.
    """
    h = mesh.h
    ref_bounds = (0.0, 0.0, h, h)
    ref_rule = full_cell_rule(ref_bounds, degree)
    ref_vals, ref_grads = shape_eval(basis, ref_bounds, ref_rule.points)
    out = []
    for cell in topo.covering_cells:
        cell = int(cell)
        bounds = mesh.cell_bounds(cell)
        if topo.classes[cell] == CellClass.CUT:
            rule = cut_cell_volume_rule(bounds, phi, side, degree)
            vals, grads = shape_eval(basis, bounds, rule.points)
            out.append(CellQuadrature(cell, rule.points, rule.weights,
                                      vals, grads))
        else:
            pts = ref_rule.points + np.array(bounds[:2])
            out.append(CellQuadrature(cell, pts, ref_rule.weights,
                                      ref_vals, ref_grads))
    return out


def _mass_bulk_blocks(vol: CellQuadrature, mat: Material
                      ) -> tuple[np.ndarray, np.ndarray]:
    return (local_mass(vol.weights, vol.values, mat),
            local_bulk(vol.weights, vol.gradients, mat))


def _assemble_domain(mesh: BackgroundMesh, phi: LevelSet, side: str,
                     mat: Material, basis: ElementBasis, degree: int,
                     penalty: PenaltyConfig, dom_index: int, offset: int,
                     n_total: int, stabilize: bool,
                     dirichlet: Callable | None,
                     cut_neumann: Callable | None,
                     cut_dirichlet: Callable | None,
                     body: Callable | None,
                     m_buf: _TripletBuffer, a_buf: _TripletBuffer,
                     load_terms: list[LoadTerm]) -> DomainBlock:
    """Assemble all single-domain terms of one domain into the buffers."""
    topo = build_topology(mesh, phi, side)
    dofmap = build_dofmap(mesh, topo, basis.p)
    block = DomainBlock(index=dom_index, side=side, material=mat,
                        dofmap=dofmap, offset=offset,
                        cut_cells=topo.cut_cells)
    h = mesh.h
    gamma_m = penalty.gamma_mass[dom_index]
    gamma_a = penalty.gamma_stiffness[dom_index]

    # Volume terms; uncut cells reuse one local matrix pair.
    block.volume = _domain_volume(mesh, basis, topo, phi, side, degree)
    ref_mass = ref_bulk = None
    cut_set = set(int(c) for c in topo.cut_cells)
    for vol in block.volume:
        dofs = block.global_dofs(vol.cell)
        if vol.cell in cut_set:
            mass, bulk = _mass_bulk_blocks(vol, mat)
        else:
            if ref_mass is None:
                ref_mass, ref_bulk = _mass_bulk_blocks(vol, mat)
            mass, bulk = ref_mass, ref_bulk
        m_buf.add(dofs, dofs, mass)
        a_buf.add(dofs, dofs, bulk)

    # Jump stabilization on faces touching cut cells.
    if stabilize and topo.faces:
        ghost = {axis: local_ghost_penalty(basis, h, axis) for axis in (0, 1)}
        for f in topo.faces:
            dofs = np.concatenate([block.global_dofs(f.cell_minus),
                                   block.global_dofs(f.cell_plus)])
            g = ghost[f.axis]
            m_buf.add(dofs, dofs, gamma_m * g)
            a_buf.add(dofs, dofs, (gamma_a / h**2) * g)

    # Nitsche terms on the grid-aligned outer boundary.
    if dirichlet is not None:
        buf = _LoadBuffer(needs_normals=False)
        full_cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for cell in topo.covering_cells:
            cell = int(cell)
            edges = mesh.boundary_edges(cell)
            if not edges:
                continue
            bounds = mesh.cell_bounds(cell)
            dofs = block.global_dofs(cell)
            is_cut = cell in cut_set
            for edge in edges:
                normal, _ = _OUTWARD[edge]
                p0, p1 = _edge_endpoints(bounds, edge)
                if is_cut:
                    rule = clipped_segment_rule(p0, p1, phi, side, degree)
                    if rule.n == 0:
                        continue
                    srule = SurfaceQuadratureRule(
                        rule.points, rule.weights,
                        np.tile(normal, (rule.n, 1)))
                    nit = local_nitsche_dirichlet(
                        basis, bounds, srule, mat, penalty.gamma_dirichlet)
                    op = local_dirichlet_load_operator(
                        basis, bounds, srule, mat, penalty.gamma_dirichlet)
                else:
                    if edge not in full_cache:
                        rule = segment_rule(p0, p1, degree)
                        srule = SurfaceQuadratureRule(
                            rule.points, rule.weights,
                            np.tile(normal, (rule.n, 1)))
                        full_cache[edge] = (
                            local_nitsche_dirichlet(
                                basis, bounds, srule, mat,
                                penalty.gamma_dirichlet),
                            local_dirichlet_load_operator(
                                basis, bounds, srule, mat,
                                penalty.gamma_dirichlet),
                        )
                        nit, op = full_cache[edge]
                        pts = srule.points
                    else:
                        nit, op = full_cache[edge]
                        rule = segment_rule(p0, p1, degree)
                        pts = rule.points
                    a_buf.add(dofs, dofs, nit)
                    buf.add(dofs, op, pts)
                    continue
                a_buf.add(dofs, dofs, nit)
                buf.add(dofs, op, rule.points)
        term = buf.to_term(n_total, dirichlet)
        if term is not None:
            load_terms.append(term)

    # Conditions on the cut boundary.
    if cut_neumann is not None or cut_dirichlet is not None:
        flip = -1.0 if side == "outside" else 1.0
        nbuf = _LoadBuffer(needs_normals=True)
        dbuf = _LoadBuffer(needs_normals=False)
        for cell in topo.cut_cells:
            cell = int(cell)
            bounds = mesh.cell_bounds(cell)
            srule = cut_cell_surface_rule(bounds, phi, degree)
            srule = SurfaceQuadratureRule(srule.points, srule.weights,
                                          flip * srule.normals)
            dofs = block.global_dofs(cell)
            if cut_neumann is not None:
                op = local_neumann_load_operator(basis, bounds, srule)
                nbuf.add(dofs, op, srule.points, srule.normals)
            else:
                nit = local_nitsche_dirichlet(
                    basis, bounds, srule, mat, penalty.gamma_dirichlet)
                a_buf.add(dofs, dofs, nit)
                op = local_dirichlet_load_operator(
                    basis, bounds, srule, mat, penalty.gamma_dirichlet)
                dbuf.add(dofs, op, srule.points)
        term = nbuf.to_term(n_total, cut_neumann)
        if term is not None:
            load_terms.append(term)
        term = dbuf.to_term(n_total, cut_dirichlet)
        if term is not None:
            load_terms.append(term)

    # Body force over the physical region.
    if body is not None:
        bbuf = _LoadBuffer(needs_normals=False)
        for vol in block.volume:
            rule = QuadratureRule(vol.points, vol.weights)
            op = local_body_load_operator(basis, mesh.cell_bounds(vol.cell),
                                          rule)
            bbuf.add(block.global_dofs(vol.cell), op, vol.points)
        term = bbuf.to_term(n_total, body)
        if term is not None:
            load_terms.append(term)

    return block


def _edge_endpoints(bounds, edge: str) -> tuple[np.ndarray, np.ndarray]:
    x0, y0, x1, y1 = bounds
    return {
        "left": (np.array([x0, y0]), np.array([x0, y1])),
        "right": (np.array([x1, y0]), np.array([x1, y1])),
        "bottom": (np.array([x0, y0]), np.array([x1, y0])),
        "top": (np.array([x0, y1]), np.array([x1, y1])),
    }[edge]


def assemble(problem) -> DiscreteSystem:
    """Assemble a SingleDomainProblem or InterfaceProblem."""
    if isinstance(problem, SingleDomainProblem):
        return _assemble_single(problem)
    if isinstance(problem, InterfaceProblem):
        return _assemble_interface(problem)
    raise TypeError(f"cannot assemble {type(problem).__name__}")


def _assemble_single(problem: SingleDomainProblem) -> DiscreteSystem:
    basis = ElementBasis(problem.p)
    mesh = problem.mesh
    topo_probe = build_topology(mesh, problem.phi, problem.side)
    dofmap_probe = build_dofmap(mesh, topo_probe, problem.p)
    n = dofmap_probe.n_dofs
    m_buf = _TripletBuffer()
    a_buf = _TripletBuffer()
    load_terms: list[LoadTerm] = []
    block = _assemble_domain(
        mesh, problem.phi, problem.side, problem.material, basis,
        problem.quad_degree, problem.penalty, 0, 0, n, problem.stabilize,
        problem.dirichlet, problem.cut_neumann, problem.cut_dirichlet,
        problem.body, m_buf, a_buf, load_terms)
    has_dirichlet = problem.dirichlet is not None or \
        problem.cut_dirichlet is not None
    return DiscreteSystem(
        mesh=mesh, basis=basis, p=problem.p, quad_degree=problem.quad_degree,
        penalty=problem.penalty, domains=[block],
        mass=m_buf.tocsr(n), stiffness=a_buf.tocsr(n),
        load_terms=load_terms, has_dirichlet=has_dirichlet, phi=problem.phi)


def _assemble_interface(problem: InterfaceProblem) -> DiscreteSystem:
    basis = ElementBasis(problem.p)
    mesh = problem.mesh
    mat1, mat2 = problem.materials
    topo1 = build_topology(mesh, problem.phi, "outside")
    topo2 = build_topology(mesh, problem.phi, "inside")
    dm1 = build_dofmap(mesh, topo1, problem.p)
    dm2 = build_dofmap(mesh, topo2, problem.p)
    n = dm1.n_dofs + dm2.n_dofs
    m_buf = _TripletBuffer()
    a_buf = _TripletBuffer()
    load_terms: list[LoadTerm] = []
    g1, g2 = problem.dirichlet if problem.dirichlet is not None else (None, None)
    f1, f2 = problem.body if problem.body is not None else (None, None)
    block1 = _assemble_domain(
        mesh, problem.phi, "outside", mat1, basis, problem.quad_degree,
        problem.penalty, 0, 0, n, problem.stabilize,
        g1, None, None, f1, m_buf, a_buf, load_terms)
    block2 = _assemble_domain(
        mesh, problem.phi, "inside", mat2, basis, problem.quad_degree,
        problem.penalty, 1, dm1.n_dofs, n, problem.stabilize,
        g2, None, None, f2, m_buf, a_buf, load_terms)

    # Interface coupling on cut cells; both domains see the same cut set.
    for cell in topo1.cut_cells:
        cell = int(cell)
        bounds = mesh.cell_bounds(cell)
        srule = cut_cell_surface_rule(bounds, problem.phi, problem.quad_degree)
        blockmat = local_interface(basis, bounds, srule, mat1, mat2,
                                   problem.penalty.kappa,
                                   problem.penalty.gamma_interface)
        dofs = np.concatenate([block1.global_dofs(cell),
                               block2.global_dofs(cell)])
        a_buf.add(dofs, dofs, blockmat)

    has_dirichlet = problem.dirichlet is not None
    return DiscreteSystem(
        mesh=mesh, basis=basis, p=problem.p, quad_degree=problem.quad_degree,
        penalty=problem.penalty, domains=[block1, block2],
        mass=m_buf.tocsr(n), stiffness=a_buf.tocsr(n),
        load_terms=load_terms, has_dirichlet=has_dirichlet, phi=problem.phi)


def l2_project(system: DiscreteSystem, fields, density_weighted: bool = False
               ) -> np.ndarray:
    """Stabilized L2 projection into the discrete space.

    fields is one callable (points) -> (n, 2) per domain.  The right
    side integrates (u, v) over each physical subdomain; with
    density_weighted=True it integrates (rho u, v) instead, so the
    projection approximates u itself also for rho != 1.  The system
    matrix is always the stabilized mass operator.
    """
    if callable(fields):
        fields = [fields] * len(system.domains)
    b = np.zeros(system.n_dofs)
    for dom, f in zip(system.domains, fields):
        scale = dom.material.rho if density_weighted else 1.0
        for vol in dom.volume:
            target = np.asarray(f(vol.points))
            loc = np.einsum("q,qa,qi->ai", scale * vol.weights,
                            vol.values, target)
            np.add.at(b, dom.global_dofs(vol.cell), loc.ravel())
    return system.mass_solve(b)


def ritz_project(system: DiscreteSystem, t: float = 0.0) -> np.ndarray:
    """Solve the static problem A xi = L(t) with the assembled data.

    Needs a Dirichlet part somewhere on the boundary, otherwise A is
    singular and the projection is not defined.
    """
    if not system.has_dirichlet:
        raise ValueError("static solve needs a Dirichlet boundary part")
    rhs = system.load(t)
    lu = spla.splu(system.stiffness.tocsc())
    return lu.solve(rhs)


def set_initial_conditions(system: DiscreteSystem, u0, v0) -> State:
    """Project initial displacement and velocity fields at t = 0."""
    xi = l2_project(system, u0, density_weighted=True)
    xidot = l2_project(system, v0, density_weighted=True)
    return State(t=0.0, xi=xi, xidot=xidot)


def stable_time_step(system: DiscreteSystem, safety: float = 0.2) -> float:
    """Time step safety * h / p^2 scaled by the fastest P-wave speed."""
    return safety * system.h / (system.p**2 * system.max_wave_speed())


def rk4_advance(system: DiscreteSystem, state: State, dt: float) -> State:
    """One classical RK4 step of the first-order form.

    Four load evaluations and four mass solves per step; stage loads are
    evaluated at the stage times t, t + dt/2 (twice) and t + dt.
    """
    t, x, v = state.t, state.xi, state.xidot
    a_mat = system.stiffness

    def accel(ts: float, xs: np.ndarray) -> np.ndarray:
        return system.mass_solve(system.load(ts) - a_mat @ xs)

    k1x = v
    k1v = accel(t, x)
    k2x = v + 0.5 * dt * k1v
    k2v = accel(t + 0.5 * dt, x + 0.5 * dt * k1x)
    k3x = v + 0.5 * dt * k2v
    k3v = accel(t + 0.5 * dt, x + 0.5 * dt * k2x)
    k4x = v + dt * k3v
    k4v = accel(t + dt, x + dt * k3x)
    return State(
        t=t + dt,
        xi=x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
        xidot=v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v),
    )


def simulate(system: DiscreteSystem, state: State, t_end: float, dt: float,
             observer: Callable | None = None) -> State:
    """Advance until t_end, shortening the final step to land exactly."""
    if observer is not None:
        observer(state)
    while state.t < t_end - 1e-12 * max(t_end, 1.0):
        step = min(dt, t_end - state.t)
        state = rk4_advance(system, state, step)
        if observer is not None:
            observer(state)
    return state


def energy(system: DiscreteSystem, state: State) -> float:
    """Discrete energy (kinetic + elastic, including penalties)."""
    return 0.5 * float(
        state.xidot @ (system.mass @ state.xidot)
        + state.xi @ (system.stiffness @ state.xi)
    )


def export_triplets(matrix: sp.spmatrix, path) -> None:
    """Write a sparse matrix as 'row col value' lines, sorted by row
    then column, for external inspection."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
