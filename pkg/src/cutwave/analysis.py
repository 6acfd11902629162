"""Exact reference solutions, error norms, spectral diagnostics, and
experiment drivers (convergence studies and small-cut sweeps).

The reference solutions are closed-form: a traveling pressure plane wave
for the single-domain scenario, a piecewise plane wave with reflection
and transmission coefficients for the flat-interface scenario, and a
divergence-free product-of-sines field for static tests.  Every
solution can be self-checked against the elastic wave equation by
finite differences before it is used to drive a study.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .forms import GRANITE, SANDSTONE, Material, PenaltyConfig
from .geometry import CircleLevelSet, HalfPlaneLevelSet
from .mesh import BackgroundMesh
from .system import (DiscreteSystem, InterfaceProblem, SingleDomainProblem,
                     assemble, ritz_project, set_initial_conditions, simulate,
                     stable_time_step)

DENSE_EIG_LIMIT = 5000


class PlaneWave:
    """Pressure wave u = (cos(omega (t - x / c_p)), 0) in one material."""

    def __init__(self, mat: Material, omega: float):
        if omega <= 0:
            raise ValueError("omega must be positive")
        self.mat = mat
        self.omega = omega

    def _phase(self, pts, t):
        return self.omega * (t - pts[:, 0] / self.mat.c_p)

    def displacement(self, pts, t):
        out = np.zeros_like(pts)
        out[:, 0] = np.cos(self._phase(pts, t))
        return out

    def velocity(self, pts, t):
        out = np.zeros_like(pts)
        out[:, 0] = -self.omega * np.sin(self._phase(pts, t))
        return out

    def gradient(self, pts, t):
        out = np.zeros((len(pts), 2, 2))
        out[:, 0, 0] = (self.omega / self.mat.c_p) * np.sin(self._phase(pts, t))
        return out

    def traction(self, pts, normals, t):
        # sigma = diag(eta, lam) * du1/dx for this displacement field
        g = (self.omega / self.mat.c_p) * np.sin(self._phase(pts, t))
        out = np.zeros_like(pts)
        out[:, 0] = self.mat.eta * g * normals[:, 0]
        out[:, 1] = self.mat.lam * g * normals[:, 1]
        return out


def transmission_coefficients(mat_in: Material, mat_out: Material
                              ) -> tuple[float, float]:
    """Reflection and transmission amplitudes for a normal-incidence
    P-wave hitting a flat interface.

    Displacement and normal traction continuity give a 2x2 system in
    (R, T) with impedances Z = rho c_p."""
    z1 = mat_in.rho * mat_in.c_p
    z2 = mat_out.rho * mat_out.c_p
    a = np.array([[1.0, -1.0], [-z1, -z2]])
    b = np.array([-1.0, -z1])
    r, t = np.linalg.solve(a, b)
    return float(r), float(t)


class _TransmissionSide:
    """One side of the transmission solution, exposing the same
    interface as PlaneWave."""

    def __init__(self, parent, side: int):
        self.parent = parent
        self.side = side

    def displacement(self, pts, t):
        return self.parent._displacement(pts, t, self.side)

    def velocity(self, pts, t):
        return self.parent._velocity(pts, t, self.side)

    def gradient(self, pts, t):
        return self.parent._gradient(pts, t, self.side)


class TransmissionSolution:
    """Piecewise plane wave across a flat vertical interface.

    The incident wave travels in +x through the incident material
    occupying x < x_interface; the reflected wave returns through it and
    the transmitted wave continues into the second material.  Both
    displacement and normal traction are continuous at the interface for
    all times.
    """

    def __init__(self, mat_in: Material, mat_out: Material, omega: float,
                 x_interface: float):
        self.mat_in = mat_in
        self.mat_out = mat_out
        self.omega = omega
        self.xi = x_interface
        self.refl, self.trans = transmission_coefficients(mat_in, mat_out)

    def side(self, index: int) -> _TransmissionSide:
        """Solution restricted to side 1 (incident) or 2 (transmitted)."""
        if index not in (1, 2):
            raise ValueError("side index must be 1 or 2")
        return _TransmissionSide(self, index)

    def _phases(self, pts, t, side):
        x = pts[:, 0] - self.xi
        if side == 1:
            c = self.mat_in.c_p
            return self.omega * (t - x / c), self.omega * (t + x / c)
        c = self.mat_out.c_p
        return self.omega * (t - x / c), None

    def _displacement(self, pts, t, side):
        out = np.zeros_like(pts)
        ph_in, ph_re = self._phases(pts, t, side)
        if side == 1:
            out[:, 0] = np.cos(ph_in) + self.refl * np.cos(ph_re)
        else:
            out[:, 0] = self.trans * np.cos(ph_in)
        return out

    def _velocity(self, pts, t, side):
        out = np.zeros_like(pts)
        ph_in, ph_re = self._phases(pts, t, side)
        if side == 1:
            out[:, 0] = -self.omega * (np.sin(ph_in)
                                       + self.refl * np.sin(ph_re))
        else:
            out[:, 0] = -self.omega * self.trans * np.sin(ph_in)
        return out

    def _gradient(self, pts, t, side):
        out = np.zeros((len(pts), 2, 2))
        ph_in, ph_re = self._phases(pts, t, side)
        if side == 1:
            k = self.omega / self.mat_in.c_p
            out[:, 0, 0] = k * (np.sin(ph_in) - self.refl * np.sin(ph_re))
        else:
            k = self.omega / self.mat_out.c_p
            out[:, 0, 0] = k * self.trans * np.sin(ph_in)
        return out

    def jump_errors(self, t: float, n_points: int = 50,
                    y_range: tuple[float, float] = (-math.pi, math.pi)
                    ) -> tuple[float, float]:
        """Max displacement and traction jump at the interface."""
        y = np.linspace(y_range[0], y_range[1], n_points)
        pts = np.stack([np.full(n_points, self.xi), y], axis=1)
        u1 = self._displacement(pts, t, 1)
        u2 = self._displacement(pts, t, 2)
        g1 = self._gradient(pts, t, 1)
        g2 = self._gradient(pts, t, 2)
        # normal traction for these x-polarized fields: sigma_xx = eta du/dx
        t1 = self.mat_in.eta * g1[:, 0, 0]
        t2 = self.mat_out.eta * g2[:, 0, 0]
        return (float(np.abs(u1 - u2).max()), float(np.abs(t1 - t2).max()))


class StaticShear:
    """Divergence-free static field u = (sin x sin y, cos x cos y).

    Solves the static elasticity equations with body force f = 2 mu u
    for any Lame parameters, since the divergence vanishes identically.
    """

    def __init__(self, mat: Material):
        self.mat = mat

    def displacement(self, pts, t=0.0):
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([np.sin(x) * np.sin(y), np.cos(x) * np.cos(y)],
                        axis=1)

    def gradient(self, pts, t=0.0):
        x, y = pts[:, 0], pts[:, 1]
        out = np.zeros((len(pts), 2, 2))
        out[:, 0, 0] = np.cos(x) * np.sin(y)
        out[:, 0, 1] = np.sin(x) * np.cos(y)
        out[:, 1, 0] = -np.sin(x) * np.cos(y)
        out[:, 1, 1] = -np.cos(x) * np.sin(y)
        return out

    def traction(self, pts, normals, t=0.0):
        # strain is diagonal for this field: eps = diag(cs, -cs)
        x, y = pts[:, 0], pts[:, 1]
        cs = np.cos(x) * np.sin(y)
        out = np.zeros_like(pts)
        out[:, 0] = 2.0 * self.mat.mu * cs * normals[:, 0]
        out[:, 1] = -2.0 * self.mat.mu * cs * normals[:, 1]
        return out

    def body_force(self, pts, t=0.0):
        return 2.0 * self.mat.mu * self.displacement(pts)


def wave_residual_fd(sol, mat: Material, pts: np.ndarray, t: float,
                     eps: float = 1e-4) -> float:
    """Relative residual of rho u_tt = mu lap(u) + (lam + mu) grad(div u)
    by central finite differences; a self-test for exact solutions."""
    u = lambda q, s: sol.displacement(q, s)
    utt = (u(pts, t + eps) - 2.0 * u(pts, t) + u(pts, t - eps)) / eps**2

    def shift(dx, dy):
        return pts + np.array([dx, dy])

    def d2(i, j):
        if i == j:
            step = np.zeros(2)
            step[i] = eps
            return (u(pts + step, t) - 2.0 * u(pts, t)
                    + u(pts - step, t)) / eps**2
        return (u(shift(eps, eps), t) - u(shift(eps, -eps), t)
                - u(shift(-eps, eps), t) + u(shift(-eps, -eps), t)
                ) / (4.0 * eps**2)

    lap = d2(0, 0) + d2(1, 1)
    grad_div = np.zeros_like(lap)
    for i in range(2):
        grad_div[:, i] = d2(i, 0)[:, 0] + d2(i, 1)[:, 1]
    resid = mat.rho * utt - mat.mu * lap - (mat.lam + mat.mu) * grad_div
    scale = max(float(np.abs(utt).max()) * mat.rho, 1e-30)
    return float(np.abs(resid).max()) / scale


def error_norms(system: DiscreteSystem, xi: np.ndarray, exacts, t: float
                ) -> tuple[float, float]:
    """L2 and H1-semi errors against per-domain exact solutions,
    integrated over the physical region with the assembled cut rules."""
    if not isinstance(exacts, (list, tuple)):
        exacts = [exacts]
    e_l2 = 0.0
    e_h1 = 0.0
    for dom, exact in zip(system.domains, exacts):
        for vol in dom.volume:
            coeffs = xi[dom.global_dofs(vol.cell)].reshape(-1, 2)
            uh = vol.values @ coeffs
            gh = np.einsum("qaj,ai->qij", vol.gradients, coeffs)
            du = uh - exact.displacement(vol.points, t)
            dg = gh - exact.gradient(vol.points, t)
            e_l2 += float(vol.weights @ np.sum(du * du, axis=1))
            e_h1 += float(vol.weights @ np.sum(dg * dg, axis=(1, 2)))
    return math.sqrt(e_l2), math.sqrt(e_h1)


def condition_number(matrix, require_pd: bool = False) -> float:
    """lambda_max / lambda_min from a dense symmetric eigensolve."""
    n = matrix.shape[0]
    if n > DENSE_EIG_LIMIT:
        raise ValueError(f"matrix of size {n} exceeds dense eigensolve limit")
    w = np.linalg.eigvalsh(matrix.toarray())
    if require_pd and w[0] <= 0.0:
        raise ArithmeticError(
            f"matrix expected positive definite, min eigenvalue {w[0]:.3e}")
    return float(w[-1] / w[0])


def max_generalized_eigenvalue(stiffness, mass) -> float:
    """Largest lambda of A x = lambda M x."""
    n = mass.shape[0]
    if n <= DENSE_EIG_LIMIT:
        w = scipy.linalg.eigh(stiffness.toarray(), mass.toarray(),
                              eigvals_only=True)
        return float(w[-1])
    # power iteration on M^-1 A for desk-scale overflow cases
    lu = spla.splu(mass.tocsc())
    rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(500):
        y = lu.solve(stiffness @ x)
        lam_new = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        x = y / nrm
        if abs(lam_new - lam) <= 1e-6 * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


def cfl_number(mass, stiffness, h: float) -> float:
    """C = 1 / (h sqrt(lambda_max)) with lambda_max of the (A, M) pencil."""
    lam = max_generalized_eigenvalue(stiffness, mass)
    if lam <= 0.0:
        raise ArithmeticError("nonpositive generalized eigenvalue")
    return 1.0 / (h * math.sqrt(lam))


@dataclass
class ConvergenceRecord:
    scenario: str
    p: int
    h: float
    dofs: int
    l2_error: float
    h1_error: float
    fitted_order: float


@dataclass
class CutSweepRecord:
    problem: str
    p: int
    fraction: float
    cond_mass: float
    cond_stiffness: float
    cfl: float


DOMAIN_HALF_WIDTH = math.pi
CAVITY_RADIUS = 1.0
DEFAULT_OMEGA = math.pi


def single_wave_problem(n: int, p: int, material: Material = SANDSTONE,
                        omega: float = DEFAULT_OMEGA,
                        radius: float = CAVITY_RADIUS,
                        **problem_kw) -> tuple[SingleDomainProblem, PlaneWave]:
    """Plane pressure wave passing a circular cavity of radius R.

    Square domain of side 2 pi minus the disc; exact Dirichlet data on
    the outer boundary and exact tractions on the cavity wall make the
    plane wave the solution of the truncated problem.
    """
    L = DOMAIN_HALF_WIDTH
    mesh = BackgroundMesh((-L, -L), 2.0 * L / n, n, n)
    phi = CircleLevelSet((0.0, 0.0), radius)
    exact = PlaneWave(material, omega)
    prob = SingleDomainProblem(
        mesh=mesh, phi=phi, side="outside", material=material, p=p,
        dirichlet=exact.displacement, cut_neumann=exact.traction,
        **problem_kw)
    return prob, exact


def interface_wave_problem(n: int, p: int, delta: float,
                           mat_in: Material = SANDSTONE,
                           mat_out: Material = GRANITE,
                           omega: float = DEFAULT_OMEGA, **problem_kw
                           ) -> tuple[InterfaceProblem, TransmissionSolution]:
    """Transmission problem: vertical interface at x = delta.

    The incident material fills x < delta (domain 1), the second
    material x > delta (domain 2); exact Dirichlet data drives the outer
    boundary of both domains.
    """
    L = DOMAIN_HALF_WIDTH
    mesh = BackgroundMesh((-L, -L), 2.0 * L / n, n, n)
    phi = HalfPlaneLevelSet(offset=delta, axis=0, orientation=-1)
    exact = TransmissionSolution(mat_in, mat_out, omega, delta)
    s1, s2 = exact.side(1), exact.side(2)
    prob = InterfaceProblem(
        mesh=mesh, phi=phi, materials=(mat_in, mat_out), p=p,
        dirichlet=(s1.displacement, s2.displacement), **problem_kw)
    return prob, exact


def static_shear_problem(n: int, p: int, material: Material = SANDSTONE,
                         radius: float = CAVITY_RADIUS, **problem_kw
                         ) -> tuple[SingleDomainProblem, StaticShear]:
    """Static manufactured problem on the circle-cut domain."""
    L = DOMAIN_HALF_WIDTH
    mesh = BackgroundMesh((-L, -L), 2.0 * L / n, n, n)
    phi = CircleLevelSet((0.0, 0.0), radius)
    exact = StaticShear(material)
    prob = SingleDomainProblem(
        mesh=mesh, phi=phi, side="outside", material=material, p=p,
        dirichlet=exact.displacement, cut_neumann=exact.traction,
        body=exact.body_force, **problem_kw)
    return prob, exact


def default_interface_offset(n_coarsest: int = 12) -> float:
    """Interface position delta = h0 (sqrt(2) - 1) from the coarsest
    mesh, so every refinement level cuts cells at an irrational
    fraction."""
    h0 = 2.0 * DOMAIN_HALF_WIDTH / n_coarsest
    return h0 * (math.sqrt(2.0) - 1.0)


def _fit_orders(records: list[ConvergenceRecord]) -> None:
    for prev, cur in zip(records, records[1:]):
        if not (np.isfinite(prev.l2_error) and np.isfinite(cur.l2_error)):
            continue
        if prev.l2_error <= 0.0 or cur.l2_error <= 0.0:
            continue
        ratio = prev.h / cur.h
        cur.fitted_order = math.log(prev.l2_error / cur.l2_error) / \
            math.log(ratio)


def _run_wave_case(scenario: str, p: int, n: int, t_end: float,
                   safety: float, quad_degree: int | None) -> ConvergenceRecord:
    if scenario == "single":
        prob, exact = single_wave_problem(n, p, quad_degree=quad_degree)
        exacts = [exact]
        ic_u = [exact.displacement]
        ic_v = [exact.velocity]
    elif scenario == "interface":
        prob, exact = interface_wave_problem(
            n, p, default_interface_offset(), quad_degree=quad_degree)
        sides = [exact.side(1), exact.side(2)]
        exacts = sides
        ic_u = [s.displacement for s in sides]
        ic_v = [s.velocity for s in sides]
    else:
        raise ValueError(f"unknown wave scenario '{scenario}'")
    system = assemble(prob)
    u0 = [lambda q, f=f: f(q, 0.0) for f in ic_u]
    v0 = [lambda q, f=f: f(q, 0.0) for f in ic_v]
    state = set_initial_conditions(system, u0, v0)
    dt = stable_time_step(system, safety)
    state = simulate(system, state, t_end, dt)
    l2, h1 = error_norms(system, state.xi, exacts, state.t)
    return ConvergenceRecord(scenario, p, system.h, system.n_dofs,
                             l2, h1, math.nan)


def _run_static_case(p: int, n: int, quad_degree: int | None
                     ) -> ConvergenceRecord:
    prob, exact = static_shear_problem(n, p, quad_degree=quad_degree)
    system = assemble(prob)
    xi = ritz_project(system)
    l2, h1 = error_norms(system, xi, [exact], 0.0)
    return ConvergenceRecord("static", p, system.h, system.n_dofs,
                             l2, h1, math.nan)


def convergence_study(scenario: str, orders, refinements: int = 3,
                      n_coarsest: int = 12, t_end: float = 2.0,
                      safety: float = 0.2, quad_degree: int | None = None,
                      executor=None) -> list[ConvergenceRecord]:
    """Run a refinement study; failures become NaN records, not aborts.

    scenario is one of 'single', 'interface', 'static'.  Each order p
    runs `refinements` meshes n_coarsest * 2^k.  An optional
    concurrent.futures executor distributes the (p, n) cases.
    """
    cases = []
    for p in orders:
        levels = [n_coarsest * 2**k for k in range(refinements)]
        for n in levels:
            cases.append((p, n))

    def run(case):
        p, n = case
        try:
            if scenario == "static":
                return _run_static_case(p, n, quad_degree)
            return _run_wave_case(scenario, p, n, t_end, safety, quad_degree)
        except Exception:
            h = 2.0 * DOMAIN_HALF_WIDTH / n
            return ConvergenceRecord(scenario, p, h, 0, math.nan, math.nan,
                                     math.nan)

    if executor is None:
        results = [run(c) for c in cases]
    else:
        results = list(executor.map(run, cases))

    out = []
    for p in orders:
        chunk = [r for r in results if r.p == p]
        _fit_orders(chunk)
        out.extend(chunk)
    return out


SWEEP_CELLS = 9
SWEEP_CUT_COLUMN = 8
SWEEP_MID_COLUMN = 4


def sweep_single_problem(fraction: float, p: int,
                         material: Material = SANDSTONE,
                         stabilize: bool = True) -> SingleDomainProblem:
    """9x9 unit-cell mesh; the domain boundary cuts the last column at
    h_cut = fraction * h.  Dirichlet on the aligned sides (weakly, zero
    data), natural traction-free condition on the cut side."""
    mesh = BackgroundMesh((0.0, 0.0), 1.0, SWEEP_CELLS, SWEEP_CELLS)
    phi = HalfPlaneLevelSet(offset=SWEEP_CUT_COLUMN + fraction, axis=0)
    zero = lambda pts, t: np.zeros_like(pts)
    return SingleDomainProblem(
        mesh=mesh, phi=phi, side="inside", material=material, p=p,
        dirichlet=zero, stabilize=stabilize)


def sweep_interface_problem(fraction: float, p: int,
                            mat1: Material = SANDSTONE,
                            mat2: Material = GRANITE,
                            stabilize: bool = True) -> InterfaceProblem:
    """9x9 mesh with a vertical interface cutting the middle column at
    h_cut = fraction * h; zero Dirichlet data on the outer boundary."""
    mesh = BackgroundMesh((0.0, 0.0), 1.0, SWEEP_CELLS, SWEEP_CELLS)
    phi = HalfPlaneLevelSet(offset=SWEEP_MID_COLUMN + fraction, axis=0)
    zero = lambda pts, t: np.zeros_like(pts)
    return InterfaceProblem(
        mesh=mesh, phi=phi, materials=(mat1, mat2), p=p,
        dirichlet=(zero, zero), stabilize=stabilize)


def cut_sweep(problem_kind: str, p: int, fractions,
              stabilize: bool = True, executor=None
              ) -> list[CutSweepRecord]:
    """Condition numbers and CFL constant across cut fractions."""
    if problem_kind not in ("single", "interface"):
        raise ValueError(f"unknown sweep problem '{problem_kind}'")

    def run(fraction):
        try:
            if problem_kind == "single":
                prob = sweep_single_problem(fraction, p, stabilize=stabilize)
            else:
                prob = sweep_interface_problem(fraction, p,
                                               stabilize=stabilize)
            system = assemble(prob)
            cm = condition_number(system.mass)
            ca = condition_number(system.stiffness)
            cfl = cfl_number(system.mass, system.stiffness, system.h)
            return CutSweepRecord(problem_kind, p, fraction, cm, ca, cfl)
        except Exception:
            return CutSweepRecord(problem_kind, p, fraction,
                                  math.nan, math.nan, math.nan)

    if executor is None:
        return [run(f) for f in fractions]
    return list(executor.map(run, fractions))
