"""Materials, penalty parameters, and cell-local bilinear forms.

Local matrices are dense blocks over the interleaved vector dofs of one
cell (or one pair of cells across a face), indexed 2 * s + c for scalar
shape s and displacement component c.  Assembly scatters them into the
global sparse operators.

Isotropic linear elasticity throughout: stress = 2 mu strain + lambda
div(u) I.  The boundary terms implement a symmetric Nitsche coupling,
the face terms a jump penalty on normal derivatives of order 1..p which
extends coercivity and mass control from the physical domain to the
whole covering region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import QuadratureRule, SurfaceQuadratureRule, gauss_rule_1d
from .space import ElementBasis, normal_derivative_eval, shape_eval


@dataclass(frozen=True)
class Material:
    """Isotropic linear elastic material."""

    rho: float
    lam: float
    mu: float

    def __post_init__(self):
        if not (self.rho > 0.0 and self.mu > 0.0 and self.lam + 2 * self.mu > 0.0):
            raise ValueError("material parameters out of range")

    @property
    def eta(self) -> float:
        """Stiffness scale 2 mu + lambda used in penalty weights."""
        return 2.0 * self.mu + self.lam

    @property
    def c_p(self) -> float:
        return math.sqrt((self.lam + 2.0 * self.mu) / self.rho)

    @property
    def c_s(self) -> float:
        return math.sqrt(self.mu / self.rho)


SANDSTONE = Material(rho=1.0, lam=1.1429, mu=1.0)
GRANITE = Material(rho=1.1154, lam=2.6182, mu=1.8)


@dataclass(frozen=True)
class PenaltyConfig:
    """All penalty and weighting parameters of the discretization.

    gamma_mass and gamma_stiffness are per-domain tuples; for a single
    domain only entry 0 is used.  kappa weights the traction average at
    a material interface and must sum to one.
    """

    gamma_dirichlet: float
    gamma_interface: float
    gamma_mass: tuple[float, float]
    gamma_stiffness: tuple[float, float]
    kappa: tuple[float, float]

    def __post_init__(self):
        if abs(self.kappa[0] + self.kappa[1] - 1.0) > 1e-12:
            raise ValueError("interface weights must sum to one")

    @classmethod
    def defaults(cls, p: int, mat1: Material, mat2: Material | None = None,
                 **overrides) -> "PenaltyConfig":
        """Default parameters for order p and the given materials.

        Any field can be overridden by keyword.  The interface values are
        only meaningful when a second material is present.
        """
        e1 = mat1.eta
        e2 = mat2.eta if mat2 is not None else e1
        values = dict(
            gamma_dirichlet=5.0 * p * p,
            gamma_interface=20.0 * p * p * e1 * e2 / (e1 + e2),
            gamma_mass=(mat1.rho / 4.0,
                        (mat2.rho if mat2 is not None else mat1.rho) / 4.0),
            gamma_stiffness=(e1 / 2.0, e2 / 2.0),
            kappa=(e2 / (e1 + e2), e1 / (e1 + e2)),
        )
        unknown = set(overrides) - set(values)
        if unknown:
            raise ValueError(f"unknown penalty overrides: {sorted(unknown)}")
        values.update(overrides)
        return cls(**values)


def strain(grad: np.ndarray) -> np.ndarray:
    """Symmetric gradient; grad[..., i, j] = d u_i / d x_j."""
    return 0.5 * (grad + np.swapaxes(grad, -1, -2))


def stress(grad: np.ndarray, mat: Material) -> np.ndarray:
    """Cauchy stress of isotropic linear elasticity."""
    eps = strain(grad)
    tr = np.trace(eps, axis1=-2, axis2=-1)
    out = 2.0 * mat.mu * eps
    out[..., 0, 0] += mat.lam * tr
    out[..., 1, 1] += mat.lam * tr
    return out


def _interleave(scalar_block: np.ndarray) -> np.ndarray:
    """Lift a scalar-shape block to vector dofs acting per component."""
    return np.kron(scalar_block, np.eye(2))


def local_mass(weights: np.ndarray, values: np.ndarray,
               mat: Material) -> np.ndarray:
    """(rho u, v) from shape values tabulated at a volume rule."""
    s = np.einsum("q,qa,qb->ab", weights, values, values)
    return mat.rho * _interleave(s)


def local_bulk(weights: np.ndarray, gradients: np.ndarray,
               mat: Material) -> np.ndarray:
    """(stress(u), strain(v)) from gradients tabulated at a volume rule."""
    w = weights
    grads = gradients
    cross = np.einsum("q,qad,qbc->acbd", w, grads, grads)
    lap = np.einsum("q,qai,qbi->ab", w, grads, grads)
    div = np.einsum("q,qac,qbd->acbd", w, grads, grads)
    n = grads.shape[1]
    out = mat.mu * cross + mat.lam * div
    out[:, 0, :, 0] += mat.mu * lap
    out[:, 1, :, 1] += mat.mu * lap
    return out.reshape(2 * n, 2 * n)


def ghost_weight(h: float, k: int) -> float:
    """Face penalty weight for the k-th normal derivative jump."""
    return h ** (2 * k + 1) / ((2 * k + 1) * math.factorial(k) ** 2)


def local_ghost_penalty(basis: ElementBasis, h: float, axis: int) -> np.ndarray:
    """Jump penalty block for one interior face between two cells.

    Rows/cols run over [cell on the negative side, cell on the positive
    side] of the face, whose normal points along +axis.  The integrand
    sums h^(2k+1) / ((2k+1) (k!)^2) [d^k_n u][d^k_n v] for k = 1..p over
    the whole face.
    """
    p = basis.p
    n = basis.n_scalar
    tq, tw = gauss_rule_1d(p + 1)
    s = np.zeros((2 * n, 2 * n))
    for k in range(1, p + 1):
        t_minus = normal_derivative_eval(basis, axis, 1, tq, k, h)
        t_plus = normal_derivative_eval(basis, axis, 0, tq, k, h)
        jump = np.hstack([-t_minus, t_plus])
        s += ghost_weight(h, k) * np.einsum("q,qa,qb->ab", tw * h, jump, jump)
    return _interleave(s)


def _traction_tensor(grads: np.ndarray, normals: np.ndarray,
                     mat: Material) -> np.ndarray:
    """trac[q, b, d, i] = (stress(N_b e_d) . n)_i at each surface point."""
    gn = np.einsum("qbj,qj->qb", grads, normals)
    nq, n = gn.shape
    trac = np.zeros((nq, n, 2, 2))
    for d in range(2):
        trac[:, :, d, d] += mat.mu * gn
    trac += mat.mu * np.einsum("qd,qbi->qbdi", normals, grads)
    trac += mat.lam * np.einsum("qi,qbd->qbdi", normals, grads)
    return trac


def local_nitsche_dirichlet(basis: ElementBasis, bounds,
                            srule: SurfaceQuadratureRule, mat: Material,
                            gamma_d: float) -> np.ndarray:
    """Symmetric Nitsche block for a Dirichlet piece of the boundary.

    -(stress(u).n, v) - (u, stress(v).n)
    + gamma_d / h (2 mu (u, v) + lambda (u.n, v.n))
    with n the outward unit normal carried by the rule.
    """
    h = bounds[2] - bounds[0]
    vals, grads = shape_eval(basis, bounds, srule.points)
    trac = _traction_tensor(grads, srule.normals, mat)
    w = srule.weights
    t1 = np.einsum("q,qa,qbdc->acbd", w, vals, trac)
    pen_full = 2.0 * mat.mu * np.einsum("q,qa,qb->ab", w, vals, vals)
    pen_norm = mat.lam * np.einsum("q,qa,qc,qb,qd->acbd", w, vals,
                                   srule.normals, vals, srule.normals)
    n = basis.n_scalar
    out = -t1 - t1.transpose(2, 3, 0, 1) + (gamma_d / h) * pen_norm
    out[:, 0, :, 0] += (gamma_d / h) * pen_full
    out[:, 1, :, 1] += (gamma_d / h) * pen_full
    return out.reshape(2 * n, 2 * n)


def local_dirichlet_load_operator(basis: ElementBasis, bounds,
                                  srule: SurfaceQuadratureRule, mat: Material,
                                  gamma_d: float) -> np.ndarray:
    """Operator mapping boundary data values to the Nitsche load.

    Returns (2 n_scalar, 2 nq); applied to g.ravel() for g of shape
    (nq, 2) it yields -(g, stress(v).n) + gamma_d / h (2 mu (g, v)
    + lambda (g.n, v.n)).
    """
    h = bounds[2] - bounds[0]
    vals, grads = shape_eval(basis, bounds, srule.points)
    trac = _traction_tensor(grads, srule.normals, mat)
    w = srule.weights
    nq = srule.n
    n = basis.n_scalar
    op = -np.einsum("q,qaci->acqi", w, trac)
    op[:, 0, :, 0] += 2.0 * mat.mu * (gamma_d / h) * (w[None, :] * vals.T)
    op[:, 1, :, 1] += 2.0 * mat.mu * (gamma_d / h) * (w[None, :] * vals.T)
    op += mat.lam * (gamma_d / h) * np.einsum(
        "q,qa,qc,qi->acqi", w, vals, srule.normals, srule.normals)
    return op.reshape(2 * n, 2 * nq)


def local_neumann_load_operator(basis: ElementBasis, bounds,
                                srule: SurfaceQuadratureRule) -> np.ndarray:
    """Operator mapping traction data values to (g, v) on the boundary."""
    vals, _ = shape_eval(basis, bounds, srule.points)
    nq = srule.n
    n = basis.n_scalar
    op = np.zeros((n, 2, nq, 2))
    op[:, 0, :, 0] = vals.T * srule.weights[None, :]
    op[:, 1, :, 1] = vals.T * srule.weights[None, :]
    return op.reshape(2 * n, 2 * nq)


def local_body_load_operator(basis: ElementBasis, bounds,
                             rule: QuadratureRule) -> np.ndarray:
    """Operator mapping body force values to (f, v) over the rule."""
    vals, _ = shape_eval(basis, bounds, rule.points)
    nq = rule.n
    n = basis.n_scalar
    op = np.zeros((n, 2, nq, 2))
    op[:, 0, :, 0] = vals.T * rule.weights[None, :]
    op[:, 1, :, 1] = vals.T * rule.weights[None, :]
    return op.reshape(2 * n, 2 * nq)


def local_interface(basis: ElementBasis, bounds,
                    srule: SurfaceQuadratureRule, mat1: Material,
                    mat2: Material, kappa: tuple[float, float],
                    gamma_i: float) -> np.ndarray:
    """Nitsche coupling block across a material interface in one cell.

    Rows/cols run over [domain 1 dofs, domain 2 dofs] of the same
    background cell.  With jump [u] = u2 - u1 and weighted average
    {w} = kappa1 w1 + kappa2 w2 this is

      -({stress(u).n}, [v]) - ([u], {stress(v).n}) + gamma_i / h ([u], [v])

    where n is the rule's normal (pointing from domain 2 into domain 1).
    """
    h = bounds[2] - bounds[0]
    vals, grads = shape_eval(basis, bounds, srule.points)
    trac1 = _traction_tensor(grads, srule.normals, mat1)
    trac2 = _traction_tensor(grads, srule.normals, mat2)
    w = srule.weights
    nq = srule.n
    n = basis.n_scalar

    # Value and traction tables over the doubled dof block.
    jump = np.zeros((nq, 2 * n, 2, 2))
    avg = np.zeros((nq, 2 * n, 2, 2))
    eye = np.eye(2)
    jump[:, :n, :, :] = -np.einsum("qa,cd->qacd", vals, eye)
    jump[:, n:, :, :] = np.einsum("qa,cd->qacd", vals, eye)
    avg[:, :n, :, :] = kappa[0] * trac1
    avg[:, n:, :, :] = kappa[1] * trac2

    t1 = np.einsum("q,qaci,qbdi->acbd", w, avg, jump)
    pen = (gamma_i / h) * np.einsum("q,qaci,qbdi->acbd", w, jump, jump)
    out = -t1 - t1.transpose(2, 3, 0, 1) + pen
    return out.reshape(4 * n, 4 * n)
