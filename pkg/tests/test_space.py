"""Tensor Lagrange basis, dof maps, interpolation and field evaluation."""

import numpy as np
import pytest

from cutwave.geometry import CircleLevelSet, HalfPlaneLevelSet, build_topology
from cutwave.mesh import BackgroundMesh
from cutwave.quadrature import gauss_lobatto_nodes
from cutwave.space import (
    ElementBasis,
    build_dofmap,
    evaluate_field,
    interpolate,
    normal_derivative_eval,
    shape_eval,
)


def full_covering(mesh):
    """Topology of a domain that covers the whole grid."""
    cx = mesh.origin[0] + 0.5 * mesh.nx * mesh.h
    cy = mesh.origin[1] + 0.5 * mesh.ny * mesh.h
    diag = np.hypot(mesh.nx, mesh.ny) * mesh.h
    return build_topology(mesh, CircleLevelSet((cx, cy), 10 * diag), "inside")


class TestElementBasis:
    def test_q1_values_at_center(self):
        basis = ElementBasis(1)
        vals = basis.tensor_values(np.array([[0.5, 0.5]]))
        np.testing.assert_allclose(vals, 0.25)

    def test_partition_of_unity_and_gradient_nullsum(self):
        rng = np.random.default_rng(7)
        for p in range(1, 6):
            basis = ElementBasis(p)
            ref = rng.random((50, 2))
            vals = basis.tensor_values(ref)
            np.testing.assert_allclose(vals.sum(axis=1), 1.0, atol=1e-12)
            grads = basis.tensor_gradients(ref, 0.37)
            np.testing.assert_allclose(grads.sum(axis=1), 0.0, atol=1e-11)

    def test_kronecker_property_at_nodes(self):
        for p in (1, 2, 3):
            basis = ElementBasis(p)
            nodes = gauss_lobatto_nodes(p)
            xx, yy = np.meshgrid(nodes, nodes)
            ref = np.column_stack([xx.ravel(), yy.ravel()])
            vals = basis.tensor_values(ref)
            np.testing.assert_allclose(vals, np.eye(basis.n_scalar), atol=1e-12)

    def test_gradient_reproduces_linear_field(self):
        basis = ElementBasis(2)
        mesh = BackgroundMesh((0.0, 0.0), 0.5, 1, 1)
        nodes = gauss_lobatto_nodes(2) * mesh.h
        xx, yy = np.meshgrid(nodes, nodes)
        coeffs = xx.ravel()  # scalar nodal values of f(x, y) = x, y-major
        pts = np.array([[0.1, 0.3], [0.25, 0.25], [0.4, 0.05]])
        vals, grads = shape_eval(basis, mesh.cell_bounds(0), pts)
        np.testing.assert_allclose(vals @ coeffs, pts[:, 0], atol=1e-13)
        np.testing.assert_allclose(
            np.einsum("a,qai->qi", coeffs, grads),
            np.tile([1.0, 0.0], (3, 1)), atol=1e-12)

    def test_derivative_order_cap(self):
        basis = ElementBasis(2)
        with pytest.raises(ValueError):
            basis.eval_1d(np.array([0.5]), 3)


class TestNormalDerivatives:
    def test_q2_second_x_derivative_trace(self):
        # f(x, y) = x^2 y on the reference cell, trace on face x = 1
        basis = ElementBasis(2)
        nodes = gauss_lobatto_nodes(2)
        xx, yy = np.meshgrid(nodes, nodes)
        coeffs = (xx.ravel()**2 * yy.ravel())
        tang = np.array([0.2, 0.5, 0.9])
        trace = normal_derivative_eval(basis, axis=0, end=1, tang_ref=tang,
                                       k=2, h=1.0)
        np.testing.assert_allclose(trace @ coeffs, 2.0 * tang, atol=1e-12)

    def test_scaling_with_cell_size(self):
        basis = ElementBasis(3)
        tang = np.array([0.5])
        t1 = normal_derivative_eval(basis, 1, 0, tang, 2, 1.0)
        t2 = normal_derivative_eval(basis, 1, 0, tang, 2, 0.5)
        np.testing.assert_allclose(t2, 4.0 * t1)

    def test_jump_vanishes_for_global_polynomial(self):
        # same global polynomial interpolated on two neighbour cells
        p = 3
        basis = ElementBasis(p)
        mesh = BackgroundMesh((0.0, 0.0), 1.0, 2, 1)
        nodes = gauss_lobatto_nodes(p)

        def poly(x, y):
            return x**3 - 2 * x * y**2 + 0.5 * y**3

        tang = np.linspace(0.05, 0.95, 7)
        for k in range(1, p + 1):
            # left cell sees the face at reference x=1, right at x=0
            left = normal_derivative_eval(basis, 0, 1, tang, k, 1.0)
            right = normal_derivative_eval(basis, 0, 0, tang, k, 1.0)
            cl = np.array([poly(x, y) for y in nodes for x in nodes])
            cr = np.array([poly(1 + x, y) for y in nodes for x in nodes])
            np.testing.assert_allclose(left @ cl, right @ cr, atol=1e-10)

    def test_rejects_k_beyond_order(self):
        basis = ElementBasis(2)
        with pytest.raises(ValueError):
            normal_derivative_eval(basis, 0, 1, np.array([0.5]), 3, 1.0)


class TestDofMaps:
    def test_full_grid_q1_count(self):
        mesh = BackgroundMesh((0.0, 0.0), 1.0, 9, 9)
        dofmap = build_dofmap(mesh, full_covering(mesh), 1)
        assert dofmap.n_dofs == 2 * 10 * 10

    def test_single_cell_q3_count(self):
        mesh = BackgroundMesh((0.0, 0.0), 1.0, 1, 1)
        dofmap = build_dofmap(mesh, full_covering(mesh), 3)
        assert dofmap.n_dofs == 32

    def test_interface_split_counts_by_enumeration(self):
        mesh = BackgroundMesh((0.0, 0.0), 1.0, 9, 9)
        phi = HalfPlaneLevelSet(offset=4.4, axis=0)
        p = 1
        total = 0
        for side in ("outside", "inside"):
            topo = build_topology(mesh, phi, side)
            dofmap = build_dofmap(mesh, topo, p)
            lattice = set()
            for cell in topo.covering_cells:
                ix, iy = mesh.cell_coords(int(cell))
                for b in range(p + 1):
                    for a in range(p + 1):
                        lattice.add((ix * p + a, iy * p + b))
            assert dofmap.n_dofs == 2 * len(lattice)
            total += dofmap.n_dofs
        # cut column nodes are counted once per side
        assert total == 2 * (10 * 6 + 10 * 6)

    def test_shared_nodes_have_shared_indices(self):
        mesh = BackgroundMesh((0.0, 0.0), 0.5, 3, 2)
        dofmap = build_dofmap(mesh, full_covering(mesh), 2)
        # right edge nodes of cell 0 equal left edge nodes of cell 1
        n0 = dofmap.cell_nodes[0].reshape(3, 3)
        n1 = dofmap.cell_nodes[1].reshape(3, 3)
        np.testing.assert_array_equal(n0[:, 2], n1[:, 0])

    def test_cell_dofs_interleave_components(self):
        mesh = BackgroundMesh((0.0, 0.0), 1.0, 1, 1)
        dofmap = build_dofmap(mesh, full_covering(mesh), 1)
        dofs = dofmap.cell_dofs(0)
        np.testing.assert_array_equal(dofs[0::2] % 2, 0)
        np.testing.assert_array_equal(dofs[1::2] % 2, 1)
        np.testing.assert_array_equal(dofs[1::2] - dofs[0::2], 1)

    def test_no_dofs_on_exterior_cells(self):
        mesh = BackgroundMesh((-2.0, -2.0), 0.5, 8, 8)
        topo = build_topology(mesh, CircleLevelSet((0.0, 0.0), 1.0), "inside")
        dofmap = build_dofmap(mesh, topo, 2)
        assert set(dofmap.cell_nodes) == set(int(c) for c in topo.covering_cells)


class TestFieldEvaluation:
    def test_polynomial_reproduction_at_random_points(self):
        rng = np.random.default_rng(11)
        mesh = BackgroundMesh((-1.0, -1.0), 0.5, 4, 4)
        topo = full_covering(mesh)
        for p in (1, 2, 3):
            basis = ElementBasis(p)
            dofmap = build_dofmap(mesh, topo, p)

            def f(pts):
                x, y = pts[:, 0], pts[:, 1]
                return np.column_stack([x**p - 2 * y**p + x * y**(p - 1),
                                        3 * x**(p - 1) * y - y**p])

            coeffs = interpolate(f, dofmap)
            pts = rng.uniform(-1.0, 1.0, size=(100, 2))
            got = evaluate_field(mesh, dofmap, basis, coeffs, pts)
            np.testing.assert_allclose(got, f(pts), atol=1e-10)

    def test_constant_field_coefficients(self):
        mesh = BackgroundMesh((0.0, 0.0), 1.0, 2, 2)
        dofmap = build_dofmap(mesh, full_covering(mesh), 2)
        coeffs = interpolate(lambda pts: np.tile([2.5, -1.0], (len(pts), 1)),
                             dofmap)
        np.testing.assert_allclose(coeffs[0::2], 2.5)
        np.testing.assert_allclose(coeffs[1::2], -1.0)

    def test_continuity_across_shared_face(self):
        rng = np.random.default_rng(3)
        mesh = BackgroundMesh((0.0, 0.0), 1.0, 2, 1)
        basis = ElementBasis(3)
        dofmap = build_dofmap(mesh, full_covering(mesh), 3)
        coeffs = rng.standard_normal(dofmap.n_dofs)
        pts = np.column_stack([np.ones(10), np.linspace(0.03, 0.97, 10)])
        lv, _ = shape_eval(basis, mesh.cell_bounds(0), pts)
        rv, _ = shape_eval(basis, mesh.cell_bounds(1), pts)
        ul = lv @ coeffs[dofmap.cell_dofs(0)].reshape(-1, 2)
        ur = rv @ coeffs[dofmap.cell_dofs(1)].reshape(-1, 2)
        np.testing.assert_allclose(ul, ur, atol=1e-12)

    def test_outside_points_are_nan(self):
        mesh = BackgroundMesh((-2.0, -2.0), 0.5, 8, 8)
        topo = build_topology(mesh, CircleLevelSet((0.0, 0.0), 1.0), "inside")
        basis = ElementBasis(1)
        dofmap = build_dofmap(mesh, topo, 1)
        coeffs = np.ones(dofmap.n_dofs)
        got = evaluate_field(mesh, dofmap, basis, coeffs,
                             np.array([[1.9, 1.9], [0.0, 0.0]]))
        assert np.all(np.isnan(got[0]))
        np.testing.assert_allclose(got[1], [1.0, 1.0])

    def test_interface_domains_are_independent(self):
        mesh = BackgroundMesh((0.0, 0.0), 1.0, 4, 4)
        phi = HalfPlaneLevelSet(offset=2.3, axis=0)
        basis = ElementBasis(1)
        topo1 = build_topology(mesh, phi, "outside")
        topo2 = build_topology(mesh, phi, "inside")
        dof1 = build_dofmap(mesh, topo1, 1)
        dof2 = build_dofmap(mesh, topo2, 1)
        c2 = np.zeros(dof2.n_dofs)
        probe = np.array([[1.5, 1.5]])
        base = evaluate_field(mesh, dof2, basis, c2, probe).copy()
        # perturbing domain-1 coefficients cannot move domain-2 values
        np.testing.assert_allclose(
            evaluate_field(mesh, dof2, basis, c2, probe), base)
        assert dof1.n_dofs + dof2.n_dofs == 2 * (3 * 5) + 2 * (4 * 5)

    def test_interpolation_error_scales_with_order(self):
        def f(pts):
            return np.column_stack([np.sin(pts[:, 0]) * np.sin(pts[:, 1]),
                                    np.cos(pts[:, 0])])

        probe = np.random.default_rng(5).uniform(0.0, 2.0, size=(200, 2))
        errs = []
        for n in (4, 8):
            mesh = BackgroundMesh((0.0, 0.0), 2.0 / n, n, n)
            basis = ElementBasis(2)
            dofmap = build_dofmap(mesh, full_covering(mesh), 2)
            coeffs = interpolate(f, dofmap)
            got = evaluate_field(mesh, dofmap, basis, coeffs, probe)
            errs.append(np.max(np.abs(got - f(probe))))
        # O(h^3) for p=2: halving h should shrink the error by about 8
        assert errs[1] < errs[0] / 5.0
