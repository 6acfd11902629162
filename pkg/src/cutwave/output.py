"""Delimited and VTK output writers.

CSV files start with a versioned schema comment so downstream plotting
scripts can detect format changes.  Field snapshots use the legacy
ASCII VTK structured-points format; sample points outside the physical
domain carry NaN as a mask value.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .analysis import ConvergenceRecord, CutSweepRecord

CONVERGENCE_SCHEMA = "# cutwave convergence csv v1"
CUTSWEEP_SCHEMA = "# cutwave cutsweep csv v1"
RULE_SCHEMA = "# cutwave quadrature rule csv v1"


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def write_convergence_csv(records: list[ConvergenceRecord], path) -> None:
    with open(path, "w") as fh:
        fh.write(CONVERGENCE_SCHEMA + "\n")
        fh.write("scenario,p,h,dofs,l2_error,h1_error,fitted_order\n")
        for r in records:
            fh.write(",".join([
                r.scenario, str(r.p), _fmt(r.h), str(r.dofs),
                _fmt(r.l2_error), _fmt(r.h1_error), _fmt(r.fitted_order),
            ]) + "\n")


def write_cutsweep_csv(records: list[CutSweepRecord], path) -> None:
    with open(path, "w") as fh:
        fh.write(CUTSWEEP_SCHEMA + "\n")
        fh.write("problem,p,hcut_over_h,cond_mass,cond_stiffness,cfl\n")
        for r in records:
            fh.write(",".join([
                r.problem, str(r.p), _fmt(r.fraction), _fmt(r.cond_mass),
                _fmt(r.cond_stiffness), _fmt(r.cfl),
            ]) + "\n")


def write_rule_csv(rule, path) -> None:
    """Dump a quadrature rule; surface rules add their normal columns."""
    normals = getattr(rule, "normals", None)
    with open(path, "w") as fh:
        fh.write(RULE_SCHEMA + "\n")
        fh.write("x,y,weight" + (",nx,ny" if normals is not None else "")
                 + "\n")
        for i in range(rule.n):
            row = [_fmt(rule.points[i, 0]), _fmt(rule.points[i, 1]),
                   _fmt(rule.weights[i])]
            if normals is not None:
                row += [_fmt(normals[i, 0]), _fmt(normals[i, 1])]
            fh.write(",".join(row) + "\n")


def write_vtk_structured(path, title: str, origin, spacing, values) -> None:
    """Legacy ASCII VTK structured-points file of one scalar field.

    values is an (ny, nx) array in row-major y-then-x order; NaN entries
    mark points outside the physical domain.
    """
    ny, nx = values.shape
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title[:255] + "\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} 1\n")
        fh.write(f"ORIGIN {_fmt(origin[0])} {_fmt(origin[1])} 0\n")
        fh.write(f"SPACING {_fmt(spacing[0])} {_fmt(spacing[1])} 1\n")
        fh.write(f"POINT_DATA {nx * ny}\n")
        fh.write("SCALARS displacement_magnitude float 1\n")
        fh.write("LOOKUP_TABLE default\n")
        flat = values.ravel()
        for start in range(0, flat.size, 9):
            fh.write(" ".join(_fmt(v) for v in flat[start:start + 9]) + "\n")


def sample_field_magnitude(system, xi: np.ndarray, resolution: int
                           ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample |u_h| on a uniform grid over the background mesh.

    Returns (origin, spacing, values) where values[j, i] corresponds to
    the point origin + (i, j) * spacing; points outside the physical
    domain hold NaN.
    """
    from .space import evaluate_field

    x0, y0, x1, y1 = system.mesh.bounds()
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    mag = np.full(pts.shape[0], np.nan)
    phiv = system.phi.value(pts) if system.phi is not None else None
    for dom in system.domains:
        if phiv is None:
            physical = np.ones(pts.shape[0], dtype=bool)
        elif dom.side == "inside":
            physical = phiv <= 0.0
        else:
            physical = phiv >= 0.0
        coeffs = xi[dom.offset:dom.offset + dom.dofmap.n_dofs]
        vals = evaluate_field(system.mesh, dom.dofmap, system.basis,
                              coeffs, pts)
        keep = np.isfinite(vals[:, 0]) & physical
        mag[keep] = np.hypot(vals[keep, 0], vals[keep, 1])
    spacing = (xs[1] - xs[0], ys[1] - ys[0])
    return np.array([x0, y0]), np.array(spacing), mag.reshape(resolution,
                                                              resolution)
