"""Cut finite element solver for the 2D elastic wave equation.

Immersed geometries on a uniform square background mesh, ghost-penalty
stabilization for cut cells, weak (Nitsche) boundary and interface
conditions, and explicit RK4 time integration.
"""

from .forms import GRANITE, SANDSTONE, Material, PenaltyConfig
from .geometry import (CellClass, CircleLevelSet, CutTopology, GeometryError,
                       HalfPlaneLevelSet, LevelSet, builtin_levelset,
                       build_topology, classify_cells)
from .mesh import BackgroundMesh
from .quadrature import (QuadratureError, QuadratureRule,
                         SurfaceQuadratureRule, cut_cell_surface_rule,
                         cut_cell_volume_rule, full_cell_rule, gauss_rule_1d)
from .space import DofMap, ElementBasis, build_dofmap, evaluate_field, interpolate
from .system import (DiscreteSystem, InterfaceProblem, SingleDomainProblem,
                     State, assemble, energy, l2_project, ritz_project,
                     rk4_advance, set_initial_conditions, simulate,
                     stable_time_step)

__version__ = "0.1.0"

__all__ = [
    "BackgroundMesh", "CellClass", "CircleLevelSet", "CutTopology",
    "DiscreteSystem", "DofMap", "ElementBasis", "GeometryError", "GRANITE",
    "HalfPlaneLevelSet", "InterfaceProblem", "LevelSet", "Material",
    "PenaltyConfig", "QuadratureError", "QuadratureRule", "SANDSTONE",
    "SingleDomainProblem", "State", "SurfaceQuadratureRule", "assemble",
    "build_dofmap", "build_topology", "builtin_levelset", "classify_cells",
    "cut_cell_surface_rule", "cut_cell_volume_rule", "energy",
    "evaluate_field", "full_cell_rule", "gauss_rule_1d", "interpolate",
    "l2_project", "ritz_project", "rk4_advance", "set_initial_conditions",
    "simulate", "stable_time_step",
]
