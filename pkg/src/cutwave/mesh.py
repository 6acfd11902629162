"""Uniform background grid of square cells.

The geometry never conforms to this grid; immersed boundaries and
interfaces are described separately by a level set and intersected with
the grid cell by cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BackgroundMesh:
    """nx * ny axis-aligned square cells of side h.

    Cell (ix, iy) carries the flat index iy * nx + ix, i.e. cells are
    numbered along x first.
    """

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0.0:
            raise ValueError("cell size h must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("mesh needs at least one cell in each direction")

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def cell_index(self, ix: int, iy: int) -> int:
        return iy * self.nx + ix

    def cell_coords(self, cell: int) -> tuple[int, int]:
        return cell % self.nx, cell // self.nx

    def cell_bounds(self, cell: int) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1) of the cell, x1 - x0 = y1 - y0 = h."""
        ix, iy = self.cell_coords(cell)
        x0 = self.origin[0] + ix * self.h
        y0 = self.origin[1] + iy * self.h
        return x0, y0, x0 + self.h, y0 + self.h

    def cell_corners(self, cell: int) -> np.ndarray:
        """Corners as a (4, 2) array: (x0,y0), (x1,y0), (x0,y1), (x1,y1)."""
        x0, y0, x1, y1 = self.cell_bounds(cell)
        return np.array([[x0, y0], [x1, y0], [x0, y1], [x1, y1]])

    def containing_cell(self, x: float, y: float) -> int:
        """Flat index of the cell containing (x, y), clamped to the grid.

        Points exactly on an interior gridline go to the higher cell, the
        clamp keeps points on the outer boundary inside the grid.
        """
        ix = int(np.floor((x - self.origin[0]) / self.h))
        iy = int(np.floor((y - self.origin[1]) / self.h))
        ix = min(max(ix, 0), self.nx - 1)
        iy = min(max(iy, 0), self.ny - 1)
        return self.cell_index(ix, iy)

    def boundary_edges(self, cell: int) -> list[str]:
        """Which cell edges lie on the outer boundary of the grid.

        Returned labels are from {"left", "right", "bottom", "top"}.
        """
        ix, iy = self.cell_coords(cell)
        edges = []
        if ix == 0:
            edges.append("left")
        if ix == self.nx - 1:
            edges.append("right")
        if iy == 0:
            edges.append("bottom")
        if iy == self.ny - 1:
            edges.append("top")
        return edges

    def bounds(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return x0, y0, x0 + self.nx * self.h, y0 + self.ny * self.h
