"""Staggered 1D grids and field containers.

The spatial layout uses two interleaved families of points on [l1, l2]
with spacing h = (l2 - l1)/N:

  cell centers   x_i = l1 + (i - 1/2) h,  i = 0..N+1   (two ghost cells)
  nodes          x̂_i = l1 + i h,          i = -1..N+1   (two ghost nodes)

The fluid content m lives on cells 1..N plus a Dirichlet ghost slot m_0;
the strain eps lives on nodes 0..N with mirror ghost rules
eps_{-1} = eps_1 and eps_{N+1} = eps_{N-1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    l1: float
    l2: float
    N: int
    h: float = field(init=False)

    def __post_init__(self):
        if not self.l2 > self.l1:
            raise GridError(f"degenerate domain: l2={self.l2} must exceed l1={self.l1}")
        if self.N < 4:
            raise GridError(f"need at least 4 cells, got N={self.N}")
        object.__setattr__(self, "h", (self.l2 - self.l1) / self.N)

    @property
    def length(self) -> float:
        return self.l2 - self.l1

    def cell_centers(self, ghosts: bool = False) -> np.ndarray:
        """x_i = l1 + (i - 1/2) h for i = 1..N, or 0..N+1 with ghosts."""
        lo, hi = (0, self.N + 2) if ghosts else (1, self.N + 1)
        return self.l1 + (np.arange(lo, hi) - 0.5) * self.h

    def nodes(self, ghosts: bool = False) -> np.ndarray:
        """x̂_i = l1 + i h for i = 0..N, or -1..N+1 with ghosts."""
        lo, hi = (-1, self.N + 2) if ghosts else (0, self.N + 1)
        return self.l1 + np.arange(lo, hi) * self.h


def build_grid(l1: float, l2: float, N: int) -> Grid1D:
    return Grid1D(l1, l2, N)


@dataclass
class CellField:
    """Piecewise-constant values on cells 1..N plus the Dirichlet ghost m_0."""

    values: np.ndarray          # length N, cells 1..N
    ghost: float = 0.0          # Dirichlet slot m_0 at x_0 = l1 - h/2

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise GridError("cell values must be a 1D array")
        if not np.all(np.isfinite(self.values)) or not np.isfinite(self.ghost):
            raise GridError("cell field contains non-finite entries")

    @property
    def N(self) -> int:
        return len(self.values)

    def with_ghost(self) -> np.ndarray:
        """Values at cells 0..N (index 0 is the Dirichlet ghost)."""
        return np.concatenate(([self.ghost], self.values))

    def copy(self) -> "CellField":
        return CellField(self.values.copy(), self.ghost)


@dataclass
class NodeField:
    """Values on nodes 0..N; ghost neighbours are mirrored, never stored."""

    values: np.ndarray          # length N+1, nodes 0..N

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) < 3:
            raise GridError("node values must be a 1D array with at least 3 entries")
        if not np.all(np.isfinite(self.values)):
            raise GridError("node field contains non-finite entries")

    @property
    def N(self) -> int:
        return len(self.values) - 1

    @property
    def ghost_left(self) -> float:
        """eps_{-1} = eps_1."""
        return self.values[1]

    @property
    def ghost_right(self) -> float:
        """eps_{N+1} = eps_{N-1}."""
        return self.values[-2]

    def with_ghosts(self) -> np.ndarray:
        """Values at nodes -1..N+1 with both mirror ghosts materialized."""
        return np.concatenate(([self.ghost_left], self.values, [self.ghost_right]))

    def copy(self) -> "NodeField":
        return NodeField(self.values.copy())


def sample_function(grid: Grid1D, f, placement: str):
    """Sample f at cell centers or nodes.

    For cells, the Dirichlet ghost slot is filled with f(l1), the boundary
    value the slot represents.
    """
    if placement == "cells":
        vals = np.array([f(x) for x in grid.cell_centers()], dtype=float)
        return CellField(vals, ghost=float(f(grid.l1)))
    if placement == "nodes":
        vals = np.array([f(x) for x in grid.nodes()], dtype=float)
        return NodeField(vals)
    raise GridError(f"placement must be 'cells' or 'nodes', got {placement!r}")


def discrete_l2_norm(field, grid: Grid1D) -> float:
    """sqrt(h * sum of squared stored values), ghost slots excluded."""
    vals = field.values if hasattr(field, "values") else np.asarray(field)
    return float(np.sqrt(grid.h * np.sum(vals ** 2)))


def field_to_csv(field, grid: Grid1D, path) -> None:
    """One row per grid point, columns x,value, 17 significant digits."""
    if isinstance(field, CellField):
        xs = grid.cell_centers()
        vals = field.values
    elif isinstance(field, NodeField):
        xs = grid.nodes()
        vals = field.values
    else:
        raise GridError("field_to_csv expects a CellField or NodeField")
    with open(path, "w") as fh:
        fh.write("x,value\n")
        for x, v in zip(xs, vals):
            fh.write(f"{x:.17g},{v:.17g}\n")
