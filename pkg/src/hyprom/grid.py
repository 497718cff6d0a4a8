"""Uniform 1D cell grids and per-DoF dependency stencils."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

BOUNDARIES = ("periodic", "transmissive")


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on ``[x_min, x_max]``.

    DoFs are cell averages indexed ``0..n_cells-1``. Ghost indices are wrapped
    on periodic grids and clamped to the nearest interior cell otherwise.
    """

    x_min: float
    x_max: float
    n_cells: int
    boundary: str = "periodic"

    def __post_init__(self) -> None:
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if self.x_max <= self.x_min:
            raise ValueError(f"degenerate interval [{self.x_min}, {self.x_max}]")
        if int(self.n_cells) != self.n_cells or self.n_cells < 3:
            raise ValueError(f"n_cells must be an integer >= 3, got {self.n_cells}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @cached_property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.dx

    def wrap(self, index):
        """Map (possibly ghost) cell indices onto interior cells."""
        index = np.asarray(index)
        if self.boundary == "periodic":
            return np.mod(index, self.n_cells)
        return np.clip(index, 0, self.n_cells - 1)


def build_uniform_grid(x_min: float, x_max: float, n_cells: int, boundary: str = "periodic") -> Grid:
    return Grid(float(x_min), float(x_max), int(n_cells), boundary)


def cfl_number(dt: float, dx: float, max_speed: float) -> float:
    if dt <= 0 or dx <= 0 or max_speed < 0:
        raise ValueError("cfl_number needs dt > 0, dx > 0 and max_speed >= 0")
    return dt * max_speed / dx


@dataclass(frozen=True)
class Stencil:
    dof: int
    dependencies: tuple[int, ...]


def stencil_width(muscl: bool) -> int:
    """One-sided cell dependency of the scheme (2 with MUSCL reconstruction)."""
    return 2 if muscl else 1


def dependency_count(width: int) -> int:
    """Maximum number of DoFs a single assembled residual reads."""
    return 2 * width + 1


def stencil_of(grid: Grid, width: int, dof: int) -> Stencil:
    if not 0 <= dof < grid.n_cells:
        raise IndexError(f"dof {dof} outside 0..{grid.n_cells - 1}")
    if width < 1:
        raise ValueError("stencil width must be positive")
    raw = grid.wrap(np.arange(dof - width, dof + width + 1))
    # ordered by offset, duplicates from clamping dropped
    deps = tuple(dict.fromkeys(int(i) for i in raw))
    return Stencil(dof, deps)


def stencil_union(grid: Grid, width: int, dofs) -> np.ndarray:
    """Sorted set of all DoFs read when assembling residuals at ``dofs``."""
    dofs = np.asarray(dofs, dtype=int)
    if dofs.size == 0:
        return np.zeros(0, dtype=int)
    offsets = np.arange(-width, width + 1)
    return np.unique(grid.wrap(dofs[:, None] + offsets[None, :]))
