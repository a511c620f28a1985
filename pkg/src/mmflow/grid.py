"""Truncated uniform 1D grid, discrete fields, stencils and quadrature.

The continuum problem lives on the whole line; computations truncate to
[-L, L] with zero-flux closure, which keeps componentwise masses exactly
invariant.  Densities are cell-centered, fluxes face-centered, so the
discrete continuity equation telescopes exactly.  All integrals use the
midpoint rule, matching the second-order stencils.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .value_space import ValueSpace

__all__ = [
    "Grid1D",
    "GridField",
    "face_gradient",
    "face_average",
    "face_divergence",
    "second_difference",
    "integrate",
    "mass_vector",
    "second_moment",
    "l2_norm",
    "h1_norm",
    "h2_seminorm",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centered grid on [-L, L] with N cells and N+1 faces."""

    half_length: float
    cells: int

    def __post_init__(self):
        if self.half_length <= 0:
            raise ValueError("half_length must be positive")
        if self.cells < 8:
            raise ValueError("grid needs at least 8 cells")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.cells

    @property
    def cell_centers(self) -> np.ndarray:
        dx = self.spacing
        return -self.half_length + dx * (np.arange(self.cells) + 0.5)

    @property
    def faces(self) -> np.ndarray:
        return -self.half_length + self.spacing * np.arange(self.cells + 1)


@dataclass(frozen=True)
class GridField:
    """n-component cell-centered field on a Grid1D.

    ``values`` has shape (n, N).  Raw arithmetic fields are allowed; use
    ``validate_state`` when the field is interpreted as an S-valued state.
    """

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if values.shape[-1] != self.grid.cells:
            raise ValueError("field shape does not match the grid")
        object.__setattr__(self, "values", values)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    def validate_state(self, space: ValueSpace) -> None:
        if self.components != space.n:
            raise ValueError("component count does not match the value space")
        if not space.contains(self.values):
            raise ValueError("field values lie outside the value space")

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(self.grid, values)

    @classmethod
    def constant(cls, grid: Grid1D, levels) -> "GridField":
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        return cls(grid, np.tile(levels[:, None], (1, grid.cells)))

    @classmethod
    def from_function(cls, grid: Grid1D, funcs) -> "GridField":
        """Sample callables (one per component) at the cell centers."""
        if callable(funcs):
            funcs = [funcs]
        x = grid.cell_centers
        return cls(grid, np.stack([np.asarray(f(x), dtype=float) for f in funcs]))


def _values(field) -> np.ndarray:
    if isinstance(field, GridField):
        return field.values
    arr = np.asarray(field, dtype=float)
    return arr[None, :] if arr.ndim == 1 else arr


def face_gradient(field) -> np.ndarray:
    """Face-centered first differences; boundary faces carry 0 (zero flux)."""
    v = _values(field)
    grid = field.grid
    out = np.zeros((v.shape[0], grid.cells + 1))
    out[:, 1:-1] = (v[:, 1:] - v[:, :-1]) / grid.spacing
    return out


def face_average(field) -> np.ndarray:
    """Arithmetic mean of adjacent cells on faces; one-sided at the boundary."""
    v = _values(field)
    out = np.empty((v.shape[0], v.shape[1] + 1))
    out[:, 1:-1] = 0.5 * (v[:, 1:] + v[:, :-1])
    out[:, 0] = v[:, 0]
    out[:, -1] = v[:, -1]
    return out


def face_divergence(grid: Grid1D, faces: np.ndarray) -> np.ndarray:
    """Cell-centered divergence of a face field, adjoint to face_gradient."""
    faces = np.asarray(faces, dtype=float)
    if faces.ndim == 1:
        faces = faces[None, :]
    return (faces[:, 1:] - faces[:, :-1]) / grid.spacing


def second_difference(field) -> np.ndarray:
    """Cell-centered second difference with zero-flux ghost closure.

    Equals the divergence of face_gradient on every cell, so the compact
    interior stencil is combined with one-sided boundary rows consistent
    with reflecting ghost cells.
    """
    grid = field.grid
    if grid.cells < 3:
        raise ValueError("second_difference needs at least 3 cells")
    return face_divergence(grid, face_gradient(field))


def integrate(grid: Grid1D, cellwise: np.ndarray) -> float:
    """Midpoint quadrature of a cellwise quantity (summed over all axes)."""
    return grid.spacing * float(np.sum(cellwise))


def _deviation(field: GridField, space: ValueSpace) -> np.ndarray:
    v = _values(field)
    if v.shape[0] != space.n:
        raise ValueError("component count does not match the value space")
    return v - space.reference[:, None]


def mass_vector(field: GridField, space: ValueSpace) -> np.ndarray:
    """Componentwise integral of u_j - reference_j."""
    dev = _deviation(field, space)
    return field.grid.spacing * dev.sum(axis=1)


def second_moment(field: GridField, space: ValueSpace) -> np.ndarray:
    """Componentwise integral of x^2 (u_j - reference_j)."""
    dev = _deviation(field, space)
    x2 = field.grid.cell_centers**2
    return field.grid.spacing * (dev * x2[None, :]).sum(axis=1)


def l2_norm(field: GridField, space: ValueSpace) -> float:
    dev = _deviation(field, space)
    return float(np.sqrt(integrate(field.grid, dev**2)))


def h1_norm(field: GridField, space: ValueSpace) -> float:
    dev = _deviation(field, space)
    grad = face_gradient(field)
    sq = integrate(field.grid, dev**2) + field.grid.spacing * float(np.sum(grad**2))
    return float(np.sqrt(sq))


def h2_seminorm(field: GridField, space: ValueSpace) -> float:
    """Discrete L2 norm of the second difference of u - reference."""
    if _values(field).shape[0] != space.n:
        raise ValueError("component count does not match the value space")
    lap = second_difference(field)
    return float(np.sqrt(integrate(field.grid, lap**2)))
