"""Periodic channel geometry and the staggered grid.

The domain is ``[0, Lx) x [0, Ly]``, periodic in x, bounded by two walls
``y = 0`` (lower) and ``y = Ly`` (upper).

Array layout (first axis is always x):

* ``phi``, ``mu``: shape ``(Nx, Ny + 1)``, at ``(x_c[i], y_n[j])``. Rows
  ``j = 0`` and ``j = Ny`` lie on the walls and *are* the boundary trace.
* ``p``: shape ``(Nx, Ny)``, at cell centres ``(x_c[i], y_c[j])``.
* ``ux``: shape ``(Nx, Ny)``, at x-faces ``(x_f[i], y_c[j])``.
* ``uy``: shape ``(Nx, Ny + 1)``, at y-faces ``(x_c[i], y_n[j])``; wall rows
  hold the normal velocity and are zero.
* wall scalars: shape ``(Nx,)`` per wall.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

WALLS = ("lower", "upper", "both")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelDomain:
    """Periodic channel parameters."""

    Lx: float = 1.0
    Ly: float = 1.0
    Nx: int = 32
    Ny: int = 32

    def __post_init__(self):
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("Lx and Ly must be > 0")
        if int(self.Nx) != self.Nx or int(self.Ny) != self.Ny:
            raise ValueError("Nx and Ny must be integers")
        if self.Nx % 2:
            raise ValueError("Nx must be even")
        if self.Nx < 8 or self.Ny < 8:
            raise ValueError("Nx and Ny must be >= 8")


@dataclass(frozen=True)
class Grid:
    """Immutable grid descriptor with coordinates and quadrature weights.

    Equality and hashing use only the four defining parameters, so grids can
    key operator caches.
    """

    Lx: float
    Ly: float
    Nx: int
    Ny: int

    def __post_init__(self):
        ChannelDomain(self.Lx, self.Ly, self.Nx, self.Ny)

    @property
    def dx(self) -> float:
        return self.Lx / self.Nx

    @property
    def dy(self) -> float:
        return self.Ly / self.Ny

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.Nx, self.Ny + 1)

    @property
    def cell_shape(self) -> tuple[int, int]:
        return (self.Nx, self.Ny)

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def boundary_length(self) -> float:
        return 2.0 * self.Lx

    @property
    def sigma_measure(self) -> float:
        """Measure of the closed domain under d(sigma) = dx + dS."""
        return self.area + self.boundary_length

    @cached_property
    def x_c(self) -> np.ndarray:
        return _frozen((np.arange(self.Nx) + 0.5) * self.dx)

    @cached_property
    def x_f(self) -> np.ndarray:
        return _frozen((np.arange(self.Nx) + 1.0) * self.dx)

    @cached_property
    def y_n(self) -> np.ndarray:
        return _frozen(np.arange(self.Ny + 1) * self.dy)

    @cached_property
    def y_c(self) -> np.ndarray:
        return _frozen((np.arange(self.Ny) + 0.5) * self.dy)

    @cached_property
    def wy_node(self) -> np.ndarray:
        """Trapezoid weights in y for node rows (length Ny+1)."""
        w = np.full(self.Ny + 1, self.dy)
        w[0] = w[-1] = 0.5 * self.dy
        return _frozen(w)

    @cached_property
    def w_node(self) -> np.ndarray:
        """Bulk quadrature weights for node-layout arrays."""
        return _frozen(np.broadcast_to(self.dx * self.wy_node, self.node_shape).copy())

    @cached_property
    def w_cell(self) -> np.ndarray:
        """Bulk quadrature weights for cell-layout arrays (midpoint rule)."""
        return _frozen(np.full(self.cell_shape, self.dx * self.dy))

    @cached_property
    def w_wall(self) -> np.ndarray:
        """Quadrature weights along one wall."""
        return _frozen(np.full(self.Nx, self.dx))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the real FFT along x."""
        return _frozen(2.0 * np.pi * np.arange(self.Nx // 2 + 1) / self.Lx)

    @cached_property
    def sigma_x(self) -> np.ndarray:
        """Symbol of the periodic second difference -D_xx per rfft mode."""
        theta = 2.0 * np.pi * np.arange(self.Nx // 2 + 1) / self.Nx
        return _frozen(2.0 / self.dx**2 * (1.0 - np.cos(theta)))

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Parseval multiplicities of the rfft modes (1 for k=0 and Nyquist)."""
        m = np.full(self.Nx // 2 + 1, 2.0)
        m[0] = 1.0
        m[-1] = 1.0
        return _frozen(m)

    def mesh(self, layout: str = "node") -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays for a layout: node, cell, ux or uy."""
        xs = {"node": self.x_c, "cell": self.x_c, "ux": self.x_f, "uy": self.x_c}[layout]
        ys = {"node": self.y_n, "cell": self.y_c, "ux": self.y_c, "uy": self.y_n}[layout]
        return np.meshgrid(xs, ys, indexing="ij")

    def zeros(self, layout: str = "node") -> np.ndarray:
        shape = self.cell_shape if layout in ("cell", "ux") else self.node_shape
        return np.zeros(shape)

    # quadrature -----------------------------------------------------------
    def integrate_bulk(self, field: np.ndarray) -> float:
        """Integral over the bulk, dispatching on the array layout.

        Node arrays use the trapezoid rule in y; cell arrays the midpoint rule.
        Both are exact for constants and second order for smooth fields.
        """
        field = np.asarray(field)
        if field.shape == self.node_shape:
            return float(np.sum(self.w_node * field))
        if field.shape == self.cell_shape:
            return float(np.sum(self.w_cell * field))
        raise ValueError(
            f"field shape {field.shape} matches neither {self.node_shape} nor {self.cell_shape}"
        )

    def mean_bulk(self, field: np.ndarray) -> float:
        return self.integrate_bulk(field) / self.area

    def integrate_boundary(self, field, wall: str = "both") -> float:
        """Integral along the walls.

        Args:
            field: a wall array of shape ``(Nx,)``, a pair ``(lower, upper)``
                or a node-layout bulk array whose wall rows are integrated.
            wall: ``"lower"``, ``"upper"`` or ``"both"``. A single wall array
                with ``"both"`` is taken to hold the same values on each wall.
        """
        if wall not in WALLS:
            raise ValueError(f"wall must be one of {WALLS}")
        lower, upper = self._wall_pair(field)
        total_lo = float(np.sum(self.w_wall * lower))
        total_up = float(np.sum(self.w_wall * upper))
        if wall == "lower":
            return total_lo
        if wall == "upper":
            return total_up
        return total_lo + total_up

    def _wall_pair(self, field):
        if isinstance(field, (tuple, list)):
            if len(field) != 2:
                raise ValueError("wall pair must have two entries")
            lo, up = (np.asarray(a) for a in field)
        else:
            field = np.asarray(field)
            if field.shape == self.node_shape:
                lo, up = field[:, 0], field[:, -1]
            elif field.shape == (2, self.Nx):
                lo, up = field[0], field[1]
            else:
                lo = up = field
        for a in (lo, up):
            if a.shape != (self.Nx,):
                raise ValueError(f"wall array shape {a.shape} != ({self.Nx},)")
        return lo, up


def build_domain(config: ChannelDomain | None = None, **kwargs) -> Grid:
    """Build the grid descriptor for a channel.

    Args:
        config: channel parameters; keyword arguments build one if omitted.

    Returns:
        The immutable :class:`Grid`.
    """
    if config is None:
        config = ChannelDomain(**kwargs)
    elif kwargs:
        raise TypeError("pass either a ChannelDomain or keyword arguments")
    return Grid(float(config.Lx), float(config.Ly), int(config.Nx), int(config.Ny))
