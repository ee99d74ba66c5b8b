"""The solution state carried between time steps."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import operators as op
from .grid import Grid


@dataclass(frozen=True)
class FieldState:
    """Velocity, order parameter, chemical potential and pressure at time ``t``.

    ``phi`` and ``mu`` use the node layout, so the wall values of the order
    parameter are ``phi[:, 0]`` and ``phi[:, -1]``; ``phi_gamma`` reads them
    rather than storing a copy.
    """

    grid: Grid
    t: float
    ux: np.ndarray
    uy: np.ndarray
    phi: np.ndarray
    mu: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        g = self.grid
        for name, shape in (
            ("ux", g.cell_shape),
            ("uy", g.node_shape),
            ("phi", g.node_shape),
            ("mu", g.node_shape),
            ("p", g.cell_shape),
        ):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)

    @property
    def u(self):
        return (self.ux, self.uy)

    @property
    def phi_gamma(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.phi[:, 0], self.phi[:, -1])

    @property
    def mass(self) -> float:
        """Bulk mean of the order parameter."""
        return self.grid.mean_bulk(self.phi)

    def max_divergence(self) -> float:
        return float(np.abs(op.divergence(self.u, self.grid)).max())

    def with_(self, **changes) -> "FieldState":
        return replace(self, **changes)

    def copy(self) -> "FieldState":
        return replace(self, ux=self.ux.copy(), uy=self.uy.copy(), phi=self.phi.copy(), mu=self.mu.copy(), p=self.p.copy())

    def max_abs(self) -> float:
        return float(max(np.abs(a).max() for a in (self.ux, self.uy, self.phi, self.mu, self.p)))

    def bitwise_equal(self, other: "FieldState") -> bool:
        return self.t == other.t and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("ux", "uy", "phi", "mu", "p")
        )


def zero_state(grid: Grid, t: float = 0.0) -> FieldState:
    return FieldState(grid, t, grid.zeros("ux"), grid.zeros("uy"), grid.zeros("node"), grid.zeros("node"), grid.zeros("cell"))


def make_state(grid: Grid, phi: np.ndarray, u=None, t: float = 0.0, mu: np.ndarray | None = None, hyp=None) -> FieldState:
    """Build a state from an order parameter and optional velocity.

    The velocity is projected onto discretely solenoidal fields. The chemical
    potential defaults to ``-Delta_h phi + f(phi)``.
    """
    from .physics import chemical_potential

    phi = np.asarray(phi, dtype=float)
    if u is None:
        ux, uy = grid.zeros("ux"), grid.zeros("uy")
    else:
        ux, uy = (np.array(a, dtype=float) for a in u)
        uy[:, 0] = uy[:, -1] = 0.0
        ux, uy = op.leray_project((ux, uy), grid)
    if mu is None:
        mu = chemical_potential(phi, grid, hyp)
    return FieldState(grid, t, ux, uy, phi, mu, grid.zeros("cell"))


def random_state(
    grid: Grid,
    rng: np.random.Generator,
    amp_u: float = 0.0,
    amp_phi: float = 0.1,
    mean_phi: float = 0.0,
    modes: int = 4,
    hyp=None,
) -> FieldState:
    """Smooth random initial data from a few low Fourier/cosine modes.

    The order parameter has bulk mean exactly ``mean_phi``; the velocity is a
    random superposition of low modes, projected to be solenoidal.
    """
    xs, ys = grid.mesh("node")
    phi = np.zeros(grid.node_shape)
    for kx in range(modes + 1):
        for ky in range(modes + 1):
            if kx == 0 and ky == 0:
                continue
            a, b = rng.normal(size=2)
            cy = np.cos(np.pi * ky * ys / grid.Ly)
            phi += (a * np.cos(2 * np.pi * kx * xs / grid.Lx) + b * np.sin(2 * np.pi * kx * xs / grid.Lx)) * cy
    scale = np.abs(phi).max()
    phi = amp_phi * phi / scale if scale > 0 else phi
    phi += mean_phi - grid.mean_bulk(phi)
    u = None
    if amp_u:
        xf, yc = grid.mesh("ux")
        xc, yn = grid.mesh("uy")
        ux = np.zeros(grid.cell_shape)
        uy = np.zeros(grid.node_shape)
        for kx in range(modes + 1):
            for ky in range(1, modes + 1):
                a, b, c, d = rng.normal(size=4)
                ux += (a * np.cos(2 * np.pi * kx * xf / grid.Lx) + b * np.sin(2 * np.pi * kx * xf / grid.Lx)) * np.sin(np.pi * ky * yc / grid.Ly)
                uy += (c * np.cos(2 * np.pi * kx * xc / grid.Lx) + d * np.sin(2 * np.pi * kx * xc / grid.Lx)) * np.sin(np.pi * ky * yn / grid.Ly)
        uy[:, 0] = uy[:, -1] = 0.0
        ux, uy = op.leray_project((ux, uy), grid)
        s = max(np.abs(ux).max(), np.abs(uy).max())
        u = (amp_u * ux / s, amp_u * uy / s)
    return make_state(grid, phi, u, hyp=hyp)
