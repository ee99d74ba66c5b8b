"""Truncated Galerkin mode on discrete eigenbases.

The order parameter basis consists of the eigenvectors of the lumped Neumann
Laplacian: products of x-Fourier modes and discrete cosines in y. The
velocity basis consists of discrete Stokes eigenfunctions. A truncation to
``n`` modes keeps the ``n`` smallest eigenvalues. Complex Fourier pairs are
never split, so the retained dimension is ``n`` or ``n + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import operators as op
from .grid import Grid
from .physics import ModelParams
from .solver import SchemeConfig, advection, capillary_force, check_blowup, convection
from .state import FieldState


def _multiplicity(grid: Grid, m: int) -> int:
    return 1 if m in (0, grid.Nx // 2) else 2


@lru_cache(maxsize=16)
def cosine_basis(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Mass-orthonormal eigenvectors and eigenvalues of the lumped Neumann Laplacian in y."""
    ny = grid.Ny
    j = np.arange(ny + 1)
    l = np.arange(ny + 1)
    v = np.cos(np.pi * np.outer(j, l) / ny)
    norms = np.sqrt(grid.wy_node @ v**2)
    v = v / norms
    lam = 2.0 / grid.dy**2 * (1.0 - np.cos(np.pi * l / ny))
    v.setflags(write=False)
    lam.setflags(write=False)
    return v, lam


def _truncation(eigs_per_mode, grid: Grid, n: int) -> list[int]:
    """Number of retained eigenvectors per mode for a global truncation to ``n``.

    A space smaller than ``n`` is kept whole.
    """
    entries = []
    for m, lam in enumerate(eigs_per_mode):
        for k, val in enumerate(lam):
            entries.append((float(val), m, k))
    total = sum(_multiplicity(grid, m) * len(lam) for m, lam in enumerate(eigs_per_mode))
    n = min(n, total)
    entries.sort()
    counts = [0] * len(eigs_per_mode)
    kept = 0
    for _, m, k in entries:
        if kept >= n:
            break
        counts[m] = max(counts[m], k + 1)
        kept += _multiplicity(grid, m)
    return counts


@dataclass(frozen=True)
class GalerkinSpace:
    grid: Grid
    n: int
    phi_counts: tuple
    u_counts: tuple

    @property
    def phi_dim(self) -> int:
        return sum(_multiplicity(self.grid, m) * c for m, c in enumerate(self.phi_counts))

    @property
    def u_dim(self) -> int:
        return sum(_multiplicity(self.grid, m) * c for m, c in enumerate(self.u_counts))


def basis_sizes(grid: Grid) -> tuple[int, int]:
    """Total available (phi, u) basis dimensions."""
    stokes = op.stokes_basis(grid)
    phi_total = grid.Nx * (grid.Ny + 1)
    u_total = sum(_multiplicity(grid, m) * len(v) for m, v in enumerate(stokes.values))
    return phi_total, u_total


@lru_cache(maxsize=32)
def galerkin_space(grid: Grid, n: int) -> GalerkinSpace:
    _, lam_y = cosine_basis(grid)
    phi_eigs = [grid.sigma_x[m] + lam_y for m in range(grid.Nx // 2 + 1)]
    stokes = op.stokes_basis(grid)
    largest = max(basis_sizes(grid))
    if not 1 <= n <= largest:
        raise ValueError(f"n_modes={n} outside the available basis size 1..{largest}")
    return GalerkinSpace(grid, n, tuple(_truncation(phi_eigs, grid, n)), tuple(_truncation(stokes.values, grid, n)))


def _project_scalar(a: np.ndarray, space: GalerkinSpace) -> np.ndarray:
    grid = space.grid
    v, _ = cosine_basis(grid)
    ah = op.fft_x(a)
    out = np.zeros_like(ah)
    w = grid.wy_node
    for m, c in enumerate(space.phi_counts):
        if c:
            vm = v[:, :c]
            out[m] = vm @ (vm.T @ (w * ah[m]))
    return op.ifft_x(out, grid.Nx)


def _project_velocity(u, space: GalerkinSpace):
    grid = space.grid
    stokes = op.stokes_basis(grid)
    uh = op.pack_u_hat(u, grid)
    out = np.zeros_like(uh)
    for m, c in enumerate(space.u_counts):
        if c:
            wm = stokes.vectors[m][:, :c]
            out[m] = wm @ (wm.conj().T @ uh[m])
    return op.unpack_u_hat(out, grid)


def galerkin_project(state: FieldState, n_modes: int) -> FieldState:
    """Orthogonal projection of ``(u, phi, mu)`` onto the truncated spaces.

    ``phi`` and ``mu`` are projected in the lumped L2 inner product, ``u`` in
    the MAC L2 inner product; the pressure is left unchanged.
    """
    space = galerkin_space(state.grid, int(n_modes))
    ux, uy = _project_velocity(state.u, space)
    return FieldState(
        state.grid,
        state.t,
        ux,
        uy,
        _project_scalar(state.phi, space),
        _project_scalar(state.mu, space),
        state.p,
    )


class GalerkinStepper:
    """Implicit-explicit Galerkin step on the truncated spaces."""

    def __init__(self, grid: Grid, params: ModelParams, scheme: SchemeConfig):
        self.grid, self.params, self.scheme = grid, params, scheme
        self.space = galerkin_space(grid, scheme.n_modes)
        self.forcing = params.forcing(grid)
        v, lam_y = cosine_basis(grid)
        dt, gamma = scheme.dt, params.gamma
        self.ch_mats = []
        for m, c in enumerate(self.space.phi_counts):
            if not c:
                self.ch_mats.append(None)
                continue
            vm = v[:, :c]
            lam = grid.sigma_x[m] + lam_y[:c]
            wall = 1.0 / dt + scheme.S_wall + params.alpha * grid.sigma_x[m] + params.beta
            btil = np.diag(lam + scheme.S_bulk) + wall * (np.outer(vm[0], vm[0]) + np.outer(vm[-1], vm[-1]))
            system = np.eye(c) + dt * gamma * lam[:, None] * btil
            self.ch_mats.append((vm, lam, btil, np.linalg.inv(system)))
        stokes = op.stokes_basis(grid)
        self.u_bases = []
        for m, c in enumerate(self.space.u_counts):
            if not c:
                self.u_bases.append(None)
                continue
            self.u_bases.append((stokes.vectors[m][:, :c], stokes.values[m][:c]))

    def project(self, state: FieldState) -> FieldState:
        return galerkin_project(state, self.scheme.n_modes)

    def step(self, state: FieldState) -> FieldState:
        grid, params, scheme = self.grid, self.params, self.scheme
        hyp = params.hypothesis
        dt, gamma = scheme.dt, params.gamma
        phi = state.phi
        w = grid.wy_node[None, :]
        adv_h = op.fft_x(w * advection(state.u, phi, grid))
        rb = -w * (hyp.f(phi) - scheme.S_bulk * phi)
        for j in (0, -1):
            rb[:, j] -= hyp.g(phi[:, j]) - scheme.S_wall * phi[:, j] - phi[:, j] / dt
        rb_h = op.fft_x(rb)
        phi_h = op.fft_x(phi * w)
        a_new = np.zeros_like(phi_h)
        b_new = np.zeros_like(phi_h)
        for m, mats in enumerate(self.ch_mats):
            if mats is None:
                continue
            vm, lam, btil, inv = mats
            a0 = vm.T @ phi_h[m]
            rhs_b = vm.T @ rb_h[m]
            a = inv @ (a0 - dt * (vm.T @ adv_h[m]) + dt * gamma * lam * rhs_b)
            b = btil @ a - rhs_b
            a_new[m] = vm @ a
            b_new[m] = vm @ b
        phi_new = op.ifft_x(a_new, grid.Nx)
        mu_new = op.ifft_x(b_new, grid.Nx)

        if scheme.pin_velocity:
            ux, uy = state.ux, state.uy
        else:
            cx, cy = convection(state.u, grid)
            fx, fy = capillary_force(phi, mu_new, params.lam, grid)
            hx, hy = self.forcing
            rhs = op.pack_u_hat((fx + hx - cx, fy + hy - cy), grid)
            uh = op.pack_u_hat(state.u, grid)
            out = np.zeros_like(uh)
            for m, basis in enumerate(self.u_bases):
                if basis is None:
                    continue
                wm, kappa = basis
                coef = (wm.conj().T @ uh[m] + dt * (wm.conj().T @ rhs[m])) / (1.0 + dt * params.nu * kappa)
                out[m] = wm @ coef
            ux, uy = op.unpack_u_hat(out, grid)
        new = FieldState(grid, state.t + dt, ux, uy, phi_new, mu_new, np.zeros(grid.cell_shape))
        check_blowup(new)
        return new


def galerkin_step(state: FieldState, params: ModelParams, scheme: SchemeConfig) -> FieldState:
    """One truncated Galerkin step (``scheme.n_modes`` sets the truncation)."""
    if scheme.mode != "spectral-galerkin":
        raise ValueError("galerkin_step requires scheme.mode = spectral-galerkin")
    from .solver import get_stepper

    return get_stepper(state.grid, params, scheme).step(state)
