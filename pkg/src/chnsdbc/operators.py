"""Discrete differential operators, elliptic solvers and norms.

All x-derivatives are second-order periodic differences, so every operator is
diagonalized exactly by the real FFT along x; linear solves reduce to one
banded system in y per wavenumber. Node-layout scalars (``phi``, ``mu``) use
the lumped-mass Galerkin discretization of the bulk-surface bilinear form

    a(phi, psi) = int grad phi . grad psi + int_walls (alpha phi' psi' + beta phi psi),

so the wall rows carry the dynamic boundary condition without ghost values.
Velocities live on the MAC grid and are passed around as ``(ux, uy)`` tuples.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .grid import Grid
from .kernels import BandedBatch

# ---------------------------------------------------------------------------
# FFT helpers


def fft_x(a: np.ndarray) -> np.ndarray:
    return np.fft.rfft(a, axis=0)


def ifft_x(a_hat: np.ndarray, nx: int) -> np.ndarray:
    return np.fft.irfft(a_hat, n=nx, axis=0)


def _tridiag_band(diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    """Band storage (kl=ku=1) for a batch of symmetric tridiagonal matrices.

    Args:
        diag: shape (batch, n).
        off: shape (batch, n - 1), the sub/super-diagonal.
    """
    batch, n = diag.shape
    ab = np.zeros((batch, 3, n))
    ab[:, 0, 1:] = off
    ab[:, 1, :] = diag
    ab[:, 2, :-1] = off
    return ab


# ---------------------------------------------------------------------------
# scalar operators on the node layout


def d2x(a: np.ndarray, dx: float) -> np.ndarray:
    """Periodic second difference along axis 0."""
    return (np.roll(a, -1, axis=0) - 2.0 * a + np.roll(a, 1, axis=0)) / dx**2


def dxp(a: np.ndarray, dx: float) -> np.ndarray:
    """Forward periodic difference along axis 0."""
    return (np.roll(a, -1, axis=0) - a) / dx


def laplace_beltrami(phi_gamma: np.ndarray, grid: Grid) -> np.ndarray:
    """Laplace-Beltrami operator on one wall (a periodic 1D second difference)."""
    phi_gamma = np.asarray(phi_gamma, dtype=float)
    if phi_gamma.shape != (grid.Nx,):
        raise ValueError(f"wall array shape {phi_gamma.shape} != ({grid.Nx},)")
    return d2x(phi_gamma, grid.dx)


def _check_node(a: np.ndarray, grid: Grid, name: str = "field") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != grid.node_shape:
        raise ValueError(f"{name} shape {a.shape} != node layout {grid.node_shape}")
    return a


def d2y_onesided(phi: np.ndarray, dy: float) -> np.ndarray:
    """Second y-derivative at node rows, one-sided second order at the walls."""
    out = np.empty_like(phi)
    out[:, 1:-1] = (phi[:, 2:] - 2.0 * phi[:, 1:-1] + phi[:, :-2]) / dy**2
    out[:, 0] = (2.0 * phi[:, 0] - 5.0 * phi[:, 1] + 4.0 * phi[:, 2] - phi[:, 3]) / dy**2
    out[:, -1] = (2.0 * phi[:, -1] - 5.0 * phi[:, -2] + 4.0 * phi[:, -3] - phi[:, -4]) / dy**2
    return out


def laplacian(phi: np.ndarray, grid: Grid) -> np.ndarray:
    """Pointwise Laplacian at every node, second order including wall rows."""
    phi = _check_node(phi, grid)
    return d2x(phi, grid.dx) + d2y_onesided(phi, grid.dy)


def laplacian_neumann(phi: np.ndarray, grid: Grid) -> np.ndarray:
    """Zero-flux (lumped) Laplacian on nodes: ``-M^{-1} K phi``.

    It is the flux-form Laplacian used for conservative updates. Its weighted
    sum vanishes identically, which is what makes mass conservation exact.
    """
    phi = _check_node(phi, grid)
    dy = grid.dy
    flux = (phi[:, 1:] - phi[:, :-1]) / dy
    out = d2x(phi, grid.dx)
    out[:, 1:-1] += (flux[:, 1:] - flux[:, :-1]) / dy
    out[:, 0] += flux[:, 0] / (0.5 * dy)
    out[:, -1] -= flux[:, -1] / (0.5 * dy)
    return out


def normal_derivative(phi: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Outward normal derivative on the (lower, upper) walls, second order."""
    phi = _check_node(phi, grid)
    dy = grid.dy
    phiyy = d2y_onesided(phi, dy)
    lower = (phi[:, 0] - phi[:, 1]) / dy + 0.5 * dy * phiyy[:, 0]
    upper = (phi[:, -1] - phi[:, -2]) / dy + 0.5 * dy * phiyy[:, -1]
    return lower, upper


def elliptic_operator(phi: np.ndarray, grid: Grid, alpha: float, beta: float):
    """The bulk-surface operator pair ``(j1, j2)`` of a node field.

    ``j1 = -Delta phi`` at every node and
    ``j2 = -alpha * phi_xx + d phi/dn + beta * phi`` on each wall.
    """
    phi = _check_node(phi, grid)
    j1 = -laplacian(phi, grid)
    dn_lo, dn_up = normal_derivative(phi, grid)
    j2_lo = -alpha * d2x(phi[:, 0], grid.dx) + dn_lo + beta * phi[:, 0]
    j2_up = -alpha * d2x(phi[:, -1], grid.dx) + dn_up + beta * phi[:, -1]
    return j1, (j2_lo, j2_up)


# ---------------------------------------------------------------------------
# bilinear forms and norms for node scalars


def grad_sq(phi: np.ndarray, grid: Grid) -> float:
    """Bulk Dirichlet energy ``int |grad phi|^2`` of the lumped P1 form."""
    return grad_form(phi, phi, grid)


def grad_form(phi: np.ndarray, psi: np.ndarray, grid: Grid) -> float:
    phi = _check_node(phi, grid)
    psi = _check_node(psi, grid)
    dx, dy = grid.dx, grid.dy
    gx = np.sum(grid.w_node * dxp(phi, dx) * dxp(psi, dx))
    gy = dx * dy * np.sum(np.diff(phi, axis=1) * np.diff(psi, axis=1)) / dy**2
    return float(gx + gy)


def _walls(a) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a) if not isinstance(a, tuple) else a
    if isinstance(a, tuple):
        return a
    return a[:, 0], a[:, -1]


def boundary_grad_sq(phi, grid: Grid) -> float:
    """``int_walls |d phi / dx|^2`` on both walls."""
    lo, up = _walls(phi)
    return float(grid.dx * (np.sum(dxp(lo, grid.dx) ** 2) + np.sum(dxp(up, grid.dx) ** 2)))


def boundary_l2_sq(phi, grid: Grid) -> float:
    lo, up = _walls(phi)
    return float(grid.dx * (np.sum(lo**2) + np.sum(up**2)))


def apply_boundary_operator_A(phi: np.ndarray, psi: np.ndarray, grid: Grid, alpha: float, beta: float) -> float:
    """The bilinear form of the bulk-surface operator.

    Returns ``int grad phi . grad psi + int_walls (alpha phi_x psi_x + beta phi psi)``.
    """
    phi = _check_node(phi, grid, "phi")
    psi = _check_node(psi, grid, "psi")
    dx = grid.dx
    total = grad_form(phi, psi, grid)
    for j in (0, -1):
        total += dx * float(np.sum(alpha * dxp(phi[:, j], dx) * dxp(psi[:, j], dx) + beta * phi[:, j] * psi[:, j]))
    return total


def h1_sigma_sq(phi: np.ndarray, grid: Grid, alpha: float, beta: float) -> float:
    """Squared bulk-surface energy norm."""
    return grad_sq(phi, grid) + alpha * boundary_grad_sq(phi, grid) + beta * boundary_l2_sq(phi, grid)


# ---------------------------------------------------------------------------
# elliptic solves


@lru_cache(maxsize=64)
def _elliptic_factor(grid: Grid, alpha: float, beta: float) -> BandedBatch:
    n = grid.Ny + 1
    dy = grid.dy
    sig = grid.sigma_x[:, None]
    wy = grid.wy_node[None, :]
    ky = np.full(n, 2.0 / dy)
    ky[0] = ky[-1] = 1.0 / dy
    diag = ky[None, :] + sig * wy
    diag[:, 0] += alpha * grid.sigma_x + beta
    diag[:, -1] += alpha * grid.sigma_x + beta
    off = np.full((len(grid.sigma_x), n - 1), -1.0 / dy)
    return BandedBatch(_tridiag_band(diag, off), 1, 1)


@dataclass(frozen=True)
class EllipticRHS:
    """Right-hand side of the bulk-surface elliptic problem.

    Attributes:
        j1: node-layout bulk data.
        j2: ``(lower, upper)`` wall data.
    """

    j1: np.ndarray
    j2: tuple[np.ndarray, np.ndarray]

    def validate(self, grid: Grid) -> None:
        _check_node(self.j1, grid, "j1")
        if len(self.j2) != 2 or any(np.shape(w) != (grid.Nx,) for w in self.j2):
            raise ValueError("j2 must be a (lower, upper) pair of wall arrays")


def elliptic_residual(phi: np.ndarray, rhs: EllipticRHS, grid: Grid, alpha: float, beta: float):
    """Residuals of the discrete elliptic equations.

    Returns the interior residual of ``-Delta_h phi = j1`` and the wall
    residual of the boundary rows, which combine the half-cell bulk balance
    with ``-alpha phi_xx + d phi/dn + beta phi = j2``.
    """
    dx, dy = grid.dx, grid.dy
    r1 = -laplacian_neumann(phi, grid)[:, 1:-1] - rhs.j1[:, 1:-1]
    r2 = []
    for j, nb, w in ((0, 1, 0), (-1, -2, 1)):
        row = (
            0.5 * dy * (-d2x(phi[:, j], dx) - rhs.j1[:, j])
            + (phi[:, j] - phi[:, nb]) / dy
            - alpha * d2x(phi[:, j], dx)
            + beta * phi[:, j]
            - rhs.j2[w]
        )
        r2.append(row)
    return r1, tuple(r2)


def solve_coupled_elliptic(rhs: EllipticRHS, grid: Grid, alpha: float, beta: float) -> np.ndarray:
    """Solve ``-Delta phi = j1`` in the bulk with the Robin-Laplace-Beltrami wall law.

    The wall law is ``-alpha phi_xx + d phi/dn + beta phi = j2``. The
    discretization is the lumped Galerkin form, symmetric positive definite
    for ``alpha, beta > 0``.

    Returns:
        The node-layout solution; its wall rows are the boundary values.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be > 0")
    rhs.validate(grid)
    factor = _elliptic_factor(grid, float(alpha), float(beta))
    b = fft_x(np.asarray(rhs.j1, dtype=float) * grid.wy_node[None, :])
    b[:, 0] += fft_x(np.asarray(rhs.j2[0], dtype=float))
    b[:, -1] += fft_x(np.asarray(rhs.j2[1], dtype=float))
    phi = ifft_x(factor.solve(b), grid.Nx)
    r1, r2 = elliptic_residual(phi, rhs, grid, alpha, beta)
    scale = 1.0 + max(np.abs(rhs.j1).max(), np.abs(rhs.j2[0]).max(), np.abs(rhs.j2[1]).max())
    res = max(np.abs(r1).max(initial=0.0), np.abs(r2[0]).max(), np.abs(r2[1]).max())
    if not np.isfinite(res) or res > 1e-8 * scale:
        raise np.linalg.LinAlgError(f"elliptic solve did not converge: residual {res:.3e}")
    return phi


@lru_cache(maxsize=64)
def _neumann_factor(grid: Grid, layout: str) -> BandedBatch:
    dy = grid.dy
    sig = grid.sigma_x[:, None]
    if layout == "node":
        n = grid.Ny + 1
        ky = np.full(n, 2.0 / dy)
        ky[0] = ky[-1] = 1.0 / dy
        diag = ky[None, :] + sig * grid.wy_node[None, :]
        off = np.full((len(grid.sigma_x), n - 1), -1.0 / dy)
    else:
        n = grid.Ny
        ty = np.full(n, 2.0 / dy**2)
        ty[0] = ty[-1] = 1.0 / dy**2
        diag = ty[None, :] + sig
        off = np.full((len(grid.sigma_x), n - 1), -1.0 / dy**2)
    # the k=0 block is singular (constants): pin its first unknown
    diag[0, 0] = 1.0
    off[0, 0] = 0.0
    return BandedBatch(_tridiag_band(diag, off), 1, 1)


def _layout(field: np.ndarray, grid: Grid) -> str:
    if field.shape == grid.node_shape:
        return "node"
    if field.shape == grid.cell_shape:
        return "cell"
    raise ValueError(f"field shape {field.shape} matches neither node nor cell layout")


def neumann_laplacian(q: np.ndarray, grid: Grid) -> np.ndarray:
    """Zero-flux Laplacian for node or cell-layout scalars."""
    q = np.asarray(q, dtype=float)
    if _layout(q, grid) == "node":
        return laplacian_neumann(q, grid)
    dy = grid.dy
    out = d2x(q, grid.dx)
    flux = np.diff(q, axis=1) / dy
    out[:, :-1] += flux / dy
    out[:, 1:] -= flux / dy
    return out


def neumann_inverse(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Mean-zero solution of ``-Delta u = f`` with zero normal flux.

    Accepts node or cell-layout input. Raises ``ValueError`` unless the bulk
    integral of ``f`` vanishes.
    """
    f = np.asarray(f, dtype=float)
    layout = _layout(f, grid)
    if abs(grid.integrate_bulk(f)) > 1e-10 * max(1.0, grid.integrate_bulk(np.abs(f))):
        raise ValueError("mean-zero required")
    factor = _neumann_factor(grid, layout)
    wy = grid.wy_node if layout == "node" else np.ones(grid.Ny)
    b = fft_x(f * wy[None, :])
    b[0, 0] = 0.0
    u = ifft_x(factor.solve(b), grid.Nx)
    return u - grid.mean_bulk(u)


# ---------------------------------------------------------------------------
# MAC velocity operators


def _check_u(u, grid: Grid):
    ux, uy = u
    ux = np.asarray(ux, dtype=float)
    uy = np.asarray(uy, dtype=float)
    if ux.shape != grid.cell_shape or uy.shape != grid.node_shape:
        raise ValueError(
            f"velocity shapes {ux.shape}, {uy.shape} != {grid.cell_shape}, {grid.node_shape}"
        )
    return ux, uy


def divergence(u, grid: Grid) -> np.ndarray:
    """Cell-centred discrete divergence of a MAC field."""
    ux, uy = _check_u(u, grid)
    return (ux - np.roll(ux, 1, axis=0)) / grid.dx + np.diff(uy, axis=1) / grid.dy


def gradient(q: np.ndarray, grid: Grid):
    """MAC gradient of a cell scalar; the wall normal component is zero."""
    q = np.asarray(q, dtype=float)
    if q.shape != grid.cell_shape:
        raise ValueError("gradient expects a cell-layout scalar")
    gx = dxp(q, grid.dx)
    gy = np.zeros(grid.node_shape)
    gy[:, 1:-1] = np.diff(q, axis=1) / grid.dy
    return gx, gy


def inner_u(u, v, grid: Grid) -> float:
    """L2 inner product of MAC fields."""
    ux, uy = _check_u(u, grid)
    vx, vy = _check_u(v, grid)
    return float(grid.dx * grid.dy * (np.sum(ux * vx) + np.sum(uy[:, 1:-1] * vy[:, 1:-1])))


def l2_sq_u(u, grid: Grid) -> float:
    return inner_u(u, u, grid)


def vector_laplacian(u, grid: Grid):
    """MAC Laplacian with no-slip walls (odd ghost for ux, Dirichlet uy)."""
    ux, uy = _check_u(u, grid)
    dx, dy = grid.dx, grid.dy
    lx = d2x(ux, dx)
    pad = np.concatenate([-ux[:, :1], ux, -ux[:, -1:]], axis=1)
    lx += (pad[:, 2:] - 2.0 * ux + pad[:, :-2]) / dy**2
    ly = np.zeros_like(uy)
    ly[:, 1:-1] = d2x(uy[:, 1:-1], dx) + (uy[:, 2:] - 2.0 * uy[:, 1:-1] + uy[:, :-2]) / dy**2
    return lx, ly


def grad_sq_u(u, grid: Grid) -> float:
    """``||grad u||^2`` as a sum of squared differences (equals ``-<Delta_h u, u>``)."""
    ux, uy = _check_u(u, grid)
    dx, dy = grid.dx, grid.dy
    # the odd ghost makes the wall contribution 2 u^2 / dy^2 per wall row
    ex = np.sum(dxp(ux, dx) ** 2) + np.sum((np.diff(ux, axis=1) / dy) ** 2)
    ex += 2.0 * np.sum(ux[:, 0] ** 2 + ux[:, -1] ** 2) / dy**2
    ey = np.sum(dxp(uy[:, 1:-1], dx) ** 2) + np.sum((np.diff(uy, axis=1) / dy) ** 2)
    return float(dx * dy * (ex + ey))


@lru_cache(maxsize=64)
def _pressure_factor(grid: Grid) -> BandedBatch:
    return _neumann_factor(grid, "cell")


def pressure_poisson(rhs: np.ndarray, grid: Grid) -> np.ndarray:
    """Solve ``D G q = rhs`` for a cell scalar with zero bulk mean."""
    b = -fft_x(rhs)
    b[0, 0] = 0.0
    q = ifft_x(_pressure_factor(grid).solve(b), grid.Nx)
    return q - q.mean()


def leray_project(v, grid: Grid, return_pressure: bool = False):
    """Discrete Leray projection ``P = I - G (D G)^{-1} D``.

    Args:
        v: MAC field with zero normal component on the walls.
        return_pressure: also return the potential ``q`` with ``v = Pv + G q``.
    """
    vx, vy = _check_u(v, grid)
    if np.any(vy[:, 0] != 0.0) or np.any(vy[:, -1] != 0.0):
        raise ValueError("normal velocity must vanish on the walls")
    q = pressure_poisson(divergence((vx, vy), grid), grid)
    gx, gy = gradient(q, grid)
    out = (vx - gx, vy - gy)
    return (out, q) if return_pressure else out


# ---------------------------------------------------------------------------
# Stokes eigenbasis per wavenumber


@dataclass(frozen=True)
class StokesBasis:
    """Discrete Stokes eigenpairs per rfft mode.

    Per-mode unknowns are packed as ``[ux (Ny), uy interior (Ny - 1)]``.

    Attributes:
        values: list of eigenvalue arrays, ascending, one per mode.
        vectors: list of complex matrices whose orthonormal columns are the
            eigenvectors of the corresponding mode.
    """

    values: tuple
    vectors: tuple


def _stokes_mode_matrices(grid: Grid, m: int):
    ny, dx, dy = grid.Ny, grid.dx, grid.dy
    theta = 2.0 * np.pi * m / grid.Nx
    sig = grid.sigma_x[m]
    tg = np.diag(np.full(ny, 2.0 / dy**2)) - np.diag(np.full(ny - 1, 1.0 / dy**2), 1) - np.diag(
        np.full(ny - 1, 1.0 / dy**2), -1
    )
    tg[0, 0] = tg[-1, -1] = 3.0 / dy**2
    td = np.diag(np.full(ny - 1, 2.0 / dy**2)) - np.diag(np.full(ny - 2, 1.0 / dy**2), 1) - np.diag(
        np.full(ny - 2, 1.0 / dy**2), -1
    )
    a = scipy.linalg.block_diag(tg + sig * np.eye(ny), td + sig * np.eye(ny - 1)).astype(complex)
    dsym = (1.0 - np.exp(-1j * theta)) / dx
    if m == grid.Nx // 2:
        dsym = complex(dsym.real, 0.0)
    dmat = np.zeros((ny, 2 * ny - 1), dtype=complex)
    dmat[:, :ny] = dsym * np.eye(ny)
    for j in range(1, ny):
        dmat[j - 1, ny + j - 1] += 1.0 / dy
        dmat[j, ny + j - 1] -= 1.0 / dy
    return a, dmat


@lru_cache(maxsize=16)
def stokes_basis(grid: Grid) -> StokesBasis:
    """Eigenpairs of the MAC Stokes operator restricted to discretely solenoidal fields."""
    values, vectors = [], []
    for m in range(grid.Nx // 2 + 1):
        a, dmat = _stokes_mode_matrices(grid, m)
        z = scipy.linalg.null_space(dmat)
        ared = z.conj().T @ a @ z
        ared = 0.5 * (ared + ared.conj().T)
        lam, y = np.linalg.eigh(ared)
        w = z @ y
        w.setflags(write=False)
        lam.setflags(write=False)
        values.append(lam)
        vectors.append(w)
    return StokesBasis(tuple(values), tuple(vectors))


def pack_u_hat(u, grid: Grid) -> np.ndarray:
    ux, uy = _check_u(u, grid)
    return np.concatenate([fft_x(ux), fft_x(uy[:, 1:-1])], axis=1)


def unpack_u_hat(c: np.ndarray, grid: Grid):
    ny = grid.Ny
    ux = ifft_x(c[:, :ny], grid.Nx)
    uy = np.zeros(grid.node_shape)
    uy[:, 1:-1] = ifft_x(c[:, ny:], grid.Nx)
    return ux, uy


def stokes_mode_field(grid: Grid, m: int, index: int, imag: bool = False):
    """Real MAC field of one Stokes eigenvector (for tests and bases)."""
    basis = stokes_basis(grid)
    c = np.zeros((grid.Nx // 2 + 1, 2 * grid.Ny - 1), dtype=complex)
    c[m] = basis.vectors[m][:, index] * (1j if imag else 1.0)
    return unpack_u_hat(c, grid)


def stokes_inverse(f, grid: Grid):
    """Solve the discrete Stokes problem ``A w = P f`` on solenoidal fields."""
    basis = stokes_basis(grid)
    fh = pack_u_hat(f, grid)
    wh = np.zeros_like(fh)
    for m, (lam, vec) in enumerate(zip(basis.values, basis.vectors)):
        wh[m] = vec @ ((vec.conj().T @ fh[m]) / lam)
    return unpack_u_hat(wh, grid)


# ---------------------------------------------------------------------------
# dual norms and norm reports


def dual_norm_V(f, grid: Grid) -> float:
    """Norm of the functional ``v -> <f, v>`` on solenoidal fields, dual to ``||grad v||``."""
    w = stokes_inverse(f, grid)
    return float(np.sqrt(max(inner_u(f, w, grid), 0.0)))


def dual_norm_H1sigma(j1: np.ndarray, j2, grid: Grid, alpha: float, beta: float) -> float:
    """Dual norm of ``psi -> int j1 psi + int_walls j2 psi`` in the energy norm.

    The bulk part must have zero mean.
    """
    j1 = _check_node(j1, grid, "j1")
    if abs(grid.integrate_bulk(j1)) > 1e-10 * max(1.0, grid.integrate_bulk(np.abs(j1))):
        raise ValueError("mean-zero required")
    rhs = EllipticRHS(j1, (np.asarray(j2[0], float), np.asarray(j2[1], float)))
    z = solve_coupled_elliptic(rhs, grid, alpha, beta)
    val = grid.integrate_bulk(j1 * z) + grid.dx * float(np.sum(rhs.j2[0] * z[:, 0]) + np.sum(rhs.j2[1] * z[:, -1]))
    return float(np.sqrt(max(val, 0.0)))


@dataclass(frozen=True)
class NormReport:
    l2_bulk: float
    l2_boundary: float
    h1_sigma: float
    grad_l2: float
    dual_v: float
    dual_h1sigma: float


def norms(phi: np.ndarray, grid: Grid, alpha: float, beta: float, u=None) -> NormReport:
    """Norm report for an order parameter and optionally a velocity.

    ``dual_v`` is the V* norm of ``u`` viewed as a functional through the L2
    pairing; ``dual_h1sigma`` is the dual norm of the mean-free part of
    ``phi`` paired over bulk and walls.
    """
    phi = _check_node(phi, grid)
    g2 = grad_sq(phi, grid)
    mean = grid.mean_bulk(phi)
    centred = phi - mean
    return NormReport(
        l2_bulk=float(np.sqrt(grid.integrate_bulk(phi**2))),
        l2_boundary=float(np.sqrt(boundary_l2_sq(phi, grid))),
        h1_sigma=float(np.sqrt(h1_sigma_sq(phi, grid, alpha, beta))),
        grad_l2=float(np.sqrt(g2)),
        dual_v=0.0 if u is None else dual_norm_V(u, grid),
        dual_h1sigma=dual_norm_H1sigma(centred, (centred[:, 0], centred[:, -1]), grid, alpha, beta),
    )
