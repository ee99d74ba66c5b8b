"""Manufactured-solution convergence harness for the discrete operators.

Each study evaluates an operator (or solves a problem) on a ladder of grids
for an analytic field and records the discrete L2 error. Observed orders are
the pairwise ``log2`` ratios and a least-squares slope over the ladder. A
separate check confirms that x-Fourier modes are exact eigenfunctions of the
x-discretization, so errors in that direction are at roundoff once the
discrete symbol is used.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import operators as op
from .grid import Grid, build_domain

LADDER = (16, 32, 64, 128)


@dataclass
class ConvergenceStudy:
    name: str
    direction: str
    h: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def pairwise_orders(self) -> list[float]:
        e, h = self.errors, self.h
        return [math.log(e[k] / e[k + 1]) / math.log(h[k] / h[k + 1]) for k in range(len(e) - 1)]

    @property
    def fitted_order(self) -> float:
        return float(np.polyfit(np.log(self.h), np.log(self.errors), 1)[0])

    @property
    def observed_order(self) -> float:
        """The least-squares slope, or the finest pairwise order if that is lower."""
        return min(self.fitted_order, self.pairwise_orders[-1])

    def rows(self) -> list[list]:
        orders = [float("nan")] + self.pairwise_orders
        return [[self.name, self.direction, n, h, e, o] for n, h, e, o in zip(LADDER, self.h, self.errors, orders)]


def _l2_node(a: np.ndarray, grid: Grid) -> float:
    return math.sqrt(grid.integrate_bulk(a**2) / grid.area)


def _l2_wall(lo: np.ndarray, up: np.ndarray, grid: Grid) -> float:
    return math.sqrt(grid.integrate_boundary((lo**2, up**2)) / grid.boundary_length)


def _l2_u(u, grid: Grid) -> float:
    return math.sqrt(op.l2_sq_u(u, grid) / grid.area)


def _study(name: str, direction: str, err: Callable[[int], tuple[float, float]], ladder: Sequence[int]) -> ConvergenceStudy:
    s = ConvergenceStudy(name, direction)
    for n in ladder:
        h, e = err(n)
        s.h.append(h)
        s.errors.append(e)
    return s


# manufactured fields -------------------------------------------------------
# x-dependence cos(2 pi x / Lx): its second difference is exactly -sigma_1 cos,
# so substituting the discrete symbol isolates the y-discretization error.

LX, LY = 1.0, 1.0


def _grid(n: int) -> Grid:
    return build_domain(Lx=LX, Ly=LY, Nx=16, Ny=n)


def laplacian_error(n: int) -> tuple[float, float]:
    g = _grid(n)
    x, y = g.mesh("node")
    phi = np.cos(2 * np.pi * x / LX) * np.exp(np.sin(np.pi * y))
    sy = np.exp(np.sin(np.pi * y)) * (np.pi**2 * np.cos(np.pi * y) ** 2 - np.pi**2 * np.sin(np.pi * y))
    exact = np.cos(2 * np.pi * x / LX) * sy - g.sigma_x[1] * phi
    return g.dy, _l2_node(op.laplacian(phi, g) - exact, g)


def laplace_beltrami_error(n: int) -> tuple[float, float]:
    g = build_domain(Lx=LX, Ly=LY, Nx=n, Ny=8)
    x = g.x_c
    a = np.exp(np.sin(2 * np.pi * x / LX))
    k = 2 * np.pi / LX
    exact = a * (k**2 * np.cos(k * x) ** 2 - k**2 * np.sin(k * x))
    lb = op.laplace_beltrami(a, g)
    return g.dx, _l2_wall(lb - exact, lb - exact, g)


def elliptic_error(n: int, alpha: float = 1.0, beta: float = 1.0) -> tuple[float, float]:
    g = _grid(n)
    x, y = g.mesh("node")
    c = np.cos(2 * np.pi * x / LX)
    s1 = g.sigma_x[1]
    exact = c * np.cosh(y)
    j1 = (s1 - 1.0) * exact
    lo = alpha * s1 * c[:, 0] * np.cosh(0.0) - c[:, 0] * np.sinh(0.0) + beta * exact[:, 0]
    up = alpha * s1 * c[:, -1] * np.cosh(LY) + c[:, -1] * np.sinh(LY) + beta * exact[:, -1]
    sol = op.solve_coupled_elliptic(op.EllipticRHS(j1, (lo, up)), g, alpha, beta)
    return g.dy, _l2_node(sol - exact, g)


def _projection_fields(g: Grid):
    k = 2 * np.pi / LX
    xf, yc = g.mesh("ux")
    xc, yn = g.mesh("uy")
    # solenoidal part from psi = sin(pi y) cos(k x); gradient part from q = cos(pi y) cos(k x)
    wx = np.pi * np.cos(np.pi * yc) * np.cos(k * xf)
    wy = k * np.sin(np.pi * yn) * np.sin(k * xc)
    gx = -k * np.cos(np.pi * yc) * np.sin(k * xf)
    gy = -np.pi * np.sin(np.pi * yn) * np.cos(k * xc)
    wy[:, 0] = wy[:, -1] = gy[:, 0] = gy[:, -1] = 0.0
    return (wx, wy), (wx + gx, wy + gy)


def projection_error(n: int) -> tuple[float, float]:
    g = build_domain(Lx=LX, Ly=LY, Nx=n, Ny=n)
    w, v = _projection_fields(g)
    pv = op.leray_project(v, g)
    return g.dy, _l2_u((pv[0] - w[0], pv[1] - w[1]), g)


STUDIES = {
    "laplacian": (laplacian_error, "y"),
    "laplace_beltrami": (laplace_beltrami_error, "x"),
    "elliptic": (elliptic_error, "y"),
    "projection": (projection_error, "y"),
}


def run_studies(ladder: Sequence[int] = LADDER, names: Sequence[str] | None = None) -> list[ConvergenceStudy]:
    names = list(STUDIES) if names is None else list(names)
    return [_study(n, STUDIES[n][1], STUDIES[n][0], ladder) for n in names]


def fourier_symbol_check(grid: Grid | None = None, alpha: float = 1.0, beta: float = 1.0) -> dict:
    """Largest deviation of each x-operator from its discrete Fourier symbol.

    Every resolved mode ``cos(2 pi m x / Lx)`` must be mapped to
    ``-sigma_m cos`` by the wall Laplace-Beltrami operator and by the x-part
    of the bulk Laplacian; the elliptic solve of a y-independent mode must
    reproduce the closed-form Robin solution.
    """
    g = grid or build_domain(Lx=1.0, Ly=1.0, Nx=32, Ny=16)
    out = {"laplace_beltrami": 0.0, "laplacian_x": 0.0, "elliptic_x": 0.0}
    x, _ = g.mesh("node")
    for m in range(1, g.Nx // 2):
        c = np.cos(2 * np.pi * m * g.x_c / g.Lx)
        s = g.sigma_x[m]
        out["laplace_beltrami"] = max(out["laplace_beltrami"], float(np.abs(op.laplace_beltrami(c, g) + s * c).max() / s))
        phi = np.cos(2 * np.pi * m * x / g.Lx)
        out["laplacian_x"] = max(out["laplacian_x"], float(np.abs(op.laplacian(phi, g) + s * phi).max() / s))
        # phi = cos(m x) solves -Delta phi = s phi, -alpha phi_xx + beta phi = (alpha s + beta) phi
        rhs = op.EllipticRHS(s * phi, ((alpha * s + beta) * phi[:, 0], (alpha * s + beta) * phi[:, -1]))
        sol = op.solve_coupled_elliptic(rhs, g, alpha, beta)
        out["elliptic_x"] = max(out["elliptic_x"], float(np.abs(sol - phi).max()))
    return out


CSV_HEADER = ["operator", "direction", "N", "h", "error", "order"]


def convergence_table(studies: Sequence[ConvergenceStudy]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in studies:
        for row in s.rows():
            w.writerow([row[0], row[1], row[2], repr(row[3]), repr(row[4]), "" if math.isnan(row[5]) else f"{row[5]:.4f}"])
    return buf.getvalue()


__all__ = [
    "LADDER",
    "ConvergenceStudy",
    "STUDIES",
    "run_studies",
    "fourier_symbol_check",
    "convergence_table",
    "laplacian_error",
    "laplace_beltrami_error",
    "elliptic_error",
    "projection_error",
]
