"""Time stepping for the coupled Cahn-Hilliard / Navier-Stokes system.

One step of the projection scheme:

1. Cahn-Hilliard with the dynamic boundary condition, first-order IMEX with
   stabilization ``S_bulk``, ``S_wall``. Velocity ``u^n`` advects ``phi^n``.
   The bulk and wall unknowns of ``(phi, mu)`` are solved together, one
   pentadiagonal system per x-wavenumber.
2. Navier-Stokes with explicit convection, the capillary force built from
   ``phi^n`` and ``mu^{n+1}``, and backward-Euler viscosity.
3. Pressure projection onto discretely solenoidal fields.

The capillary force is the exact negative adjoint of the discrete advection
term. Their contributions to the energy balance therefore cancel to roundoff.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import operators as op
from .grid import Grid
from .kernels import BandedBatch
from .physics import ModelParams
from .state import FieldState

BLOWUP = 1e10


class BlowUpError(RuntimeError):
    """Raised when a field exceeds the blow-up threshold or becomes non-finite."""


@dataclass(frozen=True)
class SchemeConfig:
    """Time discretization settings.

    Attributes:
        dt: time step.
        S_bulk, S_wall: stabilization constants; they should dominate
            ``max |f'|`` and ``max |g'|`` on the range of ``phi``.
        mode: ``projection-fd`` or ``spectral-galerkin``.
        n_modes: Galerkin truncation (spectral mode only).
        pin_velocity: keep ``u`` frozen (pure Cahn-Hilliard runs).
    """

    dt: float = 1e-3
    S_bulk: float = 2.0
    S_wall: float = 2.0
    mode: str = "projection-fd"
    n_modes: int = 0
    pin_velocity: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("scheme.dt must be > 0")
        if self.S_bulk < 0 or self.S_wall < 0:
            raise ValueError("stabilization constants must be >= 0")
        if self.mode not in ("projection-fd", "spectral-galerkin"):
            raise ValueError("scheme.mode must be projection-fd or spectral-galerkin")
        if self.mode == "spectral-galerkin" and self.n_modes < 1:
            raise ValueError("scheme.n_modes must be >= 1 in spectral-galerkin mode")

    def check_stabilization(self, params: ModelParams, radius: float) -> None:
        """Raise unless the stabilization dominates ``|f'|``, ``|g'|`` on ``[-radius, radius]``."""
        hyp = params.hypothesis
        lf, lg = hyp.lipschitz_f(radius), hyp.lipschitz_g(radius)
        if self.S_bulk < lf:
            raise ValueError(f"S_bulk={self.S_bulk} < max|f'|={lf:.4g} on [-{radius:.3g}, {radius:.3g}]")
        if self.S_wall < lg:
            raise ValueError(f"S_wall={self.S_wall} < max|g'|={lg:.4g} on [-{radius:.3g}, {radius:.3g}]")


# ---------------------------------------------------------------------------
# transport terms


def _node_face_fluxes(u, grid: Grid):
    """Volume fluxes through the edges of the node control volumes.

    Returns ``fx`` of shape (Nx, Ny+1), the flux from node (i, j) to
    (i+1, j), and ``fy`` of shape (Nx, Ny), the flux from (i, j) to (i, j+1).
    """
    ux, uy = u
    pad = np.zeros((grid.Nx, grid.Ny + 2))
    pad[:, 1:-1] = ux
    fx = 0.5 * grid.dy * (pad[:, :-1] + pad[:, 1:])
    fy = 0.5 * grid.dx * (uy[:, :-1] + uy[:, 1:])
    return fx, fy


def advection(u, phi: np.ndarray, grid: Grid) -> np.ndarray:
    """Conservative centred discretization of ``u . grad phi`` on nodes.

    The weighted sum over nodes vanishes exactly (up to roundoff), and the
    form is skew-symmetric when ``u`` is discretely solenoidal.
    """
    fx, fy = _node_face_fluxes(u, grid)
    ex = fx * 0.5 * (phi + np.roll(phi, -1, axis=0))
    ey = fy * 0.5 * (phi[:, :-1] + phi[:, 1:])
    out = ex - np.roll(ex, 1, axis=0)
    out[:, :-1] += ey
    out[:, 1:] -= ey
    return out / grid.w_node


def capillary_force(phi: np.ndarray, mu: np.ndarray, lam: float, grid: Grid):
    """Discrete ``lam * phi * grad mu`` on the MAC grid.

    Defined so that ``<u, F> = -lam * sum(w * mu * advection(u, phi))`` for
    every ``u``: the force is minus the adjoint of the advection term.
    """
    dx, dy = grid.dx, grid.dy
    ex = 0.5 * (phi + np.roll(phi, -1, axis=0)) * (np.roll(mu, -1, axis=0) - mu) / dx
    fx = lam * 0.5 * (ex[:, :-1] + ex[:, 1:])
    ey = 0.5 * (phi[:, :-1] + phi[:, 1:]) * np.diff(mu, axis=1) / dy
    fy = np.zeros(grid.node_shape)
    fy[:, 1:-1] = lam * 0.5 * (ey[:, :-1] + ey[:, 1:])
    return fx, fy


def convection(u, grid: Grid):
    """Divergence-form centred MAC discretization of ``(u . grad) u``.

    Energy conserving (``<u, N(u)> = 0``) for discretely solenoidal ``u``.
    """
    ux, uy = u
    dx, dy = grid.dx, grid.dy
    # x-momentum: x-flux at cell centres, y-flux at corners (x_f, y_n)
    uc = 0.5 * (np.roll(ux, 1, axis=0) + ux)
    fxx = uc * uc
    nx = (np.roll(fxx, -1, axis=0) - fxx) / dx
    vcorner = 0.5 * (uy + np.roll(uy, -1, axis=0))
    pad = np.zeros((grid.Nx, grid.Ny + 2))
    pad[:, 1:-1] = ux
    ucorner = 0.5 * (pad[:, :-1] + pad[:, 1:])
    fxy = vcorner * ucorner
    nx += np.diff(fxy, axis=1) / dy
    # y-momentum at interior nodes: x-flux at corners, y-flux at cell centres
    ny = np.zeros(grid.node_shape)
    fyx = ucorner * vcorner
    vc = 0.5 * (uy[:, :-1] + uy[:, 1:])
    fyy = vc * vc
    ny[:, 1:-1] = (fyx[:, 1:-1] - np.roll(fyx[:, 1:-1], 1, axis=0)) / dx + np.diff(fyy, axis=1) / dy
    return nx, ny


# ---------------------------------------------------------------------------
# the stepper


def _interleaved_ch_band(grid: Grid, params: ModelParams, scheme: SchemeConfig) -> np.ndarray:
    """Band storage (kl=ku=2) of the symmetric CH/dynamic-BC system per mode.

    Unknown ``2j`` is ``phi_j`` and ``2j+1`` is ``mu_j``. The system is
    ``[[B, -M], [-M, -dt gamma K]]`` with
    ``B = K + S M + (1/dt + S_w) M_wall + K_wall``.
    """
    n = grid.Ny + 1
    dy, dt = grid.dy, scheme.dt
    sig = grid.sigma_x[:, None]
    nm = sig.shape[0]
    wy = grid.wy_node[None, :]
    ky = np.full(n, 2.0 / dy)
    ky[0] = ky[-1] = 1.0 / dy
    kdiag = ky[None, :] + sig * wy
    koff = -1.0 / dy
    bdiag = kdiag + scheme.S_bulk * wy
    wall = 1.0 / dt + scheme.S_wall + params.alpha * grid.sigma_x + params.beta
    bdiag[:, 0] += wall
    bdiag[:, -1] += wall
    cdiag = -dt * params.gamma * kdiag
    coff = -dt * params.gamma * koff
    ab = np.zeros((nm, 5, 2 * n))
    ku = 2
    # main diagonal
    ab[:, ku, 0::2] = bdiag
    ab[:, ku, 1::2] = cdiag
    # distance 1: (2j, 2j+1) and (2j+1, 2j) hold -M_j; (2j+1, 2j+2) is zero
    ab[:, ku - 1, 1::2] = -wy  # A[2j, 2j+1] at column 2j+1
    ab[:, ku + 1, 0::2] = -wy  # A[2j+1, 2j] at column 2j
    # distance 2: phi-phi and mu-mu neighbours
    ab[:, ku - 2, 2::2] = koff  # A[2j, 2j+2]
    ab[:, ku - 2, 3::2] = coff  # A[2j+1, 2j+3]
    ab[:, ku + 2, 0:-2:2] = koff  # A[2j+2, 2j]
    ab[:, ku + 2, 1:-2:2] = coff  # A[2j+3, 2j+1]
    return ab


class Stepper:
    """Factored linear systems and forcing for one (grid, params, scheme) triple."""

    def __init__(self, grid: Grid, params: ModelParams, scheme: SchemeConfig):
        self.grid, self.params, self.scheme = grid, params, scheme
        self.forcing = params.forcing(grid)
        self.ch = BandedBatch(_interleaved_ch_band(grid, params, scheme), 2, 2)
        dt, nu, dy = scheme.dt, params.nu, grid.dy
        sig = grid.sigma_x[:, None]
        nm = sig.shape[0]
        c = dt * nu
        dxd = 1.0 + c * (sig + 2.0 / dy**2) * np.ones((1, grid.Ny))
        dxd[:, 0] += c / dy**2
        dxd[:, -1] += c / dy**2
        self.visc_x = BandedBatch(op._tridiag_band(dxd, np.full((nm, grid.Ny - 1), -c / dy**2)), 1, 1)
        dyd = 1.0 + c * (sig + 2.0 / dy**2) * np.ones((1, grid.Ny - 1))
        self.visc_y = BandedBatch(op._tridiag_band(dyd, np.full((nm, grid.Ny - 2), -c / dy**2)), 1, 1)

    # -- Cahn-Hilliard ------------------------------------------------------
    def ch_rhs(self, state: FieldState):
        grid, params, scheme = self.grid, self.params, self.scheme
        hyp = params.hypothesis
        phi = state.phi
        dt = scheme.dt
        adv = advection(state.u, phi, grid)
        wy = grid.wy_node[None, :]
        rhs_a = wy * (phi - dt * adv)
        rhs_b = -wy * (hyp.f(phi) - scheme.S_bulk * phi)
        for j in (0, -1):
            rhs_b[:, j] -= hyp.g(phi[:, j]) - scheme.S_wall * phi[:, j] - phi[:, j] / dt
        return adv, rhs_a, rhs_b

    def ch_solve(self, state: FieldState):
        """Return ``(phi^{n+1}, mu^{n+1})``; ``phi`` is rebuilt in flux form for exact mass balance."""
        grid = self.grid
        adv, rhs_a, rhs_b = self.ch_rhs(state)
        n = grid.Ny + 1
        b = np.empty((grid.Nx // 2 + 1, 2 * n), dtype=complex)
        b[:, 0::2] = op.fft_x(rhs_b)
        b[:, 1::2] = -op.fft_x(rhs_a)
        sol = self.ch.solve(b)
        mu = op.ifft_x(sol[:, 1::2], grid.Nx)
        dt, gamma = self.scheme.dt, self.params.gamma
        phi = state.phi - dt * adv + dt * gamma * op.laplacian_neumann(mu, grid)
        return phi, mu

    # -- Navier-Stokes -----------------------------------------------------
    def ns_solve(self, state: FieldState, mu_new: np.ndarray):
        grid, params, dt = self.grid, self.params, self.scheme.dt
        if self.scheme.pin_velocity:
            return state.ux, state.uy, state.p
        cx, cy = convection(state.u, grid)
        fx, fy = capillary_force(state.phi, mu_new, params.lam, grid)
        hx, hy = self.forcing
        rx = state.ux + dt * (fx + hx - cx)
        ry = state.uy + dt * (fy + hy - cy)
        ux = op.ifft_x(self.visc_x.solve(op.fft_x(rx)), grid.Nx)
        uy = np.zeros(grid.node_shape)
        uy[:, 1:-1] = op.ifft_x(self.visc_y.solve(op.fft_x(ry[:, 1:-1])), grid.Nx)
        (ux, uy), q = op.leray_project((ux, uy), grid, return_pressure=True)
        return ux, uy, q / dt

    def step(self, state: FieldState) -> FieldState:
        phi, mu = self.ch_solve(state)
        ux, uy, p = self.ns_solve(state, mu)
        new = FieldState(self.grid, state.t + self.scheme.dt, ux, uy, phi, mu, p)
        check_blowup(new)
        return new


def check_blowup(state: FieldState) -> None:
    for name in ("ux", "uy", "phi", "mu", "p"):
        a = getattr(state, name)
        if not np.all(np.isfinite(a)):
            raise BlowUpError(f"non-finite values in {name} at t={state.t:.6g}")
        peak = float(np.abs(a).max())
        if peak > BLOWUP:
            raise BlowUpError(f"{name} exceeded {BLOWUP:g} (max {peak:.3e}) at t={state.t:.6g}")


_STEPPERS: "OrderedDict[tuple, object]" = OrderedDict()


def get_stepper(grid: Grid, params: ModelParams, scheme: SchemeConfig):
    """Cached stepper for the given configuration (FD or Galerkin)."""
    key = (grid, params.cache_key(), scheme)
    st = _STEPPERS.get(key)
    if st is None:
        if scheme.mode == "spectral-galerkin":
            from .galerkin import GalerkinStepper

            st = GalerkinStepper(grid, params, scheme)
        else:
            st = Stepper(grid, params, scheme)
        _STEPPERS[key] = st
        if len(_STEPPERS) > 16:
            _STEPPERS.popitem(last=False)
    else:
        _STEPPERS.move_to_end(key)
    return st


def step(state: FieldState, params: ModelParams, scheme: SchemeConfig) -> FieldState:
    """Advance ``state`` by one time step."""
    return get_stepper(state.grid, params, scheme).step(state)


# ---------------------------------------------------------------------------
# run orchestration


@dataclass
class RunResult:
    """Snapshots at the requested cadence and one energy report per step."""

    snapshots: list = field(default_factory=list)
    ledger: list = field(default_factory=list)
    steps: int = 0
    aborted: str | None = None

    @property
    def final(self) -> FieldState:
        return self.snapshots[-1]


def n_steps_for(T: float, dt: float) -> int:
    n = T / dt
    k = int(round(n))
    if k < 1:
        raise ValueError("T must be >= dt")
    if abs(n - k) > 1e-9 * max(1.0, n):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return k


def time_after(t0: float, n: int, dt: float) -> float:
    """Time after ``n`` steps from ``t0``.

    When ``t0`` lies on the step lattice the result is ``(n0 + n) * dt``, so
    the same step count always produces the same float regardless of how
    the integration was split.
    """
    n0 = round(t0 / dt)
    if abs(n0 * dt - t0) <= 1e-12 * max(1.0, abs(t0)):
        return (n0 + n) * dt
    return t0 + n * dt


def run(
    initial: FieldState,
    params: ModelParams,
    scheme: SchemeConfig,
    T: float,
    callbacks: Iterable[Callable] = (),
    cadence: int = 1,
    ledger: bool = True,
    keep_snapshots: bool = True,
    raise_on_error: bool = True,
) -> RunResult:
    """Integrate from ``initial`` up to time ``initial.t + T``.

    Args:
        callbacks: called as ``cb(step_index, state, report)`` after every
            step (``report`` is None when the ledger is disabled).
        cadence: keep every ``cadence``-th state (the initial state is always
            kept).
        ledger: compute the per-step energy report.
        raise_on_error: re-raise solver errors after recording them in
            ``RunResult.aborted``; otherwise return the partial result.
    """
    from .diagnostics import step_report

    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    nsteps = n_steps_for(T, scheme.dt)
    stepper = get_stepper(initial.grid, params, scheme)
    result = RunResult()
    if keep_snapshots:
        result.snapshots.append(initial)
    callbacks = list(callbacks)
    state = initial
    t0 = initial.t
    for n in range(1, nsteps + 1):
        try:
            new = stepper.step(state)
        except Exception as exc:
            result.aborted = f"{type(exc).__name__}: {exc}"
            if raise_on_error:
                raise
            return result
        # exact time bookkeeping: no accumulated roundoff in t
        new = new.with_(t=time_after(t0, n, scheme.dt))
        report = step_report(state, new, params, scheme.dt) if ledger else None
        if report is not None:
            result.ledger.append(report)
        for cb in callbacks:
            cb(n, new, report)
        if keep_snapshots and n % cadence == 0:
            result.snapshots.append(new)
        state = new
        result.steps = n
    if not keep_snapshots:
        result.snapshots.append(state)
    return result


def advance(state: FieldState, params: ModelParams, scheme: SchemeConfig, nsteps: int) -> FieldState:
    """Take ``nsteps`` steps without recording anything."""
    stepper = get_stepper(state.grid, params, scheme)
    t0 = state.t
    for n in range(1, nsteps + 1):
        state = stepper.step(state).with_(t=time_after(t0, n, scheme.dt))
    return state


def stabilization_radius(state: FieldState) -> float:
    return max(1.0, float(np.abs(state.phi).max()))


def default_stabilization(params: ModelParams, radius: float) -> tuple[float, float]:
    """Smallest admissible ``(S_bulk, S_wall)`` on ``[-radius, radius]``."""
    hyp = params.hypothesis
    return hyp.lipschitz_f(radius), hyp.lipschitz_g(radius)


__all__ = [
    "BlowUpError",
    "SchemeConfig",
    "time_after",
    "Stepper",
    "RunResult",
    "advection",
    "capillary_force",
    "convection",
    "step",
    "run",
    "advance",
]
