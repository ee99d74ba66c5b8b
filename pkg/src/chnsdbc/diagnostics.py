"""Energy ledger, absorbing-set fit, continuous-dependence and time-averaged bounds."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import operators as op
from .physics import ModelParams, energy_J
from .state import FieldState

# ---------------------------------------------------------------------------
# energy ledger


@dataclass(frozen=True)
class EnergyReport:
    """One row of the energy/dissipation ledger.

    ``identity_defect`` is the defect of the exact energy identity
    ``dJ/dt + 2 (wall + chem + viscous) - 2 (h, u) = 0``; ``residual`` is the
    left-minus-right side of ``dJ/dt + wall + chem + viscous + delta J <= rho``
    once ``(delta, rho)`` have been fitted (NaN before).
    """

    t: float
    J: float
    dJ_dt: float
    wall_dissipation: float
    chem_dissipation: float
    viscous_dissipation: float
    forcing_power: float = 0.0
    identity_defect: float = 0.0
    residual: float = float("nan")

    FIELDS = (
        "t",
        "J",
        "dJ_dt",
        "wall_dissipation",
        "chem_dissipation",
        "viscous_dissipation",
        "forcing_power",
        "identity_defect",
        "residual",
    )

    def row(self) -> list[float]:
        return [getattr(self, k) for k in self.FIELDS]




def _energy(state: FieldState, params: ModelParams) -> float:
    return energy_J(state.u, state.phi, params, state.grid).total


def step_report(prev: FieldState, new: FieldState, params: ModelParams, dt: float, J_prev: float | None = None) -> EnergyReport:
    """Ledger row for the step ``prev -> new`` (backward differences)."""
    grid = new.grid
    lam = params.lam
    J1 = _energy(new, params)
    J0 = _energy(prev, params) if J_prev is None else J_prev
    dphi = (new.phi - prev.phi) / dt
    wall = lam * op.boundary_l2_sq(dphi, grid)
    chem = lam * params.gamma * op.grad_sq(new.mu, grid)
    visc = params.nu * op.grad_sq_u(new.u, grid)
    hx, hy = params.forcing(grid)
    power = op.inner_u((hx, hy), new.u, grid)
    dJ = (J1 - J0) / dt
    defect = dJ + 2.0 * (wall + chem + visc) - 2.0 * power
    return EnergyReport(new.t, J1, dJ, wall, chem, visc, power, defect)


def dissipation_ledger(snapshots: Sequence[FieldState], params: ModelParams) -> list[EnergyReport]:
    """Ledger rows between consecutive snapshots.

    Raises ``ValueError`` when the snapshot spacing is not uniform.
    """
    if len(snapshots) < 2:
        return []
    times = np.array([s.t for s in snapshots])
    dts = np.diff(times)
    if np.any(dts <= 0) or np.ptp(dts) > 1e-9 * max(dts.max(), 1e-300):
        raise ValueError("non-uniform snapshot cadence")
    dt = float(dts.mean())
    out = []
    J_prev = _energy(snapshots[0], params)
    for a, b in zip(snapshots[:-1], snapshots[1:]):
        rep = step_report(a, b, params, dt, J_prev)
        J_prev = rep.J
        out.append(rep)
    return out


def with_residual(ledger: Sequence[EnergyReport], delta: float, rho: float) -> list[EnergyReport]:
    """Fill in the residual of the dissipative inequality for given ``(delta, rho)``."""
    return [
        replace(
            r,
            residual=r.dJ_dt + r.wall_dissipation + r.chem_dissipation + r.viscous_dissipation + delta * r.J - rho,
        )
        for r in ledger
    ]


def integrated_defect(ledger: Sequence[EnergyReport], dt: float) -> float:
    """Time integral of the absolute identity defect."""
    return float(dt * np.sum(np.abs([r.identity_defect for r in ledger])))


def max_step_increase(ledger: Sequence[EnergyReport], J0: float) -> float:
    """Largest single-step increase of J (0 if J never increases)."""
    J = np.concatenate([[J0], [r.J for r in ledger]])
    return float(max(0.0, np.max(np.diff(J))))


# ---------------------------------------------------------------------------
# absorbing set


class PlateauError(ValueError):
    """A run did not reach a plateau within its horizon."""


@dataclass
class AbsorptionFit:
    """Jointly fitted decay rate and absorbing level."""

    delta: float
    rho_over_delta: float
    max_violation: float
    rho1: float
    plateaus: list = field(default_factory=list)
    plateau_reached: list = field(default_factory=list)
    delta_ls: float = float("nan")
    c_ls: float = float("nan")

    @property
    def rho(self) -> float:
        return self.delta * self.rho_over_delta

    @property
    def plateau_spread(self) -> float:
        """Relative spread (max - min) / mean of the per-run plateau levels."""
        p = np.asarray(self.plateaus)
        return float(np.ptp(p) / abs(np.mean(p))) if p.size else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rho"] = self.rho
        d["plateau_spread"] = self.plateau_spread
        return d


def detect_plateau(J: np.ndarray, frac: float = 0.1, rtol: float = 1e-3) -> tuple[bool, float]:
    """Plateau test: relative change over the last ``frac`` of the series below ``rtol``."""
    J = np.asarray(J, dtype=float)
    n = max(2, int(math.ceil(frac * len(J))))
    tail = J[-n:]
    level = float(np.mean(tail))
    change = float(np.ptp(tail)) / max(abs(level), 1e-300)
    return change < rtol, level


def _ls_for_delta(delta, series):
    """Best linear fit J_i ~ A_i exp(-delta t) + c for fixed delta; returns (sse, A, c)."""
    nrun = len(series)
    rows, rhs = [], []
    for i, (t, J) in enumerate(series):
        block = np.zeros((len(t), nrun + 1))
        block[:, i] = np.exp(-delta * (t - t[0]))
        block[:, -1] = 1.0
        rows.append(block)
        rhs.append(J)
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    scale = np.concatenate([np.full(len(J), 1.0 / max(abs(J[0]), abs(J[-1]), 1e-300)) for _, J in series])
    coef, *_ = np.linalg.lstsq(A * scale[:, None], b * scale, rcond=None)
    res = (A @ coef - b) * scale
    return float(res @ res), coef[:-1], float(coef[-1])


def _required_level(delta, series):
    return max(float(np.max(J - np.exp(-delta * (t - t[0])) * J[0])) for t, J in series)


def fit_absorption(
    series: Sequence[tuple[np.ndarray, np.ndarray]],
    tol: float = 1e-6,
    require_plateau: bool = True,
    plateau_rtol: float = 1e-3,
) -> AbsorptionFit:
    """Fit ``J_i(t) <= exp(-delta t) J_i(0) + rho/delta`` jointly over runs.

    A least-squares fit of ``J_i ~ A_i exp(-delta t) + c`` (common ``delta``
    and ``c``) gives the starting point. The rate is then lowered, if needed,
    until the bound holds everywhere with level ``max(c, plateaus)``.

    Args:
        series: ``(t, J)`` arrays, one pair per run (``t[0]`` is that run's start).
        tol: admissible violation.
        require_plateau: raise :class:`PlateauError` when a run has not
            levelled off over its last 10%.
    """
    series = [(np.asarray(t, float), np.asarray(J, float)) for t, J in series]
    if len(series) < 1:
        raise ValueError("need at least one series")
    reached, levels = zip(*(detect_plateau(J, rtol=plateau_rtol) for _, J in series))
    if require_plateau and not all(reached):
        bad = [i for i, ok in enumerate(reached) if not ok]
        raise PlateauError(f"no plateau reached for run(s) {bad}; extend the horizon")
    span = max(t[-1] - t[0] for t, _ in series)
    lo, hi = math.log(1e-3 / span), math.log(1e3 / span * 50)
    opt = minimize_scalar(lambda ld: _ls_for_delta(math.exp(ld), series)[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    delta_ls = math.exp(opt.x)
    _, _, c_ls = _ls_for_delta(delta_ls, series)
    target = max(c_ls, max(float(np.max(J[-max(2, len(J) // 10):])) for _, J in series))
    delta = delta_ls
    if _required_level(delta, series) > target:
        a, b = delta_ls * 1e-6, delta_ls
        if _required_level(a, series) <= target:
            for _ in range(200):
                mid = math.sqrt(a * b)
                if _required_level(mid, series) <= target:
                    a = mid
                else:
                    b = mid
                if b / a - 1 < 1e-12:
                    break
            delta = a
    level = max(target, _required_level(delta, series))
    viol = max(float(np.max(J - (np.exp(-delta * (t - t[0])) * J[0] + level))) for t, J in series)
    return AbsorptionFit(
        delta=delta,
        rho_over_delta=level,
        max_violation=viol,
        rho1=level,
        plateaus=list(levels),
        plateau_reached=list(reached),
        delta_ls=delta_ls,
        c_ls=c_ls,
    )


# ---------------------------------------------------------------------------
# H2 proxy, Gronwall, time averages


def h2_proxy_sq(phi: np.ndarray, grid, alpha: float, beta: float) -> float:
    """Squared second-order bulk-surface norm proxy.

    ``(||Delta phi||_{L2} + ||-alpha phi_xx + d phi/dn + beta phi||_{L2(walls)})^2``.
    """
    j1, j2 = op.elliptic_operator(phi, grid, alpha, beta)
    a = math.sqrt(grid.integrate_bulk(j1**2))
    b = math.sqrt(op.boundary_l2_sq(j2, grid))
    return (a + b) ** 2


def separation(s1: FieldState, s2: FieldState, params: ModelParams) -> float:
    """``||u1 - u2||^2 + lam ||phi1 - phi2||^2_{H1 sigma}``."""
    grid = s1.grid
    du = (s1.ux - s2.ux, s1.uy - s2.uy)
    return op.l2_sq_u(du, grid) + params.lam * op.h1_sigma_sq(s1.phi - s2.phi, grid, params.alpha, params.beta)


def _cumtrapz(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


@dataclass
class GronwallReport:
    times: np.ndarray
    D: np.ndarray
    L_series: np.ndarray
    integral: np.ndarray
    C: float
    M_T: float
    max_ratio: float
    separation_ok: bool
    slack: float

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "M_T": self.M_T,
            "max_ratio": self.max_ratio,
            "separation_ok": self.separation_ok,
            "slack": self.slack,
            "times": self.times.tolist(),
            "D": self.D.tolist(),
            "L_series": self.L_series.tolist(),
        }


def growth_bracket(s1: FieldState, s2: FieldState, params: ModelParams) -> float:
    """The bracket ``1 + |phi1|_{H2}^2 + |phi2|_{H2}^2 + |grad u2|^2 + |grad mu2|^2``."""
    grid = s1.grid
    a, b = params.alpha, params.beta
    return (
        1.0
        + h2_proxy_sq(s1.phi, grid, a, b)
        + h2_proxy_sq(s2.phi, grid, a, b)
        + op.grad_sq_u(s2.u, grid)
        + op.grad_sq(s2.mu, grid)
    )


def _check_pair(run1, run2):
    if len(run1) != len(run2):
        raise ValueError("runs have different lengths")
    for a, b in zip(run1, run2):
        if a.grid != b.grid or abs(a.t - b.t) > 1e-12 * max(1.0, abs(a.t)):
            raise ValueError("runs do not share grid and cadence")
    m1, m2 = run1[0].mass, run2[0].mass
    if abs(m1 - m2) > 1e-12 * max(1.0, abs(m1)):
        raise ValueError(f"mean mismatch: {m1!r} vs {m2!r}")


def calibrate_gronwall_constant(run1, run2, params: ModelParams, floor: float = 1e-6) -> float:
    """Smallest C with ``D(t) <= D(0) exp(C int_0^t bracket)`` on a reference pair."""
    _check_pair(run1, run2)
    t = np.array([s.t for s in run1])
    D = np.array([separation(a, b, params) for a, b in zip(run1, run2)])
    B = np.array([growth_bracket(a, b, params) for a, b in zip(run1, run2)])
    I = _cumtrapz(t, B)
    if D[0] <= 0:
        return floor
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where((I > 0) & (D > 0), np.log(D / D[0]) / I, -np.inf)
    return float(max(floor, np.max(need[1:]) if len(need) > 1 else floor))


def gronwall_check(run1, run2, params: ModelParams, C: float | None = None, slack: float = 10.0) -> GronwallReport:
    """Check ``D(t) <= D(0) exp(int_0^t L)`` with ``L = C * bracket``.

    Args:
        run1, run2: snapshot sequences of two runs on the same grid and cadence
            whose order parameters have the same bulk mean.
        C: frozen growth constant; calibrated on this pair when omitted.
        slack: allowed factor over the bound before ``separation_ok`` fails.
    """
    _check_pair(run1, run2)
    if C is None:
        C = calibrate_gronwall_constant(run1, run2, params)
    t = np.array([s.t for s in run1])
    D = np.array([separation(a, b, params) for a, b in zip(run1, run2)])
    B = np.array([growth_bracket(a, b, params) for a, b in zip(run1, run2)])
    L = C * B
    I = _cumtrapz(t, L)
    if D[0] > 0:
        ratio = D / (D[0] * np.exp(I))
        max_ratio = float(np.max(ratio))
    else:
        max_ratio = 0.0 if np.all(D == 0) else float("inf")
    return GronwallReport(t, D, L, I, float(C), float(np.exp(I[-1])), max_ratio, bool(max_ratio <= slack), slack)


@dataclass
class TimeAveragedReport:
    window_starts: np.ndarray
    grad_u: np.ndarray
    h2: np.ndarray
    dual: np.ndarray

    def summary(self) -> dict:
        out = {}
        for name in ("grad_u", "h2", "dual"):
            v = getattr(self, name)
            sup, med = float(np.max(v)), float(np.median(v))
            out[name] = {"sup": sup, "median": med, "sup_over_median": sup / med if med > 0 else (0.0 if sup == 0 else float("inf"))}
        out["rho2"] = float(np.max(self.grad_u + self.h2 + self.dual))
        out["n_windows"] = int(len(self.window_starts))
        return out


def time_derivatives(snapshots: Sequence[FieldState]):
    """Centred (one-sided at the ends) differences of ``u`` and ``phi``."""
    t = np.array([s.t for s in snapshots])
    n = len(snapshots)
    out = []
    for k in range(n):
        a, b = (k - 1, k + 1) if 0 < k < n - 1 else ((0, 1) if k == 0 else (n - 2, n - 1))
        dt = t[b] - t[a]
        sa, sb = snapshots[a], snapshots[b]
        out.append(((sb.ux - sa.ux) / dt, (sb.uy - sa.uy) / dt, (sb.phi - sa.phi) / dt))
    return out


def dual_time_derivative_norms(snapshots: Sequence[FieldState], params: ModelParams) -> np.ndarray:
    """``||u_t||_{V*} + ||phi_t||_{(H1 sigma)*}`` per snapshot from finite differences."""
    grid = snapshots[0].grid
    vals = []
    for ux_t, uy_t, phi_t in time_derivatives(snapshots):
        phi_t = phi_t - grid.mean_bulk(phi_t)
        dv = op.dual_norm_V((ux_t, uy_t), grid)
        dp = op.dual_norm_H1sigma(phi_t, (phi_t[:, 0], phi_t[:, -1]), grid, params.alpha, params.beta)
        vals.append(dv + dp)
    return np.array(vals)


def time_averaged_bounds(snapshots: Sequence[FieldState], params: ModelParams, ell: float, burn_in: float = 0.2) -> TimeAveragedReport:
    """Sliding-window integrals over windows of length ``ell`` after burn-in.

    Args:
        burn_in: fraction of the run excluded from the window starts.
    """
    t = np.array([s.t for s in snapshots])
    if len(t) < 2:
        raise ValueError("need at least two snapshots")
    dt = float(np.mean(np.diff(t)))
    k = int(round(ell / dt))
    if k < 1 or abs(k * dt - ell) > 1e-9 * ell:
        raise ValueError("ell must be a multiple of the snapshot spacing")
    start = int(math.ceil(burn_in * (len(t) - 1)))
    if start + k > len(t) - 1:
        raise ValueError("window longer than run after burn-in")
    grid = snapshots[0].grid
    gu = np.array([op.grad_sq_u(s.u, grid) for s in snapshots])
    h2 = np.array([params.lam * h2_proxy_sq(s.phi, grid, params.alpha, params.beta) for s in snapshots])
    dual = dual_time_derivative_norms(snapshots, params)
    starts = np.arange(start, len(t) - k)
    w = np.full(k + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    I_gu = np.array([w @ gu[s:s + k + 1] for s in starts])
    I_h2 = np.array([w @ h2[s:s + k + 1] for s in starts])
    I_dual = np.array([(w @ dual[s:s + k + 1]) ** 2 for s in starts])
    return TimeAveragedReport(t[starts], I_gu, I_h2, I_dual)
