"""Nonlinearities, growth hypotheses, chemical potential and the energy functional."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from . import operators as op
from .grid import Grid

DEFAULT_POLY = (0.0, -1.0, 0.0, 1.0)  # s^3 - s, ascending powers


def _poly(coefs: Sequence[float]) -> Polynomial:
    return Polynomial(np.asarray(coefs, dtype=float))


@dataclass(frozen=True)
class GrowthHypothesis:
    """Polynomial bulk and wall nonlinearities with their growth constants.

    Coefficients are in ascending powers: ``(0, -1, 0, 1)`` is ``s^3 - s``.
    The constants are those of the bounds

        c1 |u|^p - k1 <= f(u) u <= c2 |u|^p + k1,
        |f'(u) - f'(v)| <= C1 |u - v| (|u|^{p-3} + |v|^{p-3} + 1),
        c3 |u|^q - k2 <= g(u) u <= c4 |u|^q + k2,
        |g(u) - g(v)| <= C2 |u - v| (|u|^{q-2} + |v|^{q-2} + 1).

    The defaults are admissible for ``f = g = s^3 - s`` with ``p = q = 4``.
    """

    poly_f: tuple = DEFAULT_POLY
    poly_g: tuple = DEFAULT_POLY
    p: float = 4.0
    q: float = 4.0
    c1: float = 0.5
    c2: float = 1.0
    k1: float = 0.5
    C1: float = 3.0
    c3: float = 0.5
    c4: float = 1.0
    k2: float = 0.5
    C2: float = 1.5
    R: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "poly_f", tuple(float(c) for c in self.poly_f))
        object.__setattr__(self, "poly_g", tuple(float(c) for c in self.poly_g))
        if not self.p >= 3:
            raise ValueError("p must be >= 3")
        if not self.q > 2:
            raise ValueError("q must be > 2")
        if not self.R > 0:
            raise ValueError("sample radius R must be > 0")

    # evaluation ----------------------------------------------------------
    @cached_property
    def _polys(self) -> dict:
        f, g = _poly(self.poly_f), _poly(self.poly_g)
        return {"f": f, "g": g, "F": f.integ(lbnd=0.0), "G": g.integ(lbnd=0.0), "df": f.deriv(), "dg": g.deriv()}

    def f(self, s):
        return self._polys["f"](s)

    def g(self, s):
        return self._polys["g"](s)

    def F(self, s):
        return self._polys["F"](s)

    def G(self, s):
        return self._polys["G"](s)

    def df(self, s):
        return self._polys["df"](s)

    def dg(self, s):
        return self._polys["dg"](s)

    def lipschitz_f(self, radius: float) -> float:
        """``max |f'|`` on ``[-radius, radius]``."""
        return _max_abs_on(_poly(self.poly_f).deriv(), radius)

    def lipschitz_g(self, radius: float) -> float:
        return _max_abs_on(_poly(self.poly_g).deriv(), radius)


def _max_abs_on(poly: Polynomial, radius: float) -> float:
    pts = [-radius, radius]
    if poly.degree() > 1:
        for r in poly.deriv().roots():
            if abs(r.imag) < 1e-12 and abs(r.real) <= radius:
                pts.append(r.real)
    return float(np.max(np.abs(poly(np.array(pts)))))


def eval_f(s, hyp: GrowthHypothesis | None = None):
    return (hyp or GrowthHypothesis()).f(s)


def eval_g(s, hyp: GrowthHypothesis | None = None):
    return (hyp or GrowthHypothesis()).g(s)


def eval_F(s, hyp: GrowthHypothesis | None = None):
    return (hyp or GrowthHypothesis()).F(s)


def eval_G(s, hyp: GrowthHypothesis | None = None):
    return (hyp or GrowthHypothesis()).G(s)


# ---------------------------------------------------------------------------
# hypothesis checking


@dataclass
class HypothesisReport:
    """Outcome of a sampled hypothesis check.

    ``witnesses`` maps each condition name to ``None`` when it holds on the
    sample, or to the first violating point (a float or a pair).
    """

    satisfied: bool
    witnesses: dict
    constants: dict
    margins: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "witnesses": self.witnesses,
            "constants": self.constants,
            "margins": self.margins,
        }


def _first_violation(mask: np.ndarray, *points):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return None
    i = idx[0]
    vals = [float(np.ravel(pt)[i]) for pt in points]
    return vals[0] if len(vals) == 1 else vals


def check_hypotheses(hyp: GrowthHypothesis, R: float | None = None, N: int = 4001) -> HypothesisReport:
    """Check the four growth conditions on a uniform sample of ``[-R, R]``.

    Single-point bounds use ``N`` points; the Lipschitz-type bounds use all
    pairs of a ``ceil(sqrt(N))``-point sub-grid plus neighbouring pairs of
    the fine grid.
    """
    R = hyp.R if R is None else float(R)
    if not R > 0:
        raise ValueError("R must be > 0")
    if N < 1000:
        raise ValueError("N must be >= 1000")
    s = np.linspace(-R, R, N)
    tol = 1e-12
    m = int(math.ceil(math.sqrt(N)))
    coarse = np.linspace(-R, R, m)
    a, b = np.meshgrid(coarse, coarse, indexing="ij")
    off = ~np.eye(m, dtype=bool)
    u = np.concatenate([a[off], s[:-1]])
    v = np.concatenate([b[off], s[1:]])

    witnesses, margins = {}, {}

    def growth(fun, c_lo, c_hi, k, expo, name):
        val = fun(s) * s
        lo = c_lo * np.abs(s) ** expo - k
        hi = c_hi * np.abs(s) ** expo + k
        scale = 1.0 + np.abs(val)
        bad = (val < lo - tol * scale) | (val > hi + tol * scale)
        witnesses[name] = _first_violation(bad, s)
        margins[name] = float(min(np.min(val - lo), np.min(hi - val)))

    def lipschitz(dfun, C, expo, name):
        lhs = np.abs(dfun(u) - dfun(v))
        rhs = C * np.abs(u - v) * (np.abs(u) ** expo + np.abs(v) ** expo + 1.0)
        bad = lhs > rhs + tol * (1.0 + lhs)
        witnesses[name] = _first_violation(bad, u, v)
        margins[name] = float(np.min(rhs - lhs))

    growth(hyp.f, hyp.c1, hyp.c2, hyp.k1, hyp.p, "f_growth")
    lipschitz(hyp.df, hyp.C1, hyp.p - 3.0, "f_lipschitz")
    growth(hyp.g, hyp.c3, hyp.c4, hyp.k2, hyp.q, "g_growth")
    lipschitz(hyp.g, hyp.C2, hyp.q - 2.0, "g_lipschitz")

    constants = {k: getattr(hyp, k) for k in ("p", "q", "c1", "c2", "k1", "C1", "c3", "c4", "k2", "C2")}
    constants["R"] = R
    satisfied = all(w is None for w in witnesses.values())
    return HypothesisReport(satisfied, witnesses, constants, margins)


def _leading(poly: Polynomial) -> tuple[int, float]:
    c = poly.coef
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return 0, 0.0
    return int(nz[-1]), float(c[nz[-1]])


def fit_constants(hyp: GrowthHypothesis, R: float | None = None, N: int = 4001) -> GrowthHypothesis:
    """Fit admissible growth constants on ``[-R, R]``.

    The growth constants come from the leading coefficient of ``f(u) u``
    (half and twice it), the offsets and Lipschitz constants from sampled
    suprema with a small safety factor. Raises ``ValueError`` if the
    polynomial degree is incompatible with the stated exponent.
    """
    R = hyp.R if R is None else float(R)
    s = np.linspace(-R, R, N)
    fitted = {}
    for fun, dfun, poly, expo, names, lip_expo in (
        (hyp.f, hyp.df, hyp.poly_f, hyp.p, ("c1", "c2", "k1", "C1"), hyp.p - 3.0),
        (hyp.g, hyp.g, hyp.poly_g, hyp.q, ("c3", "c4", "k2", "C2"), hyp.q - 2.0),
    ):
        deg, lead = _leading(_poly(poly) * Polynomial([0.0, 1.0]))
        if deg != expo or deg % 2 or lead <= 0:
            raise ValueError(f"nonlinearity with coefficients {poly} is incompatible with growth exponent {expo}")
        c_lo, c_hi = 0.5 * lead, 2.0 * lead
        val = fun(s) * s
        k = max(0.0, float(np.max(c_lo * np.abs(s) ** expo - val)), float(np.max(val - c_hi * np.abs(s) ** expo)))
        m = int(math.ceil(math.sqrt(N)))
        coarse = np.linspace(-R, R, m)
        a, b = np.meshgrid(coarse, coarse, indexing="ij")
        sel = a != b
        u, v = a[sel], b[sel]
        ratio = np.abs(dfun(u) - dfun(v)) / (np.abs(u - v) * (np.abs(u) ** lip_expo + np.abs(v) ** lip_expo + 1.0))
        fitted.update(dict(zip(names, (c_lo, c_hi, k * (1 + 1e-9) + 1e-12, float(ratio.max()) * 1.01))))
    return replace(hyp, R=R, **fitted)


# ---------------------------------------------------------------------------
# model parameters and forcing


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters.

    Attributes:
        h: forcing, either a spec string (``zero``, ``uniform:A``,
            ``kolmogorov:A:n``, ``cellular:A:kx:ky``) or a MAC pair
            ``(hx, hy)`` with zero normal component on the walls.
    """

    nu: float = 1.0
    lam: float = 1.0
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    h: object = "zero"
    hypothesis: GrowthHypothesis = field(default_factory=GrowthHypothesis)

    def __post_init__(self):
        for name in ("nu", "lam", "gamma", "alpha", "beta"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"params.{name} must be > 0")
        if isinstance(self.h, str):
            parse_forcing(self.h)

    def forcing(self, grid: Grid):
        """The forcing as a MAC pair on ``grid``."""
        if isinstance(self.h, str):
            return forcing_field(self.h, grid)
        hx, hy = (np.asarray(a, dtype=float) for a in self.h)
        if hx.shape != grid.cell_shape or hy.shape != grid.node_shape:
            raise ValueError("forcing shapes do not match the grid")
        if np.any(hy[:, 0] != 0) or np.any(hy[:, -1] != 0):
            raise ValueError("forcing must have zero normal component on the walls")
        return hx, hy

    def cache_key(self) -> tuple:
        if isinstance(self.h, str):
            hkey = self.h
        else:
            hkey = tuple(np.asarray(a, dtype=float).tobytes() for a in self.h)
        return (self.nu, self.lam, self.gamma, self.alpha, self.beta, hkey, self.hypothesis)


def parse_forcing(spec: str) -> tuple[str, list[float]]:
    parts = spec.strip().split(":")
    kind, args = parts[0], parts[1:]
    try:
        nums = [float(a) for a in args]
    except ValueError:
        raise ValueError(f"bad forcing spec {spec!r}") from None
    arity = {"zero": 0, "uniform": 1, "kolmogorov": 2, "cellular": 3}
    if kind not in arity or len(nums) != arity[kind]:
        raise ValueError(f"bad forcing spec {spec!r}; expected one of zero, uniform:A, kolmogorov:A:n, cellular:A:kx:ky")
    return kind, nums


def forcing_field(spec: str, grid: Grid):
    """Materialize a forcing spec on the MAC grid (always discretely solenoidal)."""
    kind, nums = parse_forcing(spec)
    hx = np.zeros(grid.cell_shape)
    hy = np.zeros(grid.node_shape)
    if kind == "uniform":
        hx[:] = nums[0]
    elif kind == "kolmogorov":
        amp, n = nums
        hx[:] = amp * np.sin(2.0 * np.pi * n * grid.y_c / grid.Ly)[None, :]
    elif kind == "cellular":
        amp, kx, ky = nums
        # stream function at cell corners (x_f, y_n), zero on both walls
        psi = amp * np.sin(2.0 * np.pi * kx * grid.x_f / grid.Lx)[:, None] * np.sin(np.pi * ky * grid.y_n / grid.Ly)[None, :]
        hx = np.diff(psi, axis=1) / grid.dy
        hy = -(psi - np.roll(psi, 1, axis=0)) / grid.dx
        hy[:, 0] = hy[:, -1] = 0.0
    return hx, hy


# ---------------------------------------------------------------------------
# chemical potential and energy


def chemical_potential(phi: np.ndarray, grid: Grid, hyp: GrowthHypothesis | None = None) -> np.ndarray:
    """``mu = -Delta_h phi + f(phi)`` at every node."""
    hyp = hyp or GrowthHypothesis()
    return -op.laplacian(phi, grid) + hyp.f(phi)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    gradient: float
    bulk_potential: float
    wall_potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.gradient + self.bulk_potential + self.wall_potential


def energy_J(u, phi: np.ndarray, params: ModelParams, grid: Grid) -> EnergyBreakdown:
    """The Lyapunov functional with its four contributions.

    ``J = ||u||^2 + lam ||phi||^2_{H1 sigma} + 2 lam int F(phi) + 2 lam int_walls G(phi)``.
    """
    hyp = params.hypothesis
    lam = params.lam
    return EnergyBreakdown(
        kinetic=op.l2_sq_u(u, grid),
        gradient=lam * op.h1_sigma_sq(phi, grid, params.alpha, params.beta),
        bulk_potential=2.0 * lam * grid.integrate_bulk(hyp.F(phi)),
        wall_potential=2.0 * lam * grid.integrate_boundary((hyp.G(phi[:, 0]), hyp.G(phi[:, -1]))),
    )


def state_energy(state, params: ModelParams) -> EnergyBreakdown:
    return energy_J(state.u, state.phi, params, state.grid)


@dataclass(frozen=True)
class EnergyBounds:
    """Constants of the two-sided bound

    ``delta1 Q - k1 <= J <= delta2 Q + k2`` with
    ``Q = ||u||^2 + lam ||phi||^2_{H1 sigma} + ||phi||_p^p + ||phi||_{q,wall}^q``.
    """

    delta1: float
    k1: float
    delta2: float
    k2: float

    def quantity(self, u, phi, params: ModelParams, grid: Grid) -> float:
        hyp = params.hypothesis
        return (
            op.l2_sq_u(u, grid)
            + params.lam * op.h1_sigma_sq(phi, grid, params.alpha, params.beta)
            + grid.integrate_bulk(np.abs(phi) ** hyp.p)
            + grid.integrate_boundary((np.abs(phi[:, 0]) ** hyp.q, np.abs(phi[:, -1]) ** hyp.q))
        )

    def check(self, u, phi, params: ModelParams, grid: Grid) -> tuple[bool, float, float, float]:
        """Return (holds, lower bound, J, upper bound)."""
        q = self.quantity(u, phi, params, grid)
        J = energy_J(u, phi, params, grid).total
        lo = self.delta1 * q - self.k1
        hi = self.delta2 * q + self.k2
        tol = 1e-12 * max(1.0, abs(J))
        return (lo <= J + tol and J <= hi + tol), lo, J, hi


def energy_bounds(params: ModelParams, grid: Grid, R: float = 1e3, N: int = 200001) -> EnergyBounds:
    """Fit the two-sided energy bound constants from the primitives F and G.

    ``F(s) >= a |s|^p - b`` and ``F(s) <= a' |s|^p + b'`` are fitted with
    ``a = lead/2``, ``a' = 2 lead`` and sampled offsets; likewise for G.
    """
    hyp = params.hypothesis
    lam = params.lam
    s = np.linspace(-R, R, N)
    lo_terms, hi_terms = [], []
    for prim, poly, expo, measure in (
        (hyp.F, hyp.poly_f, hyp.p, grid.area),
        (hyp.G, hyp.poly_g, hyp.q, grid.boundary_length),
    ):
        deg, lead = _leading(_poly(poly).integ(lbnd=0.0))
        if deg != expo or lead <= 0:
            raise ValueError("primitive growth incompatible with the stated exponent")
        a_lo, a_hi = 0.5 * lead, 2.0 * lead
        vals = prim(s)
        b_lo = max(0.0, float(np.max(a_lo * np.abs(s) ** expo - vals)))
        b_hi = max(0.0, float(np.max(vals - a_hi * np.abs(s) ** expo)))
        lo_terms.append((2 * lam * a_lo, 2 * lam * b_lo * measure))
        hi_terms.append((2 * lam * a_hi, 2 * lam * b_hi * measure))
    delta1 = min(1.0, *(t[0] for t in lo_terms))
    delta2 = max(1.0, *(t[0] for t in hi_terms))
    k1 = sum(t[1] for t in lo_terms) * (1 + 1e-9)
    k2 = sum(t[1] for t in hi_terms) * (1 + 1e-9)
    return EnergyBounds(delta1, k1, delta2, k2)
