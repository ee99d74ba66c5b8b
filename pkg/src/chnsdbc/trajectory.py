"""Trajectory segments, the maps e_t, b, L_t, segment metrics and dimension estimates.

A segment is a solution sampled at ``K + 1`` uniformly spaced times on a
window of length ``ell``. Time integrals over the window use trapezoid
weights, so the segment metrics are weighted Euclidean norms of a linear
embedding (see :func:`embed_state` and :func:`embed_segment`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.spatial.distance import pdist, squareform

from . import operators as op
from .diagnostics import _cumtrapz, dual_time_derivative_norms, growth_bracket, h2_proxy_sq
from .physics import ModelParams
from .solver import SchemeConfig, advance, n_steps_for, run
from .state import FieldState

FLOOR = 1e-14


# ---------------------------------------------------------------------------
# segments


def trapezoid_weights(ell: float, K: int) -> np.ndarray:
    w = np.full(K + 1, ell / K)
    w[0] = w[-1] = 0.5 * ell / K
    return w


@dataclass(frozen=True)
class TrajectorySegment:
    """A solution sampled at ``K + 1`` uniform times on ``[t0, t0 + ell]``."""

    ell: float
    snapshots: tuple

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snaps)
        if self.ell <= 0:
            raise ValueError("ell must be > 0")
        if len(snaps) < 2:
            raise ValueError("a segment needs at least two snapshots")
        grid = snaps[0].grid
        t0, h = snaps[0].t, self.ell / (len(snaps) - 1)
        m0 = snaps[0].mass
        for j, s in enumerate(snaps):
            if s.grid != grid:
                raise ValueError("snapshots do not share a grid")
            if abs(s.t - (t0 + j * h)) > 1e-9 * max(1.0, abs(t0) + self.ell):
                raise ValueError(f"snapshot {j} at t={s.t!r}, expected {t0 + j * h!r}")
            if abs(s.mass - m0) > 1e-10 * max(1.0, abs(m0)):
                raise ValueError(f"snapshot {j} changes the bulk mean")

    @property
    def K(self) -> int:
        return len(self.snapshots) - 1

    @property
    def grid(self):
        return self.snapshots[0].grid

    @property
    def t0(self) -> float:
        return self.snapshots[0].t

    @property
    def mass(self) -> float:
        return self.snapshots[0].mass

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.ell, self.K)

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def bitwise_equal(self, other: "TrajectorySegment") -> bool:
        return (
            self.ell == other.ell
            and self.K == other.K
            and all(a.bitwise_equal(b) for a, b in zip(self.snapshots, other.snapshots))
        )


def evaluate_e(t: float, chi: TrajectorySegment, interpolate: bool = False) -> FieldState:
    """The state ``chi(t * ell)`` for ``t`` in ``[0, 1]``.

    Off-grid times raise unless ``interpolate`` is set, in which case the two
    neighbouring snapshots are blended linearly.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    pos = t * chi.K
    j = int(round(pos))
    if abs(pos - j) <= 1e-12 * chi.K:
        return chi.snapshots[j]
    if not interpolate:
        raise ValueError(f"t={t} is not aligned to the K={chi.K} snapshot grid")
    lo = int(math.floor(pos))
    a, b = chi.snapshots[lo], chi.snapshots[lo + 1]
    th = pos - lo
    mix = lambda x, y: (1.0 - th) * x + th * y
    return FieldState(
        a.grid, mix(a.t, b.t), mix(a.ux, b.ux), mix(a.uy, b.uy), mix(a.phi, b.phi), mix(a.mu, b.mu), mix(a.p, b.p)
    )


def _steps_per_sample(ell: float, K: int, dt: float) -> int:
    nsteps = n_steps_for(ell, dt)
    if nsteps % K:
        raise ValueError(f"ell/dt = {nsteps} steps is not a multiple of K = {K}")
    return nsteps // K


def lift_b(initial: FieldState, ell: float, params: ModelParams, scheme: SchemeConfig, K: int = 32) -> TrajectorySegment:
    """The solution segment of length ``ell`` starting at ``initial``."""
    cadence = _steps_per_sample(ell, K, scheme.dt)
    res = run(initial, params, scheme, ell, cadence=cadence, ledger=False)
    return TrajectorySegment(ell, tuple(res.snapshots))


def advance_L(chi: TrajectorySegment, t: float, params: ModelParams, scheme: SchemeConfig) -> TrajectorySegment:
    """The segment on ``[t, t + ell]`` of the solution through ``chi``'s initial state."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return chi
    start = advance(chi.snapshots[0], params, scheme, n_steps_for(t, scheme.dt))
    return lift_b(start, chi.ell, params, scheme, chi.K)


# ---------------------------------------------------------------------------
# metrics


def _check_compatible(chi1: TrajectorySegment, chi2: TrajectorySegment) -> None:
    if chi1.grid != chi2.grid:
        raise ValueError("segments live on different grids")
    if chi1.K != chi2.K or abs(chi1.ell - chi2.ell) > 1e-12 * chi1.ell:
        raise ValueError("segments differ in ell or K")
    m1, m2 = chi1.mass, chi2.mass
    if abs(m1 - m2) > 1e-10 * max(1.0, abs(m1)):
        raise ValueError(f"mean mismatch: {m1!r} vs {m2!r}")


def _diff_state(a: FieldState, b: FieldState) -> FieldState:
    return FieldState(a.grid, a.t, a.ux - b.ux, a.uy - b.uy, a.phi - b.phi, a.mu - b.mu, a.p - b.p)


def state_sq(d: FieldState, params: ModelParams) -> float:
    """``||u||^2 + lam ||phi||^2_{H1 sigma}`` of a state (typically a difference)."""
    g = d.grid
    return op.l2_sq_u(d.u, g) + params.lam * op.h1_sigma_sq(d.phi, g, params.alpha, params.beta)


def strong_sq(d: FieldState, params: ModelParams) -> float:
    """``||grad u||^2 + lam |phi|^2_{H2}`` of a state (typically a difference)."""
    g = d.grid
    return op.grad_sq_u(d.u, g) + params.lam * h2_proxy_sq(d.phi, g, params.alpha, params.beta)


def dist_l2(chi1: TrajectorySegment, chi2: TrajectorySegment, params: ModelParams) -> float:
    """Trapezoid-in-time distance in the segment space."""
    _check_compatible(chi1, chi2)
    vals = np.array([state_sq(_diff_state(a, b), params) for a, b in zip(chi1.snapshots, chi2.snapshots)])
    return float(math.sqrt(max(chi1.weights @ vals, 0.0)))


def dist_y(chi1: TrajectorySegment, chi2: TrajectorySegment, params: ModelParams) -> float:
    """Strong segment distance including the dual norm of the time derivative."""
    _check_compatible(chi1, chi2)
    diffs = [_diff_state(a, b) for a, b in zip(chi1.snapshots, chi2.snapshots)]
    w = chi1.weights
    strong = np.array([strong_sq(d, params) for d in diffs])
    dual = dual_time_derivative_norms(diffs, params)
    return float(math.sqrt(max(w @ strong + (w @ dual) ** 2, 0.0)))


def embed_state(state: FieldState, params: ModelParams) -> np.ndarray:
    """Vector whose Euclidean norm squared equals :func:`state_sq`."""
    g = state.grid
    dx, dy = g.dx, g.dy
    lam, a, b = params.lam, params.alpha, params.beta
    phi = state.phi
    parts = [
        math.sqrt(dx * dy) * state.ux.ravel(),
        math.sqrt(dx * dy) * state.uy[:, 1:-1].ravel(),
        np.sqrt(lam * g.w_node).ravel() * op.dxp(phi, dx).ravel(),
        math.sqrt(lam * dx / dy) * np.diff(phi, axis=1).ravel(),
    ]
    for j in (0, -1):
        parts.append(math.sqrt(lam * a * dx) * op.dxp(phi[:, j], dx))
        parts.append(math.sqrt(lam * b * dx) * phi[:, j])
    return np.concatenate(parts)


def embed_segment(chi: TrajectorySegment, params: ModelParams) -> np.ndarray:
    """Vector whose Euclidean distances reproduce :func:`dist_l2`."""
    w = np.sqrt(chi.weights)
    return np.concatenate([wj * embed_state(s, params) for wj, s in zip(w, chi.snapshots)])


def pairwise_distances(points: Sequence, params: ModelParams | None = None) -> np.ndarray:
    """Condensed pairwise distances of segments, states or raw vectors."""
    return pdist(_as_points(points, params))


def _as_points(points, params) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return np.atleast_2d(points).astype(float)
    points = list(points)
    if not points:
        return np.zeros((0, 0))
    if isinstance(points[0], (TrajectorySegment, FieldState)) and params is None:
        raise ValueError("params are required to embed segments or states")
    if isinstance(points[0], TrajectorySegment):
        return np.array([embed_segment(c, params) for c in points])
    if isinstance(points[0], FieldState):
        return np.array([embed_state(s, params) for s in points])
    return np.array(points, dtype=float)


# ---------------------------------------------------------------------------
# smoothing and Lipschitz checks


@dataclass
class TrajectoryMetricReport:
    """Distances of one pair and its smoothing ratio after ``L_t``.

    ``M`` is ``exp(int_0^{t + ell} L)`` along the pair and ``bound`` is
    ``kappa * M`` when a frozen ``kappa`` was supplied.
    """

    dist_l2: float
    dist_y: float
    smoothing_ratio: float
    M: float = float("nan")
    bound: float = float("nan")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _ratio(num: float, den: float, floor: float = FLOOR) -> float:
    """``(num / den)^2`` for distances, with 0/0 below ``floor`` read as 0."""
    if num < floor and den < floor:
        return 0.0
    if den <= 0:
        return float("inf")
    return (num / den) ** 2


def _pair_run(chi: TrajectorySegment, t: float, params: ModelParams, scheme: SchemeConfig):
    cadence = _steps_per_sample(chi.ell, chi.K, scheme.dt)
    total = t + chi.ell
    res = run(chi.snapshots[0], params, scheme, total, cadence=cadence, ledger=False)
    return res.snapshots


def smoothing_check(
    pairs: Sequence[tuple[TrajectorySegment, TrajectorySegment]],
    params: ModelParams,
    scheme: SchemeConfig,
    t: float,
    C: float,
    kappa: float | None = None,
) -> list[TrajectoryMetricReport]:
    """Smoothing ratio ``|L_t chi1 - L_t chi2|_Y^2 / dist_l2(chi1, chi2)^2`` per pair.

    Args:
        t: shift, at least ``ell`` and a multiple of the segment sample spacing.
        C: frozen growth constant of ``L = C * bracket``.
        kappa: frozen calibration constant; ``bound = kappa * M`` when given.
    """
    out = []
    for chi1, chi2 in pairs:
        _check_compatible(chi1, chi2)
        if t < chi1.ell - 1e-12:
            raise ValueError("t must be >= ell")
        run1 = _pair_run(chi1, t, params, scheme)
        run2 = _pair_run(chi2, t, params, scheme)
        K = chi1.K
        L1 = TrajectorySegment(chi1.ell, tuple(run1[-(K + 1):]))
        L2 = TrajectorySegment(chi2.ell, tuple(run2[-(K + 1):]))
        times = np.array([s.t for s in run1])
        B = np.array([growth_bracket(a, b, params) for a, b in zip(run1, run2)])
        M = float(np.exp(C * _cumtrapz(times, B)[-1]))
        d0 = dist_l2(chi1, chi2, params)
        dy = dist_y(L1, L2, params)
        r = _ratio(dy, d0)
        out.append(TrajectoryMetricReport(d0, dy, r, M, float("nan") if kappa is None else kappa * M))
    return out


def calibrate_kappa(reports: Sequence[TrajectoryMetricReport]) -> float:
    """Smallest ``kappa`` with ``ratio <= kappa * M`` on a reference ensemble."""
    vals = [r.smoothing_ratio / r.M for r in reports if r.smoothing_ratio > 0]
    return float(max(vals)) if vals else 0.0


@dataclass
class LipschitzReport:
    theta: float
    ratios: np.ndarray
    n_pairs: int
    n_excluded: int

    def to_dict(self) -> dict:
        return {"theta": self.theta, "n_pairs": self.n_pairs, "n_excluded": self.n_excluded, "ratios": self.ratios.tolist()}


def e1_lipschitz_check(pairs: Sequence[tuple[TrajectorySegment, TrajectorySegment]], params: ModelParams) -> LipschitzReport:
    """Empirical Lipschitz constant of ``e_1`` (squared) over the given pairs.

    Pairs whose numerator and denominator both fall below the floor are
    excluded from the supremum.
    """
    ratios, excluded = [], 0
    for chi1, chi2 in pairs:
        d = dist_l2(chi1, chi2, params)
        e = math.sqrt(max(state_sq(_diff_state(evaluate_e(1.0, chi1), evaluate_e(1.0, chi2)), params), 0.0))
        if d < FLOOR and e < FLOOR:
            excluded += 1
            continue
        ratios.append(_ratio(e, d))
    ratios = np.array(ratios)
    theta = float(ratios.max()) if len(ratios) else 0.0
    return LipschitzReport(theta, ratios, len(ratios), excluded)


# ---------------------------------------------------------------------------
# ensembles


def attractor_ensemble(
    initial: FieldState,
    params: ModelParams,
    scheme: SchemeConfig,
    ell: float,
    K: int,
    n: int,
    burn_in: float,
    spacing: float,
) -> list[TrajectorySegment]:
    """``n`` segments sampled every ``spacing`` time units after ``burn_in``.

    Segments may overlap when ``spacing < ell``; each is cut from a single
    long run, so all share the trajectory's bulk mean.
    """
    cadence = _steps_per_sample(ell, K, scheme.dt)
    h = ell / K
    shift = int(round(spacing / h))
    if shift < 1 or abs(shift * h - spacing) > 1e-9 * spacing:
        raise ValueError("spacing must be a positive multiple of ell/K")
    state = advance(initial, params, scheme, n_steps_for(burn_in, scheme.dt)) if burn_in > 0 else initial
    total = (n - 1) * spacing + ell
    snaps = run(state, params, scheme, total, cadence=cadence, ledger=False).snapshots
    return [TrajectorySegment(ell, tuple(snaps[i * shift:i * shift + K + 1])) for i in range(n)]


# ---------------------------------------------------------------------------
# dimension estimation


class ScalingRegionError(ValueError):
    """No scaling region was found in the correlation sum."""


@dataclass
class DimensionReport:
    slope: float
    ci_low: float
    ci_high: float
    fit_range: tuple
    n_points: int
    box_slope: float = float("nan")
    log_eps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    log_C: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "fit_range": list(self.fit_range),
            "n_points": self.n_points,
            "box_slope": self.box_slope,
        }


def _smoothed_slopes(x: np.ndarray, y: np.ndarray, baseline: float) -> tuple[np.ndarray, int]:
    """Slopes between points ``w`` apart, ``w`` chosen so each spans ``baseline`` in ``x``."""
    step = float(np.mean(np.diff(x)))
    w = max(1, int(math.ceil(baseline / step - 1e-9)))
    return (y[w:] - y[:-w]) / (x[w:] - x[:-w]), w


def _scaling_region(slopes: np.ndarray, x: np.ndarray, w: int, rtol: float, min_span: float):
    """Longest run of smoothed slopes within ``rtol`` of their median.

    Returns the index range ``(i, j)`` of the underlying points, or None.
    """
    best = None
    n = len(slopes)
    for i in range(n):
        for j in range(n, i, -1):
            seg = slopes[i:j]
            med = float(np.median(seg))
            if med <= 0 or not np.all(np.abs(seg - med) <= rtol * med):
                continue
            lo, hi = i, j - 1 + w
            if x[hi] - x[lo] >= min_span and (best is None or hi - lo > best[1] - best[0]):
                best = (lo, hi)
            break
    return best


def correlation_sum(dists: np.ndarray, eps: np.ndarray) -> np.ndarray:
    d = np.sort(dists)
    return np.searchsorted(d, eps, side="left") / len(d)


def box_counting(points: np.ndarray, n_components: int = 3, n_scales: int = 12) -> float:
    """Box-counting slope on the leading principal components."""
    X = points - points.mean(axis=0)
    if not np.any(X):
        return 0.0
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    k = min(n_components, int(np.sum(s > 1e-12 * s[0])))
    Y = X @ vt[:k].T
    span = float(np.ptp(Y, axis=0).max())
    sizes = span * np.logspace(-0.3, -1.5, n_scales)
    counts = [len(np.unique(np.floor((Y - Y.min(axis=0)) / e).astype(np.int64), axis=0)) for e in sizes]
    slope = np.polyfit(np.log(1.0 / sizes), np.log(counts), 1)[0]
    return float(slope)


def fractal_dimension(
    points,
    params: ModelParams | None = None,
    min_points: int = 200,
    n_eps: int = 16,
    upper_quantile: float = 0.25,
    nn_factor: float = 4.0,
    baseline: float = math.log(2.0),
    rtol: float = 0.25,
    min_span: float = math.log(4.0),
    confidence: float = 0.95,
) -> DimensionReport:
    """Correlation-dimension estimate with a box-counting cross-check.

    The correlation sum ``C(eps)`` is evaluated on a geometric grid from
    ``nn_factor`` times the median nearest-neighbour distance (below which a
    finite sample looks discrete) up to the ``upper_quantile`` of all pair
    distances (above which the finite extent of the set bends the curve).
    Slopes are measured over a ``baseline`` in ``log eps`` to smooth the
    staircase of finite samples; the scaling region is the longest range in
    which they agree within ``rtol``, and the dimension is the least-squares
    slope there.

    Args:
        points: segments (``dist_l2`` metric), states (energy metric) or an
            array of vectors (Euclidean metric).
        min_span: minimum width of the scaling region in ``log eps``.

    Raises:
        ValueError: fewer than ``min_points`` points.
        ScalingRegionError: no range of ``eps`` with a stable slope.
    """
    X = _as_points(points, params)
    n = X.shape[0]
    if n < min_points:
        raise ValueError(f"too few points: {n} < {min_points}")
    D = squareform(pdist(X))
    d = D[np.triu_indices(n, 1)]
    scale = float(np.max(np.abs(X))) if X.size else 0.0
    floor = FLOOR * max(1.0, scale)
    if d.max() <= floor:
        return DimensionReport(0.0, 0.0, 0.0, (0.0, 0.0), n, 0.0)
    np.fill_diagonal(D, np.inf)
    nn = float(np.median(D.min(axis=1)))
    pos = np.sort(d[d > floor])
    lo = max(pos[min(len(pos) - 1, max(20, len(pos) // 1000))], nn_factor * nn)
    hi = float(np.quantile(pos, upper_quantile))
    if not hi > lo:
        raise ScalingRegionError(f"no room for a scaling fit: lower cutoff {lo:.3g} >= upper cutoff {hi:.3g}")
    eps = np.geomspace(lo, hi, n_eps)
    C = correlation_sum(d, eps)
    x, y = np.log(eps), np.log(C)
    slopes, w = _smoothed_slopes(x, y, baseline)
    region = _scaling_region(slopes, x, w, rtol, min_span)
    if region is None:
        raise ScalingRegionError("no scaling region with a stable slope")
    i, j = region
    fit = stats.linregress(x[i:j + 1], y[i:j + 1])
    tq = stats.t.ppf(0.5 + confidence / 2, df=max(1, j - i - 1))
    used = slopes[i:j - w + 1]
    half = max(tq * fit.stderr, 0.5 * float(used.max() - used.min()))
    return DimensionReport(
        float(fit.slope),
        float(fit.slope - half),
        float(fit.slope + half),
        (float(eps[i]), float(eps[j])),
        n,
        box_counting(X),
        x,
        y,
    )


__all__ = [
    "TrajectorySegment",
    "TrajectoryMetricReport",
    "LipschitzReport",
    "DimensionReport",
    "ScalingRegionError",
    "trapezoid_weights",
    "evaluate_e",
    "lift_b",
    "advance_L",
    "state_sq",
    "strong_sq",
    "dist_l2",
    "dist_y",
    "embed_state",
    "embed_segment",
    "pairwise_distances",
    "smoothing_check",
    "calibrate_kappa",
    "e1_lipschitz_check",
    "attractor_ensemble",
    "correlation_sum",
    "box_counting",
    "fractal_dimension",
]
