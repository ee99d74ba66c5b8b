"""Multi-run experiments shared by the command line and the acceptance suite.

Each study takes a validated :class:`~chnsdbc.config.RunConfig` and returns a
plain result object with a ``to_dict`` for JSON output and an ``ok`` flag
for strict mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from . import trajectory as tr
from .config import RunConfig, initial_state, perturb
from .physics import state_energy
from .solver import run
from .state import FieldState


def _J(state: FieldState, params) -> float:
    return state_energy(state, params).total


# ---------------------------------------------------------------------------
# energy ledger


@dataclass
class EnergyStudy:
    dt: float
    max_increase: float
    increase_bound: float
    integrated_defect: float
    ledger: list = field(default_factory=list, repr=False)
    halved: "EnergyStudy | None" = None

    @property
    def defect_ratio(self) -> float:
        if self.halved is None or self.halved.integrated_defect == 0:
            return float("nan")
        return self.integrated_defect / self.halved.integrated_defect

    @property
    def ok(self) -> bool:
        good = self.max_increase <= self.increase_bound
        if self.halved is not None:
            good = good and self.halved.ok and self.defect_ratio >= 3.5
        return good

    def to_dict(self) -> dict:
        d = {
            "dt": self.dt,
            "max_increase": self.max_increase,
            "increase_bound": self.increase_bound,
            "integrated_defect": self.integrated_defect,
            "ok": self.ok,
        }
        if self.halved is not None:
            d["halved"] = self.halved.to_dict()
            d["defect_ratio"] = self.defect_ratio
        return d


def energy_study(cfg: RunConfig, halve: bool = False, initial: FieldState | None = None) -> EnergyStudy:
    """Per-step energy increase and integrated identity defect of one run.

    With ``halve`` the same run is repeated at ``dt / 2``.
    """
    params, scheme = cfg.model_params(), cfg.scheme_config()
    s0 = initial_state(cfg) if initial is None else initial
    res = run(s0, params, scheme, cfg.run.T, keep_snapshots=False)
    J0 = _J(s0, params)
    out = EnergyStudy(
        scheme.dt,
        dg.max_step_increase(res.ledger, J0),
        cfg.diagnostics.C_tol * scheme.dt**2,
        dg.integrated_defect(res.ledger, scheme.dt),
        res.ledger,
    )
    if halve:
        out.halved = energy_study(cfg.with_("scheme", dt=scheme.dt / 2), False, s0)
    return out


# ---------------------------------------------------------------------------
# absorbing set


@dataclass
class AbsorptionStudy:
    fit: dg.AbsorptionFit
    J0: list
    reference_level: float
    factors: tuple
    series: list = field(default_factory=list, repr=False)
    spread_tol: float = 0.05
    tol: float = 1e-6

    @property
    def ok(self) -> bool:
        return self.fit.plateau_spread <= self.spread_tol and self.fit.max_violation <= self.tol

    def to_dict(self) -> dict:
        return {
            "fit": self.fit.to_dict(),
            "J0": self.J0,
            "reference_level": self.reference_level,
            "factors": list(self.factors),
            "plateau_spread": self.fit.plateau_spread,
            "ok": self.ok,
        }


def scale_to_energy(state: FieldState, params, target: float) -> FieldState:
    """Rescale the velocity of ``state`` so that its energy equals ``target``."""
    from . import operators as op

    kinetic = op.l2_sq_u(state.u, state.grid)
    rest = _J(state, params) - kinetic
    if kinetic <= 0 or target < rest:
        raise ValueError(f"cannot reach J = {target:.4g} by rescaling the velocity (non-kinetic part {rest:.4g})")
    s = math.sqrt((target - rest) / kinetic)
    return state.with_(ux=s * state.ux, uy=s * state.uy)


def absorption_study(cfg: RunConfig, factors=(0.1, 10.0, 100.0), cadence: int | None = None) -> AbsorptionStudy:
    """Runs from initial energies ``factor * J_inf`` and a joint absorption fit.

    ``J_inf`` is the final energy of a reference run from the configured
    initial state.
    """
    params, scheme = cfg.model_params(), cfg.scheme_config()
    T = cfg.run.T
    cadence = cadence or cfg.run.snapshot_cadence
    base = initial_state(cfg)
    ref = run(base, params, scheme, T, ledger=False, keep_snapshots=False).final
    level = _J(ref, params)
    series, J0 = [], []
    for f in factors:
        s0 = scale_to_energy(base, params, f * level)
        J0.append(_J(s0, params))
        res = run(s0, params, scheme, T, cadence=cadence, ledger=False)
        t = np.array([s.t for s in res.snapshots])
        J = np.array([_J(s, params) for s in res.snapshots])
        series.append((t, J))
    fit = dg.fit_absorption(series, tol=cfg.diagnostics.absorption_tol)
    return AbsorptionStudy(fit, J0, level, tuple(factors), series, tol=cfg.diagnostics.absorption_tol)


# ---------------------------------------------------------------------------
# continuous dependence


def perturbed_pair(cfg: RunConfig, eps: float, stream: int = 1):
    """Snapshot sequences of the configured run and of an ``eps``-perturbed copy."""
    params, scheme = cfg.model_params(), cfg.scheme_config()
    s0 = initial_state(cfg)
    s1 = perturb(s0, eps, cfg.run.seed, params, stream, cfg.diagnostics.perturbation_modes)
    cad = cfg.run.snapshot_cadence
    r0 = run(s0, params, scheme, cfg.run.T, cadence=cad, ledger=False)
    r1 = run(s1, params, scheme, cfg.run.T, cadence=cad, ledger=False)
    return r0.snapshots, r1.snapshots


def gronwall_study(cfg: RunConfig, eps: float | None = None, C: float | None = None, stream: int = 1) -> dg.GronwallReport:
    """Continuous-dependence check; ``C`` defaults to the frozen config value.

    A frozen value of 0 means "not calibrated": the constant is then fitted
    on this very pair.
    """
    eps = cfg.diagnostics.perturbation if eps is None else eps
    if C is None:
        C = cfg.diagnostics.gronwall_C or None
    a, b = perturbed_pair(cfg, eps, stream)
    return dg.gronwall_check(a, b, cfg.model_params(), C=C)


def calibrate_gronwall(cfg: RunConfig, eps: float | None = None, stream: int = 1) -> float:
    eps = cfg.diagnostics.perturbation if eps is None else eps
    a, b = perturbed_pair(cfg, eps, stream)
    return dg.calibrate_gronwall_constant(a, b, cfg.model_params())


# ---------------------------------------------------------------------------
# time averages


@dataclass
class TimeAverageStudy:
    report: dg.TimeAveragedReport
    rtol: float = 0.1

    @property
    def summary(self) -> dict:
        return self.report.summary()

    @property
    def ok(self) -> bool:
        s = self.summary
        return all(s[k]["sup_over_median"] <= 1.0 + self.rtol for k in ("grad_u", "h2", "dual"))

    def to_dict(self) -> dict:
        return {"summary": self.summary, "rtol": self.rtol, "ok": self.ok}


def time_average_study(cfg: RunConfig, initial: FieldState | None = None) -> TimeAverageStudy:
    params, scheme = cfg.model_params(), cfg.scheme_config()
    s0 = initial_state(cfg) if initial is None else initial
    snaps = run(s0, params, scheme, cfg.run.T, cadence=cfg.run.snapshot_cadence, ledger=False).snapshots
    rep = dg.time_averaged_bounds(snaps, params, cfg.diagnostics.window, cfg.diagnostics.burn_in_frac)
    return TimeAverageStudy(rep)


# ---------------------------------------------------------------------------
# trajectory ensemble


def ensemble(cfg: RunConfig, n: int | None = None, initial: FieldState | None = None, offset: float = 0.0):
    """Attractor ensemble described by the ``trajectory`` section.

    ``offset`` delays the first segment (for held-out ensembles).
    """
    t = cfg.trajectory
    params, scheme = cfg.model_params(), cfg.scheme_config()
    s0 = initial_state(cfg) if initial is None else initial
    return tr.attractor_ensemble(s0, params, scheme, t.ell, t.K, n or t.ensemble_size, t.burn_in + offset, t.spacing)


@dataclass
class DimensionStudy:
    segments: tr.DimensionReport
    images: tr.DimensionReport
    lipschitz: tr.LipschitzReport

    @property
    def non_increase(self) -> bool:
        return self.images.slope <= self.segments.slope + (self.segments.ci_high - self.segments.slope)

    @property
    def ok(self) -> bool:
        return self.non_increase and math.isfinite(self.lipschitz.theta)

    def to_dict(self) -> dict:
        return {
            "segments": self.segments.to_dict(),
            "images": self.images.to_dict(),
            "lipschitz_theta": self.lipschitz.theta,
            "non_increase": self.non_increase,
            "ok": self.ok,
        }


@dataclass
class SmoothingStudy:
    kappa: float
    C: float
    reference: list
    held_out: list

    @property
    def worst(self) -> float:
        """Largest ``ratio / bound`` over the held-out pairs (``<= 1`` passes)."""
        return max((r.smoothing_ratio / r.bound for r in self.held_out if r.bound > 0), default=0.0)

    @property
    def ok(self) -> bool:
        return all(r.smoothing_ratio <= r.bound for r in self.held_out)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "C": self.C,
            "reference": [r.to_dict() for r in self.reference],
            "held_out": [r.to_dict() for r in self.held_out],
            "worst": self.worst,
            "ok": self.ok,
        }


# (start index, index shift) of the segment pairs in each ensemble; shifts
# span short and long separations along the attractor
PAIR_PLAN = ((0, 1), (10, 5), (20, 17), (40, 33), (60, 50), (80, 2), (100, 71), (120, 9))


def smoothing_pairs(cfg: RunConfig, segs, plan=PAIR_PLAN, stream: int = 1, n_perturbed: int = 2):
    """Pairs of ensemble segments plus segments against lifts of perturbed starts."""
    params, scheme = cfg.model_params(), cfg.scheme_config()
    n = len(segs)
    pairs = [(segs[i % n], segs[(i + k) % n]) for i, k in plan]
    d = cfg.diagnostics
    for j in range(n_perturbed):
        chi = segs[(j * n) // max(1, n_perturbed)]
        s1 = perturb(chi.snapshots[0], d.perturbation, cfg.run.seed, params, stream + j, d.perturbation_modes)
        pairs.append((chi, tr.lift_b(s1, chi.ell, params, scheme, chi.K)))
    return pairs


def smoothing_study(
    cfg: RunConfig, reference=None, held_out=None, t: float | None = None, kappa: float | None = None
) -> SmoothingStudy:
    """Calibrate ``kappa`` on reference pairs, then test ``ratio <= kappa * M`` on held-out ones.

    A given ``kappa`` (a frozen value) replaces the freshly calibrated one in
    the held-out bound.

    The held-out ensemble starts half a sample spacing later than the
    reference one and its perturbations use different RNG streams.
    """
    params, scheme = cfg.model_params(), cfg.scheme_config()
    t = cfg.trajectory.ell if t is None else t
    C = cfg.diagnostics.gronwall_C
    if reference is None:
        reference = ensemble(cfg)
    if held_out is None:
        h = cfg.trajectory.ell / cfg.trajectory.K
        held_out = ensemble(cfg, n=len(reference), offset=h * max(1, round(cfg.trajectory.spacing / h) // 2))
    ref = tr.smoothing_check(smoothing_pairs(cfg, reference, stream=1), params, scheme, t, C)
    kappa = tr.calibrate_kappa(ref) if kappa is None else kappa
    held = tr.smoothing_check(smoothing_pairs(cfg, held_out, stream=11), params, scheme, t, C, kappa)
    return SmoothingStudy(kappa, C, ref, held)


def lipschitz_pairs(segs, stride: int = 7):
    n = len(segs)
    return [(segs[i], segs[(i + stride) % n]) for i in range(n)]


def dimension_study(cfg: RunConfig, segs=None) -> DimensionStudy:
    params = cfg.model_params()
    segs = ensemble(cfg) if segs is None else segs
    d_seg = tr.fractal_dimension(segs, params)
    d_img = tr.fractal_dimension([tr.evaluate_e(1.0, c) for c in segs], params)
    lip = tr.e1_lipschitz_check(lipschitz_pairs(segs), params)
    return DimensionStudy(d_seg, d_img, lip)


__all__ = [
    "EnergyStudy",
    "energy_study",
    "AbsorptionStudy",
    "absorption_study",
    "scale_to_energy",
    "perturbed_pair",
    "gronwall_study",
    "calibrate_gronwall",
    "TimeAverageStudy",
    "time_average_study",
    "ensemble",
    "DimensionStudy",
    "dimension_study",
    "lipschitz_pairs",
    "SmoothingStudy",
    "smoothing_pairs",
    "smoothing_study",
    "PAIR_PLAN",
]
