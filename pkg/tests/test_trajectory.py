import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from chnsdbc import operators as op
from chnsdbc import trajectory as tr
from chnsdbc.grid import build_domain
from chnsdbc.physics import ModelParams
from chnsdbc.solver import SchemeConfig, run
from chnsdbc.state import make_state, random_state, zero_state

ELL, K = 0.08, 8
SCHEME = SchemeConfig(dt=0.01)


def _frozen_segment(state, ell=ELL, K=K):
    h = ell / K
    return tr.TrajectorySegment(ell, tuple(state.with_(t=j * h) for j in range(K + 1)))


@pytest.fixture
def seg(state, params):
    return tr.lift_b(state, ELL, params, SCHEME, K)


def test_trapezoid_weights():
    w = tr.trapezoid_weights(2.0, 4)
    np.testing.assert_allclose(w, [0.25, 0.5, 0.5, 0.5, 0.25])
    assert w.sum() == pytest.approx(2.0)


def test_evaluate_e(seg):
    assert seg.K == K and seg.ell == ELL
    assert tr.evaluate_e(0.0, seg) is seg.snapshots[0]
    assert tr.evaluate_e(1.0, seg) is seg.snapshots[-1]
    assert tr.evaluate_e(0.5, seg) is seg.snapshots[K // 2]
    with pytest.raises(ValueError):
        tr.evaluate_e(0.3, seg)
    mid = tr.evaluate_e(0.0625, seg, interpolate=True)
    np.testing.assert_allclose(mid.phi, 0.5 * (seg.snapshots[0].phi + seg.snapshots[1].phi))
    with pytest.raises(ValueError):
        tr.evaluate_e(1.5, seg)


def test_lift_b_matches_direct_run(state, params, seg):
    assert seg.snapshots[0] is state
    direct = run(state, params, SCHEME, ELL, ledger=False).final
    assert tr.evaluate_e(1.0, seg).bitwise_equal(direct)


def test_zero_segment_stays_zero(grid):
    z = tr.lift_b(zero_state(grid), ELL, ModelParams(), SCHEME, K)
    assert all(np.all(s.phi == 0) and np.all(s.ux == 0) for s in z.snapshots)
    moved = tr.advance_L(z, 0.05, ModelParams(), SCHEME)
    assert all(np.all(s.phi == 0) for s in moved.snapshots)


def test_advance_L_identity_and_semigroup(seg, params):
    assert tr.advance_L(seg, 0.0, params, SCHEME) is seg
    s = t = 5 * SCHEME.dt
    two = tr.advance_L(tr.advance_L(seg, s, params, SCHEME), t, params, SCHEME)
    one = tr.advance_L(seg, s + t, params, SCHEME)
    assert two.bitwise_equal(one)
    with pytest.raises(ValueError):
        tr.advance_L(seg, -1.0, params, SCHEME)


def test_segment_validation(state):
    with pytest.raises(ValueError):
        tr.TrajectorySegment(ELL, (state,))
    with pytest.raises(ValueError):
        tr.TrajectorySegment(ELL, (state, state))  # wrong times
    with pytest.raises(ValueError):
        tr.TrajectorySegment(-1.0, (state, state.with_(t=1.0)))
    with pytest.raises(ValueError, match="mean"):
        tr.TrajectorySegment(ELL, (state, state.with_(t=ELL, phi=state.phi + 1)))
    with pytest.raises(ValueError):
        tr._steps_per_sample(0.08, 3, 0.01)


def test_frozen_velocity_difference_oracle(grid, params):
    rng = np.random.default_rng(5)
    u = op.leray_project((rng.normal(size=grid.cell_shape), rng.normal(size=grid.node_shape) * 0), grid)
    phi = np.full(grid.node_shape, 0.2)
    a = _frozen_segment(make_state(grid, phi))
    b = _frozen_segment(make_state(grid, phi, u=u))
    D = op.l2_sq_u(b.snapshots[0].u, grid)
    assert tr.dist_l2(a, b, params) ** 2 == pytest.approx(ELL * D, rel=1e-12)
    lip = tr.e1_lipschitz_check([(a, b)], params)
    assert lip.theta == pytest.approx(1.0 / ELL, rel=1e-12)
    # time-constant difference: no time derivative contribution
    assert tr.dist_y(a, b, params) ** 2 == pytest.approx(ELL * op.grad_sq_u(b.snapshots[0].u, grid), rel=1e-10)


def test_identical_pairs(seg, params):
    assert tr.dist_l2(seg, seg, params) == 0.0 and tr.dist_y(seg, seg, params) == 0.0
    lip = tr.e1_lipschitz_check([(seg, seg)], params)
    assert lip.n_excluded == 1 and lip.theta == 0.0
    rep = tr.smoothing_check([(seg, seg)], params, SCHEME, ELL, C=1.0, kappa=2.0)[0]
    assert rep.smoothing_ratio == 0.0 and rep.bound == pytest.approx(2.0 * rep.M)


def test_smoothing_ratio_symmetric_and_finite(state, params):
    s2 = make_state(state.grid, state.phi, u=(state.ux * (1 + 1e-8), state.uy * (1 + 1e-8)))
    a = tr.lift_b(state, ELL, params, SCHEME, K)
    b = tr.lift_b(s2, ELL, params, SCHEME, K)
    r1 = tr.smoothing_check([(a, b)], params, SCHEME, ELL, C=0.1)[0]
    r2 = tr.smoothing_check([(b, a)], params, SCHEME, ELL, C=0.1)[0]
    assert math.isfinite(r1.smoothing_ratio) and r1.smoothing_ratio > 0
    assert r1.smoothing_ratio == pytest.approx(r2.smoothing_ratio, rel=1e-10)
    assert r1.M >= 1.0
    kappa = tr.calibrate_kappa([r1])
    assert r1.smoothing_ratio <= kappa * r1.M * (1 + 1e-12)
    with pytest.raises(ValueError):
        tr.smoothing_check([(a, b)], params, SCHEME, ELL / 2, C=0.1)


def test_incompatible_segments(seg, params, state):
    shifted = tr.TrajectorySegment(ELL, tuple(s.with_(phi=s.phi + 0.1) for s in seg.snapshots))
    with pytest.raises(ValueError, match="mean mismatch"):
        tr.dist_l2(seg, shifted, params)
    other = tr.lift_b(state, 2 * ELL, params, SCHEME, K)
    with pytest.raises(ValueError):
        tr.dist_y(seg, other, params)


def test_embeddings_reproduce_norms(seg, params):
    a, b = seg.snapshots[0], seg.snapshots[-1]
    d = tr._diff_state(a, b)
    ea, eb = tr.embed_state(a, params), tr.embed_state(b, params)
    assert np.sum((ea - eb) ** 2) == pytest.approx(tr.state_sq(d, params), rel=1e-12)
    other = tr.lift_b(b.with_(t=0.0), ELL, params, SCHEME, K)
    diff = tr.embed_segment(seg, params) - tr.embed_segment(other, params)
    assert math.sqrt(np.sum(diff**2)) == pytest.approx(tr.dist_l2(seg, other, params), rel=1e-12)


def test_attractor_ensemble_layout(state, params):
    segs = tr.attractor_ensemble(state, params, SCHEME, ELL, K, n=4, burn_in=0.1, spacing=0.02)
    assert len(segs) == 4
    for i, s in enumerate(segs):
        assert s.t0 == pytest.approx(0.1 + 0.02 * i)
    assert segs[0].snapshots[2] is segs[1].snapshots[0]
    with pytest.raises(ValueError):
        tr.attractor_ensemble(state, params, SCHEME, ELL, K, n=2, burn_in=0.0, spacing=0.015)


def _circle(n, seed=0, noise=0.0):
    th = np.random.default_rng(seed).uniform(0, 2 * np.pi, n)
    pts = np.c_[np.cos(th), np.sin(th), np.zeros(n)]
    return pts + noise * np.random.default_rng(seed + 1).normal(size=pts.shape)


def test_fractal_dimension_calibration():
    rep = tr.fractal_dimension(_circle(300))
    assert abs(rep.slope - 1.0) <= 0.3
    assert rep.ci_low <= rep.slope <= rep.ci_high
    assert rep.n_points == 300 and rep.fit_range[0] < rep.fit_range[1]
    assert abs(rep.box_slope - 1.0) <= 0.3
    d = rep.to_dict()
    assert set(d) >= {"slope", "ci_low", "ci_high", "fit_range", "n_points"}


def test_fractal_dimension_degenerate_cases():
    assert tr.fractal_dimension(np.ones((250, 4))).slope == 0.0
    with pytest.raises(ValueError, match="too few"):
        tr.fractal_dimension(_circle(50))
    # isotropic noise in many dimensions has no resolvable scaling range
    with pytest.raises(tr.ScalingRegionError):
        tr.fractal_dimension(np.random.default_rng(0).normal(size=(200, 60)))


def test_fractal_dimension_non_increase_under_lipschitz_map():
    pts = _circle(400, seed=3)
    img = pts @ np.diag([0.5, 0.25, 0.0])  # a Lipschitz (linear, contracting) map
    src, dst = tr.fractal_dimension(pts), tr.fractal_dimension(img)
    assert dst.slope <= src.ci_high


def test_pairwise_distances_match_metric(seg, params, state):
    other = tr.lift_b(random_state(state.grid, np.random.default_rng(8), 0.3, 0.5, 0.1), ELL, params, SCHEME, K)
    d = tr.pairwise_distances([seg, other], params)
    assert d[0] == pytest.approx(tr.dist_l2(seg, other, params), rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(seeds=hst.lists(hst.integers(0, 10_000), min_size=3, max_size=3, unique=True))
def test_metric_axioms_property(seeds):
    g = build_domain(Lx=6.0, Ly=4.0, Nx=12, Ny=8)
    params = ModelParams(alpha=0.5, beta=2.0)
    segs = []
    for s in seeds:
        st = random_state(g, np.random.default_rng(s), amp_u=0.5, amp_phi=0.5, mean_phi=0.05)
        segs.append(tr.lift_b(st, 0.04, params, SCHEME, 4))
    a, b, c = segs
    for d in (tr.dist_l2, tr.dist_y):
        ab, ba, bc, ac = d(a, b, params), d(b, a, params), d(b, c, params), d(a, c, params)
        assert ab == ba
        assert ac <= ab + bc + 1e-12 * max(1.0, ab + bc)
        assert d(a, a, params) == 0.0 and ab > 0
