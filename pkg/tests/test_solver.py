import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from chnsdbc import kernels
from chnsdbc.grid import build_domain
from chnsdbc.physics import ModelParams, state_energy
from chnsdbc.solver import (
    BlowUpError,
    SchemeConfig,
    advance,
    check_blowup,
    default_stabilization,
    n_steps_for,
    run,
    step,
    time_after,
)
from chnsdbc.state import make_state, random_state, zero_state


def test_scheme_validation():
    with pytest.raises(ValueError):
        SchemeConfig(dt=0.0)
    with pytest.raises(ValueError):
        SchemeConfig(mode="explicit")
    with pytest.raises(ValueError):
        SchemeConfig(mode="spectral-galerkin", n_modes=0)
    with pytest.raises(ValueError):
        SchemeConfig(S_bulk=-1.0)


def test_check_stabilization():
    p = ModelParams()
    SchemeConfig(S_bulk=2.0, S_wall=2.0).check_stabilization(p, 1.0)
    with pytest.raises(ValueError, match="S_bulk"):
        SchemeConfig(S_bulk=1.0).check_stabilization(p, 1.0)
    assert default_stabilization(p, 1.0) == (2.0, 2.0)


def test_step_bookkeeping():
    assert n_steps_for(1.0, 0.1) == 10
    with pytest.raises(ValueError):
        n_steps_for(1.05, 0.1)
    with pytest.raises(ValueError):
        n_steps_for(0.0, 0.1)
    assert time_after(0.3, 7, 0.1) == 10 * 0.1
    assert time_after(0.0, 3, 0.1) == 3 * 0.1


def test_zero_state_is_fixed_point(grid, scheme):
    s = zero_state(grid)
    out = step(s, ModelParams(), scheme)
    for k in ("ux", "uy", "phi", "mu"):
        assert np.all(getattr(out, k) == 0)


def test_mass_and_divergence_preserved(state, params, scheme):
    res = run(state, params, scheme, 50 * scheme.dt, cadence=10, ledger=False)
    m0 = state.mass
    for s in res.snapshots[1:]:
        assert abs(s.mass - m0) <= 1e-13 * max(1.0, abs(m0))
        assert s.max_divergence() < 1e-11
    assert res.steps == 50 and len(res.snapshots) == 6
    assert res.final.t == 50 * scheme.dt


def test_run_is_deterministic_and_split_invariant(state, params, scheme):
    a = run(state, params, scheme, 20 * scheme.dt, ledger=False).final
    b = run(state, params, scheme, 20 * scheme.dt, ledger=False).final
    mid = advance(state, params, scheme, 8)
    c = advance(mid, params, scheme, 12)
    assert a.bitwise_equal(b) and a.bitwise_equal(c)


def test_unforced_energy_decreases(grid, state, scheme):
    params = ModelParams(nu=0.7, beta=1.5)
    res = run(state, params, scheme, 40 * scheme.dt)
    J = [state_energy(state, params).total] + [r.J for r in res.ledger]
    assert np.all(np.diff(J) <= 1e-12 * abs(J[0]))


def test_pinned_velocity_is_frozen(state, params):
    scheme = SchemeConfig(dt=0.01, pin_velocity=True)
    out = run(state, params, scheme, 0.05, ledger=False).final
    assert np.array_equal(out.ux, state.ux) and np.array_equal(out.uy, state.uy)


def test_callbacks_and_abort(state, params, scheme):
    seen = []
    run(state, params, scheme, 3 * scheme.dt, callbacks=[lambda n, s, r: seen.append((n, r is not None))])
    assert seen == [(1, True), (2, True), (3, True)]

    def boom(n, s, r):
        raise RuntimeError("stop")

    with pytest.raises(RuntimeError):
        run(state, params, scheme, 2 * scheme.dt, callbacks=[boom])


def test_blowup_detection(grid):
    s = zero_state(grid)
    bad = s.with_(phi=np.full(grid.node_shape, np.nan))
    with pytest.raises(BlowUpError):
        check_blowup(bad)
    res = run(bad, ModelParams(), SchemeConfig(dt=0.01), 0.02, raise_on_error=False)
    assert res.aborted and "BlowUpError" in res.aborted


def test_backends_agree(state, params, scheme):
    if "cython" not in kernels.available_backends():
        pytest.skip("compiled backend not built")
    from chnsdbc.kernels import BandedBatch

    rng = np.random.default_rng(0)
    A = rng.normal(size=(5, 9, 9)) * np.tri(9, 9, 2) * np.tri(9, 9, 2).T + 10 * np.eye(9)
    ab = kernels.dense_to_band(A, 2, 2)
    rhs = rng.normal(size=(5, 9))
    x_py = BandedBatch(ab, 2, 2, backend="python").solve(rhs)
    x_cy = BandedBatch(ab, 2, 2, backend="cython").solve(rhs)
    np.testing.assert_allclose(x_py, x_cy, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(np.einsum("bij,bj->bi", A, x_py), rhs, atol=1e-10)


def test_threads_do_not_change_results(state, params, scheme):
    a = run(state, params, scheme, 5 * scheme.dt, ledger=False).final
    try:
        kernels.set_threads(4)
        b = run(state, params, scheme, 5 * scheme.dt, ledger=False).final
    finally:
        kernels.set_threads(1)
    assert a.bitwise_equal(b)
    with pytest.raises(ValueError):
        kernels.set_threads(0)


def test_make_state_projects_velocity(grid):
    rng = np.random.default_rng(1)
    s = make_state(grid, np.zeros(grid.node_shape), u=(rng.normal(size=grid.cell_shape), rng.normal(size=grid.node_shape)))
    assert s.max_divergence() < 1e-11
    with pytest.raises(ValueError):
        make_state(grid, np.zeros((3, 3)))


@settings(max_examples=10, deadline=None)
@given(seed=hst.integers(0, 1000), mean=hst.floats(-0.5, 0.5))
def test_mass_conservation_property(seed, mean):
    g = build_domain(Lx=6.0, Ly=4.0, Nx=12, Ny=10)
    s = random_state(g, np.random.default_rng(seed), amp_u=0.5, amp_phi=0.6, mean_phi=mean)
    out = run(s, ModelParams(h="kolmogorov:0.5:1"), SchemeConfig(dt=0.01), 0.1, ledger=False).final
    assert abs(out.mass - s.mass) <= 1e-13
    assert out.max_divergence() <= 1e-11
