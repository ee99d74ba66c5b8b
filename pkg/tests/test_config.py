import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from chnsdbc.config import (
    ConfigError,
    RunConfig,
    initial_state,
    make_rng,
    parse_config,
    parse_config_text,
    perturb,
    serialize,
)

SMALL = """
[domain]
Lx = 4.0
Ly = 2.0
Nx = 16
Ny = 8

[scheme]
dt = 0.01

[run]
T = 0.1
seed = 3
"""


def test_shipped_configs_parse(configs):
    for path in sorted(configs.glob("*.ini")):
        cfg = parse_config(path)
        assert parse_config_text(serialize(cfg)) == cfg


def test_unknown_key_reports_line():
    text = "[params]\nnu = 1.0\nlamda = 2.0\n"
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text, "x.ini")
    assert exc.value.line == 3 and "params.lamda" in str(exc.value)
    assert str(exc.value).startswith("x.ini:3:")


def test_invalid_value_names_the_key():
    with pytest.raises(ConfigError, match="params.nu must be > 0") as exc:
        parse_config_text("[params]\n\nnu = -1\n", "y.ini")
    assert exc.value.line == 3


@pytest.mark.parametrize(
    "text, what",
    [
        ("nu = 1\n", "outside any"),
        ("[params]\nnu = 1\nnu = 2\n", "duplicate key"),
        ("[bogus]\na = 1\n", "unknown section"),
        ("[domain]\nNx = 1.5\n", "type mismatch"),
        ("[run]\nT = 0.105\n[scheme]\ndt = 0.01\n", "multiple"),
        ("[run]\ninit = sphere\n", "run.init"),
    ],
)
def test_parse_errors(text, what):
    with pytest.raises(ConfigError, match=what):
        parse_config_text(text)


def test_lambda_alias_round_trip():
    cfg = parse_config_text("[params]\nlambda = 2.5\n")
    assert cfg.params.lam == 2.5
    assert "lambda = 2.5" in serialize(cfg)
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("[params]\nlam = 2.5\n")


def test_digest_is_canonical():
    a = parse_config_text(SMALL)
    b = parse_config_text(SMALL.replace("Lx = 4.0", "Lx = 4  # same value"))
    assert a.digest() == b.digest() and len(a.digest()) == 64
    assert a.digest() != a.with_("run", seed=4).digest()


def test_make_rng_streams():
    a = make_rng(7, 0).normal(size=5)
    np.testing.assert_array_equal(a, make_rng(7, 0).normal(size=5))
    assert not np.array_equal(a, make_rng(7, 1).normal(size=5))
    assert not np.array_equal(a, make_rng(8, 0).normal(size=5))


def test_initial_state_kinds():
    cfg = parse_config_text(SMALL)
    s = initial_state(cfg)
    assert s.max_divergence() < 1e-11
    assert initial_state(cfg).bitwise_equal(s)
    z = initial_state(cfg.with_("run", init="zero"))
    assert np.all(z.phi == 0)
    d = initial_state(cfg.with_("run", init="drop", init_radius=0.5))
    # tanh profile centred in the box: maximal at the centre, decaying outwards
    assert d.phi[:, cfg.domain.Ny // 2].max() == d.phi.max() > 0 > d.phi[0, 0]
    np.testing.assert_allclose(d.phi, d.phi[::-1], atol=1e-14)
    np.testing.assert_allclose(d.phi, d.phi[:, ::-1], atol=1e-14)


@settings(max_examples=10, deadline=None)
@given(seed=hst.integers(0, 2**32), eps=hst.floats(1e-8, 1e-2))
def test_perturb_keeps_mean_and_distance(seed, eps):
    from chnsdbc.diagnostics import separation

    cfg = parse_config_text(SMALL)
    params = cfg.model_params()
    s = initial_state(cfg)
    p = perturb(s, eps, seed, params)
    assert abs(p.mass - s.mass) <= 1e-14
    assert np.sqrt(separation(p, s, params)) == pytest.approx(eps, rel=1e-6)
    assert p.max_divergence() < 1e-11


def test_default_config_is_valid():
    cfg = RunConfig()
    assert parse_config_text(serialize(cfg)) == cfg
