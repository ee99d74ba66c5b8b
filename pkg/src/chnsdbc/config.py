"""Run configuration: strict INI parsing, validation, serialization and RNG.

A config file has the sections ``domain``, ``params``, ``nonlinearity``,
``scheme``, ``run``, ``trajectory`` and ``diagnostics``. Every key is
optional (defaults are filled in) but unknown sections or keys are errors,
as are type mismatches and constraint violations. Error messages name the
file and line of the offending entry.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .grid import ChannelDomain, Grid, build_domain
from .physics import GrowthHypothesis, ModelParams, parse_forcing
from .solver import SchemeConfig


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based source line if known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.message, self.path, self.line = message, path, line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(where + message)


# ---------------------------------------------------------------------------
# sections


@dataclass(frozen=True)
class DomainSection:
    Lx: float = 1.0
    Ly: float = 1.0
    Nx: int = 32
    Ny: int = 32


@dataclass(frozen=True)
class ParamsSection:
    nu: float = 1.0
    lam: float = 1.0
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    h: str = "zero"


@dataclass(frozen=True)
class NonlinearitySection:
    poly_f: tuple = (0.0, -1.0, 0.0, 1.0)
    poly_g: tuple = (0.0, -1.0, 0.0, 1.0)
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


@dataclass(frozen=True)
class SchemeSection:
    dt: float = 1e-3
    S_bulk: float = 2.0
    S_wall: float = 2.0
    mode: str = "projection-fd"
    n_modes: int = 0
    pin_velocity: bool = False


@dataclass(frozen=True)
class RunSection:
    T: float = 1.0
    snapshot_cadence: int = 100
    seed: int = 0
    init: str = "random"
    init_amp_u: float = 0.1
    init_amp_phi: float = 0.5
    init_mean_phi: float = 0.0
    init_modes: int = 4
    init_radius: float = 0.25


@dataclass(frozen=True)
class TrajectorySection:
    ell: float = 1.0
    K: int = 32
    ensemble_size: int = 200
    burn_in: float = 10.0
    spacing: float = 0.25


@dataclass(frozen=True)
class DiagnosticsSection:
    C_tol: float = 1.0
    gronwall_C: float = 0.0
    kappa: float = 0.0
    perturbation: float = 1e-8
    perturbation_modes: int = 4
    window: float = 1.0
    burn_in_frac: float = 0.2
    absorption_tol: float = 1e-6


SECTIONS = {
    "domain": DomainSection,
    "params": ParamsSection,
    "nonlinearity": NonlinearitySection,
    "scheme": SchemeSection,
    "run": RunSection,
    "trajectory": TrajectorySection,
    "diagnostics": DiagnosticsSection,
}

# file key -> attribute name where they differ
ALIASES = {("params", "lambda"): "lam"}
REVERSE_ALIASES = {(s, a): k for (s, k), a in ALIASES.items()}


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSection = field(default_factory=DomainSection)
    params: ParamsSection = field(default_factory=ParamsSection)
    nonlinearity: NonlinearitySection = field(default_factory=NonlinearitySection)
    scheme: SchemeSection = field(default_factory=SchemeSection)
    run: RunSection = field(default_factory=RunSection)
    trajectory: TrajectorySection = field(default_factory=TrajectorySection)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)

    # model objects --------------------------------------------------------
    def grid(self) -> Grid:
        return build_domain(ChannelDomain(**asdict(self.domain)))

    def hypothesis(self) -> GrowthHypothesis:
        return GrowthHypothesis(**asdict(self.nonlinearity))

    def model_params(self) -> ModelParams:
        return ModelParams(hypothesis=self.hypothesis(), **asdict(self.params))

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(**asdict(self.scheme))

    def with_(self, section: str, **changes) -> "RunConfig":
        return replace(self, **{section: replace(getattr(self, section), **changes)})

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical serialization."""
        return hashlib.sha256(serialize(self).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# value conversion


def _convert(raw: str, ftype: str):
    raw = raw.strip()
    if ftype == "float":
        return float(raw)
    if ftype == "int":
        if not re.fullmatch(r"[+-]?\d+", raw):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(raw)
    if ftype == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if ftype == "tuple":
        return tuple(float(x) for x in raw.replace(",", " ").split())
    return raw


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _type_name(section_cls, name: str) -> str:
    value = {f.name: f for f in fields(section_cls)}[name].default
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, tuple):
        return "tuple"
    return "str"


# ---------------------------------------------------------------------------
# parsing


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    index, section = {}, None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            index.setdefault((section, None), no)
            continue
        key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
        index.setdefault((section, key), no)
    return index


def parse_config_text(text: str, path: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.section}.{exc.option}", path, exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", path, exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("entry outside any [section]", path, exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", path, line) from None
    lines = _line_index(text)
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", path, lines.get((section, None)))
        cls = SECTIONS[section]
        names = {f.name for f in fields(cls)}
        kwargs = {}
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            name = ALIASES.get((section, key), key)
            if name not in names or (section, name) in REVERSE_ALIASES and key != REVERSE_ALIASES[(section, name)]:
                raise ConfigError(f"unknown key {section}.{key}", path, line)
            try:
                kwargs[name] = _convert(raw, _type_name(cls, name))
            except ValueError as exc:
                raise ConfigError(f"type mismatch for {section}.{key}: {exc}", path, line) from None
        values[section] = (cls(**kwargs), {ALIASES.get((section, k), k): lines.get((section, k)) for k, _ in parser.items(section)})
    cfg = RunConfig(**{s: v[0] for s, v in values.items()})
    validate(cfg, path, {s: v[1] for s, v in values.items()})
    return cfg


def parse_config(path) -> RunConfig:
    """Read and validate a config file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ConfigError("file is not valid UTF-8", str(p)) from None
    return parse_config_text(text, str(p))


# ---------------------------------------------------------------------------
# validation


_KEY_IN_MESSAGE = re.compile(r"\b(Lx|Ly|Nx|Ny|nu|lam|gamma|alpha|beta|dt|S_bulk|S_wall|mode|n_modes|p|q|R)\b")


def _fail(msg: str, section: str, key: str | None, path: str, lines: dict):
    line = lines.get(section, {}).get(key) if key else None
    raise ConfigError(msg, path, line)


def validate(cfg: RunConfig, path: str = "<config>", lines: dict | None = None) -> None:
    """Check every section against the preconditions of the module that owns it."""
    lines = lines or {}

    def guard(section: str, fn, key_hint=None):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            msg = str(exc)
            key = key_hint
            if key is None:
                m = re.search(r"params\.(\w+)", msg) or _KEY_IN_MESSAGE.search(msg)
                key = m.group(1) if m else None
            _fail(msg if msg.startswith(section) or "params." in msg else f"{section}: {msg}", section, key, path, lines)

    grid = guard("domain", cfg.grid)
    guard("nonlinearity", cfg.hypothesis)
    guard("params", lambda: parse_forcing(cfg.params.h), "h")
    params = guard("params", cfg.model_params)
    scheme = guard("scheme", cfg.scheme_config)
    if scheme.mode == "spectral-galerkin":
        from .galerkin import basis_sizes

        if scheme.n_modes > max(basis_sizes(grid)):
            _fail(f"scheme.n_modes={scheme.n_modes} exceeds the available basis size {max(basis_sizes(grid))}",
                  "scheme", "n_modes", path, lines)
    r = cfg.run
    if not r.T > 0:
        _fail("run.T must be > 0", "run", "T", path, lines)
    guard("run", lambda: _check_steps(r.T, scheme.dt), "T")
    if r.snapshot_cadence < 1:
        _fail("run.snapshot_cadence must be >= 1", "run", "snapshot_cadence", path, lines)
    if not 0 <= r.seed < 2**64:
        _fail("run.seed must be a 64-bit unsigned integer", "run", "seed", path, lines)
    if r.init not in INIT_KINDS:
        _fail(f"run.init must be one of {', '.join(INIT_KINDS)}", "run", "init", path, lines)
    if r.init_modes < 1:
        _fail("run.init_modes must be >= 1", "run", "init_modes", path, lines)
    if r.init_amp_u < 0 or r.init_amp_phi < 0:
        _fail("run.init amplitudes must be >= 0", "run", "init_amp_u" if r.init_amp_u < 0 else "init_amp_phi", path, lines)
    if not r.init_radius > 0:
        _fail("run.init_radius must be > 0", "run", "init_radius", path, lines)
    t = cfg.trajectory
    if not t.ell > 0:
        _fail("trajectory.ell must be > 0", "trajectory", "ell", path, lines)
    if t.K < 1:
        _fail("trajectory.K must be >= 1", "trajectory", "K", path, lines)
    if t.ensemble_size < 1:
        _fail("trajectory.ensemble_size must be >= 1", "trajectory", "ensemble_size", path, lines)
    if t.burn_in < 0:
        _fail("trajectory.burn_in must be >= 0", "trajectory", "burn_in", path, lines)
    if not t.spacing > 0:
        _fail("trajectory.spacing must be > 0", "trajectory", "spacing", path, lines)
    d = cfg.diagnostics
    for key in ("C_tol", "gronwall_C", "kappa"):
        if getattr(d, key) < 0:
            _fail(f"diagnostics.{key} must be >= 0", "diagnostics", key, path, lines)
    if not d.perturbation > 0:
        _fail("diagnostics.perturbation must be > 0", "diagnostics", "perturbation", path, lines)
    if d.perturbation_modes < 1:
        _fail("diagnostics.perturbation_modes must be >= 1", "diagnostics", "perturbation_modes", path, lines)
    if not d.window > 0:
        _fail("diagnostics.window must be > 0", "diagnostics", "window", path, lines)
    if not 0 <= d.burn_in_frac < 1:
        _fail("diagnostics.burn_in_frac must lie in [0, 1)", "diagnostics", "burn_in_frac", path, lines)
    del params


def _check_steps(T: float, dt: float) -> None:
    from .solver import n_steps_for

    n_steps_for(T, dt)


# ---------------------------------------------------------------------------
# serialization


def serialize(cfg: RunConfig) -> str:
    """Canonical INI text; parsing it yields an equal config."""
    out = []
    for section in SECTIONS:
        out.append(f"[{section}]")
        for name, value in asdict(getattr(cfg, section)).items():
            key = REVERSE_ALIASES.get((section, name), name)
            out.append(f"{key} = {_format(value)}")
        out.append("")
    return "\n".join(out)


def config_json(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# random numbers and initial data

INIT_KINDS = ("random", "drop", "zero")


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for stream ``stream`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(stream) << 64)))


def initial_state(cfg: RunConfig, stream: int = 0):
    """Initial data described by the ``run`` section."""
    from .state import make_state, random_state, zero_state

    grid = cfg.grid()
    r = cfg.run
    hyp = cfg.hypothesis()
    if r.init == "zero":
        return zero_state(grid)
    if r.init == "random":
        return random_state(grid, make_rng(r.seed, stream), r.init_amp_u, r.init_amp_phi, r.init_mean_phi, r.init_modes, hyp)
    x, y = grid.mesh("node")
    dist = np.hypot(x - 0.5 * grid.Lx, y - 0.5 * grid.Ly)
    phi = np.tanh((r.init_radius - dist) / np.sqrt(2.0))
    return make_state(grid, phi, hyp=hyp)


def perturb(state, eps: float, seed: int, params: ModelParams, stream: int = 1, modes: int = 4):
    """A copy of ``state`` at distance ``eps`` with the same bulk mean of ``phi``.

    The perturbation is a random mean-free ``phi`` increment plus a
    solenoidal velocity increment, both built from the lowest ``modes``
    Fourier/cosine modes and scaled so that
    ``||du||^2 + lam ||dphi||^2_{H1 sigma} = eps^2``.
    """
    from .diagnostics import separation
    from .state import random_state

    grid = state.grid
    d = random_state(grid, make_rng(seed, stream), amp_u=1.0, amp_phi=1.0, mean_phi=0.0, modes=modes, hyp=params.hypothesis)
    base = state.with_(ux=state.ux + d.ux, uy=state.uy + d.uy, phi=state.phi + d.phi)
    scale = eps / np.sqrt(separation(base, state, params))
    phi = state.phi + scale * d.phi
    phi = phi - (grid.mean_bulk(phi) - state.mass)
    from .physics import chemical_potential

    return state.with_(
        ux=state.ux + scale * d.ux,
        uy=state.uy + scale * d.uy,
        phi=phi,
        mu=chemical_potential(phi, grid, params.hypothesis),
    )


__all__ = [
    "ConfigError",
    "RunConfig",
    "SECTIONS",
    "parse_config",
    "parse_config_text",
    "validate",
    "serialize",
    "make_rng",
    "initial_state",
    "perturb",
]
