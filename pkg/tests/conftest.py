from pathlib import Path

import numpy as np
import pytest

from chnsdbc.grid import build_domain
from chnsdbc.physics import ModelParams
from chnsdbc.solver import SchemeConfig
from chnsdbc.state import random_state

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def grid():
    return build_domain(Lx=8.0, Ly=8.0, Nx=16, Ny=12)


@pytest.fixture
def params():
    return ModelParams(nu=0.7, lam=1.0, gamma=1.0, alpha=1.0, beta=1.5, h="cellular:0.5:1:1")


@pytest.fixture
def scheme():
    return SchemeConfig(dt=0.01)


@pytest.fixture
def state(grid):
    return random_state(grid, np.random.default_rng(3), amp_u=0.3, amp_phi=0.5, mean_phi=0.1)


@pytest.fixture(scope="session")
def configs():
    return CONFIGS


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" in props and rep.when == "call" or ("criterion" in props and outcome == "error"):
                lines.append((props["criterion"], "PASS" if outcome == "passed" else "FAIL", props.get("detail", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for crit, status, detail in sorted(lines, key=lambda r: (int(r[0].rstrip("ab")), r[0])):
        terminalreporter.write_line(f"criterion {crit:<3} {status}  {detail}")
