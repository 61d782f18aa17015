"""Shared solved fields and Hessian models, built once per session."""
from __future__ import annotations

import numpy as np
import pytest

from polaron_bound import gaussian_weights as gw
from polaron_bound.bogoliubov import build_model
from polaron_bound.pekar_scf import solve_pekar
from polaron_bound.radial_core import build_grid
from polaron_bound.sector_operators import direct_trace, hessian_blocks


@pytest.fixture(scope="session")
def sol():
    """Working resolution used by most tests."""
    return solve_pekar(build_grid(4000, 400.0))


@pytest.fixture(scope="session")
def default_sol():
    """The command-line default resolution."""
    return solve_pekar(build_grid(8000, 400.0))


@pytest.fixture(scope="session")
def blocks12(sol):
    return hessian_blocks(sol, 12)


@pytest.fixture(scope="session")
def model12(blocks12):
    return build_model(blocks12)


@pytest.fixture(scope="session")
def direct_inf(sol):
    return direct_trace(sol, np.inf)


@pytest.fixture(scope="session")
def model40_k1(sol):
    return build_model(hessian_blocks(sol, 40, 1.0))


@pytest.fixture(scope="session")
def direct_k1(sol):
    return direct_trace(sol, 1.0)


@pytest.fixture(scope="session")
def weights_model(sol):
    return build_model(hessian_blocks(sol, 60))


@pytest.fixture(scope="session")
def int_grid(sol):
    return gw.integration_grid(sol)


@pytest.fixture(scope="session")
def int_components(sol, weights_model, int_grid):
    return gw.displacement_components(sol, weights_model, int_grid.s)


@pytest.fixture(scope="session")
def small_s():
    return np.geomspace(1e-3, 2.0, 40)


@pytest.fixture(scope="session")
def small_components(sol, weights_model, small_s):
    return gw.displacement_components(sol, weights_model, small_s)


# PASS/FAIL lines recorded by the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
