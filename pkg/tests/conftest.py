import numpy as np
import pytest

from cpldyn import CircuitParams, GridInput
from cpldyn.roa import trace_unstable_limit_cycle

import _oracles as OR


@pytest.fixture(scope="session")
def paper() -> CircuitParams:
    return CircuitParams(R=OR.R, L=OR.L, C_eq=OR.C_EQ, omega=OR.OMEGA)


@pytest.fixture(scope="session")
def base(paper) -> GridInput:
    return GridInput(E_d=OR.E_D, E_q=0.0, P_pev=OR.P_PEV)


@pytest.fixture(scope="session")
def cycle(base, paper):
    """Boundary curve at the reference point, traced once per session.

    Requesting this fixture also warms every jitted kernel, so runtime
    budgets measured afterwards see steady-state speed.
    """
    return trace_unstable_limit_cycle(base, paper)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260819)
