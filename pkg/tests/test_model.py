"""Vector field, Jacobians, and frame transforms against hand arithmetic."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpldyn import (CircuitParams, ConfigError, FullState, GridInput,
                    PlanarState, SingularStateError, deriv_full, deriv_planar,
                    jacobian_full, jacobian_planar, power_from_state)
from cpldyn.model import ThreePhaseSample, abc_to_dq, dq_to_abc

import _oracles as OR


def test_params_validation():
    with pytest.raises(ConfigError):
        CircuitParams(R=0.0, L=OR.L, C_eq=OR.C_EQ)
    with pytest.raises(ConfigError):
        CircuitParams(R=OR.R, L=-1e-6, C_eq=OR.C_EQ)
    with pytest.raises(ConfigError):
        CircuitParams(R=OR.R, L=OR.L, C_eq=float("nan"))
    with pytest.raises(ConfigError):
        GridInput(E_d=100.0, P_pev=-5.0)


def test_rx_ratio_at_reference(paper):
    # the decoupling premise behind the planar reduction
    assert paper.r_over_x() == pytest.approx(10.0, abs=0.1)
    assert paper.planar_valid()
    slow = CircuitParams(R=OR.R, L=OR.L, C_eq=OR.C_EQ, omega=10 * OR.OMEGA)
    assert not slow.planar_valid()


def test_deriv_planar_hand_arithmetic(paper):
    # independent evaluation at an off-equilibrium state
    u = GridInput(E_d=392.125, P_pev=19200.0)
    x = PlanarState(V_d=300.0, I_d=50.0)
    d = deriv_planar(x, u, paper)
    dVd = (-2.0 * 19200.0 / (3.0 * OR.C_EQ * 300.0) + 50.0 / OR.C_EQ)
    dId = (-300.0 - OR.R * 50.0 + 392.125) / OR.L
    assert d.V_d == pytest.approx(dVd, rel=1e-14)
    assert d.I_d == pytest.approx(dId, rel=1e-14)


def test_deriv_full_hand_arithmetic(paper):
    u = GridInput(E_d=392.125, E_q=10.0, P_pev=19200.0)
    x = FullState(I_d=40.0, I_q=5.0, V_d=350.0, V_q=-2.0)
    d = deriv_full(x, u, paper)
    R, L, C, w = OR.R, OR.L, OR.C_EQ, OR.OMEGA
    assert d.I_d == pytest.approx((-R * 40.0 + 392.125 - 350.0) / L + w * 5.0, rel=1e-12)
    assert d.I_q == pytest.approx(-w * 40.0 + (-R * 5.0 + 10.0 - (-2.0)) / L, rel=1e-12)
    assert d.V_d == pytest.approx(40.0 / C - 2.0 * 19200.0 / (3.0 * C * 350.0) + w * -2.0, rel=1e-12)
    assert d.V_q == pytest.approx(5.0 / C - w * 350.0, rel=1e-12)


def test_singularity_guard(paper):
    u = GridInput(E_d=392.125, P_pev=19200.0)
    with pytest.raises(SingularStateError):
        deriv_planar(PlanarState(V_d=0.0, I_d=10.0), u, paper)
    with pytest.raises(SingularStateError):
        deriv_planar(PlanarState(V_d=-5.0, I_d=10.0), u, paper)
    with pytest.raises(SingularStateError):
        jacobian_full(FullState(1.0, 1.0, 1e-9, 0.0), u, paper)
    # P = 0 removes the division but the guard stays uniform
    with pytest.raises(SingularStateError):
        deriv_planar(PlanarState(V_d=0.0, I_d=10.0), GridInput(E_d=1.0), paper)


@pytest.mark.parametrize("V_d,I_d", [(391.916, 32.66), (250.0, 100.0), (50.0, 5.0)])
def test_jacobian_planar_matches_finite_differences(paper, V_d, I_d):
    u = GridInput(E_d=392.125, P_pev=19200.0)
    x0 = np.array([V_d, I_d])
    J = jacobian_planar(PlanarState(*x0), u, paper)
    eps = 1e-4
    for j in range(2):
        dx = np.zeros(2)
        dx[j] = eps * max(abs(x0[j]), 1.0)
        fp = deriv_planar(PlanarState(*(x0 + dx)), u, paper)
        fm = deriv_planar(PlanarState(*(x0 - dx)), u, paper)
        col = (np.array([fp.V_d, fp.I_d]) - np.array([fm.V_d, fm.I_d])) / (2 * dx[j])
        assert np.allclose(col, J[:, j], rtol=1e-5, atol=1e-3)


def test_jacobian_full_matches_finite_differences(paper):
    u = GridInput(E_d=392.125, E_q=3.0, P_pev=19200.0)
    x0 = np.array([40.0, 5.0, 350.0, -2.0])
    J = jacobian_full(FullState(*x0), u, paper)
    eps = 1e-5
    for j in range(4):
        dx = np.zeros(4)
        dx[j] = eps * max(abs(x0[j]), 1.0)
        fp = deriv_full(FullState(*(x0 + dx)), u, paper).as_array()
        fm = deriv_full(FullState(*(x0 - dx)), u, paper).as_array()
        assert np.allclose((fp - fm) / (2 * dx[j]), J[:, j], rtol=1e-4, atol=1e-2)


def test_cpl_term_sign(paper):
    """The CPL entry J[0,0] = 2P/(3 C V^2) is positive and grows as V drops."""
    u = GridInput(E_d=392.125, P_pev=19200.0)
    hi = jacobian_planar(PlanarState(391.916, 32.66), u, paper)[0, 0]
    lo = jacobian_planar(PlanarState(200.0, 64.0), u, paper)[0, 0]
    assert 0.0 < hi < lo
    unloaded = jacobian_planar(PlanarState(391.916, 0.0), GridInput(E_d=392.125), paper)
    assert unloaded[0, 0] == 0.0


def test_power_from_state():
    assert power_from_state(PlanarState(V_d=400.0, I_d=30.0)) == pytest.approx(18000.0)
    assert power_from_state(FullState(I_d=30.0, I_q=0.0, V_d=400.0, V_q=0.0)) == pytest.approx(18000.0)


def test_state_array_round_trip():
    x = PlanarState(391.9, 32.6)
    assert PlanarState.from_array(x.as_array()) == x
    y = FullState(1.0, 2.0, 3.0, 4.0)
    assert FullState.from_array(y.as_array()) == y
    # array ordering contract: planar [V_d, I_d], full [I_d, I_q, V_d, V_q]
    assert list(x.as_array()) == [391.9, 32.6]
    assert list(y.as_array()) == [1.0, 2.0, 3.0, 4.0]


def test_abc_balanced_set():
    s = dq_to_abc(100.0, 0.0, 0.0, OR.OMEGA)
    assert s.a == pytest.approx(100.0)
    assert s.b == pytest.approx(-50.0)
    assert s.c == pytest.approx(-50.0)
    assert s.a + s.b + s.c == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    d=st.floats(-1e4, 1e4),
    q=st.floats(-1e4, 1e4),
    t=st.floats(0.0, 1.0),
    theta0=st.floats(-math.pi, math.pi),
)
def test_dq_abc_round_trip(d, q, t, theta0):
    s = dq_to_abc(d, q, t, OR.OMEGA, theta0)
    assert s.a + s.b + s.c == pytest.approx(0.0, abs=1e-8 * (abs(d) + abs(q) + 1))
    d2, q2 = abc_to_dq(s, OR.OMEGA, theta0)
    assert d2 == pytest.approx(d, rel=1e-9, abs=1e-9)
    assert q2 == pytest.approx(q, rel=1e-9, abs=1e-9)


def test_abc_peak_amplitude():
    """Amplitude-invariant scaling: |dq| is the phase peak, P carries 3/2."""
    d, q = 30.0, 40.0
    ts = np.linspace(0.0, 1.0 / 60.0, 2000)
    peak = max(abs(dq_to_abc(d, q, t, OR.OMEGA).a) for t in ts)
    assert peak == pytest.approx(50.0, rel=1e-5)


def test_abc_to_dq_inverts_zero_sum_samples_exactly():
    # a zero-sum triple has two degrees of freedom, exactly (d, q)
    sample = ThreePhaseSample(a=10.0, b=-4.0, c=-6.0, t=0.01)
    d, q = abc_to_dq(sample, OR.OMEGA)
    s2 = dq_to_abc(d, q, 0.01, OR.OMEGA)
    assert s2.a == pytest.approx(sample.a, rel=1e-12)
    assert s2.b == pytest.approx(sample.b, rel=1e-12)
    assert s2.c == pytest.approx(sample.c, rel=1e-12)
