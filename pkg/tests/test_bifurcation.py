"""Hopf localization and the subcritical branch structure in load power."""

import numpy as np
import pytest

from cpldyn import (BracketError, ConfigError, CycleNotFoundError,
                    amplitude_scaling_exponent, cycle_amplitude_sweep,
                    find_hopf, sweep_equilibria)
from cpldyn.bifurcation import _high_branch_trace

import _oracles as OR


def test_hopf_against_closed_form(paper):
    """Trace-zero bisection must land on the analytic Hopf point.

    Independent oracle: the trace 2P/(3 C V^2) - R/L vanishes where
    V = E/(1 + R^2 C / L), i.e. P = 3 C R V^2 / (2 L).
    """
    h = find_hopf(OR.E_D, paper)
    assert h.P_hopf == pytest.approx(OR.P_HOPF, rel=1e-8)
    assert h.state.V_d == pytest.approx(OR.V_HOPF, rel=1e-8)
    assert h.P_hopf > OR.P_PEV          # the reference point is pre-Hopf
    assert h.omega_hopf == pytest.approx(OR.OMEGA_HOPF, rel=1e-6)


def test_hopf_is_pure_imaginary_crossing(paper, base):
    h = find_hopf(OR.E_D, paper)
    from cpldyn import GridInput, solve_planar_equilibria
    eq = solve_planar_equilibria(
        GridInput(E_d=OR.E_D, P_pev=h.P_hopf), paper)[0]
    lam = eq.eigenvalues[0]
    assert abs(lam.real) <= 1e-6 * abs(lam.imag)
    # omega_hopf^2 = det of the Jacobian there
    assert h.omega_hopf ** 2 == pytest.approx(abs(lam) ** 2, rel=1e-6)


def test_dense_sweep_brackets_same_cell(paper):
    P_grid = np.linspace(1e3, 0.99 * 3 * OR.E_D**2 / (8 * OR.R), 2000)
    traces = np.array([_high_branch_trace(P, OR.E_D, paper) for P in P_grid])
    sign_flip = np.nonzero(np.diff(np.sign(traces)) > 0)[0]
    assert len(sign_flip) == 1
    k = sign_flip[0]
    assert P_grid[k] <= OR.P_HOPF <= P_grid[k + 1]


def test_sweep_branch_stability_structure(paper):
    pts = sweep_equilibria(OR.E_D, paper, (1e3, 30e3), 59)
    high = [q for q in pts if q.branch == "high"]
    low = [q for q in pts if q.branch == "low"]
    assert len(high) == len(low) == 59
    flips = [a.stable and not b.stable for a, b in zip(high, high[1:])]
    assert sum(flips) == 1                      # exactly one loss of stability
    flip_at = flips.index(True)
    assert high[flip_at].P <= OR.P_HOPF <= high[flip_at + 1].P
    assert not any(q.stable for q in low)


def test_sweep_validation(paper):
    with pytest.raises(ConfigError):
        sweep_equilibria(OR.E_D, paper, (1e3, 1e10), 10)
    with pytest.raises(ConfigError):
        sweep_equilibria(OR.E_D, paper, (5e3, 1e3), 10)
    with pytest.raises(ConfigError):
        sweep_equilibria(OR.E_D, paper, (1e3, 2e3), 1)


def test_find_hopf_bad_bracket(paper):
    with pytest.raises(BracketError):
        find_hopf(OR.E_D, paper, bracket=(1e3, 2e3))        # trace < 0 throughout
    with pytest.raises(BracketError):
        find_hopf(OR.E_D, paper, bracket=(26e3, 30e3))      # trace > 0 throughout


def test_amplitude_shrinks_toward_hopf(paper):
    """Subcritical signature: cycle amplitude falls ~sqrt(P_hopf - P)."""
    pts = cycle_amplitude_sweep(
        OR.E_D, paper, [0.85 * OR.P_HOPF, 0.92 * OR.P_HOPF, 0.97 * OR.P_HOPF])
    amps = [a for _, a in pts]
    assert all(a > b for a, b in zip(amps, amps[1:]))
    alpha = amplitude_scaling_exponent(pts, OR.P_HOPF)
    assert 0.3 <= alpha <= 0.7          # acceptance pins [0.4, 0.6] on 5 pts


def test_amplitude_sweep_rejects_supercritical(paper):
    with pytest.raises((ConfigError, CycleNotFoundError)):
        cycle_amplitude_sweep(OR.E_D, paper, [1.01 * OR.P_HOPF])
