"""Equilibrium algebra against the closed-form quadratic and spectra."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpldyn import (Classification, ConfigError, ConvergenceError, GridInput,
                    classify, max_loadability, pv_curve,
                    solve_full_equilibrium, solve_planar_equilibria)
from cpldyn.equilibrium import full_equilibrium_seed
from cpldyn.model import deriv_full

import _oracles as OR


def quadratic_roots(E, R, P):
    """Independent closed form for V^2 - E V + (2R/3)P = 0."""
    disc = E * E - 8.0 * R * P / 3.0
    if disc < 0.0:
        return ()
    s = math.sqrt(disc)
    if s == 0.0:
        return (E / 2.0,)
    return ((E + s) / 2.0, (E - s) / 2.0)


def test_reference_point_roots(base, paper):
    pts = solve_planar_equilibria(base, paper)
    assert len(pts) == 2
    hi, lo = pts
    assert hi.state.V_d == pytest.approx(OR.V_HIGH, rel=1e-12)
    assert hi.state.I_d == pytest.approx(OR.I_HIGH, rel=1e-12)
    assert lo.state.V_d == pytest.approx(OR.V_LOW, rel=1e-12)
    # quadratic residual and Vieta identities, 1e-9 relative
    for eq in pts:
        V = eq.state.V_d
        res = V * V - OR.E_D * V + (2.0 * OR.R / 3.0) * OR.P_PEV
        assert abs(res) <= 1e-9 * OR.E_D * OR.E_D
        assert eq.state.I_d == pytest.approx(2.0 * OR.P_PEV / (3.0 * V), rel=1e-12)
    assert hi.state.V_d + lo.state.V_d == pytest.approx(OR.E_D, rel=1e-9)
    assert hi.state.V_d * lo.state.V_d == pytest.approx(
        2.0 * OR.R * OR.P_PEV / 3.0, rel=1e-9)


def test_reference_point_spectrum(base, paper):
    hi = solve_planar_equilibria(base, paper)[0]
    assert hi.classification is Classification.STABLE_FOCUS
    assert hi.is_stable
    lam = hi.eigenvalues
    assert lam[0].real == pytest.approx(OR.EIG_RE, rel=1e-9)
    assert abs(lam[0].imag) == pytest.approx(OR.EIG_IM, rel=1e-9)
    assert lam[0] == lam[1].conjugate()


def test_low_branch_is_saddle(base, paper):
    lo = solve_planar_equilibria(base, paper)[1]
    assert lo.classification is Classification.SADDLE
    assert not lo.is_stable
    res = sorted(l.real for l in lo.eigenvalues)
    assert res[0] < 0.0 < res[1]


def test_equilibrium_count_vs_loadability(paper):
    E = OR.E_D
    P_max = max_loadability(E, paper)
    assert P_max == pytest.approx(3.0 * E * E / (8.0 * OR.R), rel=1e-15)
    assert len(solve_planar_equilibria(GridInput(E_d=E, P_pev=0.5 * P_max), paper)) == 2
    assert solve_planar_equilibria(GridInput(E_d=E, P_pev=1.01 * P_max), paper) == []
    nose = solve_planar_equilibria(GridInput(E_d=E, P_pev=P_max), paper)
    assert len(nose) == 1
    assert nose[0].state.V_d == pytest.approx(E / 2.0, rel=1e-9)


def test_unloaded_network(paper):
    pts = solve_planar_equilibria(GridInput(E_d=OR.E_D, P_pev=0.0), paper)
    assert len(pts) == 1
    assert pts[0].state.V_d == pytest.approx(OR.E_D)
    assert pts[0].state.I_d == 0.0
    assert pts[0].is_stable


@settings(max_examples=150, deadline=None)
@given(E=st.floats(10.0, 1e3), frac=st.floats(1e-6, 0.999))
def test_roots_match_closed_form(paper, E, frac):
    P = frac * 3.0 * E * E / (8.0 * OR.R)
    pts = solve_planar_equilibria(GridInput(E_d=E, P_pev=P), paper)
    expect = quadratic_roots(E, OR.R, P)
    got = tuple(eq.state.V_d for eq in pts)
    assert len(got) == len([v for v in expect if v > 0.0])
    for g, e in zip(got, expect):
        assert g == pytest.approx(e, rel=1e-9)


def test_classify_taxonomy():
    eigs, cls = classify(np.diag([-1.0, -2.0]))
    assert cls is Classification.STABLE_NODE
    _, cls = classify(np.diag([1.0, 2.0]))
    assert cls is Classification.UNSTABLE_NODE
    _, cls = classify(np.diag([1.0, -1.0]))
    assert cls is Classification.SADDLE
    _, cls = classify(np.array([[-1.0, 2.0], [-2.0, -1.0]]))
    assert cls is Classification.STABLE_FOCUS
    _, cls = classify(np.array([[1.0, 2.0], [-2.0, 1.0]]))
    assert cls is Classification.UNSTABLE_FOCUS
    _, cls = classify(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert cls is Classification.MARGINAL
    # widely split real spectrum must not read as marginal
    _, cls = classify(np.diag([-3767.0, 9.99e9]))
    assert cls is Classification.SADDLE
    _, cls = classify(np.diag([-1.0, -2.0, -3.0, -4.0]).astype(float))
    assert cls is Classification.STABLE_NODE
    with pytest.raises(ConfigError):
        classify(np.zeros((3, 3)))


def test_classify_eigenvalue_order():
    eigs, _ = classify(np.array([[0.0, 1.0], [-4.0, -5.0]]))
    # sorted by (real, imag): -4 before -1
    assert eigs[0].real <= eigs[1].real


def test_full_equilibrium_matches_planar(base, paper):
    seed = full_equilibrium_seed(base, paper)
    eq = solve_full_equilibrium(base, paper, seed)
    assert eq.classification is Classification.STABLE_FOCUS
    # the q-axis coupling shifts the d-axis solution only slightly at R/X ~ 10
    assert eq.state.V_d == pytest.approx(OR.V_HIGH, rel=1e-4)
    assert eq.state.I_d == pytest.approx(OR.I_HIGH, rel=1e-4)
    assert eq.state.I_q == pytest.approx(OR.OMEGA * OR.C_EQ * eq.state.V_d, rel=1e-6)


def test_full_equilibrium_residual_is_tiny(base, paper):
    eq = solve_full_equilibrium(base, paper, full_equilibrium_seed(base, paper))
    r = deriv_full(eq.state, base, paper).as_array()
    # per-equation scales: dI/dt terms are ~E/L ~ 2e8, dV/dt terms ~ I/C ~ 1e6
    assert abs(r[0]) < 1e-2 and abs(r[1]) < 1e-2
    assert abs(r[2]) < 1e-4 and abs(r[3]) < 1e-4


def test_pv_curve_shape(paper):
    P_max = max_loadability(OR.E_D, paper)
    grid = np.linspace(0.0, 1.1 * P_max, 40)
    pts = pv_curve(OR.E_D, paper, grid)
    assert pts[0].V_high == pytest.approx(OR.E_D)
    assert pts[0].V_low is None
    highs = [q.V_high for q in pts if q.V_high is not None]
    lows = [q.V_low for q in pts if q.V_low is not None]
    assert all(a > b for a, b in zip(highs, highs[1:]))   # upper branch falls
    assert all(a < b for a, b in zip(lows, lows[1:]))     # lower branch rises
    assert any(q.V_high is None for q in pts)             # beyond the nose
    with pytest.raises(ConfigError):
        pv_curve(OR.E_D, paper, [-1.0])


def test_solve_full_rejects_bad_seed(base, paper):
    from cpldyn.model import FullState
    with pytest.raises(ConvergenceError):
        solve_full_equilibrium(base, paper,
                               FullState(I_d=0.0, I_q=0.0, V_d=1e-3, V_q=0.0),
                               max_iter=4)
