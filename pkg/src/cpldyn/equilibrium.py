"""Equilibria, spectral classification, and static loadability data.

The planar model has a closed-form equilibrium set: eliminating I_d from the
zero-derivative conditions leaves the quadratic

    V_d^2 - E_d*V_d + (2R/3)*P = 0,    I_d = 2P/(3*V_d),

so the network admits two, one, or zero operating voltages depending on the
discriminant — the familiar P-V nose curve. The full dq model needs a Newton
solve, seeded from the planar root and the algebraic q-axis balance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError, SingularStateError
from .model import (
    CircuitParams,
    FullState,
    GridInput,
    PlanarState,
    deriv_full,
    jacobian_full,
    jacobian_planar,
)

#: Relative half-width of the "numerically zero real part" band, as a
#: fraction of the spectral radius.
MARGIN_FACTOR_DEFAULT = 1e-6


class Classification(enum.Enum):
    STABLE_NODE = "StableNode"
    STABLE_FOCUS = "StableFocus"
    UNSTABLE_NODE = "UnstableNode"
    UNSTABLE_FOCUS = "UnstableFocus"
    SADDLE = "Saddle"
    MARGINAL = "Marginal"


@dataclass(frozen=True)
class EquilibriumPoint:
    state: PlanarState | FullState
    eigenvalues: tuple
    classification: Classification

    @property
    def is_stable(self) -> bool:
        return self.classification in (Classification.STABLE_NODE,
                                       Classification.STABLE_FOCUS)


@dataclass(frozen=True)
class PVCurvePoint:
    """One static P-V point; voltages are None beyond loadability."""

    P: float
    V_high: float | None
    V_low: float | None


def _sorted_eigs(eigs) -> tuple:
    return tuple(sorted((complex(e) for e in eigs),
                        key=lambda z: (z.real, z.imag)))


def classify(J: np.ndarray, margin_factor: float = MARGIN_FACTOR_DEFAULT):
    """Eigenvalues and phase-portrait class of a real 2x2 or 4x4 Jacobian.

    2x2 spectra come from the trace/determinant closed form; larger matrices
    go through numpy's dense eigensolver. An eigenvalue counts as marginal
    when its real part is within margin_factor of its own magnitude — a
    relative test, so a huge eigenvalue elsewhere in the spectrum (the
    low-voltage branch pairs ~1e4 with ~1e10) cannot drown out a decisively
    signed small one.
    """
    J = np.asarray(J, dtype=np.float64)
    if J.shape == (2, 2):
        tr = J[0, 0] + J[1, 1]
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        disc = tr * tr - 4.0 * det
        if disc < 0.0:
            s = math.sqrt(-disc) / 2.0
            eigs = (complex(tr / 2.0, -s), complex(tr / 2.0, s))
        else:
            s = math.sqrt(disc) / 2.0
            eigs = (complex(tr / 2.0 - s), complex(tr / 2.0 + s))
    elif J.shape == (4, 4):
        eigs = np.linalg.eigvals(J)
    else:
        raise ConfigError(f"expected a 2x2 or 4x4 Jacobian, got shape {J.shape}")
    eigs = _sorted_eigs(eigs)

    res = [e.real for e in eigs]
    spiral = any(abs(e.imag) > margin_factor * abs(e) for e in eigs)

    if any(abs(e.real) <= margin_factor * abs(e) for e in eigs):
        cls = Classification.MARGINAL
    elif all(r < 0.0 for r in res):
        cls = Classification.STABLE_FOCUS if spiral else Classification.STABLE_NODE
    elif all(r > 0.0 for r in res):
        cls = Classification.UNSTABLE_FOCUS if spiral else Classification.UNSTABLE_NODE
    else:
        cls = Classification.SADDLE
    return eigs, cls


def max_loadability(E_d: float, p: CircuitParams) -> float:
    """Largest P with a static planar solution: P_max = 3*E_d^2/(8R)."""
    if not (E_d > 0.0):
        raise ConfigError("E_d must be > 0")
    return 3.0 * E_d * E_d / (8.0 * p.R)


def solve_planar_equilibria(u: GridInput, p: CircuitParams,
                            margin_factor: float = MARGIN_FACTOR_DEFAULT
                            ) -> list[EquilibriumPoint]:
    """All positive-voltage planar equilibria, high-V_d root first.

    Returns 2 points below the loadability limit, 1 at the nose (or at
    P = 0, where the low root degenerates to V = 0 and is dropped), and an
    empty list beyond it.
    """
    if not (u.E_d > 0.0):
        raise ConfigError("E_d must be > 0")
    disc = u.E_d * u.E_d - (8.0 * p.R / 3.0) * u.P_pev
    if disc < 0.0:
        return []
    root = math.sqrt(disc)
    out = []
    for V in ((u.E_d + root) / 2.0, (u.E_d - root) / 2.0):
        if V <= 0.0:
            continue
        I = 2.0 * u.P_pev / (3.0 * V)
        st = PlanarState(V_d=V, I_d=I)
        eigs, cls = classify(jacobian_planar(st, u, p), margin_factor)
        pt = EquilibriumPoint(state=st, eigenvalues=eigs, classification=cls)
        if not out or V != out[0].state.V_d:
            out.append(pt)
    return out


def full_equilibrium_seed(u: GridInput, p: CircuitParams) -> FullState:
    """Newton seed from the planar high root plus the algebraic q-axis balance.

    With V_dot_q = 0 -> I_q = omega*C*V_d and I_dot_q = 0 ->
    V_q = E_q - omega*L*I_d - R*I_q.
    """
    planar = solve_planar_equilibria(u, p)
    if not planar:
        raise ConvergenceError("no planar equilibrium to seed from (P beyond loadability)")
    V_d, I_d = planar[0].state.V_d, planar[0].state.I_d
    I_q = p.omega * p.C_eq * V_d
    V_q = u.E_q - p.omega * p.L * I_d - p.R * I_q
    return FullState(I_d=I_d, I_q=I_q, V_d=V_d, V_q=V_q)


def _full_residual_scale(x: FullState, u: GridInput, p: CircuitParams) -> np.ndarray:
    """Per-component sums of term magnitudes in deriv_full (relative-residual scale)."""
    R, L, C, w = p.R, p.L, p.C_eq, p.omega
    return np.maximum(np.array([
        abs(R / L * x.I_d) + abs(w * x.I_q) + abs(x.V_d / L) + abs(u.E_d / L),
        abs(w * x.I_d) + abs(R / L * x.I_q) + abs(x.V_q / L) + abs(u.E_q / L),
        abs(x.I_d / C) + abs(2.0 * u.P_pev / (3.0 * C * x.V_d)) + abs(w * x.V_q),
        abs(x.I_q / C) + abs(w * x.V_d),
    ]), 1.0)


def solve_full_equilibrium(u: GridInput, p: CircuitParams, guess: FullState,
                           tol: float = 1e-9, max_iter: int = 50,
                           margin_factor: float = MARGIN_FACTOR_DEFAULT
                           ) -> EquilibriumPoint:
    """Damped Newton on deriv_full = 0 from `guess`.

    Steps are halved until the residual norm decreases; convergence is a
    per-component relative residual below `tol`. Raises ConvergenceError
    after `max_iter` iterations or when the Jacobian goes singular.
    """
    if not (guess.V_d > 0.0):
        raise ConfigError(f"guess must have V_d > 0, got {guess.V_d!r}")
    x = guess.as_array()

    def resid(arr):
        st = FullState.from_array(arr)
        return deriv_full(st, u, p).as_array(), st

    f, st = resid(x)
    for _ in range(max_iter):
        scale = _full_residual_scale(st, u, p)
        if np.max(np.abs(f) / scale) < tol:
            eigs, cls = classify(jacobian_full(st, u, p), margin_factor)
            return EquilibriumPoint(state=st, eigenvalues=eigs, classification=cls)
        J = jacobian_full(st, u, p)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError as e:
            raise ConvergenceError(f"singular Jacobian at iterate {st!r}") from e
        fn = float(np.linalg.norm(f))
        lam = 1.0
        for _ in range(30):
            x_new = x + lam * step
            if x_new[2] > 0.0:  # keep V_d on the physical side of the CPL pole
                try:
                    f_new, st_new = resid(x_new)
                except SingularStateError:
                    f_new = None
                else:
                    if np.linalg.norm(f_new) < fn or lam < 1e-6:
                        break
            lam *= 0.5
        else:
            raise ConvergenceError("Newton damping failed to reduce the residual")
        x, f, st = x_new, f_new, st_new

    raise ConvergenceError(f"no convergence after {max_iter} Newton iterations")


def pv_curve(E_d: float, p: CircuitParams, P_grid) -> list[PVCurvePoint]:
    """Static network P-V characteristic over a grid of load powers."""
    out = []
    for P in P_grid:
        if P < 0.0:
            raise ConfigError("P grid values must be >= 0")
        pts = solve_planar_equilibria(GridInput(E_d=E_d, E_q=0.0, P_pev=float(P)), p)
        if not pts:
            out.append(PVCurvePoint(P=float(P), V_high=None, V_low=None))
        elif len(pts) == 1:
            out.append(PVCurvePoint(P=float(P), V_high=pts[0].state.V_d, V_low=None))
        else:
            out.append(PVCurvePoint(P=float(P), V_high=pts[0].state.V_d,
                                    V_low=pts[1].state.V_d))
    return out
