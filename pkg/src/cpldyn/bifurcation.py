"""Load-power sweeps, Hopf location, and cycle-amplitude scaling.

Stability of the high-voltage branch is lost through a subcritical Hopf
bifurcation: the planar Jacobian's trace 2P/(3*C_eq*V_d^2) - R/L crosses
zero while its determinant stays positive. find_hopf bisects that trace
(composed with the closed-form equilibrium) in P; the unstable-cycle
amplitude near the bifurcation then shrinks like sqrt(P_hopf - P).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .equilibrium import (
    EquilibriumPoint,
    max_loadability,
    solve_planar_equilibria,
)
from .errors import BracketError, ConfigError, CycleNotFoundError
from .model import CircuitParams, GridInput, PlanarState, jacobian_planar
from .roa import RoaTracerConfig, trace_unstable_limit_cycle


@dataclass(frozen=True)
class BranchPoint:
    P: float
    branch: str  # "high" or "low"
    equilibrium: EquilibriumPoint
    stable: bool
    cycle_amplitude: tuple | None = None  # (dV_d_max, dI_d_max) when traced


@dataclass(frozen=True)
class HopfPoint:
    P_hopf: float
    state: PlanarState
    omega_hopf: float


def _high_branch_trace(P: float, E_d: float, p: CircuitParams) -> float:
    """Trace of the planar Jacobian at the high-V equilibrium for load P.

    Returns NaN past loadability (no equilibrium).
    """
    pts = solve_planar_equilibria(GridInput(E_d=E_d, E_q=0.0, P_pev=P), p)
    if not pts:
        return math.nan
    J = jacobian_planar(pts[0].state, GridInput(E_d=E_d, E_q=0.0, P_pev=P), p)
    return J[0, 0] + J[1, 1]


def sweep_equilibria(E_d: float, p: CircuitParams, P_range, n_steps: int
                     ) -> list[BranchPoint]:
    """Both equilibrium branches over an inclusive linear P grid."""
    P_lo, P_hi = float(P_range[0]), float(P_range[1])
    if not (0.0 <= P_lo < P_hi):
        raise ConfigError("require 0 <= P_lo < P_hi")
    if P_hi >= max_loadability(E_d, p):
        raise ConfigError("P range must stay below the loadability limit")
    if n_steps < 2:
        raise ConfigError("n_steps must be >= 2")
    out = []
    for k in range(n_steps):
        P = P_lo + (P_hi - P_lo) * k / (n_steps - 1)
        pts = solve_planar_equilibria(GridInput(E_d=E_d, E_q=0.0, P_pev=P), p)
        for branch, pt in zip(("high", "low"), pts):
            out.append(BranchPoint(P=P, branch=branch, equilibrium=pt,
                                   stable=pt.is_stable))
    return out


def find_hopf(E_d: float, p: CircuitParams, bracket=None, tol: float = 1e-8
              ) -> HopfPoint:
    """Bisect the high-branch trace to the Hopf load power.

    Default bracket spans (P such that trace < 0 at low load, 0.99*P_max);
    `tol` is relative on P. Raises BracketError when the trace does not
    change sign across the bracket.
    """
    P_max = max_loadability(E_d, p)
    if bracket is None:
        bracket = (1e-6 * P_max, 0.99 * P_max)
    P_lo, P_hi = float(bracket[0]), float(bracket[1])
    tr_lo = _high_branch_trace(P_lo, E_d, p)
    tr_hi = _high_branch_trace(P_hi, E_d, p)
    if math.isnan(tr_lo) or math.isnan(tr_hi):
        raise BracketError("bracket endpoint beyond loadability")
    if not (tr_lo < 0.0 < tr_hi):
        raise BracketError(
            f"high-branch trace does not change sign over {bracket!r} "
            f"(trace {tr_lo!r} .. {tr_hi!r})")
    while P_hi - P_lo > tol * P_hi:
        P_mid = 0.5 * (P_lo + P_hi)
        if _high_branch_trace(P_mid, E_d, p) < 0.0:
            P_lo = P_mid
        else:
            P_hi = P_mid
    P_hopf = 0.5 * (P_lo + P_hi)
    u = GridInput(E_d=E_d, E_q=0.0, P_pev=P_hopf)
    st = solve_planar_equilibria(u, p)[0].state
    J = jacobian_planar(st, u, p)
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if det <= 0.0:
        raise BracketError("determinant not positive at the trace zero; "
                           "crossing is not a Hopf point")
    return HopfPoint(P_hopf=P_hopf, state=st, omega_hopf=math.sqrt(det))


def cycle_amplitude_sweep(E_d: float, p: CircuitParams, P_samples,
                          tracer_cfg: RoaTracerConfig | None = None
                          ) -> list[tuple]:
    """(P, max |V_d - V_d*| over the cycle) for each sample below the Hopf power.

    Seeds each trace near the amplitude expected from sqrt scaling,
    calibrated on the first sample — reverse-time contraction slows as
    1/|Re lambda| near the bifurcation, and growing out of a default-size
    offset there costs thousands of revolutions.
    """
    samples = sorted(float(P) for P in P_samples)
    if not samples:
        raise ConfigError("no P samples given")
    hopf = find_hopf(E_d, p)
    if samples[-1] >= hopf.P_hopf:
        raise ConfigError(
            f"samples must lie below the Hopf power {hopf.P_hopf!r}")
    base = tracer_cfg or RoaTracerConfig(max_revolutions=20000)
    out = []
    k_scale = None
    for P in samples:
        cfg = base
        if base.seed_offset is None and k_scale is not None:
            est = k_scale * math.sqrt(hopf.P_hopf - P)
            cfg = RoaTracerConfig(
                seed_offset=0.3 * est,
                max_revolutions=base.max_revolutions,
                closure_tol=base.closure_tol,
                refine_tol=base.refine_tol,
                n_vertices=base.n_vertices,
                integrator=base.integrator,
            )
        u = GridInput(E_d=E_d, E_q=0.0, P_pev=P)
        curve = trace_unstable_limit_cycle(u, p, cfg)
        amp = curve.amplitude_v()
        if k_scale is None:
            k_scale = amp / math.sqrt(hopf.P_hopf - P)
        out.append((P, amp))
    return out


def amplitude_scaling_exponent(samples: list[tuple], P_hopf: float) -> float:
    """Log-log slope of amplitude vs (P_hopf - P) over sweep output."""
    if len(samples) < 2:
        raise ConfigError("need at least two sweep samples")
    xs = [math.log(P_hopf - P) for P, _ in samples]
    ys = [math.log(a) for _, a in samples]
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / sxx
