"""Fault scenarios and critical clearing times.

A disturbance swaps the grid input at t_start (source-voltage sag or demand
surge) and restores it at t_clear. Clearing inside the pre-fault region of
attraction recovers the operating point; clearing after the faulted
trajectory has drifted out does not. The critical clearing time is found two
ways — bisection on simulated outcomes, and the faulted trajectory's first
exit through the traced ROA boundary — and the two cross-validate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import solve_planar_equilibria
from .errors import BracketError, ConfigError, ConvergenceError
from .integrate import (
    IntegratorConfig,
    Outcome,
    ScheduledEvent,
    Trajectory,
    classify_outcome,
    integrate,
)
from .model import CircuitParams, GridInput
from .roa import ClosedCurve, RoaTracerConfig, contains_batch, trace_unstable_limit_cycle

KIND_SAG = "sag"
KIND_SURGE = "surge"

#: Default post-fault simulation horizon beyond t_start, seconds.
HORIZON_DEFAULT = 0.2
#: Undecided probes double the horizon at most this many times.
MAX_HORIZON_DOUBLINGS = 2


@dataclass(frozen=True)
class DisturbanceScenario:
    """Piecewise-constant disturbance of the grid input.

    kind "sag" drops E_d to faulted_value; kind "surge" raises P_pev to
    faulted_value. E_q is held (zero for the unity-power-factor source).
    """

    base: GridInput
    kind: str
    faulted_value: float
    t_start: float = 0.05

    def __post_init__(self):
        if self.kind not in (KIND_SAG, KIND_SURGE):
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if self.kind == KIND_SAG and not (0.0 < self.faulted_value < self.base.E_d):
            raise ConfigError("sag requires 0 < E_d_faulted < base E_d")
        if self.kind == KIND_SURGE and not (self.faulted_value > self.base.P_pev):
            raise ConfigError("surge requires P_faulted > base P_pev")
        if self.t_start < 0.0:
            raise ConfigError("t_start must be >= 0")

    def faulted_input(self) -> GridInput:
        if self.kind == KIND_SAG:
            return GridInput(E_d=self.faulted_value, E_q=self.base.E_q,
                             P_pev=self.base.P_pev)
        return GridInput(E_d=self.base.E_d, E_q=self.base.E_q,
                         P_pev=self.faulted_value)

    def faulted_equilibrium_kind(self, p: CircuitParams) -> str:
        """'stable', 'unstable', or 'absent' — the faulted high branch."""
        pts = solve_planar_equilibria(self.faulted_input(), p)
        if not pts:
            return "absent"
        return "stable" if pts[0].is_stable else "unstable"


@dataclass(frozen=True)
class CctResult:
    t_cr: float
    bracket: tuple
    method: str  # "bisection" or "roa_exit"
    fault_duration: float
    faulted_equilibrium: str
    witness_converged: Trajectory | None = None
    witness_diverged: Trajectory | None = None
    witness_times: tuple | None = None


def _pre_fault_equilibrium(s: DisturbanceScenario, p: CircuitParams):
    pts = solve_planar_equilibria(s.base, p)
    if not pts or not pts[0].is_stable:
        raise ConfigError("base input has no stable pre-fault equilibrium")
    return pts[0]


def simulate_fault(s: DisturbanceScenario, t_clear: float, p: CircuitParams,
                   cfg: IntegratorConfig | None = None,
                   t_end: float | None = None):
    """Run equilibrium -> fault at t_start -> restore at t_clear; classify.

    Returns (trajectory, outcome) with outcome judged against the pre-fault
    equilibrium. t_clear == t_end simulates a never-cleared fault.
    """
    if t_end is None:
        t_end = s.t_start + HORIZON_DEFAULT
    if not (s.t_start < t_clear <= t_end):
        raise ConfigError(f"require t_start < t_clear <= t_end, got "
                          f"({s.t_start!r}, {t_clear!r}, {t_end!r})")
    eq = _pre_fault_equilibrium(s, p)
    x0 = eq.state.as_array()
    events = [ScheduledEvent(t=s.t_start, new_input=s.faulted_input())]
    if t_clear < t_end:
        events.append(ScheduledEvent(t=t_clear, new_input=s.base))
    traj = integrate("planar", x0, s.base, p, (0.0, t_end), events=events,
                     cfg=cfg)
    outcome = classify_outcome(traj, x0)
    traj.outcome = outcome
    return traj, outcome


def _probe(s, t_clear, p, cfg, t_end):
    """simulate_fault with horizon doubling on Undecided outcomes."""
    horizon = t_end - s.t_start
    for _ in range(MAX_HORIZON_DOUBLINGS + 1):
        traj, outcome = simulate_fault(s, t_clear, p, cfg,
                                       t_end=s.t_start + horizon)
        if outcome is not Outcome.UNDECIDED:
            return traj, outcome
        horizon *= 2.0
    raise ConvergenceError(
        f"outcome still undecided at t_clear={t_clear!r} after extending "
        f"the horizon to {horizon / 2.0!r} s past t_start")


def find_cct_bisection(s: DisturbanceScenario, p: CircuitParams,
                       cfg: IntegratorConfig | None = None,
                       bracket=None, tol_t: float = 1e-4,
                       t_end: float | None = None) -> CctResult:
    """Bisect the clearing time between a converging and a diverging clear.

    The default bracket is (t_start + tol_t, t_end): a near-zero-width fault
    against a never-cleared one. Raises BracketError when both endpoints
    give the same outcome (fault not destabilizing, or no recovery at all).
    """
    if t_end is None:
        t_end = s.t_start + HORIZON_DEFAULT
    if bracket is None:
        bracket = (s.t_start + tol_t, t_end)
    t_lo, t_hi = float(bracket[0]), float(bracket[1])
    if not (s.t_start < t_lo < t_hi <= t_end):
        raise ConfigError(f"bracket {bracket!r} outside (t_start, t_end]")

    _, out_lo = _probe(s, t_lo, p, cfg, t_end)
    _, out_hi = _probe(s, t_hi, p, cfg, t_end)
    if not (out_lo is Outcome.CONVERGED and out_hi is Outcome.DIVERGED):
        raise BracketError(
            f"invalid initial bracket: outcomes ({out_lo.value}, {out_hi.value}) "
            f"at clearing times ({t_lo!r}, {t_hi!r})")

    while t_hi - t_lo > tol_t:
        t_mid = 0.5 * (t_lo + t_hi)
        _, out_mid = _probe(s, t_mid, p, cfg, t_end)
        if out_mid is Outcome.CONVERGED:
            t_lo = t_mid
        else:
            t_hi = t_mid

    wc, out_wc = _probe(s, t_lo, p, cfg, t_end)
    wd, out_wd = _probe(s, t_hi, p, cfg, t_end)
    if out_wc is not Outcome.CONVERGED or out_wd is not Outcome.DIVERGED:
        raise ConvergenceError("bracket witnesses failed re-verification")
    return CctResult(
        t_cr=0.5 * (t_lo + t_hi),
        bracket=(t_lo, t_hi),
        method="bisection",
        fault_duration=0.5 * (t_lo + t_hi) - s.t_start,
        faulted_equilibrium=s.faulted_equilibrium_kind(p),
        witness_converged=wc,
        witness_diverged=wd,
        witness_times=(t_lo, t_hi),
    )


def find_cct_roa(s: DisturbanceScenario, p: CircuitParams,
                 cfg: IntegratorConfig | None = None,
                 tracer_cfg: RoaTracerConfig | None = None,
                 t_end: float | None = None,
                 curve: ClosedCurve | None = None) -> CctResult:
    """Clearing deadline from the faulted trajectory's first ROA exit.

    Traces the base-input ROA boundary (or reuses a supplied curve), runs
    the never-cleared fault, and locates the first boundary crossing by
    bisection on the membership predicate between the straddling samples.
    """
    if t_end is None:
        t_end = s.t_start + HORIZON_DEFAULT
    eq = _pre_fault_equilibrium(s, p)
    if curve is None:
        curve = trace_unstable_limit_cycle(s.base, p, tracer_cfg)
    x0 = eq.state.as_array()
    events = [ScheduledEvent(t=s.t_start, new_input=s.faulted_input())]
    traj = integrate("planar", x0, s.base, p, (0.0, t_end), events=events,
                     cfg=cfg)

    after = traj.times >= s.t_start
    ts = traj.times[after]
    ss = traj.states[after]
    inside = contains_batch(curve, ss)
    outs = np.nonzero(~inside)[0]
    if outs.size == 0:
        raise BracketError(
            f"faulted trajectory never exits the ROA within t_end={t_end!r} "
            f"(disturbance not destabilizing)")
    k = int(outs[0])
    if k == 0:
        raise ConvergenceError("pre-fault equilibrium already outside the curve")

    # Bisect the crossing between the last inside and first outside sample.
    t_in, t_out = ts[k - 1], ts[k]
    x_in = ss[k - 1].copy()
    u_f = s.faulted_input()
    params = np.array([p.R, p.L, p.C_eq, p.omega, u_f.E_d, u_f.E_q, u_f.P_pev])
    from . import _kernels as K
    out = np.empty(2)
    lo, hi = 0.0, t_out - t_in
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        K.rk4_advance(K.MODEL_PLANAR, 1.0, x_in, mid, min(1e-7, mid), params, out)
        if contains_batch(curve, out.reshape(1, 2))[0]:
            lo = mid
        else:
            hi = mid
    t_cr = t_in + 0.5 * (lo + hi)
    return CctResult(
        t_cr=t_cr,
        bracket=(t_in + lo, t_in + hi),
        method="roa_exit",
        fault_duration=t_cr - s.t_start,
        faulted_equilibrium=s.faulted_equilibrium_kind(p),
    )


def destabilization_threshold(base: GridInput, p: CircuitParams, kind: str,
                              rel_tol: float = 1e-9) -> float:
    """Magnitude at which the faulted high-branch equilibrium loses stability.

    For surges this is the Hopf power of the base source voltage; for sags,
    the faulted E_d below which the (still existing) equilibrium turns
    unstable. Found by bisection on the stability flag.
    """
    def stable_at(m: float) -> bool:
        s = DisturbanceScenario(base=base, kind=kind, faulted_value=m,
                                t_start=0.05)
        return s.faulted_equilibrium_kind(p) == "stable"

    if kind == KIND_SURGE:
        lo, hi = base.P_pev, 2.0 * base.P_pev
        while stable_at(hi):
            lo, hi = hi, 2.0 * hi
            if hi > 1e12:
                raise BracketError("no destabilizing surge level found")
        while hi - lo > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if stable_at(mid):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    if kind != KIND_SAG:
        raise ConfigError(f"unknown scenario kind {kind!r}")
    if not stable_at(base.E_d * 0.999):
        raise BracketError("operating point destabilizes at infinitesimal sag")
    lo, hi = 1e-6 * base.E_d, base.E_d * 0.999
    if stable_at(lo):
        raise BracketError("no destabilizing sag level found")
    while hi - lo > rel_tol * base.E_d:
        mid = 0.5 * (lo + hi)
        if stable_at(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def magnitude_scan(base: GridInput, p: CircuitParams, kind: str,
                   target_bracket: tuple, t_start: float = 0.05,
                   cfg: IntegratorConfig | None = None,
                   tol_t: float = 1e-4, max_iters: int = 40):
    """Find a disturbance magnitude whose CCT lands inside target_bracket.

    Severity is walked geometrically away from the base operating point
    until the CCT drops below the target window, then the magnitude is
    bisected. Non-destabilizing probes (no CCT at all) count as weak. The
    weak anchor starts at the base value itself, which is weak by
    definition; this matters because the CCT can plunge from infinity to
    below the window within a very narrow magnitude band — sags do exactly
    that, since the pre-fault state sits a fixed distance from the faulted
    equilibrium while the faulted basin shrinks. Returns
    (magnitude, CctResult).
    """
    a, b = float(target_bracket[0]), float(target_bracket[1])
    if not (t_start < a < b):
        raise ConfigError("target bracket must follow t_start")
    if kind not in (KIND_SAG, KIND_SURGE):
        raise ConfigError(f"unknown scenario kind {kind!r}")
    base_val = base.P_pev if kind == KIND_SURGE else base.E_d

    def magnitude(severity: float) -> float:
        if kind == KIND_SURGE:
            return base_val * (1.0 + severity)
        return base_val * (1.0 - severity)

    def cct_at(m: float) -> CctResult | None:
        s = DisturbanceScenario(base=base, kind=kind, faulted_value=m,
                                t_start=t_start)
        try:
            return find_cct_bisection(s, p, cfg, tol_t=tol_t)
        except BracketError:
            return None

    # Outward walk: double severity until some probe's CCT falls below the
    # window (CCT decreases with severity).
    s_weak = 0.0          # base value: no disturbance, trivially weak
    s_strong = None
    r_strong = None
    severity = 1e-3
    for _ in range(max_iters):
        if kind == KIND_SAG and severity >= 1.0:
            raise BracketError("sag scan ran out of range before the CCT "
                               "dropped below the target window")
        r = cct_at(magnitude(severity))
        if r is None or r.t_cr > b:
            s_weak = severity
        elif r.t_cr < a:
            s_strong, r_strong = severity, r
            break
        else:
            return magnitude(severity), r
        severity *= 2.0
    if s_strong is None:
        raise BracketError("no magnitude with CCT below the target window")

    for _ in range(max_iters):
        severity = 0.5 * (s_weak + s_strong)
        m = magnitude(severity)
        r = cct_at(m)
        if r is not None and a <= r.t_cr <= b:
            return m, r
        if r is None or r.t_cr > b:
            s_weak = severity
        else:
            s_strong, r_strong = severity, r
        if s_strong - s_weak <= 1e-9 * s_strong:
            break
    raise ConvergenceError(
        f"magnitude bisection failed to land a CCT inside ({a!r}, {b!r}); "
        f"closest {r_strong.t_cr!r} at {magnitude(s_strong)!r}")
