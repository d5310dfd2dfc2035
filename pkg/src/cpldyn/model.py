"""Circuit parameterization, dq-frame state models, and their Jacobians.

Two models of a grid-connected constant-power charger share one parameter
set: the full 4-state model (line currents and bus voltages on both axes)
and the planar reduction (V_d, I_d) valid for high R/X feeders where the
axis cross-coupling is negligible.

State orderings used throughout the package:
  full   x = [I_d, I_q, V_d, V_q]
  planar x = [V_d, I_d]
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SingularStateError

# Planar reduction is considered valid from this R/X ratio upward.
RX_VALID_MIN = 10.0

# Default singularity guard on V_d, volts.
V_EPS_DEFAULT = 1e-6


@dataclass(frozen=True)
class CircuitParams:
    """Line/source circuit constants defining the vector field.

    R: line resistance [ohm], L: line inductance [H], C_eq: equivalent bus
    capacitance [F], omega: angular line frequency [rad/s].
    """

    R: float
    L: float
    C_eq: float
    omega: float = 2.0 * math.pi * 60.0

    def __post_init__(self):
        for name in ("R", "L", "C_eq", "omega"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ConfigError(f"CircuitParams.{name} must be finite and > 0, got {v!r}")

    def r_over_x(self) -> float:
        """Resistance-to-reactance ratio R/(omega*L)."""
        return self.R / (self.omega * self.L)

    def planar_valid(self) -> bool:
        """True when the R/X ratio supports the planar decoupling.

        The threshold is a rule of thumb, so it is applied with 1% slack:
        the reference design itself sits at R/X = 9.998.
        """
        return self.r_over_x() >= RX_VALID_MIN * 0.99


@dataclass(frozen=True)
class GridInput:
    """Exogenous inputs: source voltages E_d, E_q [V] and charger demand P_pev [W].

    The planar model reads only E_d and P_pev; E_q is carried for the full model.
    """

    E_d: float
    E_q: float = 0.0
    P_pev: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.E_d) or not math.isfinite(self.E_q):
            raise ConfigError("GridInput voltages must be finite")
        if not (math.isfinite(self.P_pev) and self.P_pev >= 0.0):
            raise ConfigError(f"GridInput.P_pev must be >= 0 (unidirectional flow), got {self.P_pev!r}")


@dataclass(frozen=True)
class PlanarState:
    """Planar model state (V_d [V], I_d [A]); physical region is the open first quadrant."""

    V_d: float
    I_d: float

    def as_array(self) -> np.ndarray:
        return np.array([self.V_d, self.I_d], dtype=np.float64)

    @staticmethod
    def from_array(x) -> "PlanarState":
        return PlanarState(float(x[0]), float(x[1]))


@dataclass(frozen=True)
class FullState:
    """Full model state (I_d, I_q [A], V_d, V_q [V])."""

    I_d: float
    I_q: float
    V_d: float
    V_q: float

    def as_array(self) -> np.ndarray:
        return np.array([self.I_d, self.I_q, self.V_d, self.V_q], dtype=np.float64)

    @staticmethod
    def from_array(x) -> "FullState":
        return FullState(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


@dataclass(frozen=True)
class ThreePhaseSample:
    """Instantaneous phase quantities (a, b, c) at time t."""

    a: float
    b: float
    c: float
    t: float


def _check_vd(V_d: float, v_eps: float, positive_only: bool) -> None:
    if positive_only:
        if V_d <= v_eps:
            raise SingularStateError(f"V_d = {V_d!r} is at or below the singularity guard {v_eps!r}")
    else:
        if abs(V_d) <= v_eps:
            raise SingularStateError(f"|V_d| = {abs(V_d)!r} is at or below the singularity guard {v_eps!r}")


def deriv_full(x: FullState, u: GridInput, p: CircuitParams, v_eps: float = V_EPS_DEFAULT) -> FullState:
    """Time derivative of the full 4-state model, per-second rates.

    Requires |V_d| above the singularity guard (the CPL term divides by V_d).
    """
    _check_vd(x.V_d, v_eps, positive_only=False)
    R, L, C, w = p.R, p.L, p.C_eq, p.omega
    dId = -(R / L) * x.I_d + w * x.I_q - x.V_d / L + u.E_d / L
    dIq = -w * x.I_d - (R / L) * x.I_q - x.V_q / L + u.E_q / L
    dVd = x.I_d / C - 2.0 * u.P_pev / (3.0 * C * x.V_d) + w * x.V_q
    dVq = x.I_q / C - w * x.V_d
    return FullState(dId, dIq, dVd, dVq)


def deriv_planar(x: PlanarState, u: GridInput, p: CircuitParams, v_eps: float = V_EPS_DEFAULT) -> PlanarState:
    """Time derivative of the planar reduced model, per-second rates."""
    _check_vd(x.V_d, v_eps, positive_only=True)
    R, L, C = p.R, p.L, p.C_eq
    dVd = -2.0 * u.P_pev / (3.0 * C * x.V_d) + x.I_d / C
    dId = -x.V_d / L - (R / L) * x.I_d + u.E_d / L
    return PlanarState(dVd, dId)


def jacobian_full(x: FullState, u: GridInput, p: CircuitParams, v_eps: float = V_EPS_DEFAULT) -> np.ndarray:
    """4x4 state Jacobian of the full model at x."""
    _check_vd(x.V_d, v_eps, positive_only=False)
    R, L, C, w = p.R, p.L, p.C_eq, p.omega
    cpl = 2.0 * u.P_pev / (3.0 * C * x.V_d * x.V_d)
    return np.array(
        [
            [-R / L, w, -1.0 / L, 0.0],
            [-w, -R / L, 0.0, -1.0 / L],
            [1.0 / C, 0.0, cpl, w],
            [0.0, 1.0 / C, -w, 0.0],
        ],
        dtype=np.float64,
    )


def jacobian_planar(x: PlanarState, u: GridInput, p: CircuitParams, v_eps: float = V_EPS_DEFAULT) -> np.ndarray:
    """2x2 state Jacobian of the planar model at x.

    The (1,1) entry +2P/(3*C_eq*V_d^2) is the destabilizing CPL
    negative-incremental-resistance term.
    """
    _check_vd(x.V_d, v_eps, positive_only=True)
    R, L, C = p.R, p.L, p.C_eq
    cpl = 2.0 * u.P_pev / (3.0 * C * x.V_d * x.V_d)
    return np.array(
        [
            [cpl, 1.0 / C],
            [-1.0 / L, -R / L],
        ],
        dtype=np.float64,
    )


def power_from_state(x) -> float:
    """Three-phase active power (3/2)*V_d*I_d drawn at the bus, watts.

    Assumes zero q-axis charger current (unity power factor); accepts either
    state type.
    """
    return 1.5 * x.V_d * x.I_d


_TWO_THIRDS_PI = 2.0 * math.pi / 3.0


def dq_to_abc(d: float, q: float, t: float, omega: float, theta0: float = 0.0) -> ThreePhaseSample:
    """Map dq constants to instantaneous three-phase values at time t.

    Amplitude-invariant (peak-value) convention, d-axis aligned with the
    phase-a peak at theta0: a constant d maps to a balanced set of peak
    amplitude d. This is the convention under which active power carries
    the 3/2 factor.
    """
    th = omega * t + theta0
    a = d * math.cos(th) - q * math.sin(th)
    b = d * math.cos(th - _TWO_THIRDS_PI) - q * math.sin(th - _TWO_THIRDS_PI)
    c = d * math.cos(th + _TWO_THIRDS_PI) - q * math.sin(th + _TWO_THIRDS_PI)
    return ThreePhaseSample(a, b, c, t)


def abc_to_dq(sample: ThreePhaseSample, omega: float, theta0: float = 0.0) -> tuple[float, float]:
    """Inverse of dq_to_abc for a balanced set: returns (d, q)."""
    th = omega * sample.t + theta0
    ca, cb, cc = math.cos(th), math.cos(th - _TWO_THIRDS_PI), math.cos(th + _TWO_THIRDS_PI)
    sa, sb, sc = math.sin(th), math.sin(th - _TWO_THIRDS_PI), math.sin(th + _TWO_THIRDS_PI)
    d = (2.0 / 3.0) * (sample.a * ca + sample.b * cb + sample.c * cc)
    q = -(2.0 / 3.0) * (sample.a * sa + sample.b * sb + sample.c * sc)
    return d, q
