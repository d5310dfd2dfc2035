"""Region-of-attraction boundary: the unstable limit cycle around the
stable planar equilibrium.

Below the Hopf power the planar CPL system carries an unstable limit cycle
enclosing the stable focus; its interior is the region of attraction. The
cycle repels in forward time on both sides, so in reverse time it attracts
from both sides: the tracer reverse-integrates from a small radial offset of
the equilibrium and watches successive crossings of a Poincare half-line
(I_d = I_d*, V_d > V_d*) until the crossing radius settles, then records one
full loop as a polygon.

Note the traced curve is a property of the raw vector field. At operating
points well below the Hopf power the cycle is large and its lower lobe
reaches negative I_d; membership and sampling here treat the curve purely
geometrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .equilibrium import solve_planar_equilibria
from .errors import ConfigError, CycleNotFoundError
from .integrate import IntegratorConfig, Outcome, integrate
from .model import CircuitParams, GridInput, PlanarState

_EDGE_EPS = 1e-9  # on-edge tolerance for membership, in normalized units


@dataclass(frozen=True)
class RoaTracerConfig:
    """Settings for the reverse-time cycle tracer.

    seed_offset None means 1e-3 times the equilibrium norm. Sweeps toward
    the Hopf point should pass an offset near the expected cycle radius:
    reverse-time contraction scales with the equilibrium's small |Re lambda|
    there, and growing out of a default-size seed can cost thousands of
    revolutions.
    """

    seed_offset: float | None = None
    max_revolutions: int = 1000
    closure_tol: float = 1e-4
    refine_tol: float = 1e-10
    n_vertices: int = 720
    integrator: IntegratorConfig | None = None

    def __post_init__(self):
        if self.seed_offset is not None and not (self.seed_offset > 0.0):
            raise ConfigError("seed_offset must be > 0 or None")
        if self.max_revolutions < 2:
            raise ConfigError("max_revolutions must be >= 2")
        if not (0.0 < self.closure_tol < 1.0):
            raise ConfigError("closure_tol must be in (0, 1)")
        if self.n_vertices < 3:
            raise ConfigError("n_vertices must be >= 3")


@dataclass(frozen=True)
class ClosedCurve:
    """One period of the traced cycle as an open polygon (CCW, V_d column 0).

    closure_residual is the gap between the last two Poincare crossing radii
    over the cycle's V_d diameter. crossing_radii records the tail of the
    convergence history for diagnostics.
    """

    vertices: np.ndarray
    center: PlanarState
    closure_residual: float
    period: float
    crossing_radii: tuple

    @property
    def v_min(self) -> float:
        return float(self.vertices[:, 0].min())

    @property
    def v_max(self) -> float:
        return float(self.vertices[:, 0].max())

    @property
    def i_min(self) -> float:
        return float(self.vertices[:, 1].min())

    @property
    def i_max(self) -> float:
        return float(self.vertices[:, 1].max())

    def amplitude_v(self) -> float:
        """max |V_d - V_d*| over the cycle."""
        return float(np.max(np.abs(self.vertices[:, 0] - self.center.V_d)))

    def amplitude_i(self) -> float:
        return float(np.max(np.abs(self.vertices[:, 1] - self.center.I_d)))

    def to_csv(self, path) -> None:
        """`V_d,I_d` vertex rows; the last vertex implicitly connects to the first."""
        from .serialize import write_csv

        write_csv(path, "V_d,I_d", self.vertices)


def _normalized(curve: ClosedCurve):
    v = curve.vertices
    v_span = curve.v_max - curve.v_min
    i_span = curve.i_max - curve.i_min
    nx = (v[:, 0] - curve.v_min) / v_span
    ny = (v[:, 1] - curve.i_min) / i_span
    return nx, ny, v_span, i_span


def contains(curve: ClosedCurve, x) -> bool:
    """Strict interior test (boundary points count as outside)."""
    if isinstance(x, PlanarState):
        x = x.as_array()
    nx, ny, v_span, i_span = _normalized(curve)
    px = (float(x[0]) - curve.v_min) / v_span
    py = (float(x[1]) - curve.i_min) / i_span
    return K.point_in_polygon(px, py, nx, ny, _EDGE_EPS) == 1


def contains_batch(curve: ClosedCurve, pts: np.ndarray) -> np.ndarray:
    """Vectorized strict-interior test over an (n, 2) array of (V_d, I_d)."""
    nx, ny, v_span, i_span = _normalized(curve)
    pxs = (np.ascontiguousarray(pts[:, 0], dtype=np.float64) - curve.v_min) / v_span
    pys = (np.ascontiguousarray(pts[:, 1], dtype=np.float64) - curve.i_min) / i_span
    out = np.empty(len(pxs), dtype=np.int64)
    K.points_in_polygon(pxs, pys, nx, ny, _EDGE_EPS, out)
    return out == 1


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area (positive for counterclockwise order)."""
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def is_simple_polygon(vertices: np.ndarray) -> bool:
    """True when no two non-adjacent edges properly intersect (O(n^2), vectorized)."""
    n = len(vertices)
    v_span = np.ptp(vertices[:, 0])
    i_span = np.ptp(vertices[:, 1])
    pts = np.column_stack([(vertices[:, 0] - vertices[:, 0].min()) / v_span,
                           (vertices[:, 1] - vertices[:, 1].min()) / i_span])
    a = pts
    b = np.roll(pts, -1, axis=0)
    r = b - a
    ii, jj = np.triu_indices(n, k=2)
    keep = ~((ii == 0) & (jj == n - 1))  # first and last edges are adjacent
    ii, jj = ii[keep], jj[keep]

    def cross(u, w):
        return u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]

    p, q = a[ii], a[jj]
    rp, rq = r[ii], r[jj]
    denom = cross(rp, rq)
    pq = q - p
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross(pq, rq) / denom
        u = cross(pq, rp) / denom
    hit = (np.abs(denom) > 1e-15) & (t > 0.0) & (t < 1.0) & (u > 0.0) & (u < 1.0)
    return not bool(np.any(hit))


def _pack(u: GridInput, p: CircuitParams) -> np.ndarray:
    return np.array([p.R, p.L, p.C_eq, p.omega, u.E_d, u.E_q, u.P_pev],
                    dtype=np.float64)


def _refine_crossing(x_before, dt_bracket, i_star, params, refine_tol):
    """Bisect the reverse-time hop h in [0, dt_bracket] to land I_d = I_d*."""
    out = np.empty(2)
    sub = min(1e-7, dt_bracket)
    g_lo = x_before[1] - i_star
    lo, hi = 0.0, dt_bracket
    while hi - lo > refine_tol:
        mid = 0.5 * (lo + hi)
        K.rk4_advance(K.MODEL_PLANAR, -1.0, x_before, mid, sub, params, out)
        g = out[1] - i_star
        if (g > 0.0) == (g_lo > 0.0):
            lo = mid
            g_lo = g
        else:
            hi = mid
    h = 0.5 * (lo + hi)
    K.rk4_advance(K.MODEL_PLANAR, -1.0, x_before, h, sub, params, out)
    return h, out


def trace_unstable_limit_cycle(u: GridInput, p: CircuitParams,
                               cfg: RoaTracerConfig | None = None) -> ClosedCurve:
    """Trace the unstable limit cycle enclosing the stable planar equilibrium.

    Raises CycleNotFoundError when no stable equilibrium exists (at or beyond
    the Hopf power), when the reverse trajectory escapes (voltage collapse or
    blow-up — seed outside the cycle), or when crossings fail to settle
    within max_revolutions.
    """
    cfg = cfg or RoaTracerConfig()
    eqs = solve_planar_equilibria(u, p)
    if not eqs or not eqs[0].is_stable:
        raise CycleNotFoundError(
            "no stable planar equilibrium to enclose (operating point at or "
            "beyond the Hopf power, or past loadability)")
    eq = eqs[0]
    v_star, i_star = eq.state.V_d, eq.state.I_d
    omega_im = max(abs(e.imag) for e in eq.eigenvalues)
    if omega_im <= 0.0:
        raise CycleNotFoundError("equilibrium is not a focus; no cycle to trace")
    T_est = 2.0 * math.pi / omega_im

    offset = cfg.seed_offset
    if offset is None:
        offset = 1e-3 * math.hypot(v_star, i_star)
    int_cfg = cfg.integrator or IntegratorConfig()
    params = _pack(u, p)

    x = np.array([v_star + offset, i_star])
    tau = 0.0
    chunk = 24.0 * T_est
    radii = []
    cross_taus = []
    cross_states = []
    prev_r = None
    prev_gap = None
    converged = False

    # Reverse-integrate in chunks, harvesting half-line crossings from the
    # recorded samples (sampling is always finer than a half-revolution, so
    # no crossing can hide between samples). The crossing radii converge
    # geometrically with the cycle's reverse-time Floquet contraction; stop
    # when the extrapolated remaining distance gap*rho/(1-rho) is inside
    # tolerance, so the reported loop sits on the limit rather than one
    # contraction factor short of it.
    while not converged:
        traj = integrate("planar", x, u, p, (tau, tau + chunk), cfg=int_cfg,
                         _sign=-1.0)
        if traj.outcome is Outcome.DIVERGED:
            raise CycleNotFoundError(
                f"reverse-time trajectory escaped ({traj.guard}) after "
                f"{len(radii)} crossings — seed outside the cycle or no cycle")
        ts, ss = traj.times, traj.states
        g = ss[:, 1] - i_star
        hits = np.nonzero((g[:-1] * g[1:] < 0.0)
                          & (ss[:-1, 0] > v_star) & (ss[1:, 0] > v_star))[0]
        for k in hits:
            h, xc = _refine_crossing(ss[k], ts[k + 1] - ts[k], i_star, params,
                                     cfg.refine_tol)
            r = xc[0] - v_star
            radii.append(r)
            cross_taus.append(ts[k] + h)
            cross_states.append(xc.copy())
            if prev_r is not None:
                gap = abs(r - prev_r)
                budget = cfg.closure_tol * 2.0 * r
                if gap <= 1e-12 * r:
                    converged = True
                elif prev_gap is not None and 0.0 < gap < prev_gap:
                    rho = gap / prev_gap
                    if gap * rho / (1.0 - rho) <= budget:
                        converged = True
                prev_gap = gap
            prev_r = r
            if converged:
                break
        if len(radii) > cfg.max_revolutions and not converged:
            raise CycleNotFoundError(
                f"Poincare crossings did not settle within "
                f"{cfg.max_revolutions} revolutions (last radius {prev_r!r})")
        x = traj.final_state
        tau = traj.times[-1]

    period = cross_taus[-1] - cross_taus[-2]
    x_cross = cross_states[-1]

    # Record one loop at fixed step, landing exactly on the period.
    n = cfg.n_vertices
    dt_loop = period / n
    times = np.empty(n + 8)
    states = np.empty((n + 8, 2))
    xw = x_cross.copy()
    status, nw, _ = K.rk4_segment(
        K.MODEL_PLANAR, -1.0, xw, 0.0, period, dt_loop, params,
        1e-12, 1e30, False, times, states)
    if status != K.STATUS_DONE or nw < n:
        raise CycleNotFoundError("failed to record the converged loop")
    vertices = np.vstack([x_cross, states[:nw - 1]])

    if polygon_area(vertices) < 0.0:
        vertices = vertices[::-1].copy()

    diam = float(np.ptp(vertices[:, 0]))
    curve = ClosedCurve(
        vertices=vertices,
        center=PlanarState(V_d=v_star, I_d=i_star),
        closure_residual=abs(radii[-1] - radii[-2]) / diam,
        period=period,
        crossing_radii=tuple(radii[-8:]),
    )
    _validate(curve, cfg)
    return curve


def _validate(curve: ClosedCurve, cfg: RoaTracerConfig) -> None:
    if curve.v_min <= 0.0:
        raise CycleNotFoundError("traced curve reaches non-positive V_d")
    if curve.closure_residual > cfg.closure_tol:
        raise CycleNotFoundError(
            f"closure residual {curve.closure_residual!r} exceeds tolerance")
    if not contains(curve, curve.center):
        raise CycleNotFoundError("equilibrium is not interior to the traced curve")
    if not is_simple_polygon(curve.vertices):
        raise CycleNotFoundError("traced polygon self-intersects")


@dataclass(frozen=True)
class RoaReport:
    curve: ClosedCurve
    area: float
    v_min: float
    v_max: float
    i_min: float
    i_max: float

    def as_dict(self) -> dict:
        return {
            "area": self.area,
            "V_d_min": self.v_min,
            "V_d_max": self.v_max,
            "I_d_min": self.i_min,
            "I_d_max": self.i_max,
            "closure_residual": self.curve.closure_residual,
            "period": self.curve.period,
            "n_vertices": len(self.curve.vertices),
            "center": {"V_d": self.curve.center.V_d, "I_d": self.curve.center.I_d},
        }


def roa_report(u: GridInput, p: CircuitParams,
               cfg: RoaTracerConfig | None = None) -> RoaReport:
    """Trace the cycle and report its area (shoelace) and extents."""
    curve = trace_unstable_limit_cycle(u, p, cfg)
    return RoaReport(curve=curve, area=abs(polygon_area(curve.vertices)),
                     v_min=curve.v_min, v_max=curve.v_max,
                     i_min=curve.i_min, i_max=curve.i_max)


def sample_interior(curve: ClosedCurve, n: int, rng: np.random.Generator,
                    standoff: float = 0.0) -> np.ndarray:
    """Rejection-sample n strict-interior points, uniform over the interior.

    With standoff > 0, points within that fraction of the diameter of the
    boundary are rejected as well (sampled against a shrunken copy).
    """
    verts = curve.vertices
    if standoff > 0.0:
        verts = _scaled_about_centroid(curve, 1.0 - standoff)
        curve = ClosedCurve(vertices=verts, center=curve.center,
                            closure_residual=curve.closure_residual,
                            period=curve.period,
                            crossing_radii=curve.crossing_radii)
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    out = np.empty((n, 2))
    have = 0
    while have < n:
        batch = rng.uniform(lo, hi, size=(4 * (n - have) + 16, 2))
        keep = contains_batch(curve, batch)
        take = batch[keep][: n - have]
        out[have:have + len(take)] = take
        have += len(take)
    return out


def _scaled_about_centroid(curve: ClosedCurve, factor: float) -> np.ndarray:
    centroid = curve.vertices.mean(axis=0)
    return centroid + factor * (curve.vertices - centroid)


def sample_exterior_ring(curve: ClosedCurve, n: int, rng: np.random.Generator,
                         standoff: float = 0.03, width: float = 0.05) -> np.ndarray:
    """n points just outside the boundary: vertices scaled about the centroid
    by a factor drawn from [1 + standoff, 1 + standoff + width]."""
    idx = rng.integers(0, len(curve.vertices), size=n)
    factors = rng.uniform(1.0 + standoff, 1.0 + standoff + width, size=n)
    centroid = curve.vertices.mean(axis=0)
    return centroid + factors[:, None] * (curve.vertices[idx] - centroid)


def hausdorff_distance(a: ClosedCurve, b: ClosedCurve,
                       scale=(1.0, 1.0)) -> float:
    """Symmetric vertex-set Hausdorff distance with per-axis weights."""
    w = np.asarray(scale, dtype=np.float64)
    pa = a.vertices * w
    pb = b.vertices * w
    d2 = np.sum((pa[:, None, :] - pb[None, :, :]) ** 2, axis=2)
    return float(np.sqrt(max(d2.min(axis=1).max(), d2.min(axis=0).max())))
