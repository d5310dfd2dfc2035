"""Compiled inner loops: fixed/adaptive Runge-Kutta stepping and polygon tests.

Every kernel here is written as plain Python over numpy scalars/arrays and is
JIT-compiled with numba when available. Setting the environment variable
``CPLDYN_DISABLE_NUMBA=1`` (before import) selects the pure-Python/numpy
fallback path; the same source runs either way, so the two paths cannot
drift apart. ``benchmarks/bench_kernels.py`` compares them.

State conventions match ``cpldyn.model``: planar x = [V_d, I_d] (model id 0),
full x = [I_d, I_q, V_d, V_q] (model id 1). Parameters are packed as
[R, L, C_eq, omega, E_d, E_q, P_pev]. ``sign`` = +1.0 integrates forward
in time, -1.0 integrates the negated field (reverse time).
"""

import os

import numpy as np


def _flag_set(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


def _identity_njit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap


if _flag_set("CPLDYN_DISABLE_NUMBA"):
    njit = _identity_njit
    NUMBA_ENABLED = False
else:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:
        njit = _identity_njit
        NUMBA_ENABLED = False

MODEL_PLANAR = 0
MODEL_FULL = 1

# Segment-kernel exit statuses.
STATUS_DONE = 0
STATUS_SINGULAR = 1
STATUS_BLOWUP = 2
STATUS_QUADRANT = 3
STATUS_UNDERFLOW = 4
STATUS_CHUNK_FULL = 5


@njit(cache=True)
def _eval_deriv(model_id, sign, x, params, out):
    R = params[0]
    L = params[1]
    C = params[2]
    w = params[3]
    Ed = params[4]
    Eq = params[5]
    P = params[6]
    if model_id == MODEL_PLANAR:
        V = x[0]
        I = x[1]
        out[0] = sign * (-2.0 * P / (3.0 * C * V) + I / C)
        out[1] = sign * (-V / L - (R / L) * I + Ed / L)
    else:
        Id = x[0]
        Iq = x[1]
        Vd = x[2]
        Vq = x[3]
        out[0] = sign * (-(R / L) * Id + w * Iq - Vd / L + Ed / L)
        out[1] = sign * (-w * Id - (R / L) * Iq - Vq / L + Eq / L)
        out[2] = sign * (Id / C - 2.0 * P / (3.0 * C * Vd) + w * Vq)
        out[3] = sign * (Iq / C - w * Vd)


@njit(cache=True)
def _state_guard(model_id, x, v_eps, blowup_norm, enforce_quadrant):
    """0 = fine; otherwise one of the divergence statuses."""
    n = x.shape[0]
    for i in range(n):
        if not np.isfinite(x[i]):
            return STATUS_SINGULAR
    vd = x[0] if model_id == MODEL_PLANAR else x[2]
    if vd <= v_eps:
        return STATUS_SINGULAR
    if enforce_quadrant:
        i_d = x[1] if model_id == MODEL_PLANAR else x[0]
        if i_d < 0.0:
            return STATUS_QUADRANT
    s = 0.0
    for i in range(n):
        s += x[i] * x[i]
    if s > blowup_norm * blowup_norm:
        return STATUS_BLOWUP
    return STATUS_DONE


@njit(cache=True)
def rk4_step(model_id, sign, x, h, params, out):
    """One classic RK4 step of size h from x into out."""
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    _eval_deriv(model_id, sign, x, params, k1)
    for i in range(n):
        tmp[i] = x[i] + 0.5 * h * k1[i]
    _eval_deriv(model_id, sign, tmp, params, k2)
    for i in range(n):
        tmp[i] = x[i] + 0.5 * h * k2[i]
    _eval_deriv(model_id, sign, tmp, params, k3)
    for i in range(n):
        tmp[i] = x[i] + h * k3[i]
    _eval_deriv(model_id, sign, tmp, params, k4)
    for i in range(n):
        out[i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def rk4_advance(model_id, sign, x, h_total, dt, params, out):
    """Advance x by h_total using fixed RK4 substeps of at most dt.

    Guard-free helper for short, accurately placed hops (event refinement).
    """
    n_full = int(h_total / dt)
    rem = h_total - n_full * dt
    cur = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        cur[i] = x[i]
    for _ in range(n_full):
        rk4_step(model_id, sign, cur, dt, params, out)
        for i in range(x.shape[0]):
            cur[i] = out[i]
    if rem > 0.0:
        rk4_step(model_id, sign, cur, rem, params, out)
        for i in range(x.shape[0]):
            cur[i] = out[i]
    for i in range(x.shape[0]):
        out[i] = cur[i]


@njit(cache=True)
def rk4_segment(model_id, sign, x, t0, t1, dt, params, v_eps, blowup_norm,
                enforce_quadrant, times, states):
    """Fixed-step RK4 over [t0, t1], landing exactly on t1.

    Fills ``times``/``states`` (excluding the initial point) until the segment
    ends, a guard fires, or the buffers fill. ``x`` is advanced in place.
    Returns (status, n_written, t_reached).
    """
    cap = times.shape[0]
    n = x.shape[0]
    xn = np.empty(n)
    t = t0
    written = 0
    while t < t1:
        h = dt
        if t + h > t1 - 1e-15 * max(abs(t1), 1.0):
            h = t1 - t
        rk4_step(model_id, sign, x, h, params, xn)
        t_new = t + h
        ok = True
        for i in range(n):
            if not np.isfinite(xn[i]):
                ok = False
        if not ok:
            return STATUS_SINGULAR, written, t
        for i in range(n):
            x[i] = xn[i]
        if written >= cap:
            return STATUS_CHUNK_FULL, written, t
        times[written] = t_new
        for i in range(n):
            states[written, i] = x[i]
        written += 1
        t = t_new
        g = _state_guard(model_id, x, v_eps, blowup_norm, enforce_quadrant)
        if g != STATUS_DONE:
            return g, written, t
    return STATUS_DONE, written, t


# Dormand-Prince 5(4) tableau; the 5th-order solution is propagated and the
# first stage is reused from the previous step's last stage (FSAL).
_DP_C2 = 1.0 / 5.0
_DP_C3 = 3.0 / 10.0
_DP_C4 = 4.0 / 5.0
_DP_C5 = 8.0 / 9.0

_DP_A21 = 1.0 / 5.0
_DP_A31 = 3.0 / 40.0
_DP_A32 = 9.0 / 40.0
_DP_A41 = 44.0 / 45.0
_DP_A42 = -56.0 / 15.0
_DP_A43 = 32.0 / 9.0
_DP_A51 = 19372.0 / 6561.0
_DP_A52 = -25360.0 / 2187.0
_DP_A53 = 64448.0 / 6561.0
_DP_A54 = -212.0 / 729.0
_DP_A61 = 9017.0 / 3168.0
_DP_A62 = -355.0 / 33.0
_DP_A63 = 46732.0 / 5247.0
_DP_A64 = 49.0 / 176.0
_DP_A65 = -5103.0 / 18656.0

_DP_B1 = 35.0 / 384.0
_DP_B3 = 500.0 / 1113.0
_DP_B4 = 125.0 / 192.0
_DP_B5 = -2187.0 / 6784.0
_DP_B6 = 11.0 / 84.0

_DP_E1 = 71.0 / 57600.0
_DP_E3 = -71.0 / 16695.0
_DP_E4 = 71.0 / 1920.0
_DP_E5 = -17253.0 / 339200.0
_DP_E6 = 22.0 / 525.0
_DP_E7 = -1.0 / 40.0


@njit(cache=True)
def rk45_segment(model_id, sign, x, t0, t1, h_init, params, abs_tol, rel_tol,
                 dt_min, dt_max, v_eps, blowup_norm, enforce_quadrant,
                 collapse_v, times, states):
    """Adaptive Dormand-Prince 5(4) over [t0, t1], landing exactly on t1.

    Fills ``times``/``states`` with accepted steps (initial point excluded)
    until the segment ends, a guard fires, or the buffers fill; ``x`` advances
    in place. Step-size underflow with V_d at or below ``collapse_v`` is
    classified as the CPL finite-time voltage collapse (singular divergence)
    rather than an integration failure.

    Returns (status, n_written, t_reached, h_next).
    """
    cap = times.shape[0]
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    tmp = np.empty(n)
    xn = np.empty(n)

    t = t0
    written = 0
    h = h_init
    if h <= 0.0:
        h = dt_max
    if h > dt_max:
        h = dt_max

    _eval_deriv(model_id, sign, x, params, k1)
    t_tiny = 1e-15 * max(abs(t0), abs(t1), 1.0)

    while t < t1 - t_tiny:
        if h > dt_max:
            h = dt_max
        landing = False
        if t + h >= t1:
            h = t1 - t
            landing = True

        for i in range(n):
            tmp[i] = x[i] + h * _DP_A21 * k1[i]
        _eval_deriv(model_id, sign, tmp, params, k2)
        for i in range(n):
            tmp[i] = x[i] + h * (_DP_A31 * k1[i] + _DP_A32 * k2[i])
        _eval_deriv(model_id, sign, tmp, params, k3)
        for i in range(n):
            tmp[i] = x[i] + h * (_DP_A41 * k1[i] + _DP_A42 * k2[i] + _DP_A43 * k3[i])
        _eval_deriv(model_id, sign, tmp, params, k4)
        for i in range(n):
            tmp[i] = x[i] + h * (_DP_A51 * k1[i] + _DP_A52 * k2[i] + _DP_A53 * k3[i]
                                 + _DP_A54 * k4[i])
        _eval_deriv(model_id, sign, tmp, params, k5)
        for i in range(n):
            tmp[i] = x[i] + h * (_DP_A61 * k1[i] + _DP_A62 * k2[i] + _DP_A63 * k3[i]
                                 + _DP_A64 * k4[i] + _DP_A65 * k5[i])
        _eval_deriv(model_id, sign, tmp, params, k6)
        for i in range(n):
            xn[i] = x[i] + h * (_DP_B1 * k1[i] + _DP_B3 * k3[i] + _DP_B4 * k4[i]
                                + _DP_B5 * k5[i] + _DP_B6 * k6[i])
        _eval_deriv(model_id, sign, xn, params, k7)

        err = 0.0
        finite = True
        for i in range(n):
            if not np.isfinite(xn[i]):
                finite = False
                break
            e = h * (_DP_E1 * k1[i] + _DP_E3 * k3[i] + _DP_E4 * k4[i]
                     + _DP_E5 * k5[i] + _DP_E6 * k6[i] + _DP_E7 * k7[i])
            sc = abs_tol + rel_tol * max(abs(x[i]), abs(xn[i]))
            r = e / sc
            err += r * r
        if finite:
            err = np.sqrt(err / n)
        else:
            err = np.inf

        if err <= 1.0 or (landing and h <= dt_min):
            t = t + h
            for i in range(n):
                x[i] = xn[i]
                k1[i] = k7[i]
            if written >= cap:
                return STATUS_CHUNK_FULL, written, t, h
            times[written] = t
            for i in range(n):
                states[written, i] = x[i]
            written += 1
            g = _state_guard(model_id, x, v_eps, blowup_norm, enforce_quadrant)
            if g != STATUS_DONE:
                return g, written, t, h
            if err > 0.0:
                fac = 0.9 * err ** -0.2
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
            else:
                fac = 5.0
            h = h * fac
            if h > dt_max:
                h = dt_max
            if h < dt_min:
                h = dt_min
        else:
            if np.isfinite(err):
                fac = 0.9 * err ** -0.2
                if fac < 0.1:
                    fac = 0.1
            else:
                fac = 0.1
            h = h * fac
            if h < dt_min:
                vd = x[0] if model_id == MODEL_PLANAR else x[2]
                if vd <= collapse_v:
                    return STATUS_SINGULAR, written, t, h
                return STATUS_UNDERFLOW, written, t, h
    return STATUS_DONE, written, t, h


@njit(cache=True)
def point_in_polygon(px, py, vx, vy, edge_eps):
    """Even-odd ray cast for one point; -1 on-boundary, 0 outside, 1 inside.

    Coordinates must be pre-normalized so a single ``edge_eps`` is meaningful
    on both axes. Points within ``edge_eps`` of any edge are reported as
    boundary (-1), which strict-interior callers treat as outside.
    """
    m = vx.shape[0]
    eps2 = edge_eps * edge_eps
    inside = False
    j = m - 1
    for i in range(m):
        x1 = vx[j]
        y1 = vy[j]
        x2 = vx[i]
        y2 = vy[i]
        dx = x2 - x1
        dy = y2 - y1
        seg2 = dx * dx + dy * dy
        if seg2 > 0.0:
            tproj = ((px - x1) * dx + (py - y1) * dy) / seg2
            if tproj < 0.0:
                tproj = 0.0
            elif tproj > 1.0:
                tproj = 1.0
            ex = px - (x1 + tproj * dx)
            ey = py - (y1 + tproj * dy)
            if ex * ex + ey * ey <= eps2:
                return -1
        if (y1 > py) != (y2 > py):
            xint = x1 + (py - y1) * dx / dy
            if xint > px:
                inside = not inside
        j = i
    return 1 if inside else 0


@njit(cache=True)
def points_in_polygon(pxs, pys, vx, vy, edge_eps, out):
    for k in range(pxs.shape[0]):
        out[k] = point_in_polygon(pxs[k], pys[k], vx, vy, edge_eps)
