"""Time the compiled kernels against the pure-Python/numpy fallback.

The fallback is selected by CPLDYN_DISABLE_NUMBA=1 at import, so each mode
runs in its own subprocess over the identical workload and the parent prints
a comparison table. Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _workloads():
    from cpldyn import _kernels as K

    params = np.array([0.0064, 1.698e-06, 2.9333e-05, 376.99111843077515,
                       392.125, 0.0, 19200.0])
    x0 = np.array([421.91597560421286, 35.660061841741388])

    def adaptive():
        x = x0.copy()
        times = np.empty(200_000)
        states = np.empty((200_000, 2))
        st, n, t, h = K.rk45_segment(K.MODEL_PLANAR, 1.0, x, 0.0, 5e-2, 0.0,
                                     params, 1e-8, 1e-8, 1e-13, 1e-5, 1e-6,
                                     1e6, False, 1.0, times, states)
        assert st == K.STATUS_DONE, st

    def fixed():
        x = x0.copy()
        times = np.empty(200_000)
        states = np.empty((200_000, 2))
        st, n, t = K.rk4_segment(K.MODEL_PLANAR, 1.0, x, 0.0, 1e-2, 1e-7,
                                 params, 1e-6, 1e6, False, times, states)
        assert st == K.STATUS_DONE, st

    theta = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    vx = np.cos(theta)
    vy = np.sin(theta)
    rng = np.random.default_rng(7)
    pxs = rng.uniform(-1.2, 1.2, 2000)
    pys = rng.uniform(-1.2, 1.2, 2000)
    out = np.empty(2000, dtype=np.int64)

    def polygon():
        K.points_in_polygon(pxs, pys, vx, vy, 1e-12, out)

    return [
        ("rk45_segment  (adaptive, 50 ms horizon)", adaptive),
        ("rk4_segment   (fixed dt=1e-7, 10 ms horizon)", fixed),
        ("points_in_polygon (2000 pts x 720 vertices)", polygon),
    ]


def run_worker():
    from cpldyn import _kernels as K

    results = {"numba": K.NUMBA_ENABLED}
    for name, fn in _workloads():
        fn()  # warm-up: JIT compile / cache load
        reps = 5 if K.NUMBA_ENABLED else 1
        best = min(_timed(fn) for _ in range(reps))
        results[name] = best
    json.dump(results, sys.stdout)


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def run_comparison():
    modes = {}
    for label, flag in (("jit", "0"), ("pure", "1")):
        env = dict(os.environ, CPLDYN_DISABLE_NUMBA=flag)
        r = subprocess.run([sys.executable, __file__, "--worker"], env=env,
                           capture_output=True, text=True)
        if r.returncode != 0:
            sys.stderr.write(r.stderr)
            return r.returncode
        modes[label] = json.loads(r.stdout)
    assert modes["jit"]["numba"] and not modes["pure"]["numba"], \
        "mode selection failed; is numba installed?"

    width = max(len(k) for k in modes["jit"] if k != "numba")
    print(f"{'kernel':<{width}}  {'jit [s]':>10}  {'pure [s]':>10}  {'speedup':>8}")
    for name in modes["jit"]:
        if name == "numba":
            continue
        tj, tp = modes["jit"][name], modes["pure"][name]
        print(f"{name:<{width}}  {tj:>10.2e}  {tp:>10.2e}  {tp / tj:>7.0f}x")
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--worker", action="store_true",
                    help="run one mode's measurements (internal)")
    args = ap.parse_args()
    sys.exit(run_worker() if args.worker else run_comparison())
