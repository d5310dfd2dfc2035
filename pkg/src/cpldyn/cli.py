"""Command-line surface: deterministic analysis artifacts from JSON configs.

Every subcommand validates its inputs fully before computing and computes
fully before writing, so a failed run leaves no partial artifacts. Exit
codes: 0 success (including "no equilibrium" findings), 2 invalid input,
3 numerical failure; failures emit a one-line JSON object on stderr.
All numbers are serialized with 17 significant digits, so identical
config + seed reproduce artifacts byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bifurcation import find_hopf, sweep_equilibria
from .config import (RunConfig, _number, _reject_unknown, _require_mapping,
                     load_run_config, paper_config_path)
from .equilibrium import (EquilibriumPoint, full_equilibrium_seed,
                          max_loadability, pv_curve, solve_full_equilibrium,
                          solve_planar_equilibria)
from .errors import ConfigError, CpldynError
from .integrate import classify_outcome, integrate
from .model import FullState, GridInput, dq_to_abc
from .roa import roa_report
from .scenario import (DisturbanceScenario, find_cct_bisection, find_cct_roa,
                       simulate_fault)
from .serialize import write_csv, write_json


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": {"type": kind, "message": message}}),
          file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors as machine-readable JSON."""

    def error(self, message):
        _emit_error("ConfigError", message)
        raise SystemExit(2)


def _pair(text: str, flag: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"{flag} expects 'A,B', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"{flag} expects two numbers, got {text!r}") from None


def _load_scenario(path, default_base: GridInput) -> DisturbanceScenario:
    p = Path(path)
    try:
        obj = json.loads(p.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read scenario file {p}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"scenario file {p} is not valid JSON: {e}") from e
    _require_mapping(obj, "scenario")
    _reject_unknown(obj, ("base", "kind", "faulted_value", "t_start"), "scenario")
    if "base" in obj:
        b = _require_mapping(obj["base"], "scenario.base")
        _reject_unknown(b, ("E_d", "E_q", "P_pev"), "scenario.base")
        base = GridInput(E_d=_number(b, "E_d", "scenario.base"),
                         E_q=_number(b, "E_q", "scenario.base", default=0.0),
                         P_pev=_number(b, "P_pev", "scenario.base"))
    else:
        base = default_base
    kind = obj.get("kind")
    if kind not in ("sag", "surge"):
        raise ConfigError(f"scenario.kind must be 'sag' or 'surge', got {kind!r}")
    return DisturbanceScenario(
        base=base,
        kind=kind,
        faulted_value=_number(obj, "faulted_value", "scenario"),
        t_start=_number(obj, "t_start", "scenario", default=0.05),
    )


def _scenario_json(s: DisturbanceScenario) -> dict:
    return {
        "base": {"E_d": s.base.E_d, "E_q": s.base.E_q, "P_pev": s.base.P_pev},
        "kind": s.kind,
        "faulted_value": s.faulted_value,
        "t_start": s.t_start,
    }


def _eig_json(z: complex) -> dict:
    return {"re": z.real, "im": z.imag}


def _planar_eq_json(eq: EquilibriumPoint) -> dict:
    return {
        "state": {"V_d": eq.state.V_d, "I_d": eq.state.I_d},
        "eigenvalues": [_eig_json(z) for z in eq.eigenvalues],
        "classification": eq.classification.value,
        "stable": eq.is_stable,
    }


def _full_eq_json(eq: EquilibriumPoint) -> dict:
    s = eq.state
    return {
        "state": {"I_d": s.I_d, "I_q": s.I_q, "V_d": s.V_d, "V_q": s.V_q},
        "eigenvalues": [_eig_json(z) for z in eq.eigenvalues],
        "classification": eq.classification.value,
        "stable": eq.is_stable,
    }


# --- subcommand handlers -------------------------------------------------
# Each returns [(artifact name, writer)] with every number already computed,
# so nothing touches the output directory until the whole command succeeded.


def _cmd_equilibria(cfg: RunConfig, args) -> list:
    pts = solve_planar_equilibria(cfg.input, cfg.circuit)
    report = {
        "P_max": max_loadability(cfg.input.E_d, cfg.circuit),
        "planar": [_planar_eq_json(eq) for eq in pts],
        "full": None,
    }
    if pts:
        seed = full_equilibrium_seed(cfg.input, cfg.circuit)
        report["full"] = _full_eq_json(
            solve_full_equilibrium(cfg.input, cfg.circuit, seed))
    return [("equilibria.json", lambda path: write_json(path, report))]


def _abc_rows(traj, omega: float):
    if traj.model == "planar":
        vd, vq = traj.states[:, 0], np.zeros(len(traj.times))
        id_, iq = traj.states[:, 1], np.zeros(len(traj.times))
    else:
        id_, iq = traj.states[:, 0], traj.states[:, 1]
        vd, vq = traj.states[:, 2], traj.states[:, 3]
    for t, a, b, c, d in zip(traj.times, vd, vq, id_, iq):
        v = dq_to_abc(a, b, t, omega)
        i = dq_to_abc(c, d, t, omega)
        yield (t, v.a, v.b, v.c, i.a, i.b, i.c)


def _cmd_simulate(cfg: RunConfig, args) -> list:
    if args.scenario is not None:
        if args.t_clear is None:
            raise ConfigError("--scenario requires --t-clear")
        s = _load_scenario(args.scenario, cfg.input)
        traj, outcome = simulate_fault(s, args.t_clear, cfg.circuit,
                                       cfg.integrator, t_end=args.t_end)
    else:
        if args.t_clear is not None:
            raise ConfigError("--t-clear requires --scenario")
        pts = solve_planar_equilibria(cfg.input, cfg.circuit)
        if not pts or not pts[0].is_stable:
            raise ConfigError("no stable equilibrium to start from; "
                              "pass --x0 with a scenario instead")
        eq = pts[0].state.as_array()
        x0 = np.array(_pair(args.x0, "--x0")) if args.x0 else eq
        t_end = 0.2 if args.t_end is None else args.t_end
        traj = integrate("planar", x0, cfg.input, cfg.circuit, (0.0, t_end),
                         cfg=cfg.integrator)
        outcome = classify_outcome(traj, eq)

    report = {
        "outcome": outcome.value,
        "guard": traj.guard,
        "t_final": float(traj.times[-1]),
        "final_state": {"V_d": float(traj.states[-1, 0]),
                        "I_d": float(traj.states[-1, 1])},
        "n_samples": len(traj.times),
    }
    artifacts = [
        ("trajectory.csv", traj.to_csv),
        ("outcome.json", lambda path: write_json(path, report)),
    ]
    if args.abc:
        rows = list(_abc_rows(traj, cfg.circuit.omega))
        artifacts.append(("trajectory_abc.csv",
                          lambda path: write_csv(path, "t,V_a,V_b,V_c,I_a,I_b,I_c",
                                                 rows)))
    return artifacts


def _cmd_bifurcate(cfg: RunConfig, args) -> list:
    hopf = find_hopf(cfg.input.E_d, cfg.circuit)
    points = sweep_equilibria(cfg.input.E_d, cfg.circuit,
                              (args.p_min, args.p_max), args.steps)
    rows = []
    for bp in points:
        e = bp.equilibrium
        l1, l2 = e.eigenvalues
        rows.append((bp.P, bp.branch, e.state.V_d, e.state.I_d,
                     bp.stable, e.classification.value,
                     l1.real, l1.imag, l2.real, l2.imag))
    hopf_report = {
        "P_hopf": hopf.P_hopf,
        "omega_hopf": hopf.omega_hopf,
        "state": {"V_d": hopf.state.V_d, "I_d": hopf.state.I_d},
    }
    header = ("P,branch,V_d,I_d,stable,classification,"
              "lambda1_re,lambda1_im,lambda2_re,lambda2_im")
    return [
        ("branches.csv", lambda path: write_csv(path, header, rows)),
        ("hopf.json", lambda path: write_json(path, hopf_report)),
    ]


def _cmd_roa(cfg: RunConfig, args) -> list:
    rep = roa_report(cfg.input, cfg.circuit)
    return [
        ("roa_curve.csv", rep.curve.to_csv),
        ("roa.json", lambda path: write_json(path, rep.as_dict())),
    ]


def _cct_json(r, witness_csvs=None) -> dict:
    out = {
        "t_cr": r.t_cr,
        "bracket": [r.bracket[0], r.bracket[1]],
        "method": r.method,
        "fault_duration": r.fault_duration,
        "faulted_equilibrium": r.faulted_equilibrium,
    }
    if witness_csvs is not None:
        out["witness_csvs"] = witness_csvs
        out["witness_times"] = [r.witness_times[0], r.witness_times[1]]
    return out


def _cmd_cct(cfg: RunConfig, args) -> list:
    s = _load_scenario(args.scenario, cfg.input)
    bracket = _pair(args.bracket, "--bracket") if args.bracket else None
    report = {"scenario": _scenario_json(s)}
    artifacts = []
    if args.method in ("bisection", "both"):
        rb = find_cct_bisection(s, cfg.circuit, cfg.integrator,
                                bracket=bracket, tol_t=args.tol_t)
        names = {"converged": "witness_converged.csv",
                 "diverged": "witness_diverged.csv"}
        artifacts.append((names["converged"], rb.witness_converged.to_csv))
        artifacts.append((names["diverged"], rb.witness_diverged.to_csv))
        report["bisection"] = _cct_json(rb, witness_csvs=names)
    if args.method in ("roa", "both"):
        rr = find_cct_roa(s, cfg.circuit, cfg.integrator)
        report["roa_exit"] = _cct_json(rr)
    if args.method == "both":
        report["method_gap"] = abs(report["bisection"]["t_cr"]
                                   - report["roa_exit"]["t_cr"])
    artifacts.append(("cct.json", lambda path: write_json(path, report)))
    return artifacts


def _cmd_pv_curve(cfg: RunConfig, args) -> list:
    p_max = args.p_max
    if p_max is None:
        p_max = 0.999 * max_loadability(cfg.input.E_d, cfg.circuit)
    if not (0.0 <= args.p_min < p_max):
        raise ConfigError("require 0 <= --p-min < --p-max")
    if args.steps < 2:
        raise ConfigError("--steps must be >= 2")
    grid = np.linspace(args.p_min, p_max, args.steps)
    nan = float("nan")
    rows = [(pt.P,
             nan if pt.V_high is None else pt.V_high,
             nan if pt.V_low is None else pt.V_low)
            for pt in pv_curve(cfg.input.E_d, cfg.circuit, grid)]
    return [("pv_curve.csv",
             lambda path: write_csv(path, "P,V_high,V_low", rows))]


_HANDLERS = {
    "equilibria": _cmd_equilibria,
    "simulate": _cmd_simulate,
    "bifurcate": _cmd_bifurcate,
    "roa": _cmd_roa,
    "cct": _cmd_cct,
    "pv-curve": _cmd_pv_curve,
}


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="JSON run config (default: bundled reference "
                             "operating point)")
    common.add_argument("--out", type=Path, default=None,
                        help="output directory (default: config output_dir)")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for sampling-based subroutines "
                             "(default: config seed)")

    p = _Parser(prog="cpldyn",
                description="Voltage-stability analyses for a grid-connected "
                            "constant-power load")
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("equilibria", parents=[common],
                   help="solve equilibria, spectra, classifications, P_max")

    sim = sub.add_parser("simulate", parents=[common],
                         help="integrate a run, optionally with a fault/clear "
                              "sequence")
    sim.add_argument("--t-end", type=float, default=None,
                     help="end time in s (default 0.2, or t_start+0.2 with "
                          "a scenario)")
    sim.add_argument("--scenario", type=Path, default=None,
                     help="scenario JSON {base?, kind, faulted_value, t_start?}")
    sim.add_argument("--t-clear", type=float, default=None,
                     help="fault clearing time in s (requires --scenario)")
    sim.add_argument("--x0", type=str, default=None, metavar="V_d,I_d",
                     help="initial state (default: stable equilibrium)")
    sim.add_argument("--abc", action="store_true",
                     help="also write three-phase waveforms "
                          "(trajectory_abc.csv)")

    bif = sub.add_parser("bifurcate", parents=[common],
                         help="equilibrium branches over a load-power range "
                              "plus the Hopf point")
    bif.add_argument("--p-min", type=float, default=1000.0)
    bif.add_argument("--p-max", type=float, default=30000.0)
    bif.add_argument("--steps", type=int, default=61)

    sub.add_parser("roa", parents=[common],
                   help="trace the unstable limit cycle bounding the region "
                        "of attraction")

    cct = sub.add_parser("cct", parents=[common],
                         help="critical clearing time for a disturbance "
                              "scenario")
    cct.add_argument("--scenario", type=Path, required=True,
                     help="scenario JSON {base?, kind, faulted_value, t_start?}")
    cct.add_argument("--method", choices=("bisection", "roa", "both"),
                     default="bisection")
    cct.add_argument("--bracket", type=str, default=None, metavar="T_LO,T_HI",
                     help="clearing-time bracket (default: "
                          "(t_start+tol, t_start+0.2))")
    cct.add_argument("--tol-t", type=float, default=1e-4,
                     help="bisection time tolerance in s")

    pv = sub.add_parser("pv-curve", parents=[common],
                        help="static P-V characteristic")
    pv.add_argument("--p-min", type=float, default=0.0)
    pv.add_argument("--p-max", type=float, default=None,
                    help="default: 0.999 * loadability limit")
    pv.add_argument("--steps", type=int, default=200)

    return p


def _effective_config(args) -> RunConfig:
    cfg = load_run_config(args.config if args.config is not None
                          else paper_config_path())
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = _effective_config(args)
        artifacts = _HANDLERS[args.command](cfg, args)
    except CpldynError as e:
        _emit_error(type(e).__name__, str(e))
        return 2 if isinstance(e, ConfigError) else 3
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    for name, write in artifacts:
        path = cfg.output_dir / name
        write(path)
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
