"""Run configuration: strict JSON ingestion shared by the CLI and tests.

A config file is a JSON object with sections ``circuit`` and ``input``
(required) plus ``integrator``, ``output_dir``, and ``seed`` (optional).
Unknown keys anywhere are rejected, as are booleans where numbers are
expected; every omitted field falls back to a documented default
(``IntegratorConfig()`` field defaults, ``output_dir="out"``, ``seed=0``).
The packaged ``data/paper.json`` carries the reference operating point used
throughout the docs and tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from importlib.resources import files
from pathlib import Path

from .errors import ConfigError
from .integrate import IntegratorConfig, Method
from .model import CircuitParams, GridInput


@dataclass(frozen=True)
class RunConfig:
    circuit: CircuitParams
    input: GridInput
    integrator: IntegratorConfig
    output_dir: Path
    seed: int

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")


def paper_config_path() -> Path:
    """Filesystem path of the bundled reference config."""
    return Path(str(files("cpldyn").joinpath("data/paper.json")))


def _require_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(obj).__name__}")
    return obj


def _reject_unknown(obj: dict, allowed, where: str) -> None:
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


_MISSING = object()


def _number(obj: dict, key: str, where: str, default=_MISSING) -> float:
    if key not in obj:
        if default is _MISSING:
            raise ConfigError(f"missing required key {key!r} in {where}")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    return float(v)


def _circuit_from(obj: dict) -> CircuitParams:
    _reject_unknown(obj, ("R", "L", "C_eq", "omega"), "circuit")
    return CircuitParams(
        R=_number(obj, "R", "circuit"),
        L=_number(obj, "L", "circuit"),
        C_eq=_number(obj, "C_eq", "circuit"),
        omega=_number(obj, "omega", "circuit"),
    )


def _input_from(obj: dict) -> GridInput:
    _reject_unknown(obj, ("E_d", "E_q", "P_pev"), "input")
    return GridInput(
        E_d=_number(obj, "E_d", "input"),
        E_q=_number(obj, "E_q", "input", default=0.0),
        P_pev=_number(obj, "P_pev", "input"),
    )


def _integrator_from(obj: dict) -> IntegratorConfig:
    numeric = ("dt", "abs_tol", "rel_tol", "dt_min", "dt_max", "v_eps")
    allowed = numeric + ("method", "blowup_norm", "enforce_quadrant")
    _reject_unknown(obj, allowed, "integrator")
    kwargs = {}
    if "method" in obj:
        raw = obj["method"]
        try:
            kwargs["method"] = Method(raw)
        except ValueError:
            valid = ", ".join(m.value for m in Method)
            raise ConfigError(
                f"integrator.method must be one of: {valid}; got {raw!r}") from None
    for key in numeric:
        if key in obj:
            kwargs[key] = _number(obj, key, "integrator")
    if "blowup_norm" in obj and obj["blowup_norm"] is not None:
        kwargs["blowup_norm"] = _number(obj, "blowup_norm", "integrator")
    if "enforce_quadrant" in obj:
        if not isinstance(obj["enforce_quadrant"], bool):
            raise ConfigError("integrator.enforce_quadrant must be a boolean")
        kwargs["enforce_quadrant"] = obj["enforce_quadrant"]
    return IntegratorConfig(**kwargs)


def run_config_from_dict(obj: dict) -> RunConfig:
    """Build and validate a RunConfig from already-parsed JSON."""
    _require_mapping(obj, "config")
    _reject_unknown(obj, ("circuit", "input", "integrator", "output_dir", "seed"),
                    "config")
    for section in ("circuit", "input"):
        if section not in obj:
            raise ConfigError(f"missing required section {section!r}")
    seed = obj.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    out = obj.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError(f"output_dir must be a non-empty string, got {out!r}")
    return RunConfig(
        circuit=_circuit_from(_require_mapping(obj["circuit"], "circuit")),
        input=_input_from(_require_mapping(obj["input"], "input")),
        integrator=_integrator_from(
            _require_mapping(obj.get("integrator", {}), "integrator")),
        output_dir=Path(out),
        seed=seed,
    )


def load_run_config(path) -> RunConfig:
    """Parse a JSON config file into a validated RunConfig."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {p}: {e}") from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {p} is not valid JSON: {e}") from e
    return run_config_from_dict(obj)
