"""Run configuration: one JSON document describing the lens setting, the
isotopy, the decomposition threshold and the solver budget.

Structural problems are reported with the JSON line/column (syntax) or the
key path (schema); semantic problems such as non-coprime weights or a
non-invariant resonant term are reported before any computation starts.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import jsonschema

from .core import LensSetting
from .dynamics import HamiltonianTerm, IsotopyStep
from .errors import ConfigError

_int_list = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "required": ["setting", "isotopy"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "setting": {
            "type": "object",
            "required": ["n", "k", "weights"],
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "k": {"type": "integer", "minimum": 2},
                "weights": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
            },
        },
        "isotopy": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind", "duration"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"enum": ["diagonal", "resonant"]},
                    "duration": {"type": "number"},
                    "coefficients": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    "amplitude": {"type": "number"},
                    "phase": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    "a": _int_list,
                    "b": _int_list,
                },
                "allOf": [
                    {
                        "if": {"properties": {"kind": {"const": "diagonal"}}},
                        "then": {"required": ["coefficients"]},
                        "else": {"required": ["amplitude", "a", "b"]},
                    }
                ],
            },
        },
        "theta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sphere_samples": {"type": "integer", "minimum": 1},
                "tau_samples": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "cluster_tol": {"type": "number", "exclusiveMinimum": 0},
                "match_tol": {"type": "number", "exclusiveMinimum": 0},
                "newton_tol": {"type": "number", "exclusiveMinimum": 0},
                "maxiter": {"type": "integer", "minimum": 1},
                "genfun_sphere_starts": {"type": "integer", "minimum": 1},
                "genfun_t_starts": {"type": "integer", "minimum": 1},
                "t_window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                k: {"type": "number", "exclusiveMinimum": 0}
                for k in (
                    "homogeneity", "equivariance", "symplecticity", "composition",
                    "dg_symmetry", "euler", "lens_invariance", "critical_value", "closure",
                )
            } | {"sample_size": {"type": "integer", "minimum": 1}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "report": {"type": ["string", "null"]},
                "plot_data": {"type": ["string", "null"]},
            },
        },
        "fault_injection": {
            "type": "object",
            "required": ["factor_index", "eta"],
            "additionalProperties": False,
            "properties": {
                "factor_index": {"type": "integer", "minimum": 0},
                "eta": {"type": "number"},
            },
        },
    },
}

SOLVER_DEFAULTS = {
    "tol": 1e-8,
    "cluster_tol": 1e-5,
    "match_tol": 1e-6,
    "newton_tol": 1e-10,
    "maxiter": 100,
    "genfun_sphere_starts": 64,
    "genfun_t_starts": 8,
    "t_window": [0.0, 1.0],
    "seed": 0,
}
THETA_DEFAULT = 0.1
CHECK_DEFAULTS = {
    "homogeneity": 1e-9,
    "equivariance": 1e-9,
    "symplecticity": 1e-8,
    "composition": 1e-8,
    "dg_symmetry": 1e-6,
    "euler": 1e-9,
    "lens_invariance": 1e-10,
    "critical_value": 1e-9,
    "closure": 1e-7,
    "sample_size": 64,
}


def _path(error) -> str:
    parts = []
    for p in error.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else (f".{p}" if parts else str(p)))
    return "".join(parts) or "<root>"


@dataclass(frozen=True)
class RunConfig:
    setting: LensSetting
    steps: tuple
    theta: float
    solver: dict
    checks: dict
    output: dict
    fault_injection: dict | None
    name: str = ""

    @property
    def seed(self) -> int:
        return int(self.solver["seed"])

    @property
    def grid(self) -> tuple:
        return int(self.solver["sphere_samples"]), int(self.solver["tau_samples"])

    @property
    def genfun_starts(self) -> tuple:
        return int(self.solver["genfun_sphere_starts"]), int(self.solver["genfun_t_starts"])

    def with_seed(self, seed: int | None) -> "RunConfig":
        if seed is None:
            return self
        solver = dict(self.solver, seed=int(seed))
        return replace(self, solver=solver)

    def to_dict(self) -> dict:
        """Resolved configuration with every default filled in."""
        out = {
            "setting": self.setting.to_dict(),
            "isotopy": [s.to_dict() for s in self.steps],
            "theta": self.theta,
            "solver": dict(sorted(self.solver.items())),
            "checks": dict(sorted(self.checks.items())),
        }
        if self.name:
            out["name"] = self.name
        if self.fault_injection is not None:
            out["fault_injection"] = dict(self.fault_injection)
        return out

    def digest(self) -> str:
        """SHA-256 of the resolved configuration, output paths excluded."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _step(raw: dict, index: int) -> IsotopyStep:
    where = f"isotopy[{index}]"
    if raw["kind"] == "diagonal":
        extra = {"amplitude", "phase", "a", "b"} & raw.keys()
        if extra:
            raise ConfigError(f"{where}: diagonal step does not take {sorted(extra)}")
        term = HamiltonianTerm.diagonal(raw["coefficients"])
    else:
        if "coefficients" in raw:
            raise ConfigError(f"{where}: resonant step does not take 'coefficients'")
        phase = complex(*raw.get("phase", [1.0, 0.0]))
        if phase == 0:
            raise ConfigError(f"{where}.phase: must be nonzero")
        try:
            term = HamiltonianTerm.resonant(raw["amplitude"], raw["a"], raw["b"], phase)
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return IsotopyStep(term, float(raw["duration"]))


def parse_config(doc: dict) -> RunConfig:
    """Validate a decoded JSON document and build a :class:`RunConfig`."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        first = errors[0]
        raise ConfigError(f"config key {_path(first)}: {first.message}")
    s = doc["setting"]
    setting = LensSetting(s["n"], s["k"], tuple(s["weights"]))
    steps = []
    for i, raw in enumerate(doc["isotopy"]):
        step = _step(raw, i)
        try:
            step.hamiltonian.check_invariant(setting)
        except ConfigError as exc:
            raise ConfigError(f"isotopy[{i}]: {exc}") from None
        steps.append(step)
    solver = dict(SOLVER_DEFAULTS)
    solver["sphere_samples"] = 32 * setting.n**2
    solver["tau_samples"] = 64
    solver.update(copy.deepcopy(doc.get("solver", {})))
    solver["t_window"] = [float(x) for x in solver["t_window"]]
    lo, hi = solver["t_window"]
    if not -1.0 < lo <= hi < 3.0:
        raise ConfigError(f"config key solver.t_window: must satisfy -1 < lo <= hi < 3, got {[lo, hi]}")
    output = {"report": None, "plot_data": None}
    output.update(doc.get("output", {}))
    return RunConfig(
        setting=setting,
        steps=tuple(steps),
        theta=float(doc.get("theta", THETA_DEFAULT)),
        solver=solver,
        checks={**CHECK_DEFAULTS, **doc.get("checks", {})},
        output=output,
        fault_injection=doc.get("fault_injection"),
        name=doc.get("name", ""),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(doc)
