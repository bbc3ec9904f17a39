"""Experiment configuration: JSON schema, parsing and semantic validation.

A config describes one measurement of an observable ``F`` by a classical
pointer. Each eigenvalue of ``F`` is a *branch* with an amplitude, a pointer
domain and a pointer label. See ``configs/spin_half.json`` for the shipped
default.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import DegenerateSpectrum, InvariantViolation, ParseError
from .quantum import QuantumObservable, eigendecompose

SCHEMA_VERSION = 1
AMPLITUDE_TOL = 1e-10

_number = {"type": "number"}
_complex = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}]}
_rect = {"type": "array", "items": {"type": ["number", "null"]}, "minItems": 2, "maxItems": 4}
_domain = {"type": "array", "items": _rect, "minItems": 1}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "observable", "branches", "coupling", "duration", "grid", "ready"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "observable": {"type": "array", "items": {"type": "array", "items": _complex}, "minItems": 2},
        "branches": {
            "type": "array",
            "minItems": 2,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["eigenvalue", "amplitude", "label", "domain"],
                "properties": {
                    "eigenvalue": _number,
                    "amplitude": {"oneOf": [
                        _complex,
                        {"type": "object", "additionalProperties": False, "required": ["probability"],
                         "properties": {"probability": _number, "phase": _number}},
                    ]},
                    "label": _number,
                    "domain": _domain,
                },
            },
        },
        "coupling": _number,
        "duration": _number,
        "hbar": {"type": "number", "exclusiveMinimum": 0},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["q_min", "q_max", "p_min", "p_max", "n_q", "n_p"],
            "properties": {
                "q_min": _number, "q_max": _number, "p_min": _number, "p_max": _number,
                "n_q": {"type": "integer"}, "n_p": {"type": "integer"},
                "orientation": {"enum": [1, -1]},
            },
        },
        "ready": {
            "type": "object",
            "additionalProperties": False,
            "required": ["support"],
            "properties": {
                "is_pointer": {"type": "boolean"},
                "domain": {"oneOf": [_domain, {"type": "null"}]},
                "label": _number,
                "support": _rect,
                "q_profile_power": {"type": "integer", "minimum": 0},
            },
        },
        "pointer_width": {"type": "number", "minimum": 0},
        "stepper": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["characteristics", "generic-stepper"]},
                "n_steps": {"type": "integer", "minimum": 1},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"scales": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
        },
        "probes": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"random": {"type": "integer", "minimum": 0}},
        },
    },
}

DEFAULTS: dict[str, Any] = {
    "hbar": 1.0,
    "pointer_width": 2.0,
    "stepper": {"method": "characteristics", "n_steps": 512},
    "sweep": {"scales": [1, 2, 5, 10]},
    "probes": {"random": 2},
}
READY_DEFAULTS = {"is_pointer": False, "domain": None, "label": 0.5, "q_profile_power": 4}


def _to_complex(x) -> complex:
    if isinstance(x, dict):
        prob = float(x["probability"])
        if prob < 0:
            raise ValueError("probability must be non-negative")
        return complex(np.sqrt(prob) * np.exp(1j * float(x.get("phase", 0.0))))
    if isinstance(x, (list, tuple)):
        return complex(float(x[0]), float(x[1]))
    return complex(float(x))


@dataclass(frozen=True)
class Branch:
    eigenvalue: float
    amplitude: complex
    label: float
    domain: tuple  # rectangles (q0, q1, p0, p1); p bounds may be None


@dataclass(frozen=True)
class ExperimentConfig:
    observable: np.ndarray
    branches: tuple
    coupling: float
    duration: float
    hbar: float
    grid: dict
    ready_support: tuple
    ready_is_pointer: bool = False
    ready_domain: tuple | None = None
    ready_label: float = 0.5
    q_profile_power: int = 4
    pointer_width: float = 2.0
    method: str = "characteristics"
    n_steps: int = 512
    sweep_scales: tuple = (1, 2, 5, 10)
    random_probes: int = 2
    name: str = ""
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def dim(self) -> int:
        return self.observable.shape[0]

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([b.amplitude for b in self.branches], dtype=complex)

    def with_updates(self, **changes) -> "ExperimentConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return ExperimentConfig(**data)

    def scaled(self, factor: float) -> "ExperimentConfig":
        """Coupling times ``factor`` with all q geometry stretched by the same factor.

        Shifts measured in cells are unchanged, so a feasible geometry stays
        feasible and whole-cell shifts stay whole-cell.
        """
        def stretch(rect):
            q0, q1, *rest = rect
            return (q0 * factor, q1 * factor, *rest)

        grid = dict(self.grid, q_min=self.grid["q_min"] * factor, q_max=self.grid["q_max"] * factor)
        branches = tuple(Branch(b.eigenvalue, b.amplitude, b.label, tuple(stretch(r) for r in b.domain))
                         for b in self.branches)
        ready_dom = None if self.ready_domain is None else tuple(stretch(r) for r in self.ready_domain)
        return self.with_updates(coupling=self.coupling * factor, grid=grid, branches=branches,
                                 ready_support=stretch(self.ready_support), ready_domain=ready_dom)


def _rect_tuple(r) -> tuple:
    r = list(r) + [None] * (4 - len(r))
    return tuple(None if v is None else float(v) for v in r)


def parse_config(data: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from decoded JSON.

    Raises ParseError for structural problems (schema violations, unknown
    fields). Semantic checks are done by :func:`check_config`.
    """
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: [str(x) for x in e.absolute_path])
    if errors:
        lines = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ParseError("; ".join(lines))
    merged = copy.deepcopy(DEFAULTS)
    for key, val in data.items():
        if isinstance(val, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **val}
        else:
            merged[key] = val
    ready = {**READY_DEFAULTS, **merged["ready"]}
    try:
        obs = np.array([[_to_complex(x) for x in row] for row in merged["observable"]], dtype=complex)
        branches = tuple(
            Branch(float(b["eigenvalue"]), _to_complex(b["amplitude"]), float(b["label"]),
                   tuple(_rect_tuple(r) for r in b["domain"]))
            for b in merged["branches"]
        )
    except (ValueError, TypeError) as exc:
        raise ParseError(str(exc)) from exc
    if obs.ndim != 2 or obs.shape[0] != obs.shape[1]:
        raise ParseError(f"observable: expected a square matrix, got shape {obs.shape}")
    grid = {k: merged["grid"][k] for k in ("q_min", "q_max", "p_min", "p_max", "n_q", "n_p")}
    grid["orientation"] = merged["grid"].get("orientation", 1)
    return ExperimentConfig(
        observable=obs,
        branches=branches,
        coupling=float(merged["coupling"]),
        duration=float(merged["duration"]),
        hbar=float(merged["hbar"]),
        grid=grid,
        ready_support=_rect_tuple(ready["support"]),
        ready_is_pointer=bool(ready["is_pointer"]),
        ready_domain=None if ready["domain"] is None else tuple(_rect_tuple(r) for r in ready["domain"]),
        ready_label=float(ready["label"]),
        q_profile_power=int(ready["q_profile_power"]),
        pointer_width=float(merged["pointer_width"]),
        method=merged["stepper"]["method"],
        n_steps=int(merged["stepper"]["n_steps"]),
        sweep_scales=tuple(float(s) for s in merged["sweep"]["scales"]),
        random_probes=int(merged["probes"]["random"]),
        name=merged.get("name", ""),
        raw=data,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data)


def default_config_path() -> Path:
    return Path(str(resources.files("supmech") / "configs" / "spin_half.json"))


def default_config() -> ExperimentConfig:
    return load_config(default_config_path())


def check_config(config: ExperimentConfig, geometry: bool = True) -> list[tuple[str, str]]:
    """Semantic problems as ``(field, message)`` pairs; empty when the config is usable.

    Covers amplitude normalization, labels, and with ``geometry`` also the
    spectrum of F, the grid, domain disjointness and the pointer shifts.
    """
    # imported here: measurement depends on this module
    from .measurement import geometry_problems

    problems: list[tuple[str, str]] = []
    obs = config.observable
    if np.max(np.abs(obs - obs.conj().T)) > 1e-12:
        problems.append(("observable", "not Hermitian"))
    if len(config.branches) != config.dim:
        problems.append(("branches", f"{len(config.branches)} branches for a {config.dim}-dimensional observable"))
    norm = float(np.sum(np.abs(config.amplitudes) ** 2))
    if abs(norm - 1.0) > AMPLITUDE_TOL:
        problems.append(("branches.amplitude", f"sum of |c_j|^2 is {norm!r}, not 1"))
    labels = [b.label for b in config.branches] + ([config.ready_label] if config.ready_label is not None else [])
    for j, b in enumerate(config.branches):
        if b.label == 0:
            problems.append((f"branches[{j}].label", "pointer labels must be nonzero"))
    if config.ready_label == 0:
        problems.append(("ready.label", "pointer labels must be nonzero"))
    if len(set(labels)) != len(labels):
        problems.append(("branches.label", f"pointer labels {labels} are not distinct"))
    if not np.isfinite(config.duration):
        problems.append(("duration", "must be finite"))
    if config.ready_is_pointer and config.ready_domain is None:
        problems.append(("ready.domain", "required when ready.is_pointer is true"))
    if not geometry:
        return problems
    if not any(f == "observable" for f, _ in problems):
        try:
            eigendecompose(QuantumObservable(obs))
        except DegenerateSpectrum as exc:
            problems.append(("observable", str(exc)))
    problems.extend(geometry_problems(config))
    return problems


def validate_config(path) -> list[str]:
    """Line-itemized diagnostics for the config at ``path`` (empty list when valid).

    Raises ParseError when the file cannot be read or does not match the schema.
    """
    config = load_config(path)
    return [f"{f}: {m}" for f, m in check_config(config)]


def require_valid(config: ExperimentConfig) -> ExperimentConfig:
    problems = check_config(config)
    if problems:
        raise InvariantViolation(problems)
    return config
