"""Scenario files: JSON documents describing one parameter set and its experiments."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from replidyn.game_model import EconomicPrimitives, GameParams, PopulationState, validate
from replidyn.integrate import IntegratorOptions, Method

__all__ = [
    "OUTPUT_KINDS",
    "ParseError",
    "ScenarioError",
    "ScenarioFile",
    "ValidationError",
    "bundled_scenarios",
    "load_scenario",
    "parse_scenario",
    "serialize_scenario",
]

TOP_LEVEL_KEYS = ("name", "u1", "u2", "u3", "u4", "psi", "mu", "primitives",
                  "initial_conditions", "integrator", "outputs")
PRIMITIVE_KEYS = ("p", "cmg", "delta", "cf")
INTEGRATOR_KEYS = tuple(f.name for f in fields(IntegratorOptions))
OUTPUT_KINDS = ("trajectory_csv", "timeseries_svg", "portrait_svg", "basins_csv")


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line, self.column = line, column


class ValidationError(ScenarioError):
    def __init__(self, violations: list[str]):
        super().__init__("invalid parameters: " + "; ".join(violations))
        self.violations = violations


@dataclass
class ScenarioFile:
    name: str
    params: GameParams
    initial_conditions: list[PopulationState]
    integrator: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    # True when psi/mu were written explicitly (they win over primitives)
    direct_markups: bool = True
    warnings: list[str] = field(default_factory=list)

    @property
    def options(self) -> IntegratorOptions:
        return IntegratorOptions(**self.integrator)

    @property
    def primitives(self) -> EconomicPrimitives | None:
        return self.params.primitives


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _reject_unknown(obj: dict, allowed: tuple[str, ...], where: str):
    for key in obj:
        if key not in allowed:
            raise ParseError(f"unknown key {key!r} in {where}")


def _parse_integrator(raw) -> dict:
    if not isinstance(raw, dict):
        raise ParseError("integrator: expected an object")
    _reject_unknown(raw, INTEGRATOR_KEYS, "integrator")
    out = {}
    for key, value in raw.items():
        if key == "method":
            try:
                out[key] = Method(value).value
            except ValueError:
                raise ParseError(f"integrator.method: unknown method {value!r}") from None
        elif key.startswith("stop_on_"):
            if not isinstance(value, bool):
                raise ParseError(f"integrator.{key}: expected true or false")
            out[key] = value
        elif key == "step" and value is None:
            out[key] = None
        else:
            out[key] = _number(value, f"integrator.{key}")
    try:
        IntegratorOptions(**out)
    except ValueError as exc:
        raise ParseError(f"integrator: {exc}") from None
    return out


def parse_scenario(text: bytes | str) -> ScenarioFile:
    """Parse and validate a scenario document.

    Raises :class:`ParseError` for malformed JSON or schema problems and
    :class:`ValidationError` when the game parameters break the ordering
    assumptions.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("scenario must be a JSON object")
    _reject_unknown(doc, TOP_LEVEL_KEYS, "scenario")

    name = doc.get("name", "scenario")
    if not isinstance(name, str) or not name:
        raise ParseError("name: expected a non-empty string")
    for key in ("u1", "u2", "u3", "u4"):
        if key not in doc:
            raise ParseError(f"missing required key {key!r}")
    us = [_number(doc[k], k) for k in ("u1", "u2", "u3", "u4")]

    primitives = None
    if "primitives" in doc:
        raw = doc["primitives"]
        if not isinstance(raw, dict):
            raise ParseError("primitives: expected an object")
        _reject_unknown(raw, PRIMITIVE_KEYS, "primitives")
        missing = [k for k in PRIMITIVE_KEYS if k not in raw]
        if missing:
            raise ParseError(f"primitives: missing {', '.join(missing)}")
        primitives = EconomicPrimitives(*(_number(raw[k], f"primitives.{k}") for k in PRIMITIVE_KEYS))
    has_psi, has_mu = "psi" in doc, "mu" in doc
    if has_psi != has_mu:
        raise ParseError("psi and mu must be given together")
    if not has_psi and primitives is None:
        raise ParseError("need either psi and mu or primitives")
    psi = _number(doc["psi"], "psi") if has_psi else None
    mu = _number(doc["mu"], "mu") if has_mu else None

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        params = GameParams.build(*us, psi=psi, mu=mu, primitives=primitives)
    messages = [str(w.message) for w in caught]
    violations = validate(params)
    if violations:
        raise ValidationError(violations)

    ics = []
    raw_ics = doc.get("initial_conditions", [])
    if not isinstance(raw_ics, list):
        raise ParseError("initial_conditions: expected a list of [x, y] pairs")
    for k, pair in enumerate(raw_ics):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError(f"initial_conditions[{k}]: expected [x, y]")
        x, y = (_number(v, f"initial_conditions[{k}]") for v in pair)
        try:
            ics.append(PopulationState(x, y))
        except ValueError as exc:
            raise ParseError(f"initial_conditions[{k}]: {exc}") from None

    integrator = _parse_integrator(doc.get("integrator", {}))
    outputs = doc.get("outputs", [])
    if not isinstance(outputs, list) or not all(isinstance(o, str) for o in outputs):
        raise ParseError("outputs: expected a list of strings")
    for o in outputs:
        if o not in OUTPUT_KINDS:
            raise ParseError(f"outputs: unknown artifact {o!r}")
    return ScenarioFile(name, params, ics, integrator, list(outputs), has_psi, messages)


def _num_out(v: float):
    return int(v) if v.is_integer() and abs(v) < 2**53 else v


def serialize_scenario(sf: ScenarioFile) -> str:
    """JSON text that :func:`parse_scenario` maps back to the same content."""
    p = sf.params
    doc: dict = {"name": sf.name}
    for key in ("u1", "u2", "u3", "u4"):
        doc[key] = _num_out(getattr(p, key))
    if sf.direct_markups or p.primitives is None:
        doc["psi"] = _num_out(p.psi)
        doc["mu"] = _num_out(p.mu)
    if p.primitives is not None:
        doc["primitives"] = {k: _num_out(getattr(p.primitives, k)) for k in PRIMITIVE_KEYS}
    doc["initial_conditions"] = [[s.x, s.y] for s in sf.initial_conditions]
    doc["integrator"] = dict(sf.integrator)
    doc["outputs"] = list(sf.outputs)
    for value in doc["integrator"].values():
        if isinstance(value, float) and not math.isfinite(value):
            raise ValueError("integrator options must be finite to serialize")
    return json.dumps(doc, indent=2) + "\n"


def bundled_scenarios() -> dict[str, str]:
    """Names and JSON text of the scenarios shipped with the package."""
    root = resources.files("replidyn.cli_io") / "scenarios"
    return {
        entry.name: entry.read_text(encoding="utf-8")
        for entry in sorted(root.iterdir(), key=lambda e: e.name)
        if entry.name.endswith(".json")
    }


def load_scenario(ref: str | Path) -> ScenarioFile:
    """Load a scenario from a path, falling back to a bundled scenario of that name."""
    path = Path(ref)
    if path.is_file():
        return parse_scenario(path.read_bytes())
    bundled = bundled_scenarios()
    key = path.name if path.name.endswith(".json") else path.name + ".json"
    if key in bundled:
        return parse_scenario(bundled[key])
    raise FileNotFoundError(f"no scenario file {str(ref)!r} (bundled: {', '.join(bundled)})")
