"""Hazard-traceability model: losses, hazards, constraints, control actions,
unsafe control actions, and loss scenarios, with parsing, completeness
checking, and violation-to-loss traceability.

The model is data, loaded from a small declarative text format (one entity
per block, ``kind id:`` header plus indented ``key: value`` lines, link lists
comma-separated).  A bundled model covering the hover take-off/landing study
ships with the package and is immutable after load.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources


class ModelError(ValueError):
    """Base for model-format and integrity errors."""


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DanglingReferenceError(ModelError):
    def __init__(self, referrer: str, missing_id: str) -> None:
        super().__init__(f"{referrer} references unknown id '{missing_id}'")
        self.missing_id = missing_id


class DuplicateIdError(ModelError):
    def __init__(self, kind: str, entity_id: str) -> None:
        super().__init__(f"duplicate {kind} id '{entity_id}'")
        self.entity_id = entity_id


class UcaCategory(Enum):
    NOT_PROVIDING = "NotProviding"
    PROVIDING = "Providing"
    TOO_EARLY_LATE_OUT_OF_ORDER = "TooEarlyLateOutOfOrder"
    STOPPED_TOO_SOON_APPLIED_TOO_LONG = "StoppedTooSoonAppliedTooLong"


@dataclass(frozen=True)
class Loss:
    id: str
    description: str


@dataclass(frozen=True)
class Hazard:
    id: str
    description: str
    losses: frozenset[str]


@dataclass(frozen=True)
class SystemConstraint:
    id: str
    text: str
    hazard: str
    parameters: tuple[tuple[str, float], ...] = ()

    def parameter(self, name: str) -> float | None:
        for key, value in self.parameters:
            if key == name:
                return value
        return None


@dataclass(frozen=True)
class ControlAction:
    name: str
    source: str
    target: str
    feedbacks: tuple[str, ...] = ()


@dataclass(frozen=True)
class UnsafeControlAction:
    id: str
    action: str
    category: UcaCategory
    context: str
    hazards: frozenset[str]
    note: str = ""


@dataclass(frozen=True)
class LossScenario:
    id: str
    scenario_class: int
    ucas: frozenset[str]
    description: str


@dataclass(frozen=True)
class RuleResult:
    rule: str
    description: str
    failures: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass(frozen=True)
class CompletenessReport:
    results: tuple[RuleResult, ...]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def result(self, rule: str) -> RuleResult:
        for r in self.results:
            if r.rule == rule:
                return r
        raise KeyError(rule)


@dataclass(frozen=True)
class TraceabilityGraph:
    losses: dict[str, Loss] = field(default_factory=dict)
    hazards: dict[str, Hazard] = field(default_factory=dict)
    constraints: dict[str, SystemConstraint] = field(default_factory=dict)
    actions: dict[str, ControlAction] = field(default_factory=dict)
    ucas: dict[str, UnsafeControlAction] = field(default_factory=dict)
    scenarios: dict[str, LossScenario] = field(default_factory=dict)
    waivers: dict[str, str] = field(default_factory=dict)  # action name -> reason

    def ucas_of_action(self, action_name: str) -> tuple[UnsafeControlAction, ...]:
        return tuple(u for u in self.ucas.values() if u.action == action_name)

    def constraint_for_hazard(self, hazard_id: str) -> SystemConstraint | None:
        for sc in self.constraints.values():
            if sc.hazard == hazard_id:
                return sc
        return None


_ID_PATTERNS = {
    "loss": re.compile(r"^L-[1-9]\d*$"),
    "hazard": re.compile(r"^H-[1-9]\d*$"),
    "constraint": re.compile(r"^SC-[1-9]\d*$"),
    "uca": re.compile(r"^UCA-[1-9]\d*$"),
}

_HEADER = re.compile(r"^(\w+)\s+(.+?):\s*$")
_BODY = re.compile(r"^\s+([\w ]+?):\s*(.*)$")

_KNOWN_KINDS = {"loss", "hazard", "constraint", "action", "uca", "scenario", "waiver"}


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def _parse_parameters(value: str, line: int) -> tuple[tuple[str, float], ...]:
    out = []
    for part in _split_list(value):
        if "=" not in part:
            raise ModelSyntaxError(f"parameter '{part}' is not name=value", line, 1)
        name, _, num = part.partition("=")
        try:
            out.append((name.strip(), float(num)))
        except ValueError:
            raise ModelSyntaxError(f"parameter '{part}' has a non-numeric value", line, 1)
    return tuple(out)


def load_model(document: str) -> TraceabilityGraph:
    """Parse the declarative model text into a traceability graph.

    Raises ModelSyntaxError (with line/column), DuplicateIdError, or
    DanglingReferenceError.  An empty document yields an empty, valid graph.
    """
    blocks: list[tuple[str, str, int, dict[str, tuple[str, int]]]] = []
    current: tuple[str, str, int, dict[str, tuple[str, int]]] | None = None

    for lineno, raw in enumerate(document.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not raw[0].isspace():
            m = _HEADER.match(raw)
            if m is None:
                col = len(raw) - len(raw.lstrip()) + 1
                raise ModelSyntaxError("expected 'kind id:' block header", lineno, col)
            kind, ident = m.group(1), m.group(2).strip()
            if kind not in _KNOWN_KINDS:
                raise ModelSyntaxError(f"unknown entity kind '{kind}'", lineno, 1)
            current = (kind, ident, lineno, {})
            blocks.append(current)
        else:
            if current is None:
                col = len(raw) - len(raw.lstrip()) + 1
                raise ModelSyntaxError("field line outside any block", lineno, col)
            m = _BODY.match(raw)
            if m is None:
                col = len(raw) - len(raw.lstrip()) + 1
                raise ModelSyntaxError("expected 'key: value' field line", lineno, col)
            key = m.group(1).strip()
            if key in current[3]:
                raise ModelSyntaxError(f"field '{key}' repeated in block", lineno, 1)
            current[3][key] = (m.group(2).strip(), lineno)

    graph = TraceabilityGraph()

    def want(fields: dict[str, tuple[str, int]], key: str, kind: str, ident: str,
             lineno: int, default: str | None = None) -> str:
        if key in fields:
            return fields[key][0]
        if default is not None:
            return default
        raise ModelSyntaxError(f"{kind} '{ident}' is missing field '{key}'", lineno, 1)

    for kind, ident, lineno, fields in blocks:
        if kind in _ID_PATTERNS and not _ID_PATTERNS[kind].match(ident):
            raise ModelSyntaxError(f"{kind} id '{ident}' has the wrong form", lineno, 1)
        if kind == "loss":
            if ident in graph.losses:
                raise DuplicateIdError(kind, ident)
            graph.losses[ident] = Loss(ident, want(fields, "description", kind, ident, lineno))
        elif kind == "hazard":
            if ident in graph.hazards:
                raise DuplicateIdError(kind, ident)
            graph.hazards[ident] = Hazard(
                ident,
                want(fields, "description", kind, ident, lineno),
                frozenset(_split_list(want(fields, "losses", kind, ident, lineno, default=""))),
            )
        elif kind == "constraint":
            if ident in graph.constraints:
                raise DuplicateIdError(kind, ident)
            params = ()
            if "parameters" in fields:
                params = _parse_parameters(fields["parameters"][0], fields["parameters"][1])
            graph.constraints[ident] = SystemConstraint(
                ident,
                want(fields, "text", kind, ident, lineno),
                want(fields, "hazard", kind, ident, lineno),
                params,
            )
        elif kind == "action":
            if ident in graph.actions:
                raise DuplicateIdError(kind, ident)
            graph.actions[ident] = ControlAction(
                ident,
                want(fields, "source", kind, ident, lineno),
                want(fields, "target", kind, ident, lineno),
                _split_list(want(fields, "feedbacks", kind, ident, lineno, default="")),
            )
        elif kind == "uca":
            if ident in graph.ucas:
                raise DuplicateIdError(kind, ident)
            cat_text, cat_line = fields.get("category", ("", lineno))
            try:
                category = UcaCategory(cat_text)
            except ValueError:
                raise ModelSyntaxError(
                    f"uca '{ident}' category '{cat_text}' is not one of "
                    f"{[c.value for c in UcaCategory]}", cat_line, 1)
            graph.ucas[ident] = UnsafeControlAction(
                ident,
                want(fields, "action", kind, ident, lineno),
                category,
                want(fields, "context", kind, ident, lineno, default=""),
                frozenset(_split_list(want(fields, "hazards", kind, ident, lineno, default=""))),
                want(fields, "note", kind, ident, lineno, default=""),
            )
        elif kind == "scenario":
            if ident in graph.scenarios:
                raise DuplicateIdError(kind, ident)
            cls_text, cls_line = fields.get("class", ("", lineno))
            try:
                cls = int(cls_text)
            except ValueError:
                raise ModelSyntaxError(f"scenario '{ident}' class must be an integer", cls_line, 1)
            if cls not in (1, 2, 3, 4):
                raise ModelSyntaxError(f"scenario '{ident}' class must be 1..4", cls_line, 1)
            graph.scenarios[ident] = LossScenario(
                ident,
                cls,
                frozenset(_split_list(want(fields, "ucas", kind, ident, lineno, default=""))),
                want(fields, "description", kind, ident, lineno, default=""),
            )
        else:  # waiver
            if ident in graph.waivers:
                raise DuplicateIdError(kind, ident)
            graph.waivers[ident] = want(fields, "reason", kind, ident, lineno)

    _check_integrity(graph)
    return graph


def _check_integrity(graph: TraceabilityGraph) -> None:
    """Every referenced id must resolve.  Emptiness is a completeness matter,
    dangling links are a load error."""
    for hazard in graph.hazards.values():
        for loss_id in hazard.losses:
            if loss_id not in graph.losses:
                raise DanglingReferenceError(hazard.id, loss_id)
    for sc in graph.constraints.values():
        if sc.hazard and sc.hazard not in graph.hazards:
            raise DanglingReferenceError(sc.id, sc.hazard)
    for uca in graph.ucas.values():
        if uca.action not in graph.actions:
            raise DanglingReferenceError(uca.id, uca.action)
        for hazard_id in uca.hazards:
            if hazard_id not in graph.hazards:
                raise DanglingReferenceError(uca.id, hazard_id)
    for scenario in graph.scenarios.values():
        for uca_id in scenario.ucas:
            if uca_id not in graph.ucas:
                raise DanglingReferenceError(scenario.id, uca_id)
    for action_name in graph.waivers:
        if action_name not in graph.actions:
            raise DanglingReferenceError(f"waiver '{action_name}'", action_name)


def _numeric_suffix(entity_id: str) -> tuple[int, str]:
    m = re.search(r"(\d+)$", entity_id)
    return (int(m.group(1)) if m else 0, entity_id)


def serialize(graph: TraceabilityGraph) -> str:
    """Render a graph back to the declarative text format (stable order)."""
    out: list[str] = []

    def emit(kind: str, ident: str, fields: list[tuple[str, str]]) -> None:
        out.append(f"{kind} {ident}:")
        for key, value in fields:
            if value:
                out.append(f"  {key}: {value}")
        out.append("")

    for loss in sorted(graph.losses.values(), key=lambda e: _numeric_suffix(e.id)):
        emit("loss", loss.id, [("description", loss.description)])
    for hz in sorted(graph.hazards.values(), key=lambda e: _numeric_suffix(e.id)):
        emit("hazard", hz.id, [
            ("description", hz.description),
            ("losses", ", ".join(sorted(hz.losses, key=_numeric_suffix))),
        ])
    for sc in sorted(graph.constraints.values(), key=lambda e: _numeric_suffix(e.id)):
        emit("constraint", sc.id, [
            ("text", sc.text),
            ("hazard", sc.hazard),
            ("parameters", ", ".join(f"{k}={v}" for k, v in sc.parameters)),
        ])
    for action in graph.actions.values():
        emit("action", action.name, [
            ("source", action.source),
            ("target", action.target),
            ("feedbacks", ", ".join(action.feedbacks)),
        ])
    for uca in sorted(graph.ucas.values(), key=lambda e: _numeric_suffix(e.id)):
        emit("uca", uca.id, [
            ("action", uca.action),
            ("category", uca.category.value),
            ("context", uca.context),
            ("hazards", ", ".join(sorted(uca.hazards, key=_numeric_suffix))),
            ("note", uca.note),
        ])
    for scen in sorted(graph.scenarios.values(), key=lambda e: _numeric_suffix(e.id)):
        emit("scenario", scen.id, [
            ("class", str(scen.scenario_class)),
            ("ucas", ", ".join(sorted(scen.ucas, key=_numeric_suffix))),
            ("description", scen.description),
        ])
    for name, reason in graph.waivers.items():
        emit("waiver", name, [("reason", reason)])
    return "\n".join(out)


def check_completeness(graph: TraceabilityGraph) -> CompletenessReport:
    """Run the five structural completeness rules; failures are reported,
    never raised."""
    a = tuple(h.id for h in graph.hazards.values() if not h.losses)
    b = tuple(u.id for u in graph.ucas.values() if not u.hazards)
    c = tuple(s.id for s in graph.constraints.values() if not s.hazard)
    d = tuple(s.id for s in graph.scenarios.values() if not s.ucas)
    covered = {u.action for u in graph.ucas.values()} | set(graph.waivers)
    e = tuple(name for name in graph.actions if name not in covered)
    return CompletenessReport((
        RuleResult("a", "every hazard links at least one loss", a),
        RuleResult("b", "every unsafe control action links at least one hazard", b),
        RuleResult("c", "every constraint links exactly one hazard", c),
        RuleResult("d", "every loss scenario links at least one unsafe control action", d),
        RuleResult("e", "every control action has an unsafe control action or a waiver", e),
    ))


def uca_candidate_matrix(
    graph: TraceabilityGraph, action_name: str
) -> dict[UcaCategory, frozenset[str]]:
    """The four-guideword cell view of one control action's UCAs.

    Cells partition the action's UCAs: disjoint by construction (each UCA has
    exactly one category) and covering (every UCA lands in its cell).
    """
    if action_name not in graph.actions:
        raise KeyError(f"unknown control action '{action_name}'")
    cells: dict[UcaCategory, set[str]] = {cat: set() for cat in UcaCategory}
    for uca in graph.ucas.values():
        if uca.action == action_name:
            cells[uca.category].add(uca.id)
    return {cat: frozenset(ids) for cat, ids in cells.items()}


def trace_to_losses(graph: TraceabilityGraph, hazard_ids: set[str] | frozenset[str]) -> frozenset[str]:
    """Union of loss links over the given hazards."""
    out: set[str] = set()
    for hazard_id in hazard_ids:
        if hazard_id not in graph.hazards:
            raise KeyError(f"unknown hazard id '{hazard_id}'")
        out |= graph.hazards[hazard_id].losses
    return frozenset(out)


def load_model_file(path: str) -> TraceabilityGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return load_model(fh.read())


def load_bundled_model() -> TraceabilityGraph:
    """The bundled hover take-off/landing hazard analysis."""
    text = resources.files("hoversil").joinpath("data/vtol_landing.stpa").read_text("utf-8")
    return load_model(text)
