"""Compile (spec, results, metadata) into an interface description.

The mapping is a fixed table: point sensitivity renders a bar chart
(small multiples when several output variables are analyzed), range
sensitivity a line chart, goal seek a solution table plus a prediction
card, counterfactual a comparison table plus a prediction card, and
importance a tornado chart. Controls come from variable metadata:
sliders for continuous values, dropdowns for categoricals, persistent
scope chips for the scope, and visible constraint controls for
goal-seek constraints. Every control binds to the exact spec path it
edits.

Compilation is deterministic: identical inputs yield byte-identical
``ifacedesc.v1`` documents.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .analysis import ExperimentResult
from .data import Dataset
from .errors import ErrorFinding
from .jsontree import canonical_dumps, is_under, parse_path
from .spec import Experiment, Spec, SpecPatch

IFACE_VERSION = "ifacedesc.v1"
SLIDER_STEPS = 100


class CompileError(Exception):
    pass


class InteractionError(Exception):
    pass


class StaleRevisionError(InteractionError):
    def __init__(self, observed: int, current: int):
        super().__init__(f"revision {observed} is stale; current is {current}")
        self.current = current


@dataclass
class InterfaceDescription:
    views: list[dict]
    controls: list[dict]
    revision: int

    def to_tree(self) -> dict:
        return {"version": IFACE_VERSION, "revision": self.revision,
                "views": self.views, "controls": self.controls}

    def serialize(self) -> str:
        return canonical_dumps(self.to_tree())

    def control_by_id(self, control_id: str) -> dict | None:
        for c in self.controls:
            if c["controlId"] == control_id:
                return c
        return None


@dataclass(frozen=True)
class InteractionEvent:
    control_id: str
    new_value: Any
    revision: int


def _round_step(span: float) -> float:
    return span / SLIDER_STEPS if span > 0 else 1.0


def _slider(binding: str, label: str, lo: float, hi: float, value: Any,
            step: float | None = None) -> dict:
    return {"controlId": binding, "controlType": "slider", "bindingPath": binding,
            "label": label, "min": lo, "max": hi,
            "step": _round_step(hi - lo) if step is None else step,
            "currentValue": value}


def _dropdown(binding: str, label: str, options: list, value: Any) -> dict:
    return {"controlId": binding, "controlType": "dropdown", "bindingPath": binding,
            "label": label, "options": options, "currentValue": value}


def derive_controls(spec: Spec, ds: Dataset) -> list[dict]:
    """Controls for every adjustable part of the spec, scope chips first."""
    controls: list[dict] = []
    meta = ds.meta
    for col_name in sorted(spec.scope or {}):
        pred = (spec.scope or {})[col_name]
        binding = f"scope.{col_name}"
        if pred.is_raw:
            shown: Any = pred.raw
        elif pred.function is not None:
            shown = f"{pred.function}"
        else:
            shown = ds.label_for(col_name, pred.value)
        label = f"{col_name} {pred.operator or '?'} {shown}"
        controls.append({"controlId": binding, "controlType": "scopeChip",
                         "bindingPath": binding, "label": label,
                         "currentValue": pred.to_tree()})

    for i, exp in enumerate(spec.experiments):
        base = f"experiments[{i}]"
        for j, p in enumerate(exp.perturbs or []):
            col = meta.get(p.variable)
            if col is None:
                continue
            binding = f"{base}.perturb[{j}].value"
            label = f"{p.variable} ({p.op})"
            if col.kind == "continuous":
                if p.op == "changeBy" and p.unit == "percent":
                    controls.append(_slider(binding, label + " %", -100.0, 100.0,
                                            p.value))
                elif p.op == "changeBy":
                    span = (col.max - col.min) or 1.0
                    controls.append(_slider(binding, label + " delta", -span, span,
                                            p.value))
                else:
                    controls.append(_slider(binding, label, col.min, col.max, p.value))
            else:
                options = [ds.label_for(p.variable, c) for c in col.categories or ()]
                controls.append(_dropdown(binding, label, options,
                                          ds.label_for(p.variable, p.value)))
        if exp.range is not None and meta.get(exp.range.variable) is not None:
            col = meta[exp.range.variable]
            if col.kind == "continuous":
                controls.append(_slider(f"{base}.range.lowerBound",
                                        f"{exp.range.variable} lower bound",
                                        col.min, col.max, exp.range.lower_bound))
                controls.append(_slider(f"{base}.range.upperBound",
                                        f"{exp.range.variable} upper bound",
                                        col.min, col.max, exp.range.upper_bound))
        if exp.kind is not None and isinstance(exp.kind.target, str):
            col = meta.get(exp.kind.target)
            if col is not None and col.kind == "continuous":
                controls.append(_slider(f"{base}.kind.value",
                                        f"target {exp.kind.target}",
                                        col.min, col.max, exp.kind.value))
        for j, c in enumerate(exp.constraints or []):
            if not isinstance(c, dict):
                continue
            var, op, value = c.get("variable"), c.get("operator"), c.get("value")
            col = meta.get(var)
            binding = f"{base}.constraints[{j}].value"
            control = {"controlId": binding, "controlType": "constraintControl",
                       "bindingPath": binding, "label": f"{var} {op} {value}",
                       "variable": var, "operator": op, "currentValue": value}
            if col is not None and col.kind == "continuous":
                control["min"] = col.min
                control["max"] = col.max
                control["step"] = _round_step((col.max or 0) - (col.min or 0))
            controls.append(control)
        for j, entry in enumerate(exp.set_fixed or []):
            if not isinstance(entry, dict):
                continue
            var = entry.get("variable")
            col = meta.get(var)
            if col is None:
                continue
            binding = f"{base}.setFixed[{j}].value"
            if col.kind == "continuous":
                controls.append(_slider(binding, f"{var} (fixed)", col.min, col.max,
                                        entry.get("value")))
            else:
                options = [ds.label_for(var, c) for c in col.categories or ()]
                controls.append(_dropdown(binding, f"{var} (fixed)", options,
                                          ds.label_for(var, entry.get("value"))))
        if exp.family == "importance":
            n_inputs = len(ds.input_columns(exclude=spec.output_variables or []))
            slider = _slider(f"{base}.top", "top features",
                             float(-n_inputs), float(n_inputs),
                             exp.top, step=1.0)
            slider["excludeZero"] = True  # +k most, -k least; 0 is meaningless
            controls.append(slider)
        if exp.family == "counterfactual" and exp.has_desired:
            outputs = spec.output_variables or []
            col = meta.get(outputs[0]) if outputs else None
            binding = f"{base}.desiredOutcome"
            if col is not None and col.kind in ("categorical", "binary"):
                options = [ds.label_for(col.name, c) for c in col.categories or ()]
                controls.append(_dropdown(binding, f"desired {col.name}", options,
                                          exp.desired_outcome))
            elif col is not None:
                controls.append(_slider(binding, f"desired {col.name}",
                                        col.min, col.max, exp.desired_outcome))
    return controls


def _sensitivity_views(exp: Experiment, result: ExperimentResult, path: str) -> list[dict]:
    series = result.payload["series"]
    if exp.family == "point":
        panels = []
        for entry in series:
            panels.append({
                "viewType": "barChart",
                "title": f"{entry['outputVariable']} under perturbation",
                "experimentPath": path,
                "series": {"bars": [
                    {"label": "baseline", "value": entry["baselineValue"]},
                    {"label": "perturbed", "value": entry["perturbedValue"]},
                ], "delta": entry["delta"], "outputVariable": entry["outputVariable"]},
            })
    else:
        swept = result.payload.get("sweptVariable")
        panels = []
        for entry in series:
            panels.append({
                "viewType": "lineChart",
                "title": f"{entry['outputVariable']} vs {swept}",
                "experimentPath": path,
                "series": {"points": [{"x": pt["input"], "y": pt["output"]}
                                      for pt in entry["sweep"]],
                           "baseline": entry["baselineValue"],
                           "outputVariable": entry["outputVariable"],
                           "sweptVariable": swept},
            })
    if len(panels) > 1:
        return [{"viewType": "smallMultiples",
                 "title": "sensitivity across outputs",
                 "experimentPath": path,
                 "series": {"panels": panels}}]
    return panels


def _goal_seek_views(exp: Experiment, result: ExperimentResult, path: str) -> list[dict]:
    payload = result.payload
    solutions = payload["solutions"]
    kind = payload["kind"]
    columns = sorted(solutions[0]["assignment"]) if solutions else \
        [v for v in (exp.search_variables or []) if isinstance(v, str)]
    table_rows = [{"assignment": s["assignment"],
                   "achievedOutput": s["achievedOutput"],
                   "gap": s["gap"],
                   "distanceFromBaseline": s["distanceFromBaseline"]}
                  for s in solutions]
    views = [{"viewType": "table", "title": f"solutions for {kind['target']}",
              "experimentPath": path,
              "series": {"columns": columns, "rows": table_rows,
                         "infeasible": payload["infeasible"],
                         "constraints": payload["constraintsEcho"]}}]
    card: dict[str, Any] = {"target": kind["target"], "targetValue": kind["value"],
                            "direction": kind["direction"],
                            "infeasible": payload["infeasible"]}
    if solutions:
        card["best"] = table_rows[0]
    views.append({"viewType": "predictionCard", "title": "best solution",
                  "experimentPath": path, "series": card})
    return views


def _counterfactual_views(result: ExperimentResult, path: str) -> list[dict]:
    payload = result.payload
    rows = [{"role": "anchor", "values": payload["anchor"]}]
    if payload.get("found"):
        rows.append({"role": "counterfactual", "values": payload["counterfactual"]})
    views = [{"viewType": "table", "title": "anchor vs counterfactual",
              "experimentPath": path,
              "series": {"rows": rows,
                         "changedColumns": payload.get("changedColumns", []),
                         "found": payload.get("found", False)}}]
    card = {"found": payload.get("found", False),
            "desiredOutcome": payload.get("desiredOutcome"),
            "closestToFeature": payload.get("closestToFeature")}
    if payload.get("found"):
        card["distance"] = payload["distance"]
    views.append({"viewType": "predictionCard", "title": "counterfactual",
                  "experimentPath": path, "series": card})
    return views


def compile_interface(spec: Spec, results: list[ExperimentResult], ds: Dataset,
                      revision: int = 0,
                      findings: list[ErrorFinding] | None = None) -> InterfaceDescription:
    """Deterministic render plan for a spec and its results."""
    if len(results) != len(spec.experiments):
        raise CompileError(f"{len(spec.experiments)} experiments but "
                           f"{len(results)} results")
    views: list[dict] = []
    for i, (exp, result) in enumerate(zip(spec.experiments, results)):
        path = f"experiments[{i}]"
        family = exp.family
        if family in ("point", "range"):
            views.extend(_sensitivity_views(exp, result, path))
        elif family in ("goalSeek", "constrainedGoalSeek"):
            views.extend(_goal_seek_views(exp, result, path))
        elif family == "counterfactual":
            views.extend(_counterfactual_views(result, path))
        elif family == "importance":
            views.append({"viewType": "tornadoChart",
                          "title": f"feature influence on "
                                   f"{result.baseline['outputVariable']}",
                          "experimentPath": path,
                          "series": {"bars": [{"label": r["column"],
                                               "value": r["score"]}
                                              for r in result.payload["ranked"]],
                                     "topRequested": result.payload["topRequested"]}})
        else:
            raise CompileError(f"cannot compile experiment type "
                               f"{exp.experiment_type!r}")
    return InterfaceDescription(views=views, controls=derive_controls(spec, ds),
                                revision=revision)


# ---------------------------------------------------------------------------
# Interactions


def _value_ok(control: dict, value: Any) -> bool:
    ctype = control["controlType"]
    if ctype in ("slider", "constraintControl"):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return False
        if control.get("excludeZero") and value == 0:
            return False
        return control.get("min") is None or \
            control["min"] <= value <= control["max"]
    if ctype == "dropdown":
        return value in control.get("options", [])
    if ctype == "scopeChip":
        return value is None  # chips only support removal
    return False


def apply_interaction(spec: Spec, iface: InterfaceDescription,
                      ev: InteractionEvent) -> tuple[SpecPatch, list[int]]:
    """Turn an interaction event into a patch plus the set of experiment
    indices whose results must be recomputed.

    Stale events (revision mismatch) are rejected so the client
    refetches; out-of-range values are rejected outright.
    """
    if ev.revision != iface.revision:
        raise StaleRevisionError(ev.revision, iface.revision)
    control = iface.control_by_id(ev.control_id)
    if control is None:
        raise InteractionError(f"unknown control {ev.control_id!r}")
    if not _value_ok(control, ev.new_value):
        raise InteractionError(
            f"value {ev.new_value!r} is outside the range of {ev.control_id!r}")
    binding = control["bindingPath"]
    if control["controlType"] == "scopeChip":
        patch = SpecPatch.single(binding, "remove")
    else:
        value = ev.new_value
        if control["controlType"] == "slider" and control.get("step") == 1.0 \
                and isinstance(value, float) and value.is_integer():
            value = int(value)
        if control["controlType"] == "dropdown":
            # dropdowns show decoded labels; the spec stores what it got
            value = ev.new_value
        patch = SpecPatch.single(binding, "set", value)

    affected: list[int] = []
    root = parse_path(binding)[0]
    for i, exp in enumerate(spec.experiments):
        base = f"experiments[{i}]"
        if isinstance(root, str) and root == "scope":
            if exp.has_scope_ref and exp.scope_ref == "scope":
                affected.append(i)
        elif is_under(binding, base):
            affected.append(i)
    return patch, affected
