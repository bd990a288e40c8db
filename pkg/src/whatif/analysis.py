"""Executors for the eleven experiment types.

Sensitivity (point and range, plain and scoped), goal seek (plain,
constrained, and their scoped variants), importance (plain and scoped,
which retrains on the subset), and counterfactual. Aggregation over
rows is the arithmetic mean of model predictions.

Everything here is a pure function of (spec, dataset, trained models):
identical inputs produce identical results, down to the serialized
bytes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, apply_perturbations, evaluate_scope, view_of
from .models import ModelCache, TrainedModel, predict, predict_labels, select_model
from .spec import SCHEMA, Experiment, ModelDecl, Spec

GRID_POINTS = SCHEMA["limits"]["goalSeekGridPoints"]
MAX_SEARCH_VARIABLES = SCHEMA["limits"]["goalSeekMaxSearchVariables"]
MAX_SOLUTIONS = SCHEMA["limits"]["goalSeekMaxSolutions"]


class ExecutionError(Exception):
    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path


class EmptyScopeError(ExecutionError):
    pass


@dataclass
class ExperimentResult:
    experiment_type: str
    spec_path: str
    baseline: dict
    payload: dict
    scoped_row_count: int | None = None
    warnings: list[str] = field(default_factory=list)

    def to_tree(self) -> dict:
        out = {
            "experimentType": self.experiment_type,
            "specPath": self.spec_path,
            "baseline": self.baseline,
            **self.payload,
        }
        if self.scoped_row_count is not None:
            out["scopedRowCount"] = self.scoped_row_count
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out


def _resolve_rows(spec: Spec, exp: Experiment, ds: Dataset, path: str) -> np.ndarray | None:
    """Scope rows, resolved once per experiment. None means full data."""
    if not (exp.has_scope_ref and exp.scope_ref == "scope" and spec.scope is not None):
        return None
    rows = evaluate_scope(ds, spec.scope)
    if len(rows) == 0:
        raise EmptyScopeError(
            "the scope selects no rows; refusing to fall back to the full dataset",
            path)
    return rows


def _decl_for(spec: Spec, exp: Experiment, ds: Dataset, output: str) -> ModelDecl:
    if exp.model_ref is not None:
        decl = spec.model_by_id(exp.model_ref)
        if decl is None:
            raise ExecutionError(f"experiment references undeclared model "
                                 f"{exp.model_ref!r}")
        return decl
    if spec.models:
        return spec.models[0]
    return ModelDecl(id="model_1", type=select_model(ds.meta[output]), seed=0)


def _trained(spec: Spec, exp: Experiment, ds: Dataset, output: str,
             rows: np.ndarray | None, cache: ModelCache) -> TrainedModel:
    if output not in ds.meta:
        raise ExecutionError(f"unknown output column {output!r}")
    decl = _decl_for(spec, exp, ds, output)
    inputs = ds.input_columns(exclude=spec.output_variables or [])
    if decl.type == "stubLinear":
        inputs = [c for c in inputs if ds.meta[c].kind == "continuous"]
    return cache.get_or_train(ds, inputs, output, decl, rows)


def _mean(values: np.ndarray) -> float:
    return float(np.asarray(values, dtype=float).mean())


def _outputs(spec: Spec) -> list[str]:
    return [v for v in (spec.output_variables or []) if isinstance(v, str)]


# ---------------------------------------------------------------------------
# Sensitivity (T1-T4)


def run_sensitivity(exp: Experiment, ds: Dataset, models: dict[str, TrainedModel],
                    rows: np.ndarray | None, path: str = "") -> ExperimentResult:
    """Point: mean prediction before/after the perturbations.
    Range: mean prediction with the swept variable set to each grid value."""
    use_rows = ds.all_rows() if rows is None else rows
    series = []
    if exp.family == "point":
        if not exp.perturbs:
            raise ExecutionError("point sensitivity needs perturbations", path)
        view = apply_perturbations(ds, use_rows, exp.perturbs)
        for output, model in models.items():
            baseline = _mean(predict(model, view_of(ds, use_rows)))
            perturbed = _mean(predict(model, view))
            series.append({"outputVariable": output, "baselineValue": baseline,
                           "perturbedValue": perturbed,
                           "delta": perturbed - baseline})
        payload = {"series": series}
    else:
        rng = exp.range
        if rng is None or not isinstance(rng.variable, str):
            raise ExecutionError("range sensitivity needs a range block", path)
        lo, hi, step = rng.lower_bound, rng.upper_bound, rng.step_size
        for v, name in ((lo, "lowerBound"), (hi, "upperBound"), (step, "stepSize")):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ExecutionError(f"range sensitivity needs a numeric {name}", path)
        grid = []
        v = float(lo)
        eps = abs(step) * 1e-9
        while v <= hi + eps:
            grid.append(v)
            v += step
        base_view = view_of(ds, use_rows)
        for output, model in models.items():
            baseline = _mean(predict(model, base_view))
            sweep = []
            for value in grid:
                override = np.full(len(use_rows), value)
                sweep.append({"input": value,
                              "output": _mean(predict(
                                  model, base_view.with_override(rng.variable,
                                                                 override)))})
            series.append({"outputVariable": output, "baselineValue": baseline,
                           "sweep": sweep})
        payload = {"series": series, "sweptVariable": rng.variable}
    first = series[0]
    baseline = {"outputVariable": first["outputVariable"],
                "value": first["baselineValue"], "rowCount": len(use_rows)}
    return ExperimentResult(exp.experiment_type, path, baseline, payload,
                            scoped_row_count=None if rows is None else len(rows))


# ---------------------------------------------------------------------------
# Goal seek (T5-T8)


def _constraint_ok(op: str, lhs: float, rhs: float) -> bool:
    return {"<": lhs < rhs, "<=": lhs <= rhs, ">": lhs > rhs, ">=": lhs >= rhs}[op]


def _gap(direction: str, achieved: float, target: float) -> float:
    if direction == "atLeast":
        return max(0.0, target - achieved)
    if direction == "atMost":
        return max(0.0, achieved - target)
    return abs(achieved - target)


def run_goal_seek(exp: Experiment, ds: Dataset, model: TrainedModel,
                  objective, rows: np.ndarray | None,
                  path: str = "") -> ExperimentResult:
    """Deterministic grid search over the search variables.

    Each variable gets a 21-point grid spanning its dataset bounds;
    constraint-violating assignments are discarded before evaluation
    and never silently dropped from the result. Solutions are ordered
    by (objective gap, objective direction for inequality kinds,
    distance from the baseline means, assignment values) so ties are
    total; at most five are returned, each re-verified against every
    constraint. If no grid point satisfies the constraints the result
    is an explicit infeasibility, not an unconstrained fallback.
    """
    kind = exp.kind
    if kind is None or not isinstance(kind.target, str) or not kind.has_value:
        raise ExecutionError("goal seek needs kind.target and kind.value", path)
    search = [v for v in (exp.search_variables or []) if isinstance(v, str)]
    if not search:
        raise ExecutionError("goal seek needs searchVariables", path)
    if len(search) > MAX_SEARCH_VARIABLES:
        raise ExecutionError(f"at most {MAX_SEARCH_VARIABLES} search variables "
                             f"are supported, got {len(search)}", path)
    use_rows = ds.all_rows() if rows is None else rows
    direction = kind.direction or "reach"
    target_value = float(kind.value)

    pins: dict[str, float] = {}
    for entry in exp.set_fixed or []:
        if isinstance(entry, dict) and isinstance(entry.get("variable"), str):
            pins[entry["variable"]] = entry.get("value")
    constraints = [c for c in (exp.constraints or []) if isinstance(c, dict)]

    grids = []
    for name in search:
        col = ds.meta.get(name)
        if col is None:
            raise ExecutionError(f"unknown search variable {name!r}", path)
        if col.kind != "continuous":
            raise ExecutionError(f"search variables must be continuous; "
                                 f"{name!r} is {col.kind}", path)
        grids.append(np.linspace(col.min, col.max, GRID_POINTS))

    base_view = view_of(ds, use_rows)
    baseline_value = _mean(predict(model, base_view))
    baseline_means = {name: _mean(ds.column(name)[use_rows]) for name in search}
    spans = {name: (ds.meta[name].max - ds.meta[name].min) or 1.0 for name in search}

    def assignment_value(name: str, assignment: dict[str, float]) -> float | None:
        if name in assignment:
            return assignment[name]
        if name in pins:
            return pins[name]
        if name in ds.meta and ds.meta[name].kind == "continuous":
            return _mean(ds.column(name)[use_rows])
        return None

    def satisfies(assignment: dict[str, float]) -> bool:
        for c in constraints:
            var, op, rhs = c.get("variable"), c.get("operator"), c.get("value")
            if not isinstance(var, str) or op not in ("<", "<=", ">", ">="):
                raise ExecutionError("malformed constraint", path)
            lhs = assignment_value(var, assignment)
            if lhs is None or not isinstance(rhs, (int, float)):
                raise ExecutionError(f"constraint on {var!r} cannot be evaluated", path)
            if not _constraint_ok(op, float(lhs), float(rhs)):
                return False
        return True

    objective_sign = 0.0
    if direction in ("atLeast", "atMost") and objective is not None:
        if objective.goal == "maximize":
            objective_sign = -1.0
        elif objective.goal == "minimize":
            objective_sign = 1.0

    candidates = []
    feasible_seen = False
    for combo in itertools.product(*grids):
        assignment = dict(zip(search, (float(v) for v in combo)))
        if not satisfies(assignment):
            continue
        feasible_seen = True
        view = base_view
        for name, value in assignment.items():
            view = view.with_override(name, np.full(len(use_rows), value))
        for name, value in pins.items():
            if name in ds.meta and isinstance(value, (int, float)):
                view = view.with_override(name, np.full(len(use_rows), float(value)))
        achieved = _mean(predict(model, view))
        gap = _gap(direction, achieved, target_value)
        distance = math.sqrt(sum(
            ((assignment[n] - baseline_means[n]) / spans[n]) ** 2 for n in search))
        order_key = (gap, objective_sign * achieved, distance,
                     tuple(assignment[n] for n in search))
        candidates.append((order_key, assignment, achieved, gap, distance))

    baseline = {"outputVariable": kind.target, "value": baseline_value,
                "rowCount": len(use_rows)}
    echo = [{"variable": c.get("variable"), "operator": c.get("operator"),
             "value": c.get("value")} for c in constraints]
    if not feasible_seen:
        payload = {"infeasible": True,
                   "reason": "no grid assignment satisfies the constraints",
                   "solutions": [], "constraintsEcho": echo,
                   "kind": {"target": kind.target, "value": target_value,
                            "direction": direction}}
        return ExperimentResult(exp.experiment_type, path, baseline, payload,
                                scoped_row_count=None if rows is None else len(rows))

    candidates.sort(key=lambda c: c[0])
    solutions = []
    for _, assignment, achieved, gap, distance in candidates[:MAX_SOLUTIONS]:
        assert satisfies(assignment)  # re-verified before returning
        solutions.append({"assignment": assignment, "achievedOutput": achieved,
                          "gap": gap, "distanceFromBaseline": distance})
    payload = {"infeasible": False, "solutions": solutions, "constraintsEcho": echo,
               "kind": {"target": kind.target, "value": target_value,
                        "direction": direction}}
    return ExperimentResult(exp.experiment_type, path, baseline, payload,
                            scoped_row_count=None if rows is None else len(rows))


# ---------------------------------------------------------------------------
# Importance (T10-T11)


def run_importance(exp: Experiment, ds: Dataset, model: TrainedModel,
                   rows: np.ndarray | None, path: str = "") -> ExperimentResult:
    """Ranked feature influence; top > 0 reads most-important-first,
    top < 0 least-important-first."""
    from .models import feature_importance

    top = exp.top if exp.has_top else SCHEMA["defaults"]["importanceTop"]
    if not isinstance(top, int) or isinstance(top, bool) or top == 0:
        raise ExecutionError("importance needs a non-zero integer 'top'", path)
    ranked_full = feature_importance(model)
    warnings = []
    k = abs(top)
    if k > len(ranked_full):
        warnings.append(f"top requested {k} features but only "
                        f"{len(ranked_full)} exist; truncating")
        k = len(ranked_full)
    if top > 0:
        ranked = ranked_full[:k]
    else:
        ranked = list(reversed(ranked_full[-k:]))
    use_rows = ds.all_rows() if rows is None else rows
    baseline = {"outputVariable": model.output_column,
                "value": _mean(predict(model, view_of(ds, use_rows))),
                "rowCount": len(use_rows)}
    payload = {"ranked": [{"column": c, "score": s} for c, s in ranked],
               "topRequested": top}
    return ExperimentResult(exp.experiment_type, path, baseline, payload,
                            scoped_row_count=None if rows is None else len(rows),
                            warnings=warnings)


# ---------------------------------------------------------------------------
# Counterfactual (T9)


def _resolve_anchor(exp: Experiment, ds: Dataset, path: str) -> int:
    anchor = exp.anchor_row
    if isinstance(anchor, bool) or anchor is None:
        raise ExecutionError("counterfactual needs an anchorRow", path)
    if isinstance(anchor, int):
        if not 0 <= anchor < ds.n_rows:
            raise ExecutionError(f"anchor row index {anchor} out of range", path)
        return anchor
    rows = evaluate_scope(ds, anchor)
    if len(rows) != 1:
        raise ExecutionError(
            f"anchor selector must match exactly one row, matched {len(rows)}", path)
    return int(rows[0])


def run_counterfactual(exp: Experiment, ds: Dataset, model: TrainedModel,
                       path: str = "") -> ExperimentResult:
    """Closest row (by the named feature, range-normalized; min-max L2
    over the remaining inputs breaks ties, then row order) whose
    predicted outcome matches the desired one."""
    feature = exp.closest_to_feature
    if not isinstance(feature, str) or feature not in ds.meta:
        raise ExecutionError("counterfactual needs a known closestToFeature", path)
    if ds.meta[feature].kind != "continuous":
        raise ExecutionError("closestToFeature must be continuous", path)
    if not exp.has_desired:
        raise ExecutionError("counterfactual needs a desiredOutcome", path)
    anchor_idx = _resolve_anchor(exp, ds, path)

    desired = exp.desired_outcome
    labels = predict_labels(model, ds)
    if model.is_classifier:
        desired_code = ds.decode(model.output_column, desired)
        matches = np.asarray([lab == desired_code for lab in labels])
    else:
        out_meta = ds.meta[model.output_column]
        span = ((out_meta.max - out_meta.min) or 1.0) \
            if out_meta.min is not None else 1.0
        if not isinstance(desired, (int, float)) or isinstance(desired, bool):
            raise ExecutionError("desiredOutcome must be numeric for a regressor", path)
        matches = np.abs(labels - float(desired)) <= 0.005 * span

    inputs = list(model.input_columns)
    f_col = ds.column(feature).astype(float)
    f_span = (ds.meta[feature].max - ds.meta[feature].min) or 1.0
    anchor_f = f_col[anchor_idx]

    def tiebreak(idx: int) -> float:
        total = 0.0
        for col in inputs:
            if col == feature:
                continue
            meta = ds.meta[col]
            col_values = ds.column(col)
            if meta.kind == "continuous":
                span = (meta.max - meta.min) or 1.0
                total += ((float(col_values[idx]) - float(col_values[anchor_idx]))
                          / span) ** 2
            else:
                total += 0.0 if col_values[idx] == col_values[anchor_idx] else 1.0
        return math.sqrt(total)

    best: tuple | None = None
    for idx in np.nonzero(matches)[0]:
        primary = abs(f_col[idx] - anchor_f) / f_span
        key = (primary, tiebreak(int(idx)), int(idx))
        if best is None or key < best[0]:
            best = (key, int(idx))

    baseline = {"outputVariable": model.output_column,
                "value": float(np.asarray(
                    predict(model, view_of(ds, np.asarray([anchor_idx]))))[0]),
                "rowCount": 1}

    def row_dict(idx: int) -> dict:
        out = {}
        for col in [*inputs, model.output_column]:
            v = ds.column(col)[idx]
            out[col] = ds.label_for(col, v) if ds.meta[col].kind != "continuous" \
                else float(v)
            if isinstance(out[col], (np.floating, np.integer)):
                out[col] = float(out[col])
        return out

    if best is None:
        payload = {"found": False, "anchorIndex": anchor_idx,
                   "anchor": row_dict(anchor_idx), "desiredOutcome": desired,
                   "closestToFeature": feature}
        return ExperimentResult(exp.experiment_type, path, baseline, payload)
    key, idx = best
    anchor_row = row_dict(anchor_idx)
    cf_row = row_dict(idx)
    changed = sorted(col for col in inputs if anchor_row.get(col) != cf_row.get(col))
    payload = {"found": True, "anchorIndex": anchor_idx, "counterfactualIndex": idx,
               "anchor": anchor_row, "counterfactual": cf_row,
               "changedColumns": changed, "distance": key[0],
               "desiredOutcome": desired, "closestToFeature": feature}
    return ExperimentResult(exp.experiment_type, path, baseline, payload)


# ---------------------------------------------------------------------------
# Dispatch


def execute_experiment(spec: Spec, exp: Experiment, ds: Dataset,
                       cache: ModelCache | None = None,
                       index: int | None = None) -> ExperimentResult:
    """Resolve the scope once, train (or fetch) models, and dispatch.

    Results carry the spec path of their experiment so findings and
    views stay traceable to specification components.
    """
    cache = cache or ModelCache()
    if index is None:
        index = spec.experiments.index(exp)
    path = f"experiments[{index}]"
    family = exp.family
    if family is None:
        raise ExecutionError(f"unknown experiment type {exp.experiment_type!r}", path)
    try:
        rows = _resolve_rows(spec, exp, ds, path)
        if family in ("point", "range"):
            outputs = _outputs(spec)
            if not outputs:
                raise ExecutionError("no output variables", path)
            models = {o: _trained(spec, exp, ds, o, None, cache) for o in outputs}
            return run_sensitivity(exp, ds, models, rows, path)
        if family in ("goalSeek", "constrainedGoalSeek"):
            target = exp.kind.target if exp.kind else None
            output = target if isinstance(target, str) and target in ds.meta \
                else next(iter(_outputs(spec)), None)
            if output is None:
                raise ExecutionError("goal seek needs an output column", path)
            model = _trained(spec, exp, ds, output, None, cache)
            return run_goal_seek(exp, ds, model, spec.objective, rows, path)
        if family == "importance":
            outputs = _outputs(spec)
            if not outputs:
                raise ExecutionError("no output variables", path)
            # scoped importance retrains on the subset
            model = _trained(spec, exp, ds, outputs[0], rows, cache)
            return run_importance(exp, ds, model, rows, path)
        if family == "counterfactual":
            outputs = _outputs(spec)
            if not outputs:
                raise ExecutionError("no output variables", path)
            model = _trained(spec, exp, ds, outputs[0], None, cache)
            return run_counterfactual(exp, ds, model, path)
    except ExecutionError:
        raise
    except Exception as exc:
        raise ExecutionError(str(exc), path) from exc
    raise ExecutionError(f"unsupported family {family!r}", path)


def execute_spec(spec: Spec, ds: Dataset,
                 cache: ModelCache | None = None) -> list[ExperimentResult]:
    """All experiments, in declaration order."""
    cache = cache or ModelCache()
    return [execute_experiment(spec, exp, ds, cache, index=i)
            for i, exp in enumerate(spec.experiments)]
