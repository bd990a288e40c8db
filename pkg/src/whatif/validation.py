"""Two-pass defect detection for PSL documents.

Pass one (:func:`validate_structure`) is reference-free and flags the
non-functional categories EC1-EC4; a document compiles iff this pass
returns nothing. Pass two (:func:`lint_semantics`) needs dataset
metadata and flags functional defects that are decidable without a
ground-truth spec. Auditing against a reference goes through
:func:`diff_specs` + :func:`categorize_errors`.

Scope and filter predicates are deliberately opaque to the structural
pass: malformed scope expressions (SQL-ish strings, unknown operators,
bad value encodings) still compile and are reported by the lint pass as
EC8, because they produce running-but-wrong analyses rather than
compile failures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .errors import ErrorFinding, blocking, finding
from .jsontree import canonical_dumps, join_path
from .spec import (
    SCHEMA,
    SCHEMA_VERSION,
    Experiment,
    Spec,
    parse_spec,
)

_FAMILIES = SCHEMA["families"]
_EXP_TYPES = SCHEMA["experimentTypes"]
_ALL_PAYLOAD_KEYS = sorted({k for fam in _FAMILIES.values()
                            for k in fam["required"] + fam["optional"]})
_NUM = (int, float)


def _is_num(v: Any) -> bool:
    return isinstance(v, _NUM) and not isinstance(v, bool)


# ---------------------------------------------------------------------------
# Structural pass (EC1-EC4)


def validate_structure(text: str, schema_version: str = SCHEMA_VERSION) -> list[ErrorFinding]:
    """All EC1-EC4 findings for a document; empty list means it compiles."""
    if schema_version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version: {schema_version!r}")
    parsed = parse_spec(text)
    if isinstance(parsed, list):
        return parsed
    return _schema_findings(parsed)


def compiles(text: str) -> bool:
    return not blocking(validate_structure(text))


def _schema_findings(spec: Spec) -> list[ErrorFinding]:
    out: list[ErrorFinding] = []
    _check_top_level(spec, out)
    _check_objective(spec, out)
    _check_models(spec, out)
    model_ids = {d.id for d in spec.models or [] if d.id is not None}
    seen_experiments: dict[str, int] = {}
    for i, exp in enumerate(spec.experiments):
        _check_experiment(spec, exp, i, model_ids, out)
        key = canonical_dumps(exp.to_tree())
        if key in seen_experiments:
            out.append(finding(
                "EC2", "duplicatedBlock", f"experiments[{i}]",
                f"experiment duplicates experiments[{seen_experiments[key]}]"))
        else:
            seen_experiments[key] = i
    return out


def _extras_findings(extras: dict, base: str, out: list[ErrorFinding]) -> None:
    """Unknown keys: schema keys in the wrong position are EC4, keys the
    schema has never heard of are EC2 hallucinations."""
    for key in sorted(extras):
        path = join_path(base, key) if base else key
        if key in _ALL_PAYLOAD_KEYS or key in Spec.TOP_KEYS or key == "scope":
            out.append(finding("EC4", "misplacedKey", path,
                               f"property {key!r} is not supported at this position"))
        else:
            out.append(finding("EC2", "hallucinatedKey", path,
                               f"property {key!r} is not part of the schema"))


def _check_top_level(spec: Spec, out: list[ErrorFinding]) -> None:
    if spec.dataset is None:
        out.append(finding("EC3", "missingBlock", "dataset",
                           "required property 'dataset' is missing"))
    elif not isinstance(spec.dataset, str):
        out.append(finding("EC4", "typeMismatch", "dataset",
                           "'dataset' must be a dataset identifier string"))
    if spec.output_variables is None:
        out.append(finding("EC3", "missingBlock", "outputVariable",
                           "required property 'outputVariable' is missing"))
    elif not spec.output_variables:
        out.append(finding("EC3", "missingBlock", "outputVariable",
                           "'outputVariable' must name at least one column"))
    else:
        for j, name in enumerate(spec.output_variables):
            if not isinstance(name, str):
                out.append(finding("EC4", "typeMismatch", f"outputVariable[{j}]",
                                   "output variables must be column name strings"))
    if not spec.experiments:
        out.append(finding("EC3", "missingBlock", "experiments",
                           "a specification needs at least one experiment"))
    _extras_findings(spec.extras, "", out)


def _check_objective(spec: Spec, out: list[ErrorFinding]) -> None:
    obj = spec.objective
    if obj is None:
        return
    goals = SCHEMA["objective"]["goals"]
    if obj.goal is None:
        out.append(finding("EC3", "missingKey", "objective.goal",
                           "'objective' needs a 'goal'"))
    elif obj.goal not in goals:
        out.append(finding("EC4", "invalidEnum", "objective.goal",
                           f"goal must be one of {goals}, found {obj.goal!r}"))
    if obj.goal == "setTarget" and not obj.has_target:
        out.append(finding("EC4", "objectiveTargetMismatch", "objective",
                           "goal 'setTarget' requires 'targetValue'"))
    if obj.has_target:
        if obj.goal != "setTarget":
            out.append(finding("EC4", "objectiveTargetMismatch", "objective.targetValue",
                               "'targetValue' is only valid with goal 'setTarget'"))
        elif not _is_num(obj.target_value):
            out.append(finding("EC4", "typeMismatch", "objective.targetValue",
                               "'targetValue' must be a number"))
    _extras_findings(obj.extras, "objective", out)


def _check_models(spec: Spec, out: list[ErrorFinding]) -> None:
    seen_ids: dict[Any, int] = {}
    for i, decl in enumerate(spec.models or []):
        base = f"model[{i}]"
        if decl.id is None:
            out.append(finding("EC3", "missingKey", f"{base}.id",
                               "model declarations need an 'id'"))
        elif decl.id in seen_ids:
            out.append(finding("EC2", "duplicatedBlock", base,
                               f"model id {decl.id!r} already declared at model[{seen_ids[decl.id]}]"))
        else:
            seen_ids[decl.id] = i
        if decl.type is None:
            out.append(finding("EC3", "missingKey", f"{base}.type",
                               "model declarations need a 'type'"))
        elif decl.type not in SCHEMA["modelDecl"]["types"]:
            out.append(finding("EC4", "invalidEnum", f"{base}.type",
                               f"unknown model type {decl.type!r}"))
        if decl.seed is not None and (not isinstance(decl.seed, int) or isinstance(decl.seed, bool)):
            out.append(finding("EC4", "typeMismatch", f"{base}.seed",
                               "'seed' must be an integer"))
        if decl.hyperparams is not None:
            if not isinstance(decl.hyperparams, dict):
                out.append(finding("EC4", "typeMismatch", f"{base}.hyperparams",
                                   "'hyperparams' must be a key-to-number map"))
            else:
                for k in sorted(decl.hyperparams):
                    if not _is_num(decl.hyperparams[k]):
                        out.append(finding("EC4", "typeMismatch", f"{base}.hyperparams.{k}",
                                           "hyperparameter values must be numbers"))
        _extras_findings(decl.extras, base, out)


def _check_experiment(spec: Spec, exp: Experiment, i: int, model_ids: set,
                      out: list[ErrorFinding]) -> None:
    base = f"experiments[{i}]"
    if exp.experiment_type is None:
        out.append(finding("EC3", "missingKey", f"{base}.experimentType",
                           "experiments need an 'experimentType'"))
        return
    info = _EXP_TYPES.get(exp.experiment_type)
    if info is None:
        out.append(finding("EC4", "invalidEnum", f"{base}.experimentType",
                           f"unknown experiment type {exp.experiment_type!r}"))
        return
    family = info["family"]
    fam = _FAMILIES[family]
    node = exp.to_tree()

    # model / scope references
    if exp.model_ref is not None and exp.model_ref not in model_ids:
        out.append(finding("EC4", "danglingModelRef", f"{base}.model",
                           f"experiment references undeclared model {exp.model_ref!r}"))
    if exp.has_scope_ref:
        if not info["scoped"]:
            out.append(finding("EC4", "scopeRefUnsupported", f"{base}.scope",
                               f"{exp.experiment_type} does not take a scope reference"))
        elif exp.scope_ref != "scope":
            out.append(finding("EC4", "invalidScopeRef", f"{base}.scope",
                               "the scope reference must be the string 'scope'"))
        elif spec.scope is None:
            out.append(finding("EC4", "danglingScopeRef", f"{base}.scope",
                               "experiment references a scope but none is defined"))

    # payload completeness
    structural = set(SCHEMA["structuralKeys"].get(family, []))
    for key in fam["required"]:
        if key not in node:
            if key in structural:
                out.append(finding(
                    "EC1", "structuralMismatch", f"{base}.{key}",
                    f"the {family} structure requires {key!r}"))
            else:
                out.append(finding("EC3", "missingBlock", f"{base}.{key}",
                                   f"{exp.experiment_type} requires {key!r}"))
    allowed = set(fam["required"]) | set(fam["optional"])
    for key in sorted(set(node) & set(_ALL_PAYLOAD_KEYS) - allowed):
        out.append(finding("EC4", "payloadMismatch", f"{base}.{key}",
                           f"{key!r} does not belong to {exp.experiment_type}"))

    if family == "point":
        _check_perturbs(exp, base, out)
    elif family == "range":
        _check_range(exp, base, out)
    elif family in ("goalSeek", "constrainedGoalSeek"):
        _check_goal_seek(exp, base, family, out)
    elif family == "counterfactual":
        _check_counterfactual(exp, base, out)
    elif family == "importance":
        _check_importance(exp, base, out)
    _extras_findings(exp.extras, base, out)


def _check_perturbs(exp: Experiment, base: str, out: list[ErrorFinding]) -> None:
    if exp.perturbs is None:
        return
    if not exp.perturbs:
        out.append(finding("EC3", "missingBlock", f"{base}.perturb",
                           "'perturb' must contain at least one perturbation"))
    entry_schema = SCHEMA["perturbEntry"]
    for j, p in enumerate(exp.perturbs):
        at = f"{base}.perturb[{j}]"
        if p.variable is None:
            out.append(finding("EC3", "missingKey", f"{at}.variable",
                               "perturbations need a 'variable'"))
        elif not isinstance(p.variable, str):
            out.append(finding("EC4", "typeMismatch", f"{at}.variable",
                               "'variable' must be a column name string"))
        if p.op is None:
            out.append(finding("EC3", "missingKey", f"{at}.op",
                               "perturbations need an 'op'"))
        elif p.op not in entry_schema["ops"]:
            out.append(finding("EC4", "invalidEnum", f"{at}.op",
                               f"op must be one of {entry_schema['ops']}, found {p.op!r}"))
        if not p.has_value:
            out.append(finding("EC3", "missingKey", f"{at}.value",
                               "perturbations need a 'value'"))
        if p.unit is not None and p.unit not in entry_schema["units"]:
            out.append(finding("EC4", "invalidEnum", f"{at}.unit",
                               f"unit must be one of {entry_schema['units']}, found {p.unit!r}"))
        if p.op == "setTo" and p.unit == "percent":
            out.append(finding("EC4", "invalidUnit", f"{at}.unit",
                               "'percent' only combines with op 'changeBy'"))
        if p.op == "changeBy" and p.has_value and not _is_num(p.value):
            out.append(finding("EC4", "typeMismatch", f"{at}.value",
                               "'changeBy' needs a numeric value"))
        _extras_findings(p.extras, at, out)


def _check_range(exp: Experiment, base: str, out: list[ErrorFinding]) -> None:
    rng = exp.range
    if rng is None:
        return
    at = f"{base}.range"
    if rng.variable is None:
        out.append(finding("EC3", "missingKey", f"{at}.variable",
                           "'range' needs a 'variable' to sweep"))
    elif not isinstance(rng.variable, str):
        out.append(finding("EC4", "typeMismatch", f"{at}.variable",
                           "'variable' must be a column name string"))
    for key, val in (("lowerBound", rng.lower_bound), ("upperBound", rng.upper_bound),
                     ("stepSize", rng.step_size)):
        if val is not None and not _is_num(val):
            out.append(finding("EC4", "typeMismatch", f"{at}.{key}",
                               f"'{key}' must be a number"))
    lo, hi, step = rng.lower_bound, rng.upper_bound, rng.step_size
    if _is_num(lo) and _is_num(hi) and lo >= hi:
        out.append(finding("EC4", "invalidRange", at,
                           f"lowerBound {lo} must be below upperBound {hi}"))
    if _is_num(step):
        if step <= 0:
            out.append(finding("EC4", "invalidRange", f"{at}.stepSize",
                               "stepSize must be positive"))
        elif _is_num(lo) and _is_num(hi) and lo < hi and step > hi - lo:
            out.append(finding("EC4", "invalidRange", f"{at}.stepSize",
                               f"stepSize {step} exceeds the swept span {hi - lo}"))
    _extras_findings(rng.extras, at, out)


def _check_goal_seek(exp: Experiment, base: str, family: str,
                     out: list[ErrorFinding]) -> None:
    kind = exp.kind
    if kind is not None:
        at = f"{base}.kind"
        swapped = (_is_num(kind.target) and isinstance(kind.value, str))
        if swapped:
            out.append(finding(
                "EC4", "swappedTargetValue", at,
                "'target' holds a number and 'value' holds a column name; "
                "the roles are swapped"))
        else:
            if kind.target is None:
                out.append(finding("EC3", "missingKey", f"{at}.target",
                                   "'kind' needs a 'target' output column"))
            elif not isinstance(kind.target, str):
                out.append(finding("EC4", "typeMismatch", f"{at}.target",
                                   "'target' must be an output column name"))
            if not kind.has_value:
                out.append(finding("EC3", "missingKey", f"{at}.value",
                                   "'kind' needs a 'value' to seek"))
            elif not _is_num(kind.value):
                out.append(finding("EC4", "typeMismatch", f"{at}.value",
                                   "'value' must be a number"))
        directions = SCHEMA["kindBlock"]["directions"]
        if kind.direction is not None and kind.direction not in directions:
            out.append(finding("EC4", "invalidEnum", f"{at}.direction",
                               f"direction must be one of {directions}"))
        _extras_findings(kind.extras, at, out)
    elif exp.has_raw_kind:
        out.append(finding("EC1", "containerShape", f"{base}.kind",
                           "'kind' must be an object"))

    sv = exp.search_variables
    if isinstance(sv, list):
        if not sv:
            out.append(finding("EC3", "missingBlock", f"{base}.searchVariables",
                               "'searchVariables' must name at least one input column"))
        for j, name in enumerate(sv):
            if not isinstance(name, str):
                out.append(finding("EC4", "typeMismatch", f"{base}.searchVariables[{j}]",
                                   "search variables must be column name strings"))
    fixed_vars = []
    if isinstance(exp.set_fixed, list):
        for j, entry in enumerate(exp.set_fixed):
            at = f"{base}.setFixed[{j}]"
            if not isinstance(entry, dict):
                out.append(finding("EC4", "typeMismatch", at,
                                   "setFixed entries must be objects"))
                continue
            if "variable" not in entry:
                out.append(finding("EC3", "missingKey", f"{at}.variable",
                                   "setFixed entries need a 'variable'"))
            else:
                fixed_vars.append(entry["variable"])
            if "value" not in entry:
                out.append(finding("EC3", "missingKey", f"{at}.value",
                                   "setFixed entries need a 'value'"))
            _extras_findings({k: v for k, v in entry.items()
                              if k not in SCHEMA["setFixedEntry"]["required"]}, at, out)
    if isinstance(sv, list):
        overlap = sorted(set(x for x in sv if isinstance(x, str)) & set(fixed_vars))
        for name in overlap:
            out.append(finding("EC4", "searchFixedOverlap", f"{base}.setFixed",
                               f"{name!r} cannot be both searched and fixed"))

    constraints = exp.constraints
    if family == "constrainedGoalSeek" and isinstance(constraints, list) and not constraints:
        out.append(finding("EC3", "missingBlock", f"{base}.constraints",
                           "constrained goal seek requires at least one constraint"))
    if isinstance(constraints, list):
        ops = SCHEMA["constraintEntry"]["operators"]
        for j, entry in enumerate(constraints):
            at = f"{base}.constraints[{j}]"
            if not isinstance(entry, dict):
                out.append(finding("EC4", "typeMismatch", at,
                                   "constraints must be objects"))
                continue
            for key in SCHEMA["constraintEntry"]["required"]:
                if key not in entry:
                    out.append(finding("EC3", "missingKey", f"{at}.{key}",
                                       f"constraints need a '{key}'"))
            if "operator" in entry and entry["operator"] not in ops:
                out.append(finding("EC4", "invalidEnum", f"{at}.operator",
                                   f"constraint operator must be one of {ops}"))
            if "value" in entry and not _is_num(entry["value"]):
                out.append(finding("EC4", "typeMismatch", f"{at}.value",
                                   "constraint values must be numbers"))
            _extras_findings({k: v for k, v in entry.items()
                              if k not in SCHEMA["constraintEntry"]["required"]}, at, out)


def _check_counterfactual(exp: Experiment, base: str, out: list[ErrorFinding]) -> None:
    if exp.has_anchor and (isinstance(exp.anchor_row, bool)
                           or not isinstance(exp.anchor_row, (dict, int))):
        out.append(finding("EC4", "typeMismatch", f"{base}.anchorRow",
                           "'anchorRow' must be a row index or a predicate map"))
    if exp.closest_to_feature is not None and not isinstance(exp.closest_to_feature, str):
        out.append(finding("EC4", "typeMismatch", f"{base}.closestToFeature",
                           "'closestToFeature' must be a column name string"))


def _check_importance(exp: Experiment, base: str, out: list[ErrorFinding]) -> None:
    if not exp.has_top:
        return
    if not isinstance(exp.top, int) or isinstance(exp.top, bool):
        out.append(finding("EC4", "typeMismatch", f"{base}.top",
                           "'top' must be a signed integer"))
    elif exp.top == 0:
        out.append(finding("EC4", "invalidTop", f"{base}.top",
                           "'top' must be non-zero (+k most, -k least important)"))


# ---------------------------------------------------------------------------
# Semantic lints (reference-free subset of EC5-EC10)

_SQLISH = ("select ", "where ", " like ", "regex", "regexp", " or ", " and ", ";", "%")


def lint_semantics(spec: Spec, ds) -> list[ErrorFinding]:
    """Functional defects decidable without a ground-truth reference.

    ``ds`` is a Dataset (anything with a ``meta`` mapping of column
    name to ColumnMeta and an ``encodings`` mapping works).
    """
    meta = ds.meta
    encodings = getattr(ds, "encodings", {})
    out: list[ErrorFinding] = []

    def known_column(name, path) -> bool:
        if not isinstance(name, str):
            return False
        if name not in meta:
            out.append(finding("EC6", "unknownColumn", path,
                               f"column {name!r} is not in dataset {ds.name!r}"))
            return False
        return True

    if isinstance(spec.dataset, str) and spec.dataset != ds.name:
        out.append(finding("EC6", "datasetMismatch", "dataset",
                           f"specification names dataset {spec.dataset!r} but "
                           f"{ds.name!r} is bound"))

    for j, name in enumerate(spec.output_variables or []):
        known_column(name, f"outputVariable[{j}]")

    # model type compatibility with every output it may serve
    classifier_types = set(SCHEMA["modelDecl"]["classifierTypes"])
    regressor_types = set(SCHEMA["modelDecl"]["regressorTypes"]) - {"stubLinear"}
    for i, decl in enumerate(spec.models or []):
        for name in spec.output_variables or []:
            col = meta.get(name) if isinstance(name, str) else None
            if col is None:
                continue
            if col.kind == "continuous" and decl.type in classifier_types:
                out.append(finding(
                    "EC6", "modelTypeMismatch", f"model[{i}].type",
                    f"{decl.type} cannot predict continuous column {name!r}"))
            if col.kind in ("categorical", "binary") and decl.type in regressor_types:
                out.append(finding(
                    "EC6", "modelTypeMismatch", f"model[{i}].type",
                    f"{decl.type} cannot predict {col.kind} column {name!r}"))

    if spec.scope is not None:
        _lint_scope(spec, ds, out)
        if not any(e.has_scope_ref and e.scope_ref == "scope" for e in spec.experiments):
            out.append(finding(
                "EC8", "scopeUnreferenced", "scope",
                "a scope is defined but no experiment references it; "
                "the filter would be ignored"))

    for i, exp in enumerate(spec.experiments):
        _lint_experiment(spec, exp, i, ds, known_column, out)
    return out


def _valid_scope_value(col, encodings: dict, value: Any) -> bool:
    cats = set(col.categories or ())
    if value in cats:
        return True
    labels = set((encodings.get(col.name) or {}).values())
    return value in labels


def _lint_scope(spec: Spec, ds, out: list[ErrorFinding]) -> None:
    meta, encodings = ds.meta, getattr(ds, "encodings", {})
    operators = SCHEMA["predicate"]["operators"]
    functions = SCHEMA["predicate"]["functions"]
    for col_name in sorted(spec.scope):
        pred = spec.scope[col_name]
        path = f"scope.{col_name}"
        if col_name not in meta:
            out.append(finding("EC6", "unknownColumn", path,
                               f"scope filters unknown column {col_name!r}"))
            continue
        col = meta[col_name]
        if pred.is_raw:
            raw = pred.raw
            if isinstance(raw, str) and any(tok in raw.lower() for tok in _SQLISH):
                out.append(finding("EC8", "unsupportedScopeExpression", path,
                                   "scope predicates must be operator/value objects, "
                                   f"not query expressions: {raw!r}"))
            else:
                out.append(finding("EC8", "invalidPredicate", path,
                                   "scope predicates must be operator/value objects"))
            continue
        if pred.extras:
            out.append(finding("EC8", "unsupportedScopeExpression", path,
                               f"unsupported predicate parts: {sorted(pred.extras)}"))
        if pred.operator not in operators:
            out.append(finding("EC8", "invalidPredicate", path,
                               f"unknown operator {pred.operator!r}"))
        if pred.function is not None:
            if pred.has_value:
                out.append(finding("EC8", "invalidPredicate", path,
                                   "a predicate takes 'value' or 'function', not both"))
            if pred.function not in functions:
                out.append(finding("EC8", "invalidPredicate", f"{path}.function",
                                   f"unknown scope function {pred.function!r}"))
            elif col.kind != "continuous":
                out.append(finding("EC8", "functionOnCategorical", f"{path}.function",
                                   f"scope functions need a continuous column; "
                                   f"{col_name!r} is {col.kind}"))
        elif pred.has_value:
            if col.kind in ("categorical", "binary"):
                values = pred.value if isinstance(pred.value, list) else [pred.value]
                for v in values:
                    if isinstance(v, str) and any(tok in v.lower() for tok in _SQLISH):
                        out.append(finding("EC8", "unsupportedScopeExpression",
                                           f"{path}.value",
                                           f"scope value looks like a query expression: {v!r}"))
                    elif not _valid_scope_value(col, encodings, v):
                        out.append(finding(
                            "EC8", "scopeValueUnknown", f"{path}.value",
                            f"{v!r} is not a category or encoded label of {col_name!r}"))
        else:
            out.append(finding("EC8", "invalidPredicate", path,
                               "predicate needs a 'value' or a 'function'"))


def _lint_experiment(spec: Spec, exp: Experiment, i: int, ds,
                     known_column, out: list[ErrorFinding]) -> None:
    meta, encodings = ds.meta, getattr(ds, "encodings", {})
    base = f"experiments[{i}]"

    if exp.is_scoped_type and spec.scope is not None and not exp.has_scope_ref:
        out.append(finding(
            "EC8", "scopeUnreferenced", base,
            f"{exp.experiment_type} does not reference the defined scope; "
            "the filter would be ignored"))

    for j, p in enumerate(exp.perturbs or []):
        at = f"{base}.perturb[{j}]"
        if not known_column(p.variable, f"{at}.variable"):
            continue
        col = meta[p.variable]
        if col.kind == "continuous":
            if p.op == "setTo" and _is_num(p.value) and col.min is not None:
                if not col.min <= p.value <= col.max:
                    out.append(finding(
                        "EC9", "boundOutOfRange", f"{at}.value",
                        f"{p.value} is outside the dataset bounds "
                        f"[{col.min}, {col.max}] of {p.variable!r}"))
        else:
            if p.unit == "percent" or (p.op == "changeBy"):
                out.append(finding("EC5", "opOnCategorical", f"{at}.op",
                                   f"'changeBy' needs a continuous column; "
                                   f"{p.variable!r} is {col.kind}"))
            elif p.op == "setTo" and p.has_value and \
                    not _valid_scope_value(col, encodings, p.value):
                out.append(finding("EC6", "unknownCategory", f"{at}.value",
                                   f"{p.value!r} is not a category of {p.variable!r}"))
        for col_name in sorted(p.filter or {}):
            known_column(col_name, f"{at}.filter.{col_name}")

    if exp.range is not None:
        at = f"{base}.range"
        if known_column(exp.range.variable, f"{at}.variable"):
            col = meta[exp.range.variable]
            if col.kind != "continuous":
                out.append(finding("EC6", "sweepOnCategorical", f"{at}.variable",
                                   f"range sweeps need a continuous column; "
                                   f"{exp.range.variable!r} is {col.kind}"))
            elif col.min is not None:
                if _is_num(exp.range.lower_bound) and exp.range.lower_bound < col.min:
                    out.append(finding("EC9", "boundOutOfRange", f"{at}.lowerBound",
                                       f"{exp.range.lower_bound} is below the dataset "
                                       f"minimum {col.min} of {exp.range.variable!r}"))
                if _is_num(exp.range.upper_bound) and exp.range.upper_bound > col.max:
                    out.append(finding("EC9", "boundOutOfRange", f"{at}.upperBound",
                                       f"{exp.range.upper_bound} is above the dataset "
                                       f"maximum {col.max} of {exp.range.variable!r}"))

    if exp.kind is not None and isinstance(exp.kind.target, str):
        if spec.output_variables and exp.kind.target not in spec.output_variables:
            out.append(finding("EC7", "targetNotOutput", f"{base}.kind.target",
                               f"goal-seek target {exp.kind.target!r} is not an "
                               "output variable"))
    for j, name in enumerate(exp.search_variables or []):
        known_column(name, f"{base}.searchVariables[{j}]")
    if isinstance(exp.constraints, list):
        for j, entry in enumerate(exp.constraints):
            if isinstance(entry, dict):
                known_column(entry.get("variable"), f"{base}.constraints[{j}].variable")
    if isinstance(exp.set_fixed, list):
        for j, entry in enumerate(exp.set_fixed):
            if isinstance(entry, dict):
                known_column(entry.get("variable"), f"{base}.setFixed[{j}].variable")
                col = meta.get(entry.get("variable"))
                v = entry.get("value")
                if col is not None and col.kind == "continuous" and _is_num(v) \
                        and col.min is not None and not col.min <= v <= col.max:
                    out.append(finding("EC9", "boundOutOfRange",
                                       f"{base}.setFixed[{j}].value",
                                       f"{v} is outside the dataset bounds of "
                                       f"{entry.get('variable')!r}"))
    if exp.closest_to_feature is not None:
        known_column(exp.closest_to_feature, f"{base}.closestToFeature")
    if isinstance(exp.anchor_row, dict):
        for col_name in sorted(exp.anchor_row):
            known_column(col_name, f"{base}.anchorRow.{col_name}")
    if exp.family == "importance" and isinstance(exp.top, int) \
            and not isinstance(exp.top, bool):
        inputs = [c for c in meta.values() if c.role == "input"]
        if abs(exp.top) > len(inputs):
            out.append(finding("EC9", "topExceedsFeatures", f"{base}.top",
                               f"|top| = {abs(exp.top)} exceeds the {len(inputs)} "
                               "available input features"))


# ---------------------------------------------------------------------------
# Property-level diffing


@dataclass(frozen=True)
class PropertyDiff:
    path: str
    kind_of_change: str  # missing | extra | valueMismatch | typeMismatch | substituted
    candidate_value: Any = None
    reference_value: Any = None

    def to_tree(self) -> dict:
        return {"path": self.path, "kindOfChange": self.kind_of_change,
                "candidateValue": self.candidate_value,
                "referenceValue": self.reference_value}


# Construct-level keys whose missing/extra pairs indicate one structure
# being swapped for another (the cross-property substitution pattern).
_CONSTRUCT_KEYS = {"perturb", "range", "kind", "constraints", "setFixed", "scope",
                   "filter", "searchVariables", "anchorRow", "top", "closestToFeature"}


def _type_class(v: Any) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, _NUM):
        return "number"
    if isinstance(v, str):
        return "string"
    if isinstance(v, dict):
        return "object"
    if isinstance(v, list):
        return "array"
    return "null"


def _scalar_list(node: Any) -> bool:
    return isinstance(node, list) and all(not isinstance(x, (dict, list)) for x in node)


def _walk_diff(cand: Any, ref: Any, path: str, out: list[PropertyDiff]) -> None:
    if isinstance(cand, dict) and isinstance(ref, dict):
        for key in sorted(set(cand) | set(ref)):
            sub = join_path(path, key) if path else key
            if key not in cand:
                out.append(PropertyDiff(sub, "missing", None, ref[key]))
            elif key not in ref:
                out.append(PropertyDiff(sub, "extra", cand[key], None))
            else:
                _walk_diff(cand[key], ref[key], sub, out)
        return
    if _scalar_list(cand) and _scalar_list(ref):
        cand_left = list(cand)
        for v in ref:
            if v in cand_left:
                cand_left.remove(v)
        ref_left = list(ref)
        for v in cand:
            if v in ref_left:
                ref_left.remove(v)
        if not cand_left and not ref_left:
            # same multiset; a pure ordering difference is still a difference
            if list(cand) != list(ref):
                out.append(PropertyDiff(path, "valueMismatch", list(cand), list(ref)))
            return
        for v in ref_left:
            out.append(PropertyDiff(path, "missing", None, v))
        for v in cand_left:
            out.append(PropertyDiff(path, "extra", v, None))
        return
    if isinstance(cand, list) and isinstance(ref, list):
        for i in range(max(len(cand), len(ref))):
            sub = f"{path}[{i}]"
            if i >= len(cand):
                out.append(PropertyDiff(sub, "missing", None, ref[i]))
            elif i >= len(ref):
                out.append(PropertyDiff(sub, "extra", cand[i], None))
            else:
                _walk_diff(cand[i], ref[i], sub, out)
        return
    if cand == ref and type(cand) is type(ref):
        return
    if _type_class(cand) != _type_class(ref):
        out.append(PropertyDiff(path, "typeMismatch", cand, ref))
    elif cand != ref:
        out.append(PropertyDiff(path, "valueMismatch", cand, ref))


def _pair_substitutions(diffs: list[PropertyDiff]) -> list[PropertyDiff]:
    """Pair construct-level missing/extra diffs into 'substituted' diffs."""
    def construct_key(d: PropertyDiff) -> str | None:
        last = d.path.split(".")[-1]
        last = last.split("[")[0]
        return last if last in _CONSTRUCT_KEYS else None

    missing = [d for d in diffs if d.kind_of_change == "missing" and construct_key(d)]
    extra = [d for d in diffs if d.kind_of_change == "extra" and construct_key(d)]
    paired: list[PropertyDiff] = []
    used: set[int] = set()
    consumed: set[int] = set()
    for m in missing:
        m_key = construct_key(m)
        for idx, e in enumerate(extra):
            if idx in used or construct_key(e) == m_key:
                continue
            used.add(idx)
            consumed.add(id(m))
            consumed.add(id(e))
            paired.append(PropertyDiff(
                e.path, "substituted",
                candidate_value={construct_key(e): e.candidate_value},
                reference_value={m_key: m.reference_value}))
            break
    if not paired:
        return diffs
    out = [d for d in diffs if id(d) not in consumed]
    return out + paired


def diff_specs(candidate: Spec, reference: Spec) -> list[PropertyDiff]:
    """Order-independent property-level differences.

    Empty exactly when the canonical serializations are byte-equal.
    Scalar lists (output variables, search variables) compare as
    multisets; object lists compare positionally.
    """
    diffs: list[PropertyDiff] = []
    _walk_diff(candidate.to_tree(), reference.to_tree(), "", diffs)
    return _pair_substitutions(diffs)


# ---------------------------------------------------------------------------
# Diff -> error category


def _last_key(path: str) -> str:
    tail = path.split(".")[-1]
    return tail.split("[")[0]


def _has_segment(path: str, *names: str) -> bool:
    segs = {seg.split("[")[0] for seg in path.split(".")}
    return any(n in segs for n in names)


def _categorize_one(diff: PropertyDiff) -> tuple[str, str]:
    """One (category, code) per diff, by the documented precedence
    EC10 > EC7 > EC8 > EC6 > EC9 > EC5 (substitutions dominate, then
    constraint faults, scope faults, variable faults, property faults)."""
    path, kind = diff.path, diff.kind_of_change
    last = _last_key(path)

    if kind == "substituted":
        return "EC10", "crossPropertySubstitution"

    # losses of whole mandatory blocks behave like compile failures;
    # a missing list ENTRY (perturb[1]) is a semantic fault, not EC3
    raw_tail = path.split(".")[-1]
    if kind == "missing" and raw_tail in ("perturb", "kind"):
        return "EC3", f"missing{raw_tail.capitalize()}"
    if kind == "missing" and _has_segment(path, "kind") and last in ("target", "value"):
        return "EC3", "missingKey"
    if kind == "typeMismatch" and _has_segment(path, "kind") and last in ("target", "value"):
        return "EC4", "swappedTargetValue"

    if _has_segment(path, "constraints", "setFixed", "objective") or \
            _has_segment(path, "kind"):
        if _has_segment(path, "constraints"):
            if kind == "missing":
                return "EC7", "missingConstraint"
            if kind == "extra":
                return "EC7", "extraConstraint"
            if last == "operator":
                return "EC7", "reversedInequality"
            if last == "variable":
                return "EC7", "wrongConstraintVariable"
            return "EC7", "constraintMismatch"
        if _has_segment(path, "setFixed"):
            return "EC7", "setFixedMisuse"
        if _has_segment(path, "objective"):
            return "EC7", "objectiveMismatch"
        return "EC7", "kindMismatch"

    if _has_segment(path, "scope"):
        if kind == "missing":
            return "EC8", "missingScope"
        if kind == "extra":
            return "EC8", "extraScope"
        return "EC8", "scopeMismatch"

    if _has_segment(path, "outputVariable"):
        if kind == "missing":
            return "EC6", "missingOutputVariable"
        if kind == "extra":
            return "EC6", "extraOutputVariable"
        return "EC6", "wrongOutputVariable"
    if _has_segment(path, "model"):
        return "EC6", "modelMismatch"
    if last == "variable" or _has_segment(path, "searchVariables") or \
            last == "closestToFeature":
        return "EC6", "wrongInputVariable"

    if _has_segment(path, "range") or last == "top" or \
            _has_segment(path, "anchorRow") or last == "desiredOutcome":
        if last == "top" and kind == "valueMismatch" and \
                _is_num(diff.candidate_value) and _is_num(diff.reference_value) and \
                diff.candidate_value == -diff.reference_value:
            return "EC9", "wrongTopSign"
        if kind == "missing":
            return "EC9", f"missing{last[0].upper()}{last[1:]}"
        if kind == "extra":
            return "EC9", "extraProperty"
        return "EC9", "propertyMismatch"

    if last == "experimentType":
        return "EC5", "experimentTypeMismatch"
    if _has_segment(path, "perturb", "filter"):
        if last == "op":
            return "EC5", "wrongOp"
        if last == "unit":
            return "EC5", "wrongUnit"
        if kind == "missing":
            return "EC5", "missingPerturbation"
        if kind == "extra":
            return "EC5", "extraPerturbation"
        return "EC5", "perturbationMismatch"
    return "EC5", "uncategorized"


def categorize_errors(diffs: list[PropertyDiff], candidate: Spec,
                      reference: Spec) -> list[ErrorFinding]:
    """Map every diff to exactly one finding (total by construction)."""
    out = []
    for diff in diffs:
        category, code = _categorize_one(diff)
        kind = diff.kind_of_change
        if kind == "missing":
            msg = f"reference has {diff.path!r} but the candidate omits it"
        elif kind == "extra":
            msg = f"candidate adds {diff.path!r} not present in the reference"
        elif kind == "valueMismatch":
            msg = (f"{diff.path!r} is {diff.candidate_value!r}, "
                   f"reference says {diff.reference_value!r}")
        elif kind == "typeMismatch":
            msg = f"{diff.path!r} has the wrong value type"
        else:
            msg = (f"candidate replaced {sorted(diff.reference_value)} "
                   f"with {sorted(diff.candidate_value)} at {diff.path!r}")
        out.append(finding(category, code, diff.path, msg))
    return out


def audit_spec(text: str, reference: Spec | None = None,
               ds=None) -> list[ErrorFinding]:
    """Full audit pipeline: structure, then lints and reference diff."""
    findings = validate_structure(text)
    if blocking(findings):
        return findings
    spec = parse_spec(text)
    assert isinstance(spec, Spec)
    if ds is not None:
        findings = findings + lint_semantics(spec, ds)
    if reference is not None:
        findings = findings + categorize_errors(diff_specs(spec, reference),
                                                spec, reference)
    return findings
