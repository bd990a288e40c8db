"""PSL document model.

A document is JSON text with the top-level properties ``dataset``,
``outputVariable``, ``objective``, ``model``, ``scope``, and
``experiments``. Parsing is deliberately lenient: any document whose
tree shape is sound becomes a typed :class:`Spec`, even when individual
values are wrong, so that the validator can report every defect with a
path instead of aborting. Unknown keys are preserved in ``extras`` (and
later flagged), never dropped.

All values are immutable in spirit: operations return new Specs and
never mutate their inputs.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

from .errors import ErrorFinding, finding
from .jsontree import (
    PathError,
    canonical_dumps,
    join_path,
    path_insert,
    path_remove,
    path_set,
)


_ABSENT = object()  # distinguishes "key not present" from a JSON null


def load_schema() -> dict:
    """The shipped ``pslschema.v1`` contract (single source of truth)."""
    text = resources.files("whatif").joinpath("pslschema.v1.json").read_text("utf-8")
    return json.loads(text)


SCHEMA = load_schema()
SCHEMA_VERSION = SCHEMA["version"]
EXPERIMENT_TYPES = tuple(SCHEMA["experimentTypes"])
MODEL_TYPES = tuple(SCHEMA["modelDecl"]["types"])


class SpecError(Exception):
    """Raised for operations that cannot return findings in-band."""

    def __init__(self, message: str, findings: list[ErrorFinding] | None = None):
        super().__init__(message)
        self.findings = findings or []


# ---------------------------------------------------------------------------
# Typed layer


@dataclass
class Predicate:
    operator: Any = None
    value: Any = None
    has_value: bool = False
    function: Any = None
    extras: dict = field(default_factory=dict)
    raw: Any = _ABSENT  # set when the predicate was not even an object

    @classmethod
    def from_tree(cls, node: Any) -> "Predicate":
        if not isinstance(node, dict):
            return cls(raw=node)
        known = {"operator", "value", "function"}
        return cls(
            operator=node.get("operator"),
            value=node.get("value"),
            has_value="value" in node,
            function=node.get("function"),
            extras={k: v for k, v in node.items() if k not in known},
        )

    @property
    def is_raw(self) -> bool:
        return self.raw is not _ABSENT

    def to_tree(self) -> Any:
        if self.is_raw:
            return copy.deepcopy(self.raw)
        out: dict[str, Any] = dict(self.extras)
        if self.operator is not None:
            out["operator"] = self.operator
        if self.has_value:
            out["value"] = self.value
        if self.function is not None:
            out["function"] = self.function
        return copy.deepcopy(out)


def _predicate_map(node: Any) -> dict[str, Predicate]:
    return {k: Predicate.from_tree(v) for k, v in node.items()}


def _predicate_map_tree(preds: Mapping[str, Predicate]) -> dict:
    return {k: p.to_tree() for k, p in preds.items()}


@dataclass
class Objective:
    goal: Any = None
    target_value: Any = None
    has_target: bool = False
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_tree(cls, node: dict) -> "Objective":
        known = {"goal", "targetValue"}
        return cls(
            goal=node.get("goal"),
            target_value=node.get("targetValue"),
            has_target="targetValue" in node,
            extras={k: v for k, v in node.items() if k not in known},
        )

    def to_tree(self) -> dict:
        out: dict[str, Any] = dict(self.extras)
        if self.goal is not None:
            out["goal"] = self.goal
        if self.has_target:
            out["targetValue"] = self.target_value
        return copy.deepcopy(out)


@dataclass
class ModelDecl:
    id: Any = None
    type: Any = None
    hyperparams: Any = None
    seed: Any = None
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_tree(cls, node: dict) -> "ModelDecl":
        known = {"id", "type", "hyperparams", "seed"}
        return cls(
            id=node.get("id"),
            type=node.get("type"),
            hyperparams=node.get("hyperparams"),
            seed=node.get("seed"),
            extras={k: v for k, v in node.items() if k not in known},
        )

    def to_tree(self) -> dict:
        out: dict[str, Any] = dict(self.extras)
        for key, val in (("id", self.id), ("type", self.type),
                         ("hyperparams", self.hyperparams), ("seed", self.seed)):
            if val is not None:
                out[key] = val
        return copy.deepcopy(out)


@dataclass
class Perturb:
    variable: Any = None
    op: Any = None
    unit: Any = None
    value: Any = None
    has_value: bool = False
    filter: dict[str, Predicate] | None = None
    filter_raw: Any = _ABSENT
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_tree(cls, node: dict) -> "Perturb":
        known = {"variable", "op", "unit", "value", "filter"}
        flt = node.get("filter", _ABSENT)
        return cls(
            variable=node.get("variable"),
            op=node.get("op"),
            unit=node.get("unit"),
            value=node.get("value"),
            has_value="value" in node,
            filter=_predicate_map(flt) if isinstance(flt, dict) else None,
            filter_raw=flt if flt is not _ABSENT and not isinstance(flt, dict) else _ABSENT,
            extras={k: v for k, v in node.items() if k not in known},
        )

    def to_tree(self) -> dict:
        out: dict[str, Any] = dict(self.extras)
        for key, val in (("variable", self.variable), ("op", self.op), ("unit", self.unit)):
            if val is not None:
                out[key] = val
        if self.has_value:
            out["value"] = self.value
        if self.filter is not None:
            out["filter"] = _predicate_map_tree(self.filter)
        elif self.filter_raw is not _ABSENT:
            out["filter"] = self.filter_raw
        return copy.deepcopy(out)


@dataclass
class RangeBlock:
    variable: Any = None
    lower_bound: Any = None
    upper_bound: Any = None
    step_size: Any = None
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_tree(cls, node: dict) -> "RangeBlock":
        known = {"variable", "lowerBound", "upperBound", "stepSize"}
        return cls(
            variable=node.get("variable"),
            lower_bound=node.get("lowerBound"),
            upper_bound=node.get("upperBound"),
            step_size=node.get("stepSize"),
            extras={k: v for k, v in node.items() if k not in known},
        )

    def to_tree(self) -> dict:
        out: dict[str, Any] = dict(self.extras)
        for key, val in (("variable", self.variable), ("lowerBound", self.lower_bound),
                         ("upperBound", self.upper_bound), ("stepSize", self.step_size)):
            if val is not None:
                out[key] = val
        return copy.deepcopy(out)


@dataclass
class GoalKind:
    target: Any = None
    value: Any = None
    has_value: bool = False
    direction: Any = None
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_tree(cls, node: dict) -> "GoalKind":
        known = {"target", "value", "direction"}
        return cls(
            target=node.get("target"),
            value=node.get("value"),
            has_value="value" in node,
            direction=node.get("direction"),
            extras={k: v for k, v in node.items() if k not in known},
        )

    def to_tree(self) -> dict:
        out: dict[str, Any] = dict(self.extras)
        if self.target is not None:
            out["target"] = self.target
        if self.has_value:
            out["value"] = self.value
        if self.direction is not None:
            out["direction"] = self.direction
        return copy.deepcopy(out)


@dataclass
class Experiment:
    experiment_type: Any = None
    model_ref: Any = None
    scope_ref: Any = None
    has_scope_ref: bool = False
    perturbs: list[Perturb] | None = None
    range: RangeBlock | None = None
    kind: GoalKind | None = None
    kind_raw: Any = _ABSENT
    search_variables: Any = None
    constraints: Any = None
    set_fixed: Any = None
    anchor_row: Any = None
    has_anchor: bool = False
    desired_outcome: Any = None
    has_desired: bool = False
    closest_to_feature: Any = None
    top: Any = None
    has_top: bool = False
    extras: dict = field(default_factory=dict)

    KNOWN_KEYS = {"experimentType", "model", "scope", "perturb", "range", "kind",
                  "searchVariables", "constraints", "setFixed", "anchorRow",
                  "desiredOutcome", "closestToFeature", "top"}

    @classmethod
    def from_tree(cls, node: dict) -> "Experiment":
        kind_node = node.get("kind", _ABSENT)
        perturb_node = node.get("perturb")
        range_node = node.get("range")
        return cls(
            experiment_type=node.get("experimentType"),
            model_ref=node.get("model"),
            scope_ref=node.get("scope"),
            has_scope_ref="scope" in node,
            perturbs=[Perturb.from_tree(p) for p in perturb_node]
            if isinstance(perturb_node, list) else None,
            range=RangeBlock.from_tree(range_node) if isinstance(range_node, dict) else None,
            kind=GoalKind.from_tree(kind_node) if isinstance(kind_node, dict) else None,
            kind_raw=kind_node if kind_node is not _ABSENT and not isinstance(kind_node, dict)
            else _ABSENT,
            search_variables=node.get("searchVariables"),
            constraints=node.get("constraints"),
            set_fixed=node.get("setFixed"),
            anchor_row=node.get("anchorRow"),
            has_anchor="anchorRow" in node,
            desired_outcome=node.get("desiredOutcome"),
            has_desired="desiredOutcome" in node,
            closest_to_feature=node.get("closestToFeature"),
            top=node.get("top"),
            has_top="top" in node,
            extras={k: v for k, v in node.items() if k not in cls.KNOWN_KEYS},
        )

    def to_tree(self) -> dict:
        out: dict[str, Any] = dict(self.extras)
        if self.experiment_type is not None:
            out["experimentType"] = self.experiment_type
        if self.model_ref is not None:
            out["model"] = self.model_ref
        if self.has_scope_ref:
            out["scope"] = self.scope_ref
        if self.perturbs is not None:
            out["perturb"] = [p.to_tree() for p in self.perturbs]
        if self.range is not None:
            out["range"] = self.range.to_tree()
        if self.kind is not None:
            out["kind"] = self.kind.to_tree()
        elif self.kind_raw is not _ABSENT:
            out["kind"] = self.kind_raw
        if self.search_variables is not None:
            out["searchVariables"] = self.search_variables
        if self.constraints is not None:
            out["constraints"] = self.constraints
        if self.set_fixed is not None:
            out["setFixed"] = self.set_fixed
        if self.has_anchor:
            out["anchorRow"] = self.anchor_row
        if self.has_desired:
            out["desiredOutcome"] = self.desired_outcome
        if self.closest_to_feature is not None:
            out["closestToFeature"] = self.closest_to_feature
        if self.has_top:
            out["top"] = self.top
        return copy.deepcopy(out)

    @property
    def has_raw_kind(self) -> bool:
        return self.kind is None and self.kind_raw is not _ABSENT

    @property
    def family(self) -> str | None:
        info = SCHEMA["experimentTypes"].get(self.experiment_type)
        return info["family"] if info else None

    @property
    def is_scoped_type(self) -> bool:
        info = SCHEMA["experimentTypes"].get(self.experiment_type)
        return bool(info and info["scoped"])


@dataclass
class Spec:
    dataset: Any = None
    output_variables: list | None = None
    objective: Objective | None = None
    models: list[ModelDecl] | None = None
    scope: dict[str, Predicate] | None = None
    experiments: list[Experiment] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    TOP_KEYS = {"dataset", "outputVariable", "objective", "model", "scope", "experiments"}

    @classmethod
    def from_tree(cls, tree: dict) -> "Spec":
        out_var = tree.get("outputVariable")
        if isinstance(out_var, str):
            out_vars: list | None = [out_var]
        elif isinstance(out_var, list):
            out_vars = list(out_var)
        else:
            out_vars = None
        return cls(
            dataset=tree.get("dataset"),
            output_variables=out_vars,
            objective=Objective.from_tree(tree["objective"])
            if isinstance(tree.get("objective"), dict) else None,
            models=[ModelDecl.from_tree(m) for m in tree["model"]]
            if isinstance(tree.get("model"), list) else None,
            scope=_predicate_map(tree["scope"]) if isinstance(tree.get("scope"), dict) else None,
            experiments=[Experiment.from_tree(e) for e in tree.get("experiments", [])
                         if isinstance(e, dict)],
            extras={k: v for k, v in tree.items() if k not in cls.TOP_KEYS},
        )

    def to_tree(self) -> dict:
        out: dict[str, Any] = copy.deepcopy(self.extras)
        if self.dataset is not None:
            out["dataset"] = self.dataset
        if self.output_variables is not None:
            out["outputVariable"] = list(self.output_variables)
        if self.objective is not None:
            out["objective"] = self.objective.to_tree()
        if self.models is not None:
            out["model"] = [m.to_tree() for m in self.models]
        if self.scope is not None:
            out["scope"] = _predicate_map_tree(self.scope)
        out["experiments"] = [e.to_tree() for e in self.experiments]
        return out

    def model_by_id(self, model_id: Any) -> ModelDecl | None:
        for decl in self.models or []:
            if decl.id == model_id:
                return decl
        return None


# ---------------------------------------------------------------------------
# Parsing


class _DupDict(dict):
    """Dict that remembers which keys appeared more than once in source."""

    __slots__ = ("dup_keys",)


def _dup_hook(pairs):
    d = _DupDict()
    dups = []
    for k, v in pairs:
        if k in d:
            dups.append(k)
        d[k] = v
    d.dup_keys = dups
    return d


def _collect_dups(node: Any, path: str, out: list[ErrorFinding]) -> None:
    if isinstance(node, dict):
        for k in getattr(node, "dup_keys", []):
            where = join_path(path, k) if path else k
            out.append(finding("EC2", "duplicatedKey", where,
                               f"key {k!r} appears more than once"))
        for k, v in node.items():
            _collect_dups(v, join_path(path, k) if path else k, out)
    elif isinstance(node, list):
        for i, item in enumerate(node):
            _collect_dups(item, f"{path}[{i}]", out)


def _strip_dup_dicts(node: Any) -> Any:
    if isinstance(node, dict):
        return {k: _strip_dup_dicts(v) for k, v in node.items()}
    if isinstance(node, list):
        return [_strip_dup_dicts(v) for v in node]
    return node


_ARRAY_KEYS = ("searchVariables", "constraints", "setFixed")


def _shape_findings(tree: dict) -> list[ErrorFinding]:
    """Container-shape mistakes (EC1). All of them, not just the first."""
    out: list[ErrorFinding] = []

    def bad(path, expected, got):
        out.append(finding("EC1", "containerShape", path,
                           f"expected {expected}, found {type(got).__name__}"))

    ov = tree.get("outputVariable")
    if "outputVariable" in tree and not isinstance(ov, (str, list)):
        bad("outputVariable", "a column name or an array of column names", ov)
    if "objective" in tree and not isinstance(tree["objective"], dict):
        bad("objective", "an object", tree["objective"])
    if "model" in tree:
        if not isinstance(tree["model"], list):
            bad("model", "an array of model declarations", tree["model"])
        else:
            for i, decl in enumerate(tree["model"]):
                if not isinstance(decl, dict):
                    bad(f"model[{i}]", "an object", decl)
    if "scope" in tree and not isinstance(tree["scope"], dict):
        bad("scope", "an object mapping columns to predicates", tree["scope"])
    exps = tree.get("experiments")
    if "experiments" in tree and not isinstance(exps, list):
        bad("experiments", "an array of experiments", exps)
    elif isinstance(exps, list):
        for i, exp in enumerate(exps):
            base = f"experiments[{i}]"
            if not isinstance(exp, dict):
                bad(base, "an object", exp)
                continue
            if "perturb" in exp and not isinstance(exp["perturb"], list):
                out.append(finding(
                    "EC1", "containerShape", f"{base}.perturb",
                    "perturb must be an array of perturbation objects, "
                    "found a single " + type(exp["perturb"]).__name__))
            elif isinstance(exp.get("perturb"), list):
                for j, p in enumerate(exp["perturb"]):
                    if not isinstance(p, dict):
                        bad(f"{base}.perturb[{j}]", "an object", p)
            if "range" in exp and not isinstance(exp["range"], dict):
                bad(f"{base}.range", "an object", exp["range"])
            for key in _ARRAY_KEYS:
                if key in exp and not isinstance(exp[key], list):
                    bad(f"{base}.{key}", "an array", exp[key])
    return out


def parse_spec(text: str) -> Spec | list[ErrorFinding]:
    """Parse a PSL document into a typed Spec.

    Returns findings instead of a Spec only for tree-level defects:
    empty input, malformed JSON, duplicate keys, and wrong container
    shapes. Everything else parses leniently and is left to the
    validator.
    """
    if not isinstance(text, str) or not text.strip():
        return [finding("EC1", "completeError", "", "document is empty")]
    try:
        tree = json.loads(text, object_pairs_hook=_dup_hook)
    except json.JSONDecodeError as exc:
        return [finding("EC1", "malformedTree", "",
                        f"document is not well-formed JSON: {exc.msg} "
                        f"(line {exc.lineno}, column {exc.colno})")]
    dup_findings: list[ErrorFinding] = []
    _collect_dups(tree, "", dup_findings)
    if dup_findings:
        return dup_findings
    tree = _strip_dup_dicts(tree)
    if not isinstance(tree, dict):
        return [finding("EC1", "containerShape", "",
                        f"document root must be an object, found {type(tree).__name__}")]
    shape = _shape_findings(tree)
    if shape:
        return shape
    return Spec.from_tree(tree)


def parse_spec_strict(text: str) -> Spec:
    parsed = parse_spec(text)
    if isinstance(parsed, list):
        raise SpecError("document does not parse", parsed)
    return parsed


def serialize_spec(spec: Spec) -> str:
    """Canonical text: sorted keys, stable number formatting.

    ``serialize(parse(serialize(s))) == serialize(s)`` for every valid
    Spec, and equal Specs serialize to identical bytes.
    """
    return canonical_dumps(spec.to_tree())


def specs_equal(a: Spec, b: Spec) -> bool:
    return serialize_spec(a) == serialize_spec(b)


# ---------------------------------------------------------------------------
# Defaults


def _column_meta(meta: Any, name: Any):
    table = getattr(meta, "meta", meta)
    try:
        return table.get(name)
    except AttributeError:
        return None


def populate_defaults(spec: Spec, meta: Any) -> Spec:
    """Fill the documented defaults; present values are never overwritten.

    ``meta`` is a Dataset or a mapping of column name to ColumnMeta.
    Idempotent: applying twice equals applying once.
    """
    from .models import select_model  # local import to avoid a cycle

    defaults = SCHEMA["defaults"]
    tree = spec.to_tree()
    problems: list[ErrorFinding] = []

    if "objective" not in tree:
        tree["objective"] = {"goal": defaults["objectiveGoal"]}

    output_vars = tree.get("outputVariable") or []
    if "model" not in tree and output_vars:
        out_meta = _column_meta(meta, output_vars[0])
        if out_meta is None:
            problems.append(finding("EC6", "unknownColumn", "outputVariable",
                                    f"cannot pick a default model: column "
                                    f"{output_vars[0]!r} is not in the dataset"))
        else:
            tree["model"] = [{"id": defaults["modelId"],
                              "type": select_model(out_meta),
                              "seed": defaults["modelSeed"]}]
    for decl in tree.get("model", []):
        if isinstance(decl, dict) and "seed" not in decl:
            decl["seed"] = defaults["modelSeed"]

    model_ids = [d.get("id") for d in tree.get("model", []) if isinstance(d, dict)]
    for i, exp in enumerate(tree.get("experiments", [])):
        if not isinstance(exp, dict):
            continue
        if "model" not in exp and model_ids:
            exp["model"] = model_ids[0]
        info = SCHEMA["experimentTypes"].get(exp.get("experimentType"))
        family = info["family"] if info else None
        if family == "range" and isinstance(exp.get("range"), dict):
            rng = exp["range"]
            col = _column_meta(meta, rng.get("variable"))
            needs_bounds = "lowerBound" not in rng or "upperBound" not in rng
            if needs_bounds and (col is None or col.min is None):
                problems.append(finding(
                    "EC6", "unknownColumn", f"experiments[{i}].range.variable",
                    f"cannot default range bounds: column {rng.get('variable')!r} "
                    "has no numeric bounds in the dataset"))
                continue
            if "lowerBound" not in rng:
                rng["lowerBound"] = col.min
            if "upperBound" not in rng:
                rng["upperBound"] = col.max
            if "stepSize" not in rng:
                lo, hi = rng["lowerBound"], rng["upperBound"]
                if isinstance(lo, (int, float)) and isinstance(hi, (int, float)) and hi > lo:
                    rng["stepSize"] = (hi - lo) / SCHEMA["defaults"]["rangeSteps"]
        elif family == "importance" and "top" not in exp:
            exp["top"] = defaults["importanceTop"]
        elif family in ("goalSeek", "constrainedGoalSeek"):
            kind = exp.get("kind")
            if isinstance(kind, dict) and "direction" not in kind:
                kind["direction"] = defaults["goalDirection"]
        if family == "point" and isinstance(exp.get("perturb"), list):
            for p in exp["perturb"]:
                if isinstance(p, dict) and "unit" not in p:
                    p["unit"] = defaults["perturbUnit"]

    if problems:
        raise SpecError("defaults require columns missing from the dataset", problems)
    return Spec.from_tree(tree)


# ---------------------------------------------------------------------------
# Patches


@dataclass(frozen=True)
class PatchOp:
    path: str
    action: str  # set | insert | remove
    value: Any = None


@dataclass(frozen=True)
class SpecPatch:
    ops: tuple[PatchOp, ...]

    @classmethod
    def single(cls, path: str, action: str, value: Any = None) -> "SpecPatch":
        return cls(ops=(PatchOp(path, action, value),))

    def to_tree(self) -> list:
        return [{"path": op.path, "action": op.action,
                 **({"value": op.value} if op.action != "remove" else {})}
                for op in self.ops]


def apply_patch(spec: Spec, patch: SpecPatch) -> Spec | list[ErrorFinding]:
    """Apply a patch; the result is re-validated before use.

    Returns the validation findings (and leaves the input spec
    untouched) when the patched document would not compile. Path errors
    raise :class:`PathError` since they indicate a caller bug, not a
    document defect.
    """
    from .validation import validate_structure  # local import to avoid a cycle

    tree = spec.to_tree()
    for op in patch.ops:
        if op.action == "set":
            path_set(tree, op.path, copy.deepcopy(op.value))
        elif op.action == "insert":
            path_insert(tree, op.path, copy.deepcopy(op.value))
        elif op.action == "remove":
            path_remove(tree, op.path)
        else:
            raise PathError(f"unknown patch action: {op.action!r}")
    text = canonical_dumps(tree)
    problems = validate_structure(text)
    if problems:
        return problems
    return parse_spec_strict(text)
