"""Tabular datasets: loading, metadata inference, scopes, perturbations.

Input files are UTF-8 CSV with a header row, comma delimiter, and ``.``
decimals. An optional sidecar ``<dataset>.enc.json`` next to the file
declares category encodings (code -> label) and kind/role overrides.
Rows with missing cells are dropped with a warning.

Datasets are immutable after load; perturbations produce copy-on-write
row views and never touch the base columns.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .spec import Predicate

log = logging.getLogger(__name__)

CATEGORICAL_DISTINCT_LIMIT = 10


class DatasetError(Exception):
    pass


class ScopeError(Exception):
    pass


class PerturbError(Exception):
    pass


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    kind: str  # continuous | categorical | binary
    role: str  # input | output | identifier
    min: float | None = None
    max: float | None = None
    categories: tuple | None = None


class Dataset:
    """Column-major immutable table with per-column metadata."""

    def __init__(self, name: str, columns: list[ColumnMeta],
                 data: Mapping[str, np.ndarray],
                 encodings: Mapping[str, Mapping[Any, str]] | None = None):
        self.name = name
        self.columns = list(columns)
        self._data = {k: np.asarray(v) for k, v in data.items()}
        for arr in self._data.values():
            arr.setflags(write=False)
        self.encodings = {k: dict(v) for k, v in (encodings or {}).items()}
        lengths = {len(v) for v in self._data.values()}
        if len(lengths) > 1:
            raise DatasetError("columns have unequal lengths")
        self.n_rows = lengths.pop() if lengths else 0
        self.meta = {c.name: c for c in self.columns}

    def column(self, name: str) -> np.ndarray:
        try:
            return self._data[name]
        except KeyError:
            raise DatasetError(f"unknown column {name!r}") from None

    def input_columns(self, exclude: Iterable[str] = ()) -> list[str]:
        skip = set(exclude)
        return [c.name for c in self.columns if c.role == "input" and c.name not in skip]

    def decode(self, column: str, value: Any) -> Any:
        """Map an encoded label (e.g. 'Transactional') back to its code."""
        labels = self.encodings.get(column) or {}
        for code, label in labels.items():
            if label == value:
                return code
        return value

    def label_for(self, column: str, code: Any) -> Any:
        labels = self.encodings.get(column) or {}
        return labels.get(code, code)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for col in sorted(self._data):
            h.update(col.encode())
            h.update(np.asarray(self._data[col]).tobytes() if
                     self._data[col].dtype != object else
                     repr(list(self._data[col])).encode())
        return h.hexdigest()

    def all_rows(self) -> np.ndarray:
        return np.arange(self.n_rows)


class RowView:
    """A perturbed view over a subset of dataset rows.

    Only overridden columns are materialized; everything else reads
    through to the base dataset.
    """

    def __init__(self, dataset: Dataset, row_indices: np.ndarray,
                 overrides: dict[str, np.ndarray] | None = None):
        self.dataset = dataset
        self.row_indices = np.asarray(row_indices, dtype=int)
        self.overrides = overrides or {}

    @property
    def n_rows(self) -> int:
        return len(self.row_indices)

    def column(self, name: str) -> np.ndarray:
        if name in self.overrides:
            return self.overrides[name]
        return self.dataset.column(name)[self.row_indices]

    def with_override(self, name: str, values: np.ndarray) -> "RowView":
        new = dict(self.overrides)
        new[name] = values
        return RowView(self.dataset, self.row_indices, new)


def view_of(ds: Dataset, rows: np.ndarray | None = None) -> RowView:
    return RowView(ds, ds.all_rows() if rows is None else rows)


# ---------------------------------------------------------------------------
# Loading


def _parse_cell(text: str) -> Any:
    s = text.strip()
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        v = float(s)
        return v if math.isfinite(v) else None
    except ValueError:
        return s


def _infer_kind(values: list, hint: str | None) -> str:
    distinct = set(values)
    if hint == "binary":
        if len(distinct) != 2:
            raise DatasetError(f"binary hint but {len(distinct)} distinct values")
        return "binary"
    if hint == "categorical":
        return "binary" if len(distinct) == 2 else "categorical"
    if hint == "continuous":
        return "continuous"
    if any(isinstance(v, str) for v in values):
        return "binary" if len(distinct) == 2 else "categorical"
    if len(distinct) == 2:
        return "binary"
    if len(distinct) <= CATEGORICAL_DISTINCT_LIMIT and \
            all(float(v).is_integer() for v in values):
        return "categorical"
    return "continuous"


def _sidecar_path(source: Path) -> Path:
    return source.with_suffix("").with_suffix(".enc.json") if source.suffix \
        else source.with_suffix(".enc.json")


def load_dataset(source: str | Path, encoding_hints: Mapping | None = None) -> Dataset:
    """Load a CSV into a Dataset, inferring column metadata.

    Hints (from the sidecar file or the ``encoding_hints`` argument)
    override inference; the argument wins over the sidecar.
    """
    source = Path(source)
    if not source.exists():
        raise DatasetError(f"dataset file not found: {source}")
    hints: dict = {}
    sidecar = _sidecar_path(source)
    if sidecar.exists():
        hints = json.loads(sidecar.read_text("utf-8")).get("columns", {})
    for col, h in (encoding_hints or {}).items():
        hints.setdefault(col, {}).update(h)

    with source.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"empty dataset file: {source}") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DatasetError("duplicate column names in header")
        raw_rows: list[list] = []
        dropped = 0
        for idx, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetError(f"ragged row at line {idx}: expected "
                                   f"{len(header)} cells, found {len(row)}")
            cells = [_parse_cell(c) for c in row]
            if any(c is None for c in cells):
                dropped += 1
                continue
            raw_rows.append(cells)
    if dropped:
        log.warning("%s: dropped %d row(s) with missing values", source.name, dropped)
    if not raw_rows:
        raise DatasetError(f"no usable rows in {source}")

    name = source.stem
    columns: list[ColumnMeta] = []
    data: dict[str, np.ndarray] = {}
    encodings: dict[str, dict] = {}
    n = len(raw_rows)
    for j, col in enumerate(header):
        values = [r[j] for r in raw_rows]
        hint = hints.get(col, {})
        labels = hint.get("labels")
        if labels:
            # JSON keys are strings; map back to the numeric codes they name
            enc = {}
            for code, label in labels.items():
                enc[_parse_cell(code)] = label
            encodings[col] = enc
        kind = _infer_kind(values, hint.get("kind"))
        role = hint.get("role")
        if role is None:
            is_int_col = all(isinstance(v, int) for v in values)
            role = "identifier" if is_int_col and len(set(values)) == n \
                and kind == "continuous" else "input"
        if kind == "continuous":
            arr = np.asarray(values, dtype=float)
            columns.append(ColumnMeta(col, kind, role,
                                      float(arr.min()), float(arr.max()), None))
            data[col] = arr
        else:
            cats = sorted(set(values), key=lambda v: (isinstance(v, str), v))
            if all(isinstance(v, (int, float)) for v in values):
                arr = np.asarray(values, dtype=float)
            else:
                arr = np.asarray(values, dtype=object)
            if col in encodings:
                missing = [c for c in cats if c not in encodings[col]]
                if missing:
                    raise DatasetError(
                        f"column {col!r} declares encodings but codes "
                        f"{missing} have no label")
            columns.append(ColumnMeta(col, kind, role, None, None, tuple(cats)))
            data[col] = arr
    return Dataset(name, columns, data, encodings)


# ---------------------------------------------------------------------------
# Scope evaluation


def resolve_scope_function(ds: Dataset, column: str, function: str) -> float:
    """Column statistic; quartiles use the nearest-rank method
    (1-based index ``ceil(q * n)`` into the sorted values)."""
    col = ds.meta.get(column)
    if col is None:
        raise ScopeError(f"unknown column {column!r}")
    if col.kind != "continuous":
        raise ScopeError(f"scope functions need a continuous column; "
                         f"{column!r} is {col.kind}")
    values = ds.column(column)
    if len(values) == 0:
        raise ScopeError(f"column {column!r} is empty")
    if function == "min":
        return float(values.min())
    if function == "max":
        return float(values.max())
    if function == "mean":
        return float(values.mean())
    if function == "median":
        return float(np.median(values))
    quartiles = {"quartile1": 0.25, "quartile2": 0.5, "quartile3": 0.75}
    if function in quartiles:
        q = quartiles[function]
        ordered = np.sort(values)
        rank = math.ceil(q * len(ordered))
        return float(ordered[max(rank, 1) - 1])
    raise ScopeError(f"unknown scope function {function!r}")


def _as_predicate(pred: Any) -> Predicate:
    if isinstance(pred, Predicate):
        return pred
    return Predicate.from_tree(pred)


def _predicate_mask(ds: Dataset, column: str, pred: Predicate) -> np.ndarray:
    col = ds.meta.get(column)
    if col is None:
        raise ScopeError(f"unknown column {column!r}")
    if pred.is_raw or pred.operator is None:
        raise ScopeError(f"unsupported predicate on {column!r}")
    values = ds.column(column)

    if pred.function is not None:
        threshold = resolve_scope_function(ds, column, pred.function)
        rhs: Any = threshold
    elif pred.has_value:
        rhs = pred.value
    else:
        raise ScopeError(f"predicate on {column!r} has neither value nor function")

    def decode(v):
        return ds.decode(column, v) if col.kind in ("categorical", "binary") else v

    op = pred.operator
    if op == "in":
        if not isinstance(rhs, list):
            raise ScopeError(f"'in' needs a list of values on {column!r}")
        targets = [decode(v) for v in rhs]
        return np.isin(values, targets)
    rhs = decode(rhs)
    if op == "==":
        return values == rhs
    if op == "!=":
        return values != rhs
    if col.kind != "continuous" and op in ("<", "<=", ">", ">="):
        raise ScopeError(f"ordering comparisons need a continuous column; "
                         f"{column!r} is {col.kind}")
    if not isinstance(rhs, (int, float)) or isinstance(rhs, bool):
        raise ScopeError(f"comparison against non-number on {column!r}")
    if op == "<":
        return values < rhs
    if op == "<=":
        return values <= rhs
    if op == ">":
        return values > rhs
    if op == ">=":
        return values >= rhs
    raise ScopeError(f"unknown operator {op!r} on {column!r}")


def evaluate_scope(ds: Dataset, scope: Mapping[str, Any] | None) -> np.ndarray:
    """Row indices satisfying the conjunction of predicates.

    An empty or absent scope selects every row.
    """
    if not scope:
        return ds.all_rows()
    predicates = getattr(scope, "predicates", scope)
    mask = np.ones(ds.n_rows, dtype=bool)
    for column in sorted(predicates):
        mask &= _predicate_mask(ds, column, _as_predicate(predicates[column]))
    return np.nonzero(mask)[0]


# ---------------------------------------------------------------------------
# Perturbations


def _filter_mask(ds: Dataset, rows: np.ndarray, flt: Mapping[str, Any] | None) -> np.ndarray:
    if not flt:
        return np.ones(len(rows), dtype=bool)
    mask = np.ones(len(rows), dtype=bool)
    for column in sorted(flt):
        col_mask = _predicate_mask(ds, column, _as_predicate(flt[column]))
        mask &= col_mask[rows]
    return mask


def apply_perturbations(ds: Dataset, row_set: np.ndarray, perturbs: list) -> RowView:
    """Copy-on-write view with each perturbation applied to its rows.

    Filters select which of the view's rows change; unlike a scope, no
    row is removed from the view.
    """
    rows = np.asarray(row_set, dtype=int)
    view = RowView(ds, rows)
    for p in perturbs:
        col = ds.meta.get(p.variable)
        if col is None:
            raise PerturbError(f"unknown column {p.variable!r}")
        mask = _filter_mask(ds, rows, p.filter)
        values = np.array(view.column(p.variable), copy=True)
        if p.op == "setTo":
            target = p.value
            if col.kind in ("categorical", "binary"):
                target = ds.decode(p.variable, target)
                if col.categories and target not in col.categories:
                    raise PerturbError(
                        f"{p.value!r} is not a known category of {p.variable!r}")
            elif not isinstance(target, (int, float)) or isinstance(target, bool):
                raise PerturbError(f"setTo on {p.variable!r} needs a number")
            values[mask] = target
        elif p.op == "changeBy":
            if col.kind != "continuous":
                raise PerturbError(f"changeBy needs a continuous column; "
                                   f"{p.variable!r} is {col.kind}")
            if not isinstance(p.value, (int, float)) or isinstance(p.value, bool):
                raise PerturbError(f"changeBy on {p.variable!r} needs a number")
            if p.unit == "percent":
                values[mask] = values[mask] * (1.0 + p.value / 100.0)
            else:
                values[mask] = values[mask] + p.value
        else:
            raise PerturbError(f"unknown perturbation op {p.op!r}")
        view = view.with_override(p.variable, values)
    return view


def dataset_context(ds: Dataset) -> str:
    """Deterministic one-line-per-column summary used in prompts."""
    lines = [f"dataset {ds.name} ({ds.n_rows} rows)"]
    for col in ds.columns:
        if col.kind == "continuous":
            detail = f"range [{col.min:g}, {col.max:g}]"
        else:
            shown = [str(ds.label_for(col.name, c)) for c in (col.categories or ())[:8]]
            detail = "categories " + ", ".join(shown)
            if col.categories and len(col.categories) > 8:
                detail += ", ..."
        lines.append(f"- {col.name}: {col.kind} ({col.role}); {detail}")
    return "\n".join(lines)
