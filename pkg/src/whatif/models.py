"""Predictive models behind PSL ``model`` declarations.

The fitted estimators come from scikit-learn (forests, logistic and
linear regression); this module owns feature encoding, the model-family
selection rule, determinism (seeded, checksummed), served feature
importances, and the analytic ``stubLinear`` type used by tests.

Categorical inputs are one-hot expanded internally; importances of the
expanded columns are summed back to the source column so that rankings
speak about dataset variables, not encodings.
"""

from __future__ import annotations

import hashlib
import pickle
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from sklearn.ensemble import RandomForestClassifier, RandomForestRegressor
from sklearn.linear_model import LinearRegression, LogisticRegression

from .data import ColumnMeta, Dataset, RowView, view_of
from .spec import SCHEMA, ModelDecl

MIN_TRAINING_ROWS = 20
FOREST_TREES = 100
FOREST_DEPTH = 8

CLASSIFIER_TYPES = tuple(SCHEMA["modelDecl"]["classifierTypes"])
REGRESSOR_TYPES = tuple(SCHEMA["modelDecl"]["regressorTypes"])

MODEL_CACHE_VERSION = "modelcache.v1"


class ModelError(Exception):
    pass


def select_model(output_meta: ColumnMeta) -> str:
    """Default model family for an output column.

    Binary or categorical outputs get a random-forest classifier,
    continuous outputs a random-forest regressor. An explicit model
    declaration in the spec always takes precedence over this rule.
    """
    if output_meta.role == "identifier":
        raise ModelError(f"{output_meta.name!r} is an identifier column, "
                         "not a predictable output")
    if output_meta.kind in ("binary", "categorical"):
        return "randomForestClassifier"
    return "randomForestRegressor"


@dataclass
class _Encoder:
    """Fixed input-column order plus one-hot maps for categoricals."""

    input_columns: tuple[str, ...]
    categories: dict[str, tuple]  # categorical column -> category codes

    def feature_names(self) -> list[str]:
        names = []
        for col in self.input_columns:
            if col in self.categories:
                names.extend(f"{col}={c}" for c in self.categories[col])
            else:
                names.append(col)
        return names

    def matrix(self, view: RowView) -> np.ndarray:
        blocks = []
        for col in self.input_columns:
            values = view.column(col)
            if col in self.categories:
                cats = self.categories[col]
                block = np.zeros((len(values), len(cats)))
                for j, cat in enumerate(cats):
                    block[:, j] = values == cat
                blocks.append(block)
            else:
                blocks.append(np.asarray(values, dtype=float).reshape(-1, 1))
        return np.hstack(blocks) if blocks else np.zeros((view.n_rows, 0))

    def group_slices(self) -> list[tuple[str, slice]]:
        out, start = [], 0
        for col in self.input_columns:
            width = len(self.categories[col]) if col in self.categories else 1
            out.append((col, slice(start, start + width)))
            start += width
        return out


class _StubLinear:
    """y = sum(coef[col] * x_col) + intercept; no fitting involved."""

    def __init__(self, coefs: dict[str, float], intercept: float):
        self.coefs = coefs
        self.intercept = intercept

    def predict(self, X: np.ndarray, columns: list[str]) -> np.ndarray:
        out = np.full(X.shape[0], float(self.intercept))
        for j, col in enumerate(columns):
            out += self.coefs.get(col, 0.0) * X[:, j]
        return out


@dataclass
class TrainedModel:
    decl: ModelDecl
    input_columns: tuple[str, ...]
    output_column: str
    training_checksum: str
    encoder: _Encoder
    estimator: Any
    is_classifier: bool
    classes: tuple | None  # category codes, ordered; positive class is last
    feature_stds: np.ndarray

    @property
    def positive_class(self) -> Any:
        return self.classes[-1] if self.classes else None


def _training_checksum(ds: Dataset, rows: np.ndarray, inputs: list[str],
                       output: str, decl: ModelDecl) -> str:
    h = hashlib.sha256()
    h.update(repr((tuple(inputs), output, decl.type, decl.seed,
                   sorted((decl.hyperparams or {}).items()))).encode())
    h.update(np.asarray(rows).tobytes())
    for col in [*inputs, output]:
        arr = ds.column(col)[rows]
        h.update(arr.tobytes() if arr.dtype != object else repr(list(arr)).encode())
    return h.hexdigest()


def _make_estimator(decl: ModelDecl, classifier: bool):
    hp = decl.hyperparams or {}
    seed = int(decl.seed or 0)
    trees = int(hp.get("trees", FOREST_TREES))
    depth = int(hp.get("maxDepth", FOREST_DEPTH))
    if decl.type == "randomForestClassifier":
        return RandomForestClassifier(n_estimators=trees, max_depth=depth,
                                      random_state=seed, n_jobs=1)
    if decl.type == "randomForestRegressor":
        return RandomForestRegressor(n_estimators=trees, max_depth=depth,
                                     random_state=seed, n_jobs=1)
    if decl.type == "logisticRegressor":
        return LogisticRegression(max_iter=int(hp.get("maxIter", 1000)),
                                  random_state=seed)
    if decl.type == "linearRegressor":
        return LinearRegression()
    raise ModelError(f"unknown model type {decl.type!r}")


def train(ds: Dataset, inputs: list[str], output: str, decl: ModelDecl,
          rows: np.ndarray | None = None) -> TrainedModel:
    """Fit a model; identical (data, declaration, seed) means an
    identical checksum and bit-identical predictions."""
    rows = ds.all_rows() if rows is None else np.asarray(rows, dtype=int)
    for col in [*inputs, output]:
        if col not in ds.meta:
            raise ModelError(f"unknown column {col!r}")
    out_meta = ds.meta[output]
    is_stub = decl.type == "stubLinear"
    if not is_stub and len(rows) < MIN_TRAINING_ROWS:
        raise ModelError(f"training needs at least {MIN_TRAINING_ROWS} rows, "
                         f"got {len(rows)}")

    categories = {c: ds.meta[c].categories for c in inputs
                  if ds.meta[c].kind in ("categorical", "binary")}
    encoder = _Encoder(tuple(inputs), categories)
    view = view_of(ds, rows)
    X = encoder.matrix(view)
    stds = X.std(axis=0) if X.size else np.zeros(X.shape[1])
    checksum = _training_checksum(ds, rows, inputs, output, decl)

    is_classifier = decl.type in CLASSIFIER_TYPES
    classes: tuple | None = None
    if is_stub:
        if categories:
            raise ModelError("stubLinear takes continuous inputs only")
        hp = dict(decl.hyperparams or {})
        intercept = float(hp.pop("intercept", 0.0))
        unknown = sorted(set(hp) - set(inputs))
        if unknown:
            raise ModelError(f"stubLinear coefficients for unknown inputs: {unknown}")
        estimator: Any = _StubLinear({k: float(v) for k, v in hp.items()}, intercept)
    else:
        y_raw = view.column(output)
        if is_classifier:
            if out_meta.kind == "continuous":
                raise ModelError(f"{decl.type} cannot predict continuous "
                                 f"column {output!r}")
            classes = out_meta.categories or tuple(sorted(set(y_raw)))
            if len(set(y_raw)) < 2:
                raise ModelError(f"training rows contain a single class of {output!r}")
            index = {c: i for i, c in enumerate(classes)}
            y = np.asarray([index[v] for v in y_raw])
        else:
            if out_meta.kind != "continuous":
                raise ModelError(f"{decl.type} cannot predict {out_meta.kind} "
                                 f"column {output!r}")
            y = np.asarray(y_raw, dtype=float)
        estimator = _make_estimator(decl, is_classifier)
        estimator.fit(X, y)
    return TrainedModel(decl=decl, input_columns=tuple(inputs), output_column=output,
                        training_checksum=checksum, encoder=encoder,
                        estimator=estimator, is_classifier=is_classifier,
                        classes=classes, feature_stds=stds)


def predict(m: TrainedModel, rows: Dataset | RowView,
            queried_class: Any = None) -> np.ndarray:
    """Predictions for a row view.

    Classifiers return the probability of the queried class (the
    positive, highest-coded class by default), always within [0, 1];
    regressors return real values.
    """
    view = view_of(rows) if isinstance(rows, Dataset) else rows
    try:
        X = m.encoder.matrix(view)
    except Exception as exc:
        raise ModelError(f"prediction input is missing a column: {exc}") from exc
    if isinstance(m.estimator, _StubLinear):
        return m.estimator.predict(X, list(m.input_columns))
    if m.is_classifier:
        target = m.positive_class if queried_class is None else queried_class
        if target not in m.classes:
            raise ModelError(f"{target!r} is not a class of {m.output_column!r}")
        proba = m.estimator.predict_proba(X)
        fitted = list(m.estimator.classes_)
        idx = m.classes.index(target)
        if idx not in fitted:
            return np.zeros(X.shape[0])
        return proba[:, fitted.index(idx)]
    return m.estimator.predict(X)


def predict_labels(m: TrainedModel, rows: Dataset | RowView) -> np.ndarray:
    """Class codes for classifiers, raw predictions otherwise."""
    view = view_of(rows) if isinstance(rows, Dataset) else rows
    X = m.encoder.matrix(view)
    if isinstance(m.estimator, _StubLinear):
        return m.estimator.predict(X, list(m.input_columns))
    if not m.is_classifier:
        return m.estimator.predict(X)
    idx = m.estimator.predict(X).astype(int)
    codes = np.asarray(m.classes, dtype=object)
    return codes[idx]


def _raw_importances(m: TrainedModel) -> np.ndarray:
    est = m.estimator
    if isinstance(est, _StubLinear):
        coefs = np.asarray([est.coefs.get(c, 0.0) for c in m.input_columns])
        # per expanded feature: stub columns are 1:1 with inputs
        return np.abs(coefs) * m.feature_stds[:len(coefs)] if len(m.feature_stds) \
            else np.abs(coefs)
    if hasattr(est, "feature_importances_"):
        return np.asarray(est.feature_importances_, dtype=float)
    coef = np.asarray(est.coef_, dtype=float)
    if coef.ndim > 1:  # multiclass logistic: aggregate over classes
        coef = np.abs(coef).sum(axis=0)
    return np.abs(coef) * m.feature_stds


def feature_importance(m: TrainedModel) -> list[tuple[str, float]]:
    """(column, score) sorted descending; scores are >= 0 and sum to 1.

    Forest models serve their impurity importances; linear families
    serve |coefficient| * feature std. One-hot groups are summed back
    to their source column.
    """
    raw = _raw_importances(m)
    if isinstance(m.estimator, _StubLinear):
        grouped = {col: float(raw[i]) for i, col in enumerate(m.input_columns)}
    else:
        grouped = {}
        for col, sl in m.encoder.group_slices():
            grouped[col] = float(raw[sl].sum())
    total = sum(grouped.values())
    if total <= 0:
        grouped = {col: 1.0 for col in grouped}
        total = float(len(grouped))
    scores = {col: v / total for col, v in grouped.items()}
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


class ModelCache:
    """Keyed by training checksum; optionally persisted to disk."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._memory: dict[str, TrainedModel] = {}

    def get_or_train(self, ds: Dataset, inputs: list[str], output: str,
                     decl: ModelDecl, rows: np.ndarray | None = None) -> TrainedModel:
        use_rows = ds.all_rows() if rows is None else np.asarray(rows, dtype=int)
        key = _training_checksum(ds, use_rows, inputs, output, decl)
        hit = self._memory.get(key)
        if hit is not None:
            return hit
        if self.directory:
            path = self.directory / f"{key}.model"
            if path.exists():
                payload = pickle.loads(path.read_bytes())
                if payload.get("version") == MODEL_CACHE_VERSION:
                    model = payload["model"]
                    self._memory[key] = model
                    return model
        model = train(ds, inputs, output, decl, rows)
        self._memory[key] = model
        if self.directory:
            path = self.directory / f"{key}.model"
            path.write_bytes(pickle.dumps({"version": MODEL_CACHE_VERSION,
                                           "model": model}))
        return model
