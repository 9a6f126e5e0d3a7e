"""Binary match classifiers and the top-1 decision rule.

Two interchangeable learners:

``large_margin_linear``
    features standardized on the training data, linear SVM (hinge loss +
    L2), probabilities from a sigmoid fitted to the training margins.
``tree_ensemble``
    bagged randomized Gini trees; the probability is the fraction of trees
    voting "match".

Models serialize to self-describing JSON and refuse feature vectors of a
different schema.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np

from .model import CandidatePair, FeatureVector

MODEL_FORMAT = "citematch-model"
MODEL_VERSION = 1


class ClassifierKind(str, Enum):
    LINEAR = "large_margin_linear"
    TREES = "tree_ensemble"


DEFAULT_HYPERPARAMETERS: dict[ClassifierKind, dict[str, Any]] = {
    ClassifierKind.LINEAR: {"C": 1.0, "max_epochs": 1000, "tol": 1e-4, "class_weight": None, "seed": 42},
    ClassifierKind.TREES: {"n_trees": 100, "max_depth": None, "max_features": "sqrt",
                           "class_weight": None, "seed": 42},
}


class SchemaMismatch(ValueError):
    pass


class TrainingError(ValueError):
    pass


def _check_matrix(X, labels=None, ids: Sequence[str] | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise TrainingError("feature matrix must be 2-dimensional")
    bad = ~np.isfinite(X).all(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        name = ids[row] if ids is not None else f"row {row}"
        raise TrainingError(f"non-finite feature value in pair {name}")
    return X


# -- sigmoid calibration ------------------------------------------------------------

def fit_sigmoid(scores: np.ndarray, y: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Fit ``P(match | s) = 1 / (1 + exp(a*s + b))`` by Newton's method.

    Targets are smoothed with the usual (n+1)/(n+2) prior correction.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    t = np.where(y, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    sigma = 1e-12

    def objective(a, b):
        f = scores * a + b
        # log(1 + exp(f)) - (1 - t) f, written stably
        return float(np.sum(np.logaddexp(0.0, f) - (1.0 - t) * f))

    fval = objective(a, b)
    for _ in range(max_iter):
        f = scores * a + b
        p = np.exp(-np.logaddexp(0.0, f))  # 1 / (1 + exp(f))
        q = 1.0 - p
        d2 = p * q
        h11 = float(np.sum(scores * scores * d2)) + sigma
        h22 = float(np.sum(d2)) + sigma
        h21 = float(np.sum(scores * d2))
        d1 = t - p
        g1 = float(np.sum(scores * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= 1e-10:
            na, nb = a + step * da, b + step * db
            nf = objective(na, nb)
            if nf < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nf
                break
            step /= 2.0
        else:
            break
    return a, b


def _sigmoid_proba(scores: np.ndarray, a: float, b: float) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, scores * a + b))


# -- tree ensemble helpers ----------------------------------------------------------

def _export_tree(tree) -> dict[str, list]:
    """Flatten a fitted sklearn tree to lists; leaves store the voted class."""
    t = tree.tree_
    classes = [int(c) for c in tree.classes_]
    leaf_class = [classes[int(np.argmax(v[0]))] for v in t.value]
    return {
        "left": t.children_left.tolist(),
        "right": t.children_right.tolist(),
        "feature": t.feature.tolist(),
        "threshold": t.threshold.tolist(),
        "vote": leaf_class,
    }


def _tree_votes(tree: dict[str, list], X32: np.ndarray) -> np.ndarray:
    left = np.asarray(tree["left"])
    right = np.asarray(tree["right"])
    feature = np.asarray(tree["feature"])
    threshold = np.asarray(tree["threshold"])
    vote = np.asarray(tree["vote"])
    node = np.zeros(len(X32), dtype=np.int64)
    rows = np.arange(len(X32))
    active = left[node] != -1
    while active.any():
        idx = rows[active]
        n = node[idx]
        go_left = X32[idx, feature[n]] <= threshold[n]
        node[idx] = np.where(go_left, left[n], right[n])
        active = left[node] != -1
    return vote[node]


# -- model ----------------------------------------------------------------------------

@dataclass
class ClassifierModel:
    kind: ClassifierKind
    hyperparameters: dict[str, Any]
    schema_version: str
    parameters: dict[str, Any] = field(repr=False)
    # hash of the pipeline config that produced the model, if any
    config_fingerprint: str = ""

    def _check_schema(self, schema_version: str | None) -> None:
        if schema_version is not None and schema_version != self.schema_version:
            raise SchemaMismatch(f"model expects schema {self.schema_version!r}, got {schema_version!r}")

    def decision_scores(self, X) -> np.ndarray:
        X = _check_matrix(X)
        if self.kind is ClassifierKind.LINEAR:
            p = self.parameters
            Z = (X - np.asarray(p["mean"])) / np.asarray(p["scale"])
            return Z @ np.asarray(p["coef"]) + p["intercept"]
        return self.predict_proba(X)

    def predict_proba(self, X, schema_version: str | None = None) -> np.ndarray:
        """Match probabilities for the rows of ``X``."""
        self._check_schema(schema_version)
        X = _check_matrix(X)
        n_features = len(self.parameters["feature_names"])
        if X.shape[1] != n_features:
            raise SchemaMismatch(f"model expects {n_features} features, got {X.shape[1]}")
        if self.kind is ClassifierKind.LINEAR:
            s = self.decision_scores(X)
            return np.clip(_sigmoid_proba(s, self.parameters["sigmoid_a"], self.parameters["sigmoid_b"]), 0.0, 1.0)
        X32 = X.astype(np.float32)
        trees = self.parameters["trees"]
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in trees:
            votes += _tree_votes(tree, X32)
        return votes / len(trees)

    def predict_labels(self, X, schema_version: str | None = None) -> np.ndarray:
        return self.predict_proba(X, schema_version) > 0.5

    # -- serialization ------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind.value,
            "hyperparameters": self.hyperparameters,
            "schema_version": self.schema_version,
            "parameters": self.parameters,
            "config_fingerprint": self.config_fingerprint,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict[str, Any], expected_schema: str | None = None) -> "ClassifierModel":
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ValueError("not a citematch model file of a supported version")
        model = cls(ClassifierKind(d["kind"]), d["hyperparameters"], d["schema_version"], d["parameters"],
                    d.get("config_fingerprint", ""))
        model._check_schema(expected_schema)
        return model

    @classmethod
    def from_json(cls, text: str, expected_schema: str | None = None) -> "ClassifierModel":
        return cls.from_dict(json.loads(text), expected_schema)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path, expected_schema: str | None = None) -> "ClassifierModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read(), expected_schema)


def _train_linear(X, y, hp, feature_names):
    from sklearn.svm import LinearSVC

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    Z = (X - mean) / scale
    svm = LinearSVC(loss="hinge", C=hp["C"], dual=True, max_iter=hp["max_epochs"], tol=hp["tol"],
                    class_weight=hp["class_weight"], random_state=hp["seed"])
    with warnings.catch_warnings():
        # hitting max_epochs is acceptable; the model is still usable
        warnings.filterwarnings("ignore", message="Liblinear failed to converge")
        svm.fit(Z, y)
    coef = svm.coef_[0]
    intercept = float(svm.intercept_[0])
    a, b = fit_sigmoid(Z @ coef + intercept, y)
    return {
        "feature_names": list(feature_names),
        "mean": mean.tolist(),
        "scale": scale.tolist(),
        "coef": coef.tolist(),
        "intercept": intercept,
        "sigmoid_a": a,
        "sigmoid_b": b,
    }


def _train_trees(X, y, hp, feature_names):
    from sklearn.tree import DecisionTreeClassifier

    rng = np.random.default_rng(hp["seed"])
    n = len(X)
    trees = []
    for _ in range(hp["n_trees"]):
        sample = rng.integers(0, n, size=n)
        tree = DecisionTreeClassifier(criterion="gini", max_depth=hp["max_depth"],
                                      max_features=hp["max_features"], class_weight=hp["class_weight"],
                                      random_state=int(rng.integers(0, 2**31 - 1)))
        tree.fit(X[sample], y[sample])
        trees.append(_export_tree(tree))
    return {"feature_names": list(feature_names), "trees": trees}


def train(X, y, kind: ClassifierKind | str = ClassifierKind.LINEAR,
          hyperparameters: dict[str, Any] | None = None, schema_version: str = "",
          feature_names: Sequence[str] | None = None, pair_ids: Sequence[str] | None = None) -> ClassifierModel:
    """Fit a classifier on rows of ``X`` with boolean labels ``y``.

    Raises :class:`TrainingError` for single-class labels or non-finite
    features.  Deterministic for a fixed ``seed`` hyperparameter.
    """
    kind = ClassifierKind(kind)
    hp = dict(DEFAULT_HYPERPARAMETERS[kind])
    unknown = set(hyperparameters or {}) - set(hp)
    if unknown:
        raise TrainingError(f"unknown hyperparameters for {kind.value}: {sorted(unknown)}")
    hp.update(hyperparameters or {})
    X = _check_matrix(X, ids=pair_ids)
    y = np.asarray(y, dtype=bool)
    if len(X) != len(y):
        raise TrainingError("feature matrix and labels differ in length")
    if len(np.unique(y)) < 2:
        raise TrainingError("training data must contain both match and non-match examples")
    if feature_names is None:
        feature_names = [f"f{i}" for i in range(X.shape[1])]
    y_int = y.astype(np.int64)
    if kind is ClassifierKind.LINEAR:
        params = _train_linear(X, y_int, hp, feature_names)
    else:
        params = _train_trees(X, y_int, hp, feature_names)
    return ClassifierModel(kind, hp, schema_version, params)


def train_on_vectors(vectors: Sequence[FeatureVector], labels: Sequence[bool],
                     kind: ClassifierKind | str = ClassifierKind.LINEAR,
                     hyperparameters: dict[str, Any] | None = None) -> ClassifierModel:
    if not vectors:
        raise TrainingError("no training vectors")
    versions = {v.schema_version for v in vectors}
    if len(versions) != 1:
        raise SchemaMismatch(f"training vectors mix schemas: {sorted(versions)}")
    return train([v.values for v in vectors], labels, kind, hyperparameters,
                 schema_version=vectors[0].schema_version, feature_names=vectors[0].names)


def predict(model: ClassifierModel, features: FeatureVector) -> float:
    """Match probability of one feature vector."""
    return float(model.predict_proba([features.values], features.schema_version)[0])


def select_top1(pairs: Iterable[CandidatePair]) -> str | None:
    """Record id of the most probable predicted match (> 0.5), ties by record id."""
    best: tuple[float, str] | None = None
    for pair in pairs:
        p = pair.predicted_probability
        if p is None:
            raise ValueError(f"pair ({pair.reference_id}, {pair.record_id}) has no prediction")
        if p <= 0.5:
            continue
        if best is None or p > best[0] or (p == best[0] and pair.record_id < best[1]):
            best = (p, pair.record_id)
    return best[1] if best else None
