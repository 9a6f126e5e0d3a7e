"""Gold-standard evaluation: blocking curves, grouped cross-validation, top-1.

Fold-level precision/recall are macro-averaged over folds and F1 is the
harmonic mean of the averaged precision and recall.
"""

from __future__ import annotations

import csv
import json
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .blocking import BlockingConfig, ranked_blocks, union_at
from .classify import ClassifierKind, TrainingError, train
from .index import Index
from .model import CandidatePair, GoldStandard, SegmentedReference


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass
class FoldMetrics:
    precision: float
    recall: float
    f1: float
    # true when precision had no predictions to judge and was set to 0
    precision_undefined: bool = False
    counts: dict[str, int] = field(default_factory=dict)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    per_fold: list[FoldMetrics]
    config_fingerprint: str = ""
    label: str = ""

    @classmethod
    def from_folds(cls, folds: Sequence[FoldMetrics], label: str = "", fingerprint: str = "") -> "EvalReport":
        p = float(np.mean([f.precision for f in folds]))
        r = float(np.mean([f.recall for f in folds]))
        return cls(p, r, f1_score(p, r), list(folds), fingerprint, label)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _fold_metrics(tp: int, fp: int, fn: int) -> FoldMetrics:
    undefined = tp + fp == 0
    p = 0.0 if undefined else tp / (tp + fp)
    r = tp / (tp + fn) if tp + fn else 0.0
    return FoldMetrics(p, r, f1_score(p, r), undefined, {"tp": tp, "fp": fp, "fn": fn})


# -- blocking ----------------------------------------------------------------------

@dataclass
class CurvePoint:
    cutoff: int
    precision: float
    recall: float | None
    pairs: int


@dataclass
class BlockingCurve:
    strategy: str
    points: list[CurvePoint]


def blocking_curve(references: Sequence[SegmentedReference], gold: GoldStandard, index: Index,
                   config: BlockingConfig, max_cutoff: int) -> BlockingCurve:
    """Pair precision and reference recall of blocking for cutoffs 1..max_cutoff.

    Recall counts references with at least one correct candidate among those
    having a gold match; it is ``None`` when no reference has one.
    """
    if max_cutoff < 1:
        raise ValueError("max_cutoff must be >= 1")
    blocks = [ranked_blocks(ref, index, config, limit=max_cutoff) for ref in references]
    matchable = [i for i, ref in enumerate(references) if gold.matches(ref.id)]
    points = []
    for c in range(1, max_cutoff + 1):
        n_pairs = n_correct = 0
        found = 0
        for ref, bl in zip(references, blocks):
            cands = union_at(bl, c)
            hits = sum(1 for rid in cands if gold.is_match(ref.id, rid))
            n_pairs += len(cands)
            n_correct += hits
            if hits:
                found += 1
        precision = n_correct / n_pairs if n_pairs else 0.0
        recall = found / len(matchable) if matchable else None
        points.append(CurvePoint(c, precision, recall, n_pairs))
    return BlockingCurve(config.strategy.value, points)


def write_curves_csv(path, curves: Iterable[BlockingCurve]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "cutoff", "precision", "recall", "pairs"])
        for curve in curves:
            for pt in curve.points:
                w.writerow([curve.strategy, pt.cutoff, f"{pt.precision:.6f}",
                            "" if pt.recall is None else f"{pt.recall:.6f}", pt.pairs])


# -- folds ---------------------------------------------------------------------------

def grouped_kfold(reference_ids: Sequence[str], k: int, seed: int) -> list[list[str]]:
    """Partition reference ids into ``k`` folds whose sizes differ by at most one."""
    ids = sorted(set(reference_ids))
    if k < 2 or k > len(ids):
        raise ValueError(f"need 2 <= k <= {len(ids)} references, got k={k}")
    random.Random(seed).shuffle(ids)
    return [sorted(ids[i::k]) for i in range(k)]


# -- pair tables ---------------------------------------------------------------------

@dataclass
class PairTable:
    """Featurized candidate pairs, one row per pair."""

    reference_ids: list[str]
    record_ids: list[str]
    X: np.ndarray
    y: np.ndarray | None
    feature_names: list[str]
    schema_version: str

    def __len__(self):
        return len(self.reference_ids)

    def columns(self, names: Sequence[str], schema_version: str) -> "PairTable":
        idx = [self.feature_names.index(n) for n in names]
        return PairTable(self.reference_ids, self.record_ids, self.X[:, idx], self.y,
                         list(names), schema_version)

    def pairs(self, probabilities: np.ndarray | None = None) -> list[CandidatePair]:
        out = []
        for i, (ref, rec) in enumerate(zip(self.reference_ids, self.record_ids)):
            out.append(CandidatePair(
                ref, rec,
                gold_label=None if self.y is None else bool(self.y[i]),
                predicted_probability=None if probabilities is None else float(probabilities[i]),
            ))
        return out


def _fold_rows(table: PairTable, folds: Sequence[Sequence[str]]) -> list[np.ndarray]:
    where = {}
    for f, ids in enumerate(folds):
        for rid in ids:
            where[rid] = f
    fold_of = np.array([where.get(r, -1) for r in table.reference_ids])
    return [np.flatnonzero(fold_of == f) for f in range(len(folds))]


def cross_val_predict(table: PairTable, folds: Sequence[Sequence[str]],
                      kind: ClassifierKind | str = ClassifierKind.LINEAR,
                      hyperparameters: dict | None = None) -> np.ndarray:
    """Out-of-fold match probabilities; pairs of references outside all folds get NaN."""
    if table.y is None:
        raise ValueError("cross-validation needs gold labels")
    probs = np.full(len(table), np.nan)
    rows = _fold_rows(table, folds)
    in_any = np.zeros(len(table), dtype=bool)
    for r in rows:
        in_any[r] = True
    for f, test in enumerate(rows):
        train_mask = in_any.copy()
        train_mask[test] = False
        if len(np.unique(table.y[train_mask])) < 2:
            raise TrainingError(f"training split of fold {f} contains a single class")
        model = train(table.X[train_mask], table.y[train_mask], kind, hyperparameters,
                      schema_version=table.schema_version, feature_names=table.feature_names)
        if len(test):
            probs[test] = model.predict_proba(table.X[test])
    return probs


def pair_report(table: PairTable, folds: Sequence[Sequence[str]], probabilities: np.ndarray,
                label: str = "", fingerprint: str = "") -> EvalReport:
    metrics = []
    for test in _fold_rows(table, folds):
        pred = probabilities[test] > 0.5
        gold = table.y[test].astype(bool)
        tp = int(np.sum(pred & gold))
        fp = int(np.sum(pred & ~gold))
        fn = int(np.sum(~pred & gold))
        metrics.append(_fold_metrics(tp, fp, fn))
    return EvalReport.from_folds(metrics, label, fingerprint)


def cross_validate(table: PairTable, folds: Sequence[Sequence[str]],
                   kind: ClassifierKind | str = ClassifierKind.LINEAR,
                   hyperparameters: dict | None = None, label: str = "",
                   fingerprint: str = "") -> EvalReport:
    """Pair-level precision/recall/F1 of the "match" class, macro-averaged over folds."""
    probs = cross_val_predict(table, folds, kind, hyperparameters)
    return pair_report(table, folds, probs, label, fingerprint)


def top1_reports(table: PairTable, folds: Sequence[Sequence[str]], probabilities: np.ndarray,
                 gold: GoldStandard, all_reference_ids: Sequence[str] | None = None,
                 label: str = "", fingerprint: str = "") -> tuple[EvalReport, EvalReport]:
    """Reference-level metrics of top-1 selection, plain and pipeline.

    The pipeline report adds references that have gold matches but no
    correct candidate to the recall denominator.  Such references without
    any candidate belong to no fold; they are dealt round-robin (sorted id
    order) over the folds.
    """
    from .classify import select_top1

    by_ref: dict[str, list[CandidatePair]] = {}
    for pair in table.pairs(probabilities):
        by_ref.setdefault(pair.reference_id, []).append(pair)
    has_positive = {r: any(p.gold_label for p in ps) for r, ps in by_ref.items()}

    outside = sorted(r for r in (all_reference_ids or [])
                     if r not in by_ref and gold.matches(r))
    extra_missed = [0] * len(folds)
    for i, _ in enumerate(outside):
        extra_missed[i % len(folds)] += 1

    plain, pipeline = [], []
    for f, ids in enumerate(folds):
        selected = correct = matchable = missed = 0
        for rid in ids:
            pairs = by_ref.get(rid, [])
            choice = select_top1(pairs) if pairs else None
            if choice is not None:
                selected += 1
                if gold.is_match(rid, choice):
                    correct += 1
            if has_positive.get(rid):
                matchable += 1
            elif gold.matches(rid):
                missed += 1
        missed += extra_missed[f]
        undefined = selected == 0
        p = 0.0 if undefined else correct / selected
        r = correct / matchable if matchable else 0.0
        counts = {"selected": selected, "correct": correct, "matchable": matchable, "blocking_missed": missed}
        plain.append(FoldMetrics(p, r, f1_score(p, r), undefined, counts))
        rp = correct / (matchable + missed) if matchable + missed else 0.0
        pipeline.append(FoldMetrics(p, rp, f1_score(p, rp), undefined, counts))
    return (EvalReport.from_folds(plain, label, fingerprint),
            EvalReport.from_folds(pipeline, label + " (pipeline)" if label else "pipeline", fingerprint))


def evaluate_top1(table: PairTable, folds: Sequence[Sequence[str]], gold: GoldStandard,
                  kind: ClassifierKind | str = ClassifierKind.LINEAR, hyperparameters: dict | None = None,
                  all_reference_ids: Sequence[str] | None = None,
                  label: str = "", fingerprint: str = "") -> tuple[EvalReport, EvalReport]:
    probs = cross_val_predict(table, folds, kind, hyperparameters)
    return top1_reports(table, folds, probs, gold, all_reference_ids, label, fingerprint)


def match_count_histogram(gold: GoldStandard, reference_ids: Iterable[str] | None = None) -> dict[int, int]:
    """Number of gold matches -> number of references (zero bucket included)."""
    ids = set(gold.entries) | set(reference_ids or ())
    counts = Counter(len(gold.matches(r)) for r in ids)
    return dict(sorted(counts.items()))


def write_report_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
