"""End-to-end pipeline: configuration, batch blocking, featurization, experiments."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
import statistics
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .blocking import (
    ALL_COMBINATIONS,
    BlockingConfig,
    Strategy,
    combination_from_names,
    combination_key,
    filter_combinations,
    retrieve_candidates,
)
from .classify import ClassifierKind
from .evaluation import (
    PairTable,
    blocking_curve,
    cross_val_predict,
    grouped_kfold,
    pair_report,
    top1_reports,
)
from .features import GROUPS, extract_features, schema_for, schema_version
from .index import Index
from .model import BibRecord, GoldStandard, SegmentedReference
from .textnorm import DEFAULT_STOPWORDS, YEAR_MAX, YEAR_MIN, preprocess_reference

log = logging.getLogger(__name__)

WORKERS_ENV = "CITEMATCH_WORKERS"

DEFAULT_CONFIG: dict[str, Any] = {
    "paths": {
        "records": "records.jsonl",
        "references": "references.jsonl",
        "gold": "gold.jsonl",
        "index": "out/index.json",
        "combinations": "out/combinations.json",
        "candidates": "out/candidates.jsonl",
        "features": "out/features.jsonl",
        "manifest": "out/features.manifest.json",
        "model": "out/model.json",
        "links": "out/links.jsonl",
        "reports": "out/reports",
    },
    "text": {"stopwords": sorted(DEFAULT_STOPWORDS), "year_min": YEAR_MIN, "year_max": YEAR_MAX},
    "blocking": {
        "strategy": "combined",
        "cutoff": 5,
        # "all", "filter" (select on gold data) or a list of kind-name lists
        "enabled_combinations": "filter",
        "combination_threshold": 0.6,
        "precision_mode": "at1",
        "max_edits": 2,
        "min_fuzzy_length": 3,
    },
    "features": {"groups": list(GROUPS)},
    "classifier": {"kind": ClassifierKind.LINEAR.value, "hyperparameters": {}, "seed": 42},
    "eval": {"folds": 10, "seed": 42, "max_cutoff": 15},
    "workers": 1,
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(overrides: Mapping | None = None, base_dir: str | Path | None = None) -> dict:
    """Defaults merged with ``overrides``; relative paths resolved against ``base_dir``."""
    cfg = _merge(DEFAULT_CONFIG, overrides or {})
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if base_dir is not None:
        cfg["paths"] = {k: str(Path(base_dir, v)) if v and not os.path.isabs(v) else v
                        for k, v in cfg["paths"].items()}
    env_workers = os.environ.get(WORKERS_ENV)
    if env_workers:
        try:
            cfg["workers"] = int(env_workers)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env_workers!r}") from None
    if int(cfg["workers"]) < 1:
        raise ConfigError("workers must be >= 1")
    if int(cfg["eval"]["folds"]) < 2:
        raise ConfigError("eval.folds must be >= 2")
    if int(cfg["classifier"]["seed"]) < 0 or int(cfg["eval"]["seed"]) < 0:
        raise ConfigError("seeds must be non-negative")
    try:
        Strategy(cfg["blocking"]["strategy"])
        ClassifierKind(cfg["classifier"]["kind"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path | None, overrides: Mapping | None = None) -> dict:
    raw: dict = {}
    base = Path.cwd()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        base = Path(path).resolve().parent
    if overrides:
        raw = _merge(raw, overrides)
    return resolve_config(raw, base)


def fingerprint(config: Mapping) -> str:
    """Short hash of the resolved config minus paths and worker count."""
    relevant = {k: v for k, v in config.items() if k not in ("paths", "workers")}
    blob = json.dumps(relevant, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def blocking_config(config: Mapping, combinations: Iterable[frozenset] | None = None) -> BlockingConfig:
    b = config["blocking"]
    combos = combinations
    if combos is None:
        enabled = b["enabled_combinations"]
        if enabled in ("all", "filter", None):
            combos = ALL_COMBINATIONS
        else:
            combos = [combination_from_names(names) for names in enabled]
    return BlockingConfig(
        strategy=Strategy(b["strategy"]),
        cutoff=int(b["cutoff"]),
        enabled_combinations=frozenset(combos),
        max_edits=int(b["max_edits"]),
        min_fuzzy_length=int(b["min_fuzzy_length"]),
        stopwords=frozenset(config["text"]["stopwords"]),
    )


def preprocess_all(references: Iterable[SegmentedReference], config: Mapping | None = None) -> list[SegmentedReference]:
    text = (config or DEFAULT_CONFIG)["text"]
    return [preprocess_reference(r, int(text["year_min"]), int(text["year_max"])) for r in references]


def select_combinations(references: Sequence[SegmentedReference], gold: GoldStandard, index: Index,
                        config: Mapping) -> frozenset:
    b = config["blocking"]
    base = blocking_config(config, ALL_COMBINATIONS)
    return filter_combinations(references, gold, index, float(b["combination_threshold"]),
                               base, b["precision_mode"])


# -- batch blocking ------------------------------------------------------------------

_WORKER_STATE: dict[str, Any] = {}


def _block_one(ref: SegmentedReference) -> tuple[str, list[str]]:
    return ref.id, sorted(retrieve_candidates(ref, _WORKER_STATE["index"], _WORKER_STATE["config"]))


def block_all(references: Sequence[SegmentedReference], index: Index, config: BlockingConfig,
              workers: int = 1) -> dict[str, list[str]]:
    """Sorted candidate record ids per reference id, in input order."""
    _WORKER_STATE["index"] = index
    _WORKER_STATE["config"] = config
    try:
        if workers > 1 and len(references) > 1:
            # fork shares the immutable index with the workers
            with get_context("fork").Pool(workers) as pool:
                results = pool.map(_block_one, references, chunksize=max(1, len(references) // (4 * workers)))
        else:
            results = [_block_one(r) for r in references]
    finally:
        _WORKER_STATE.clear()
    return dict(results)


def blocking_summary(candidates: Mapping[str, Sequence[str]], gold: GoldStandard | None = None) -> dict[str, Any]:
    sizes = [len(v) for v in candidates.values()]
    summary: dict[str, Any] = {
        "references": len(sizes),
        "pairs": sum(sizes),
        "references_with_candidates": sum(1 for s in sizes if s),
        "min": min(sizes) if sizes else 0,
        "max": max(sizes) if sizes else 0,
        "mean": statistics.fmean(sizes) if sizes else 0.0,
        "sd": statistics.pstdev(sizes) if sizes else 0.0,
    }
    nonempty = [s for s in sizes if s]
    summary["mean_nonempty"] = statistics.fmean(nonempty) if nonempty else 0.0
    summary["sd_nonempty"] = statistics.pstdev(nonempty) if nonempty else 0.0
    summary["min_nonempty"] = min(nonempty) if nonempty else 0
    if gold is not None:
        positives = sum(1 for ref, ids in candidates.items() for r in ids if gold.is_match(ref, r))
        matchable = [r for r in candidates if gold.matches(r)]
        found = [r for r in matchable if any(gold.is_match(r, x) for x in candidates[r])]
        summary.update({
            "positive_pairs": positives,
            "positive_fraction": positives / summary["pairs"] if summary["pairs"] else 0.0,
            "matchable_references": len(matchable),
            "matchable_found": len(found),
            "blocking_missed": len(matchable) - len(found),
            "blocking_recall": len(found) / len(matchable) if matchable else None,
            "references_without_correct_pair": sum(
                1 for r, ids in candidates.items() if ids and not any(gold.is_match(r, x) for x in ids)),
        })
    return summary


# -- featurization -------------------------------------------------------------------

def featurize(references: Sequence[SegmentedReference], records: Sequence[BibRecord] | Mapping[str, BibRecord],
              candidates: Mapping[str, Sequence[str]], gold: GoldStandard | None = None,
              groups: Sequence[str] = GROUPS) -> PairTable:
    """One row per (reference, candidate record), in reference order then record id."""
    recs = records if isinstance(records, Mapping) else {r.id: r for r in records}
    ref_ids: list[str] = []
    rec_ids: list[str] = []
    rows: list[tuple[float, ...]] = []
    labels: list[bool] = []
    for ref in references:
        for rec_id in sorted(candidates.get(ref.id, ())):
            fv = extract_features(ref, recs[rec_id], groups)
            ref_ids.append(ref.id)
            rec_ids.append(rec_id)
            rows.append(fv.values)
            if gold is not None:
                labels.append(gold.is_match(ref.id, rec_id))
    names = [f.name for f in schema_for(groups)]
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(names))
    y = np.asarray(labels, dtype=bool) if gold is not None else None
    return PairTable(ref_ids, rec_ids, X, y, names, schema_version(groups))


def table_for_groups(table: PairTable, groups: Sequence[str]) -> PairTable:
    return table.columns([f.name for f in schema_for(groups)], schema_version(groups))


# -- experiments ---------------------------------------------------------------------

# (label, feature groups): raw string = B, segments = A, probabilities = P
FEATURE_SETTINGS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("strings+segments+probabilities", ("A", "P", "B")),
    ("strings+segments", ("A", "B")),
    ("segments+probabilities", ("A", "P")),
    ("segments", ("A",)),
    ("strings", ("B",)),
)


@dataclass
class ExperimentResult:
    fingerprint: str
    blocking: dict[str, Any]
    combinations: list[list[str]]
    curves: list[Any] = field(default_factory=list)
    classification: list[dict[str, Any]] = field(default_factory=list)
    top1: list[dict[str, Any]] = field(default_factory=list)
    folds: list[list[str]] = field(default_factory=list)


def run_experiments(references: Sequence[SegmentedReference], records: Sequence[BibRecord], gold: GoldStandard,
                    config: Mapping, index: Index | None = None, with_curves: bool = True,
                    settings: Sequence[tuple[str, tuple[str, ...]]] = FEATURE_SETTINGS,
                    kinds: Sequence[ClassifierKind | str] = (ClassifierKind.LINEAR, ClassifierKind.TREES),
                    combinations: Iterable[frozenset] | None = None) -> ExperimentResult:
    """Blocking evaluation plus the classifier/feature-group matrix on one corpus."""
    from .index import build_index

    fp = fingerprint(config)
    refs = preprocess_all(references, config)
    index = index or build_index(records)
    if combinations is None and config["blocking"]["enabled_combinations"] == "filter":
        combinations = select_combinations(refs, gold, index, config)
    bcfg = blocking_config(config, combinations)
    workers = int(config.get("workers", 1))

    curves = []
    if with_curves:
        max_c = int(config["eval"]["max_cutoff"])
        for strategy in Strategy:
            curves.append(blocking_curve(refs, gold, index, BlockingConfig(
                strategy=strategy, cutoff=bcfg.cutoff, enabled_combinations=bcfg.enabled_combinations,
                max_edits=bcfg.max_edits, min_fuzzy_length=bcfg.min_fuzzy_length, stopwords=bcfg.stopwords),
                max_c))

    candidates = block_all(refs, index, bcfg, workers)
    summary = blocking_summary(candidates, gold)
    table = featurize(refs, records, candidates, gold, GROUPS)
    with_pairs = sorted({r for r in table.reference_ids})
    folds = grouped_kfold(with_pairs, int(config["eval"]["folds"]), int(config["eval"]["seed"]))
    all_ids = [r.id for r in refs]
    hp_base = dict(config["classifier"].get("hyperparameters") or {})
    hp_base.setdefault("seed", int(config["classifier"]["seed"]))

    result = ExperimentResult(fp, summary, [list(combination_key(c)) for c in
                                            sorted(bcfg.enabled_combinations, key=lambda c: (len(c), combination_key(c)))],
                              curves, folds=folds)
    for label, groups in settings:
        sub = table_for_groups(table, groups)
        for kind in kinds:
            kind = ClassifierKind(kind)
            hp = {k: v for k, v in hp_base.items() if k in _hp_keys(kind)}
            probs = cross_val_predict(sub, folds, kind, hp)
            rep = pair_report(sub, folds, probs, f"{label} / {kind.value}", fp)
            result.classification.append({"features": label, "groups": list(groups),
                                          "classifier": kind.value, "report": rep})
            if tuple(groups) == GROUPS:
                plain, pipe = top1_reports(sub, folds, probs, gold, all_ids, f"top1 / {kind.value}", fp)
                result.top1.append({"classifier": kind.value, "report": plain, "pipeline": pipe})
    return result


def _hp_keys(kind: ClassifierKind) -> set[str]:
    from .classify import DEFAULT_HYPERPARAMETERS
    return set(DEFAULT_HYPERPARAMETERS[kind])
