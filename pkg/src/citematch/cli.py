"""Command-line entry point.

    citematch [-c CONFIG] [--set SECTION.KEY=VALUE ...] COMMAND [options]

Commands: index, block, featurize, train, match, evaluate, plus convert and
synth for preparing input data.  Every path comes from the config's
``paths`` section, resolved relative to the config file.

Exit codes: 0 success, 1 input error, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .blocking import dump_combinations, load_combinations
from .classify import ClassifierKind, ClassifierModel, SchemaMismatch, TrainingError, select_top1, train
from .evaluation import PairTable, write_curves_csv, write_report_json
from .features import normalize_groups, schema_manifest
from .index import Index, QueryError, build_index
from .model import CandidatePair, DataError, iter_jsonl, load_gold, load_records, load_references, write_jsonl
from .pipeline import (
    ConfigError,
    block_all,
    blocking_config,
    blocking_summary,
    featurize,
    fingerprint,
    load_config,
    preprocess_all,
    run_experiments,
    select_combinations,
)

log = logging.getLogger("citematch")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


class InputError(Exception):
    pass


def _require(config: dict, key: str) -> Path:
    path = Path(config["paths"][key])
    if not path.exists():
        raise InputError(f"{key} file not found: {path}")
    return path


def _output(config: dict, key: str) -> Path:
    path = Path(config["paths"][key])
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _optional_gold(config: dict):
    path = Path(config["paths"]["gold"])
    return load_gold(path) if config["paths"]["gold"] and path.exists() else None


def _print_json(obj: Any) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# -- commands ----------------------------------------------------------------------

def cmd_index(config: dict, args) -> int:
    records = load_records(_require(config, "records"))
    if not records:
        log.warning("records file is empty; writing an empty index")
    index = build_index(records)
    index.meta = {"config_fingerprint": fingerprint(config)}
    index.save(_output(config, "index"))
    print(f"{index.doc_count} records indexed")
    for name, fi in index.fields.items():
        print(f"  {name}: {len(fi.postings)} terms")
    return EXIT_OK


def _combinations(config: dict, refs, index, gold):
    enabled = config["blocking"]["enabled_combinations"]
    if enabled != "filter":
        return None
    path = Path(config["paths"]["combinations"])
    if gold is not None:
        combos = select_combinations(refs, gold, index, config)
        _output(config, "combinations").write_text(dump_combinations(combos) + "\n", encoding="utf-8")
        log.info("%d of 63 segment combinations retained", len(combos))
        return combos
    if path.exists():
        return load_combinations(path.read_text(encoding="utf-8"))
    log.warning("no gold data and no combinations file; using all 63 combinations")
    return None


def cmd_block(config: dict, args) -> int:
    index = Index.load(_require(config, "index"))
    refs = preprocess_all(load_references(_require(config, "references")), config)
    if not refs:
        log.warning("references file is empty")
    gold = _optional_gold(config)
    bcfg = blocking_config(config, _combinations(config, refs, index, gold))
    candidates = block_all(refs, index, bcfg, int(config["workers"]))
    fp = fingerprint(config)
    write_jsonl(_output(config, "candidates"),
                ({"reference_id": rid, "record_ids": ids, "config_fingerprint": fp}
                 for rid, ids in candidates.items()))
    summary = blocking_summary(candidates, gold)
    summary["strategy"] = bcfg.strategy.value
    summary["cutoff"] = bcfg.cutoff
    summary["config_fingerprint"] = fp
    reports = Path(config["paths"]["reports"])
    reports.mkdir(parents=True, exist_ok=True)
    write_report_json(reports / "blocking_summary.json", summary)
    _print_json(summary)
    return EXIT_OK


def _load_candidates(path: Path) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for lineno, row in iter_jsonl(path):
        try:
            out[str(row["reference_id"])] = [str(r) for r in row["record_ids"]]
        except KeyError as exc:
            raise DataError(f"missing key {exc.args[0]!r} in candidate row", line=lineno) from None
    return out


def cmd_featurize(config: dict, args) -> int:
    refs = preprocess_all(load_references(_require(config, "references")), config)
    records = load_records(_require(config, "records"))
    candidates = _load_candidates(_require(config, "candidates"))
    gold = None if args.unlabeled else _optional_gold(config)
    if gold is None:
        log.info("writing unlabeled feature vectors")
    groups = normalize_groups(config["features"]["groups"])
    known = {r.id for r in records}
    for rid, ids in candidates.items():
        for rec in ids:
            if rec not in known:
                raise DataError(f"candidate {rec!r} of reference {rid!r} is not in the records file")
    table = featurize(refs, records, candidates, gold, groups)
    fp = fingerprint(config)
    rows = []
    for i, (ref, rec) in enumerate(zip(table.reference_ids, table.record_ids)):
        row: dict[str, Any] = {"reference_id": ref, "record_id": rec, "features": table.X[i].tolist(),
                               "config_fingerprint": fp}
        if table.y is not None:
            row["gold_label"] = bool(table.y[i])
        rows.append(row)
    n = write_jsonl(_output(config, "features"), rows)
    manifest = schema_manifest(groups)
    manifest.update({"config_fingerprint": fp, "pairs": n, "labeled": table.y is not None})
    write_report_json(_output(config, "manifest"), manifest)
    print(f"{n} feature vectors written ({manifest['schema_version']})")
    return EXIT_OK


def _load_table(config: dict, need_labels: bool) -> PairTable:
    manifest = json.loads(_require(config, "manifest").read_text(encoding="utf-8"))
    names = [f["name"] for f in manifest["features"]]
    refs, recs, xs, ys = [], [], [], []
    for lineno, row in iter_jsonl(_require(config, "features")):
        try:
            values = row["features"]
            refs.append(str(row["reference_id"]))
            recs.append(str(row["record_id"]))
        except KeyError as exc:
            raise DataError(f"missing key {exc.args[0]!r} in feature row", line=lineno) from None
        if len(values) != len(names):
            raise DataError(f"expected {len(names)} features, got {len(values)}", line=lineno)
        xs.append(values)
        if "gold_label" in row:
            ys.append(bool(row["gold_label"]))
        elif need_labels:
            raise DataError("training needs labeled feature vectors (featurize with gold data)", line=lineno)
    X = np.asarray(xs, dtype=np.float64).reshape(len(xs), len(names))
    y = np.asarray(ys, dtype=bool) if ys and len(ys) == len(xs) else None
    return PairTable(refs, recs, X, y, names, manifest["schema_version"])


def _hyperparameters(config: dict, kind: ClassifierKind) -> dict:
    from .classify import DEFAULT_HYPERPARAMETERS

    hp = {k: v for k, v in (config["classifier"].get("hyperparameters") or {}).items()
          if k in DEFAULT_HYPERPARAMETERS[kind]}
    hp.setdefault("seed", int(config["classifier"]["seed"]))
    return hp


def cmd_train(config: dict, args) -> int:
    table = _load_table(config, need_labels=True)
    kind = ClassifierKind(config["classifier"]["kind"])
    model = train(table.X, table.y, kind, _hyperparameters(config, kind), table.schema_version,
                  table.feature_names, [f"{a}/{b}" for a, b in zip(table.reference_ids, table.record_ids)])
    model.config_fingerprint = fingerprint(config)
    model.save(_output(config, "model"))
    print(f"{kind.value} model trained on {len(table)} pairs ({int(table.y.sum())} matches)")
    return EXIT_OK


def cmd_match(config: dict, args) -> int:
    model = ClassifierModel.load(_require(config, "model"))
    table = _load_table(config, need_labels=False)
    probs = model.predict_proba(table.X, table.schema_version) if len(table) else np.zeros(0)
    by_ref: dict[str, list[CandidatePair]] = {}
    for ref, rec, p in zip(table.reference_ids, table.record_ids, probs):
        by_ref.setdefault(ref, []).append(CandidatePair(ref, rec, predicted_probability=float(p)))
    fp = fingerprint(config)
    links = []
    for ref in sorted(by_ref):
        choice = select_top1(by_ref[ref])
        prob = max((c.predicted_probability for c in by_ref[ref] if c.record_id == choice), default=None)
        links.append({"reference_id": ref, "record_id": choice, "probability": prob, "config_fingerprint": fp})
    write_jsonl(_output(config, "links"), links)
    linked = sum(1 for link in links if link["record_id"] is not None)
    print(f"{linked} of {len(links)} references linked")
    return EXIT_OK


def cmd_evaluate(config: dict, args) -> int:
    records = load_records(_require(config, "records"))
    refs = load_references(_require(config, "references"))
    gold = load_gold(_require(config, "gold"))
    index_path = Path(config["paths"]["index"])
    index = Index.load(index_path) if index_path.exists() else None
    kinds = args.classifier or [k.value for k in ClassifierKind]
    result = run_experiments(refs, records, gold, config, index=index, with_curves=not args.no_curves,
                             kinds=kinds)
    reports = Path(config["paths"]["reports"])
    reports.mkdir(parents=True, exist_ok=True)
    payload = {
        "config_fingerprint": result.fingerprint,
        "blocking": result.blocking,
        "combinations": result.combinations,
        "classification": [{**c, "report": c["report"].to_dict()} for c in result.classification],
        "top1": [{"classifier": t["classifier"], "report": t["report"].to_dict(),
                  "pipeline": t["pipeline"].to_dict()} for t in result.top1],
        "folds": result.folds,
    }
    write_report_json(reports / "evaluation.json", payload)
    if result.curves:
        write_curves_csv(reports / "blocking_curves.csv", result.curves)
    print(f"blocking: {result.blocking['pairs']} pairs, recall {result.blocking['blocking_recall']}")
    print(f"{'features':34s} {'classifier':20s}   P      R      F1")
    for c in result.classification:
        r = c["report"]
        print(f"{c['features']:34s} {c['classifier']:20s} {r.precision:.3f}  {r.recall:.3f}  {r.f1:.3f}")
    for t in result.top1:
        r, p = t["report"], t["pipeline"]
        print(f"top-1 {t['classifier']:20s} P {r.precision:.3f}  R {r.recall:.3f}  pipeline R {p.recall:.3f}")
    return EXIT_OK


def cmd_convert(config: dict, args) -> int:
    from .convert import convert_directory

    src = Path(args.source)
    if not src.is_dir():
        raise InputError(f"not a directory: {src}")
    counts = convert_directory(src, args.dest)
    print(", ".join(f"{n} {k}" for k, n in counts.items()) + f" written to {args.dest}")
    return EXIT_OK


def cmd_synth(config: dict, args) -> int:
    from .model import save_gold, save_records, save_references
    from .synth import generate_corpus

    corpus = generate_corpus(n_references=args.references, n_records=args.records, seed=args.seed)
    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    save_records(dest / "records.jsonl", corpus.records)
    save_references(dest / "references.jsonl", corpus.references)
    save_gold(dest / "gold.jsonl", corpus.gold)
    print(f"{len(corpus.references)} references, {len(corpus.records)} records written to {dest}")
    return EXIT_OK


# -- argument handling ---------------------------------------------------------------

def _parse_set(items: Sequence[str]) -> dict:
    out: dict = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = parsed
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="citematch", description="Match reference strings to bibliographic records.")
    parser.add_argument("-c", "--config", help="JSON config file (paths are relative to it)")
    parser.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value (JSON-decoded when possible)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("index", help="build the record index")
    p = sub.add_parser("block", help="retrieve candidate records per reference")
    p.add_argument("--strategy", choices=["segments", "strings", "combined"])
    p.add_argument("--cutoff", type=int)
    p = sub.add_parser("featurize", help="compute feature vectors for candidate pairs")
    p.add_argument("--groups", help="comma-separated feature groups, e.g. A,P,B")
    p.add_argument("--unlabeled", action="store_true", help="do not attach gold labels")
    p = sub.add_parser("train", help="train a match classifier")
    p.add_argument("--classifier", choices=[k.value for k in ClassifierKind])
    p.add_argument("--seed", type=int)
    sub.add_parser("match", help="link each reference to its most probable record")
    p = sub.add_parser("evaluate", help="blocking curves, cross-validation and top-1 evaluation on gold data")
    p.add_argument("--classifier", action="append", choices=[k.value for k in ClassifierKind])
    p.add_argument("--no-curves", action="store_true")
    p = sub.add_parser("convert", help="convert a delimited/tagged gold corpus to JSONL")
    p.add_argument("source")
    p.add_argument("dest")
    p = sub.add_parser("synth", help="write a synthetic corpus")
    p.add_argument("dest")
    p.add_argument("--references", type=int, default=816)
    p.add_argument("--records", type=int, default=18590)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _flag_overrides(args) -> dict:
    o: dict = {}
    if getattr(args, "strategy", None):
        o.setdefault("blocking", {})["strategy"] = args.strategy
    if getattr(args, "cutoff", None) is not None:
        o.setdefault("blocking", {})["cutoff"] = args.cutoff
    if getattr(args, "groups", None):
        o.setdefault("features", {})["groups"] = [g.strip() for g in args.groups.split(",") if g.strip()]
    if args.command == "train" and args.classifier:
        o.setdefault("classifier", {})["kind"] = args.classifier
    if getattr(args, "seed", None) is not None and args.command == "train":
        o.setdefault("classifier", {})["seed"] = args.seed
    return o


COMMANDS = {
    "index": cmd_index, "block": cmd_block, "featurize": cmd_featurize, "train": cmd_train,
    "match": cmd_match, "evaluate": cmd_evaluate, "convert": cmd_convert, "synth": cmd_synth,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        overrides = _parse_set(args.set)
        flags = _flag_overrides(args)
        for section, values in flags.items():
            overrides.setdefault(section, {}).update(values)
        config = load_config(args.config, overrides)
        if config["features"]["groups"]:
            normalize_groups(config["features"]["groups"])
        if int(config["blocking"]["cutoff"]) < 1:
            raise ConfigError("blocking.cutoff must be >= 1")
    except FileNotFoundError as exc:
        print(f"error: config file not found: {exc.filename}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](config, args)
    except (InputError, DataError, SchemaMismatch, TrainingError, QueryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
