import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import precision_score, recall_score

from citematch.blocking import BlockingConfig, Strategy
from citematch.evaluation import (
    BlockingCurve,
    CurvePoint,
    EvalReport,
    FoldMetrics,
    PairTable,
    blocking_curve,
    cross_val_predict,
    f1_score,
    grouped_kfold,
    match_count_histogram,
    pair_report,
    top1_reports,
    write_curves_csv,
)
from citematch.index import build_index
from citematch.model import GoldStandard
from citematch.textnorm import preprocess_reference


class TestFolds:
    def test_sizes_for_809(self):
        folds = grouped_kfold([f"r{i}" for i in range(809)], 10, 42)
        assert sorted(len(f) for f in folds) == [80] * 1 + [81] * 9

    @settings(max_examples=50)
    @given(st.sets(st.text("abcdef", min_size=1, max_size=4), min_size=2, max_size=80),
           st.integers(2, 10), st.integers(0, 1000))
    def test_partition(self, ids, k, seed):
        if k > len(ids):
            return
        folds = grouped_kfold(sorted(ids), k, seed)
        flat = [r for f in folds for r in f]
        assert sorted(flat) == sorted(ids)
        assert max(map(len, folds)) - min(map(len, folds)) <= 1
        assert folds == grouped_kfold(list(reversed(sorted(ids))), k, seed)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            grouped_kfold(["a", "b"], 3, 0)
        with pytest.raises(ValueError):
            grouped_kfold(["a", "b"], 1, 0)


def toy_table(n_refs=40, per_ref=5, seed=0):
    rng = np.random.default_rng(seed)
    refs, recs, ys, xs = [], [], [], []
    for r in range(n_refs):
        positive = rng.integers(-1, per_ref) if r % 3 else -1
        for c in range(per_ref):
            y = c == positive
            refs.append(f"q{r:03d}")
            recs.append(f"d{r:03d}_{c}")
            ys.append(y)
            xs.append([rng.normal(2.0 if y else 0.0), rng.normal()])
    return PairTable(refs, recs, np.array(xs), np.array(ys), ["signal", "noise"], "toy/1")


def toy_gold(table):
    entries = {}
    for ref, rec, y in zip(table.reference_ids, table.record_ids, table.y):
        if y:
            entries.setdefault(ref, set()).add(rec)
    return GoldStandard({k: frozenset(v) for k, v in entries.items()})


class TestPairMetrics:
    def test_f1(self):
        assert f1_score(0.947, 0.904) == pytest.approx(0.925, abs=5e-4)
        assert f1_score(0.0, 0.0) == 0.0

    def test_report_is_macro_average(self):
        report = EvalReport.from_folds([FoldMetrics(1.0, 0.5, 0.0), FoldMetrics(0.5, 1.0, 0.0)])
        assert (report.precision, report.recall) == (0.75, 0.75)
        assert report.f1 == pytest.approx(0.75)

    def test_matches_sklearn_per_fold(self):
        table = toy_table()
        folds = grouped_kfold(sorted(set(table.reference_ids)), 5, 1)
        probs = cross_val_predict(table, folds)
        report = pair_report(table, folds, probs)
        ref = np.array(table.reference_ids)
        for fm, ids in zip(report.per_fold, folds):
            rows = np.isin(ref, ids)
            pred = probs[rows] > 0.5
            assert fm.precision == pytest.approx(precision_score(table.y[rows], pred, zero_division=0))
            assert fm.recall == pytest.approx(recall_score(table.y[rows], pred, zero_division=0))

    def test_all_negative_predictor(self):
        table = toy_table()
        folds = grouped_kfold(sorted(set(table.reference_ids)), 4, 0)
        report = pair_report(table, folds, np.zeros(len(table)))
        assert report.precision == report.recall == report.f1 == 0.0
        assert all(f.precision_undefined for f in report.per_fold)

    def test_perfect_predictor(self):
        table = toy_table()
        folds = grouped_kfold(sorted(set(table.reference_ids)), 4, 0)
        report = pair_report(table, folds, table.y.astype(float))
        assert report.precision == report.recall == report.f1 == 1.0

    def test_out_of_fold(self):
        table = toy_table()
        folds = grouped_kfold(sorted(set(table.reference_ids)), 4, 0)
        assert not np.isnan(cross_val_predict(table, folds)).any()
        assert np.isnan(cross_val_predict(table, folds[:2])).any()


class TestTop1:
    def test_perfect(self):
        table = toy_table()
        gold = toy_gold(table)
        folds = grouped_kfold(sorted(set(table.reference_ids)), 4, 0)
        plain, pipe = top1_reports(table, folds, table.y.astype(float), gold)
        assert plain.precision == plain.recall == 1.0
        assert pipe.recall == 1.0

    def test_pipeline_recall_counts_blocking_misses(self):
        table = toy_table()
        gold = toy_gold(table)
        # two references with gold matches that blocking never retrieved
        entries = dict(gold.entries)
        entries["zz1"] = frozenset(["x"])
        entries["zz2"] = frozenset(["y"])
        gold = GoldStandard(entries)
        folds = grouped_kfold(sorted(set(table.reference_ids)), 4, 0)
        plain, pipe = top1_reports(table, folds, table.y.astype(float), gold,
                                   sorted(set(table.reference_ids)) + ["zz1", "zz2"])
        assert plain.recall == 1.0
        assert pipe.recall < plain.recall
        assert sum(f.counts["blocking_missed"] for f in pipe.per_fold) == 2
        assert pipe.precision == plain.precision

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_pipeline_never_exceeds_plain(self, seed):
        table = toy_table(seed=seed % 50)
        gold = toy_gold(table)
        folds = grouped_kfold(sorted(set(table.reference_ids)), 4, seed)
        probs = np.random.default_rng(seed).random(len(table))
        plain, pipe = top1_reports(table, folds, probs, gold)
        assert pipe.recall <= plain.recall + 1e-12
        for f in plain.per_fold:
            assert f.counts["correct"] <= f.counts["selected"]


class TestHistogram:
    def test_counts(self):
        gold = GoldStandard({"a": frozenset(["1"]), "b": frozenset(["1", "2"]), "c": frozenset()})
        assert match_count_histogram(gold, ["a", "b", "c", "d"]) == {0: 2, 1: 1, 2: 1}


class TestBlockingCurve:
    def test_monotone_recall_and_growth(self, small_corpus):
        refs = [preprocess_reference(r) for r in small_corpus.references[:60]]
        idx = build_index(small_corpus.records)
        for strategy in Strategy:
            curve = blocking_curve(refs, small_corpus.gold, idx, BlockingConfig(strategy=strategy), 8)
            recalls = [p.recall for p in curve.points]
            pairs = [p.pairs for p in curve.points]
            assert recalls == sorted(recalls)
            assert pairs == sorted(pairs)
            assert all(0 <= p.precision <= 1 for p in curve.points)

    def test_no_matchable(self, small_corpus):
        refs = [preprocess_reference(r) for r in small_corpus.references[:5]]
        idx = build_index(small_corpus.records)
        curve = blocking_curve(refs, GoldStandard({}), idx, BlockingConfig(), 2)
        assert all(p.recall is None and p.precision == 0.0 for p in curve.points)

    def test_csv(self, tmp_path):
        curve = BlockingCurve("strings", [CurvePoint(1, 0.5, None, 4), CurvePoint(2, 0.25, 0.75, 8)])
        write_curves_csv(tmp_path / "c.csv", [curve])
        rows = list(csv.reader(open(tmp_path / "c.csv")))
        assert rows == [["strategy", "cutoff", "precision", "recall", "pairs"],
                        ["strings", "1", "0.500000", "", "4"],
                        ["strings", "2", "0.250000", "0.750000", "8"]]
