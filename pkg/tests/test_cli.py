import json

import pytest

from citematch.cli import main
from citematch.model import load_gold, load_records, load_references, save_gold, save_records, save_references
from citematch.synth import generate_corpus


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(n_references=60, n_records=400, seed=11)


@pytest.fixture
def workdir(tmp_path, corpus):
    data = tmp_path / "data"
    data.mkdir()
    save_records(data / "records.jsonl", corpus.records)
    save_references(data / "references.jsonl", corpus.references)
    save_gold(data / "gold.jsonl", corpus.gold)
    cfg = {"paths": {"records": "data/records.jsonl", "references": "data/references.jsonl",
                     "gold": "data/gold.jsonl"},
           "eval": {"folds": 3, "max_cutoff": 3},
           "classifier": {"hyperparameters": {"n_trees": 10}}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    return tmp_path


def run(workdir, *args):
    return main(["-c", str(workdir / "cfg.json"), *args])


def full_chain(workdir):
    for cmd in ("index", "block", "featurize", "train", "match"):
        assert run(workdir, cmd) == 0, cmd


class TestIndex:
    def test_counts(self, workdir, capsys):
        assert run(workdir, "index") == 0
        assert "400 records indexed" in capsys.readouterr().out
        assert (workdir / "out" / "index.json").exists()

    def test_empty_file_warns(self, workdir, capsys, caplog):
        (workdir / "data" / "records.jsonl").write_text("")
        assert run(workdir, "index") == 0
        assert "0 records indexed" in capsys.readouterr().out
        assert "empty" in caplog.text

    def test_duplicate_ids(self, workdir, capsys):
        path = workdir / "data" / "records.jsonl"
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines + lines[:1]) + "\n")
        assert run(workdir, "index") == 1
        assert "duplicate" in capsys.readouterr().err

    def test_malformed_line_reported(self, workdir, capsys):
        path = workdir / "data" / "records.jsonl"
        path.write_text(path.read_text() + "{broken\n")
        assert run(workdir, "index") == 1
        assert "line 401" in capsys.readouterr().err


class TestBlock:
    def test_missing_index(self, workdir):
        assert run(workdir, "block") == 1

    def test_summary_and_strategy_flag(self, workdir, capsys):
        run(workdir, "index")
        capsys.readouterr()
        assert run(workdir, "block", "--strategy", "strings", "--cutoff", "3") == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["strategy"] == "strings" and summary["cutoff"] == 3
        for key in ("pairs", "min", "mean", "sd", "max"):
            assert key in summary
        rows = [json.loads(l) for l in (workdir / "out" / "candidates.jsonl").read_text().splitlines()]
        assert len(rows) == 60
        assert all(r["config_fingerprint"] == summary["config_fingerprint"] for r in rows)
        assert all(len(r["record_ids"]) <= 3 * 2 for r in rows)


class TestFeaturize:
    def test_counts_match_candidates(self, workdir, capsys):
        run(workdir, "index")
        run(workdir, "block")
        pairs = sum(len(json.loads(l)["record_ids"])
                    for l in (workdir / "out" / "candidates.jsonl").read_text().splitlines())
        assert run(workdir, "featurize") == 0
        assert len((workdir / "out" / "features.jsonl").read_text().splitlines()) == pairs

    def test_group_subset_manifest(self, workdir):
        run(workdir, "index")
        run(workdir, "block")
        assert run(workdir, "featurize", "--groups", "B") == 0
        manifest = json.loads((workdir / "out" / "features.manifest.json").read_text())
        assert {f["group"] for f in manifest["features"]} == {"B"}

    def test_unlabeled(self, workdir):
        run(workdir, "index")
        run(workdir, "block")
        assert run(workdir, "featurize", "--unlabeled") == 0
        first = json.loads((workdir / "out" / "features.jsonl").read_text().splitlines()[0])
        assert "gold_label" not in first
        assert run(workdir, "train") == 1


class TestTrainMatch:
    def test_match_without_model(self, workdir):
        run(workdir, "index")
        run(workdir, "block")
        run(workdir, "featurize")
        assert run(workdir, "match") == 1

    def test_chain_is_idempotent(self, workdir):
        full_chain(workdir)
        out = workdir / "out"
        first = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
        full_chain(workdir)
        second = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
        assert first == second
        model = json.loads((out / "model.json").read_text())
        assert model["config_fingerprint"] == json.loads((out / "links.jsonl").read_text().splitlines()[0])["config_fingerprint"]

    def test_links_point_at_candidates(self, workdir):
        full_chain(workdir)
        cands = {json.loads(l)["reference_id"]: set(json.loads(l)["record_ids"])
                 for l in (workdir / "out" / "candidates.jsonl").read_text().splitlines()}
        for line in (workdir / "out" / "links.jsonl").read_text().splitlines():
            link = json.loads(line)
            if link["record_id"] is not None:
                assert link["record_id"] in cands[link["reference_id"]]
                assert link["probability"] > 0.5

    def test_schema_mismatch(self, workdir):
        full_chain(workdir)
        assert run(workdir, "featurize", "--groups", "A") == 0
        assert run(workdir, "match") == 1


class TestEvaluate:
    def test_reports(self, workdir, capsys):
        assert run(workdir, "evaluate", "--classifier", "large_margin_linear") == 0
        report = json.loads((workdir / "out" / "reports" / "evaluation.json").read_text())
        assert len(report["classification"]) == 5
        assert report["top1"][0]["classifier"] == "large_margin_linear"
        lines = (workdir / "out" / "reports" / "blocking_curves.csv").read_text().splitlines()
        assert lines[0] == "strategy,cutoff,precision,recall,pairs"
        assert len(lines) == 1 + 3 * 3


class TestConfig:
    def test_bad_strategy(self, workdir):
        assert main(["-c", str(workdir / "cfg.json"), "--set", "blocking.strategy=bogus", "index"]) == 2

    def test_bad_groups_and_folds(self, workdir):
        assert main(["-c", str(workdir / "cfg.json"), "--set", "features.groups=[\"Z\"]", "index"]) == 2
        assert main(["-c", str(workdir / "cfg.json"), "--set", "eval.folds=1", "index"]) == 2
        assert main(["-c", str(workdir / "cfg.json"), "--set", "nosuch.key=1", "index"]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["-c", str(tmp_path / "none.json"), "index"]) == 2

    def test_invalid_config_json(self, tmp_path):
        (tmp_path / "c.json").write_text("{nope")
        assert main(["-c", str(tmp_path / "c.json"), "index"]) == 2

    def test_env_workers(self, workdir, monkeypatch):
        monkeypatch.setenv("CITEMATCH_WORKERS", "zero")
        assert run(workdir, "index") == 2


class TestConvert:
    def test_delimited_and_tagged(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        (src / "records.tsv").write_text(
            "id\ttitle\tjournal\tauthors\tyear\tvolume\tissue\tpages\n"
            "d1\tSoziale Ungleichheit\tKZfSS\tMüller, Hans; Meier, K.\t2001\t34\t2\t12-20\n"
            "d2\tArbeit\tZfS\tWeber\t1999\t\t\t\n")
        (src / "references.jsonl").write_text(json.dumps({
            "id": "q1",
            "tagged": "<author><surname>Müller</surname>, H.</author> (<year>2001</year>): "
                      "<title>Soziale Ungleichheit</title>. <source>KZfSS</source> <volume>34</volume>, "
                      "<fpage>12</fpage>-<lpage>20</lpage>"}) + "\n")
        (src / "gold.csv").write_text("reference_id,record_id\nq1,d1\nq1,d2\nq2,\n")
        dest = tmp_path / "out"
        assert main(["convert", str(src), str(dest)]) == 0
        recs = load_records(dest / "records.jsonl")
        assert recs[0].surnames == ["Müller", "Meier"] and recs[0].pages.end == "20"
        assert recs[1].pages is None and recs[1].volume is None
        ref = load_references(dest / "references.jsonl")[0]
        assert ref.raw == "Müller, H. (2001): Soziale Ungleichheit. KZfSS 34, 12-20"
        # words are split at tag boundaries too
        assert [t.text for t in ref.tokens("author")] == ["Müller", ",", "H."]
        assert ref.segment_text("title") == "Soziale Ungleichheit"
        assert ref.segment_text("page") == "12 20"
        gold = load_gold(dest / "gold.jsonl")
        assert gold.matches("q1") == {"d1", "d2"} and gold.matches("q2") == frozenset()

    def test_missing_files(self, tmp_path):
        assert main(["convert", str(tmp_path), str(tmp_path / "o")]) == 1
