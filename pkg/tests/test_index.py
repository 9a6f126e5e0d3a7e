import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from citematch.index import (
    INDEXED_FIELDS,
    And,
    ExactTerm,
    FuzzyTerm,
    Index,
    Or,
    Phrase,
    QueryError,
    build_index,
    field_tokens,
)
from citematch.model import DataError
from citematch.scan import LinearScanIndex

from .conftest import make_record


def hit_ids(hits):
    return [h.record_id for h in hits]


class TestBuild:
    def test_fields_and_counts(self, tiny_records):
        idx = build_index(tiny_records)
        assert set(idx.fields) == set(INDEXED_FIELDS)
        assert idx.doc_count == 5

    def test_empty(self):
        idx = build_index([])
        assert idx.doc_count == 0
        assert idx.search(ExactTerm("title", "data"), 10) == []
        assert idx.search(FuzzyTerm("title", "data"), 10) == []

    def test_single_record_postings(self):
        idx = build_index([make_record("a", "data mining")])
        assert idx.fields["title"].postings_list("data") == [(0, 1)]
        assert idx.fields["title"].postings_list("mining") == [(0, 1)]

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            build_index([make_record("a", "x"), make_record("a", "y")])

    def test_postings_sorted(self, small_corpus):
        idx = build_index(small_corpus.records)
        for fi in idx.fields.values():
            for term in fi.postings:
                ords = [o for o, _ in fi.postings_list(term)]
                assert ords == sorted(set(ords))
                assert all(o < fi.doc_count for o in ords)

    def test_phonetic_field(self, tiny_records):
        assert field_tokens(tiny_records[3], "authors_surname_phonetic") == ["657", "67"]

    def test_pages_field_is_start_page(self, tiny_records):
        assert field_tokens(tiny_records[3], "pages") == ["1123"]


class TestSearch:
    def test_boolean_year_filter(self, tiny_records):
        idx = build_index(tiny_records)
        q = And(ExactTerm("year", "2001"), Or(Phrase("title", "data", "mining"), Phrase("title", "soziale", "ungleichheit")))
        assert sorted(hit_ids(idx.search(q, 10))) == ["r1", "r4"]

    def test_fuzzy(self, tiny_records):
        idx = build_index(tiny_records)
        ids = hit_ids(idx.search(FuzzyTerm("title", "mning", 2), 10))
        assert {"r1", "r2", "r3", "r5"} <= set(ids)
        assert "r4" not in ids

    def test_fuzzy_one_edit(self, tiny_records):
        idx = build_index(tiny_records)
        assert set(hit_ids(idx.search(FuzzyTerm("authors_surname", "meier", 1), 10))) == {"r4", "r5"}

    def test_phrase_needs_adjacency(self, tiny_records):
        idx = build_index(tiny_records)
        assert hit_ids(idx.search(Phrase("title", "mining", "data"), 10)) == []
        assert hit_ids(idx.search(Phrase("title", "data", "data"), 10)) == ["r5"]

    def test_ranking_prefers_shorter_field(self, tiny_records):
        idx = build_index(tiny_records)
        hits = idx.search(ExactTerm("title", "mining"), 10)
        # r5 has tf=2 in a 4-token title
        assert hits[0].record_id == "r5"
        assert [h.score for h in hits] == sorted((h.score for h in hits), reverse=True)

    def test_tie_break_by_id(self):
        idx = build_index([make_record(i, "same title") for i in ("c", "a", "b")])
        assert hit_ids(idx.search(ExactTerm("title", "same"), 10)) == ["a", "b", "c"]

    def test_unknown_field(self, tiny_records):
        idx = build_index(tiny_records)
        with pytest.raises(QueryError, match="nosuch"):
            idx.search(ExactTerm("nosuch", "x"), 5)
        with pytest.raises(QueryError, match="nosuch"):
            idx.search(And(ExactTerm("year", "1800"), ExactTerm("nosuch", "x")), 5)

    def test_invalid_clauses(self):
        with pytest.raises(QueryError):
            And()
        with pytest.raises(QueryError):
            FuzzyTerm("title", "x", 3)

    def test_limit(self, tiny_records):
        idx = build_index(tiny_records)
        with pytest.raises(ValueError):
            idx.search(ExactTerm("title", "data"), 0)
        assert len(idx.search(FuzzyTerm("title", "data"), 1)) == 1

    def test_round_trip(self, small_corpus, tmp_path):
        idx = build_index(small_corpus.records)
        path = tmp_path / "index.json"
        idx.save(path)
        loaded = Index.load(path)
        q = Or(FuzzyTerm("title", "arbeit"), ExactTerm("year", "1990"), Phrase("title", "soziale", "welt"))
        assert loaded.search(q, 50) == idx.search(q, 50)
        assert path.read_bytes() == (idx.save(tmp_path / "again.json") or (tmp_path / "again.json").read_bytes())


# -- random clauses, shared with the acceptance suite --------------------------------

def random_clause(rng: random.Random, vocab: dict[str, list[str]], depth: int = 0):
    """A random clause over terms that mostly exist in the index."""
    fields = [f for f in vocab if vocab[f]]
    r = rng.random()
    if depth < 2 and r < 0.35:
        n = rng.randint(1, 3)
        kids = [random_clause(rng, vocab, depth + 1) for _ in range(n)]
        return And(kids) if rng.random() < 0.5 else Or(kids)
    field = rng.choice(fields)
    term = rng.choice(vocab[field])
    if rng.random() < 0.15 and len(term) > 2:
        # perturb so fuzzy matching has work to do
        i = rng.randrange(len(term))
        term = term[:i] + rng.choice("aeiou") + term[i + 1:]
    kind = rng.random()
    if kind < 0.4:
        return ExactTerm(field, term)
    if kind < 0.75:
        return FuzzyTerm(field, term, rng.choice([1, 2]))
    return Phrase(field, term, rng.choice(vocab[field]))


def vocabulary(records, fields=INDEXED_FIELDS):
    vocab = {}
    for f in fields:
        terms = sorted({t for r in records for t in field_tokens(r, f)})
        vocab[f] = terms
    return vocab


def assert_equivalent(idx, oracle, query, limit):
    got = idx.search(query, limit)
    want = oracle.search(query, limit)
    assert got == want, query


class TestOracleEquivalence:
    def test_random_clauses(self, small_corpus):
        records = small_corpus.records[:120]
        idx = build_index(records)
        oracle = LinearScanIndex(records, INDEXED_FIELDS)
        vocab = vocabulary(records)
        rng = random.Random(3)
        for _ in range(150):
            assert_equivalent(idx, oracle, random_clause(rng, vocab), rng.choice([1, 5, 50, 1000]))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_property(self, small_corpus, seed):
        records = small_corpus.records[:40]
        idx = build_index(records)
        oracle = LinearScanIndex(records, INDEXED_FIELDS)
        rng = random.Random(seed)
        assert_equivalent(idx, oracle, random_clause(rng, vocabulary(records)), 1000)

    def test_prefix_property(self, small_corpus):
        idx = build_index(small_corpus.records)
        vocab = vocabulary(small_corpus.records)
        rng = random.Random(11)
        for _ in range(50):
            q = random_clause(rng, vocab)
            full = idx.search(q, 1000)
            for k in (1, 3, 7):
                assert idx.search(q, k) == full[:k]

    def test_or_monotone(self, small_corpus):
        idx = build_index(small_corpus.records)
        vocab = vocabulary(small_corpus.records)
        rng = random.Random(5)
        for _ in range(50):
            a, b = random_clause(rng, vocab), random_clause(rng, vocab)
            union = set(hit_ids(idx.search(Or(a, b), 10**6)))
            assert set(hit_ids(idx.search(a, 10**6))) | set(hit_ids(idx.search(b, 10**6))) <= union
