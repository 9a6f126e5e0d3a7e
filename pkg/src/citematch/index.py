"""Embedded inverted index with boolean, fuzzy and phrase queries.

Records are analyzed field by field (see :func:`field_tokens`) and every
field gets its own positional postings.  Matching documents are ranked by
classic tf-idf; for one matching index term

    score = sqrt(tf) * idf * idf / sqrt(field_length),  idf = 1 + ln(N / (df + 1))

A phrase scores with ``idf = idf(first) + idf(second)`` and ``tf`` = number
of adjacent occurrences.  A fuzzy clause scores as its best matching
expansion term.  ``And``/``Or`` add up the scores of their matching children
in child order.  Hits are sorted by score descending, then record id.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence, Union

from .model import BibRecord, DataError
from .strsim import bounded_levenshtein
from .textnorm import cologne_encode, digit_runs, tokens

INDEXED_FIELDS = (
    "authors_surname",
    "authors_surname_phonetic",
    "title",
    "source",
    "source_abbrev",
    "year",
    "volume",
    "issue",
    "pages",
)
FORMAT_NAME = "citematch-index"
FORMAT_VERSION = 1


class QueryError(ValueError):
    pass


def field_tokens(record: BibRecord, field: str) -> list[str]:
    """Analyzed token stream of one record field."""
    if field == "authors_surname":
        return [t for s in record.surnames for t in tokens(s)]
    if field == "authors_surname_phonetic":
        codes = (cologne_encode(t) for s in record.surnames for t in tokens(s))
        return [c for c in codes if c]
    if field == "title":
        return tokens(record.title)
    if field == "source":
        return tokens(record.source)
    if field == "source_abbrev":
        return tokens(record.source_abbrev)
    if field == "year":
        return [record.year] if record.year else []
    if field == "volume":
        return digit_runs(record.volume)
    if field == "issue":
        return digit_runs(record.issue)
    if field == "pages":
        starts = digit_runs(record.pages.start) if record.pages else []
        return starts[:1]
    raise QueryError(f"unknown field {field!r}")


# -- query clauses ---------------------------------------------------------------

@dataclass(frozen=True)
class ExactTerm:
    field: str
    term: str


@dataclass(frozen=True)
class FuzzyTerm:
    field: str
    term: str
    max_edits: int = 2

    def __post_init__(self):
        if self.max_edits not in (1, 2):
            raise QueryError(f"max_edits must be 1 or 2, got {self.max_edits}")


@dataclass(frozen=True)
class Phrase:
    field: str
    first: str
    second: str


@dataclass(frozen=True)
class And:
    children: tuple

    def __init__(self, *children):
        if len(children) == 1 and isinstance(children[0], (list, tuple)):
            children = tuple(children[0])
        if not children:
            raise QueryError("And needs at least one child")
        object.__setattr__(self, "children", tuple(children))


@dataclass(frozen=True)
class Or:
    children: tuple

    def __init__(self, *children):
        if len(children) == 1 and isinstance(children[0], (list, tuple)):
            children = tuple(children[0])
        if not children:
            raise QueryError("Or needs at least one child")
        object.__setattr__(self, "children", tuple(children))


Clause = Union[ExactTerm, FuzzyTerm, Phrase, And, Or]


def clause_to_str(clause: Clause) -> str:
    """Render a clause in a Lucene-like syntax (for logs and debugging)."""
    if isinstance(clause, ExactTerm):
        return f"{clause.field}:{clause.term}"
    if isinstance(clause, FuzzyTerm):
        return f"{clause.field}:{clause.term}~{clause.max_edits}"
    if isinstance(clause, Phrase):
        return f'{clause.field}:"{clause.first} {clause.second}"'
    op = " AND " if isinstance(clause, And) else " OR "
    return "(" + op.join(clause_to_str(c) for c in clause.children) + ")"


@dataclass(frozen=True)
class RankedHit:
    record_id: str
    score: float


def idf(df: int, n_docs: int) -> float:
    return 1.0 + math.log(n_docs / (df + 1))


def leaf_score(tf: int, term_idf: float, field_length: int) -> float:
    return math.sqrt(tf) * term_idf * term_idf / math.sqrt(field_length)


def rank(scores: dict[str, float], limit: int) -> list[RankedHit]:
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [RankedHit(rid, s) for rid, s in ordered[:limit]]


# -- index -------------------------------------------------------------------------

CACHE_SIZE = 4096


def _deletions(term: str, k: int) -> set[str]:
    out = {term}
    for n in range(1, min(k, len(term)) + 1):
        for idx in combinations(range(len(term)), n):
            out.add("".join(c for i, c in enumerate(term) if i not in idx))
    return out


class FieldIndex:
    """Positional postings of one field.

    ``postings[term]`` maps record ordinal -> token positions; ordinals are
    inserted in increasing order so iteration is sorted.
    """

    def __init__(self, doc_count: int):
        self.doc_count = doc_count
        self.postings: dict[str, dict[int, tuple[int, ...]]] = {}
        self.field_lengths: list[int] = [0] * doc_count
        self._deletion_map: dict[str, list[str]] | None = None
        self._fuzzy_cache: dict[tuple[str, int], tuple[str, ...]] = {}

    def add(self, ordinal: int, toks: Sequence[str]) -> None:
        self.field_lengths[ordinal] = len(toks)
        positions: dict[str, list[int]] = {}
        for pos, tok in enumerate(toks):
            positions.setdefault(tok, []).append(pos)
        for tok, pos in positions.items():
            self.postings.setdefault(tok, {})[ordinal] = tuple(pos)

    def postings_list(self, term: str) -> list[tuple[int, int]]:
        """(record_ordinal, term_frequency) pairs, sorted by ordinal."""
        return [(o, len(p)) for o, p in self.postings.get(term, {}).items()]

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def expand(self, term: str, max_edits: int) -> tuple[str, ...]:
        """Indexed terms within ``max_edits`` edits of ``term``, sorted."""
        key = (term, max_edits)
        hit = self._fuzzy_cache.get(key)
        if hit is not None:
            return hit
        if self._deletion_map is None:
            dm: dict[str, list[str]] = {}
            for t in self.postings:
                for d in _deletions(t, 2):
                    dm.setdefault(d, []).append(t)
            self._deletion_map = dm
        cands: set[str] = set()
        for d in _deletions(term, max_edits):
            cands.update(self._deletion_map.get(d, ()))
        out = tuple(sorted(t for t in cands if bounded_levenshtein(term, t, max_edits) is not None))
        self._fuzzy_cache[key] = out
        return out


class Index:
    def __init__(self, record_ids: Sequence[str], fields: Sequence[str] = INDEXED_FIELDS):
        self.record_ids = list(record_ids)
        self.fields = {f: FieldIndex(len(self.record_ids)) for f in fields}
        self._cache: dict[Clause, dict[int, float]] = {}
        # provenance, e.g. the fingerprint of the config that built the index
        self.meta: dict[str, str] = {}

    @property
    def doc_count(self) -> int:
        return len(self.record_ids)

    def field(self, name: str) -> FieldIndex:
        try:
            return self.fields[name]
        except KeyError:
            raise QueryError(f"unknown field {name!r}") from None

    # evaluation returns {ordinal: score} for every matching record;
    # results are cached, so callers must treat them as read-only
    def _eval(self, clause: Clause) -> dict[int, float]:
        cached = self._cache.get(clause)
        if cached is None:
            if isinstance(clause, And):
                cached = self._eval_and(clause)
            elif isinstance(clause, Or):
                cached = self._eval_or(clause)
            else:
                cached = self._eval_leaf(clause)
            if len(self._cache) >= CACHE_SIZE:
                self._cache.clear()
            self._cache[clause] = cached
        return cached

    def _eval_or(self, clause: Or) -> dict[int, float]:
        acc: dict[int, float] = {}
        for child in clause.children:
            for o, s in self._eval(child).items():
                acc[o] = acc.get(o, 0.0) + s
        return acc

    def _eval_and(self, clause: And) -> dict[int, float]:
        subs = []
        for i, child in enumerate(clause.children):
            sub = self._eval(child)
            subs.append(sub)
            if not sub:
                for rest in clause.children[i + 1:]:
                    self._check_fields(rest)
                return {}
        keys = min(subs, key=len).keys()
        out = {}
        for o in keys:
            if all(o in sub for sub in subs):
                # sum in child order so scores match a left-to-right evaluation
                s = subs[0][o]
                for sub in subs[1:]:
                    s += sub[o]
                out[o] = s
        return out

    def _eval_leaf(self, clause: Clause) -> dict[int, float]:
        n = self.doc_count
        if isinstance(clause, ExactTerm):
            fi = self.field(clause.field)
            post = fi.postings.get(clause.term)
            if not post:
                return {}
            w = idf(len(post), n)
            return {o: leaf_score(len(p), w, fi.field_lengths[o]) for o, p in post.items()}
        if isinstance(clause, FuzzyTerm):
            fi = self.field(clause.field)
            out: dict[int, float] = {}
            for term in fi.expand(clause.term, clause.max_edits):
                post = fi.postings[term]
                w = idf(len(post), n)
                for o, p in post.items():
                    s = leaf_score(len(p), w, fi.field_lengths[o])
                    if s > out.get(o, -1.0):
                        out[o] = s
            return out
        if isinstance(clause, Phrase):
            fi = self.field(clause.field)
            p1 = fi.postings.get(clause.first)
            p2 = fi.postings.get(clause.second)
            if not p1 or not p2:
                return {}
            w = idf(len(p1), n) + idf(len(p2), n)
            out = {}
            for o, pos1 in p1.items():
                pos2 = p2.get(o)
                if pos2 is None:
                    continue
                following = set(pos2)
                tf = sum(1 for p in pos1 if p + 1 in following)
                if tf:
                    out[o] = leaf_score(tf, w, fi.field_lengths[o])
            return out
        raise QueryError(f"not a clause: {clause!r}")

    def _check_fields(self, clause: Clause) -> None:
        if isinstance(clause, (And, Or)):
            for c in clause.children:
                self._check_fields(c)
        else:
            self.field(clause.field)

    def search(self, query: Clause, limit: int) -> list[RankedHit]:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        scores = self._eval(query)
        return rank({self.record_ids[o]: s for o, s in scores.items()}, limit)

    # -- persistence ---------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "meta": self.meta,
            "record_ids": self.record_ids,
            "fields": {
                name: {
                    "lengths": fi.field_lengths,
                    "postings": {
                        term: [[o, list(p)] for o, p in post.items()]
                        for term, post in sorted(fi.postings.items())
                    },
                }
                for name, fi in self.fields.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Index":
        if d.get("format") != FORMAT_NAME:
            raise DataError("not a citematch index file")
        if d.get("version") != FORMAT_VERSION:
            raise DataError(f"unsupported index version {d.get('version')!r}")
        idx = cls(d["record_ids"], list(d["fields"]))
        idx.meta = dict(d.get("meta") or {})
        for name, payload in d["fields"].items():
            fi = idx.fields[name]
            fi.field_lengths = list(payload["lengths"])
            fi.postings = {
                term: {o: tuple(p) for o, p in post}
                for term, post in payload["postings"].items()
            }
        return idx

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def load(cls, path: str | Path) -> "Index":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def build_index(records: Iterable[BibRecord], fields: Sequence[str] = INDEXED_FIELDS) -> Index:
    records = list(records)
    seen: set[str] = set()
    for rec in records:
        if rec.id in seen:
            raise DataError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
    for f in fields:
        if f not in INDEXED_FIELDS:
            raise QueryError(f"unknown field {f!r}")
    idx = Index([r.id for r in records], fields)
    for ordinal, rec in enumerate(records):
        for f in fields:
            idx.fields[f].add(ordinal, field_tokens(rec, f))
    return idx


def search(index: Index, query: Clause, limit: int) -> list[RankedHit]:
    return index.search(query, limit)
