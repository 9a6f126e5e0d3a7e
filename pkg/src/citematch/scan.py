"""Linear-scan query evaluator.

Evaluates a clause record by record with no postings, no deletion
neighbourhoods and no caching; document frequencies are recounted by
scanning.  It exists to cross-check :mod:`citematch.index`, so it must stay
free of any code path the index uses apart from the field analyzer.
"""

from __future__ import annotations

import math
from typing import Sequence

from .index import And, ExactTerm, FuzzyTerm, Or, Phrase, QueryError, RankedHit, field_tokens
from .model import BibRecord
from .strsim import levenshtein


class LinearScanIndex:
    def __init__(self, records: Sequence[BibRecord], fields: Sequence[str]):
        self.records = list(records)
        self.fields = list(fields)
        self.docs = [{f: field_tokens(r, f) for f in fields} for r in self.records]

    def _field(self, doc: dict, name: str) -> list[str]:
        if name not in self.fields:
            raise QueryError(f"unknown field {name!r}")
        return doc[name]

    def _df(self, field: str, term: str) -> int:
        return sum(1 for d in self.docs if term in d[field])

    def _weight(self, df: int) -> float:
        return 1.0 + math.log(len(self.docs) / (df + 1))

    def _score(self, tf: int, w: float, length: int) -> float:
        return math.sqrt(tf) * w * w / math.sqrt(length)

    def _match(self, clause, doc) -> float | None:
        """Score of ``doc`` for ``clause``, or None when it does not match."""
        if isinstance(clause, ExactTerm):
            toks = self._field(doc, clause.field)
            tf = toks.count(clause.term)
            if tf == 0:
                return None
            return self._score(tf, self._weight(self._df(clause.field, clause.term)), len(toks))
        if isinstance(clause, FuzzyTerm):
            toks = self._field(doc, clause.field)
            best = None
            for term in set(toks):
                if levenshtein(clause.term, term) <= clause.max_edits:
                    s = self._score(toks.count(term), self._weight(self._df(clause.field, term)), len(toks))
                    if best is None or s > best:
                        best = s
            return best
        if isinstance(clause, Phrase):
            toks = self._field(doc, clause.field)
            tf = sum(1 for a, b in zip(toks, toks[1:]) if a == clause.first and b == clause.second)
            if tf == 0:
                return None
            w = (self._weight(self._df(clause.field, clause.first))
                 + self._weight(self._df(clause.field, clause.second)))
            return self._score(tf, w, len(toks))
        if isinstance(clause, And):
            total = 0.0
            for child in clause.children:
                s = self._match(child, doc)
                if s is None:
                    return None
                total += s
            return total
        if isinstance(clause, Or):
            total = 0.0
            hit = False
            for child in clause.children:
                s = self._match(child, doc)
                if s is not None:
                    total += s
                    hit = True
            return total if hit else None
        raise QueryError(f"not a clause: {clause!r}")

    def search(self, query, limit: int) -> list[RankedHit]:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        scored = []
        for rec, doc in zip(self.records, self.docs):
            s = self._match(query, doc)
            if s is not None:
                scored.append((rec.id, s))
        scored.sort(key=lambda kv: (-kv[1], kv[0]))
        return [RankedHit(rid, s) for rid, s in scored[:limit]]
