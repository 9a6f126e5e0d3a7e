"""Blocking: turn a reference into queries and union the top hits.

Two query families exist.  Segment queries come from combinations of the six
segment kinds; a combination yields a query only if the reference has every
kind in it.  String queries ignore the segmentation and search bigrams of
the whole raw string as title phrases (optionally ANDed with the year found
in the raw string).  The ``combined`` strategy runs both families as separate
queries and unions their results.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Iterable, Sequence

from .index import And, Clause, ExactTerm, FuzzyTerm, Index, Or, Phrase
from .model import SEGMENT_KINDS, GoldStandard, SegmentedReference, SegmentKind
from .strsim import bigrams
from .textnorm import DEFAULT_STOPWORDS, digit_runs, extract_year, tokens

log = logging.getLogger(__name__)

Combination = frozenset  # frozenset[SegmentKind]

ALL_COMBINATIONS: tuple[frozenset, ...] = tuple(
    frozenset(c) for n in range(1, len(SEGMENT_KINDS) + 1) for c in combinations(SEGMENT_KINDS, n)
)

# name particles and connectors that are never surnames
_NAME_NOISE = frozenset(["et", "al", "and", "und", "u", "hrsg", "ed", "eds", "hg", "in", "von", "van", "de", "der"])


class Strategy(str, Enum):
    SEGMENTS = "segments"
    STRINGS = "strings"
    COMBINED = "combined"


def combination_key(combo: Iterable[SegmentKind]) -> tuple[str, ...]:
    """Canonical, sortable name of a combination (kinds in declaration order)."""
    combo = set(combo)
    return tuple(k.value for k in SEGMENT_KINDS if k in combo)


def combination_from_names(names: Iterable[str]) -> frozenset:
    return frozenset(SegmentKind(n) for n in names)


def dump_combinations(combos: Iterable[frozenset]) -> str:
    """JSON array of kind-name arrays, canonical order."""
    return json.dumps(sorted((list(combination_key(c)) for c in combos), key=lambda k: (len(k), k)))


def load_combinations(text: str) -> frozenset:
    return frozenset(combination_from_names(names) for names in json.loads(text))


@dataclass(frozen=True)
class BlockingConfig:
    strategy: Strategy = Strategy.COMBINED
    cutoff: int = 5
    enabled_combinations: frozenset = field(default_factory=lambda: frozenset(ALL_COMBINATIONS))
    max_edits: int = 2
    # terms shorter than this are queried exactly instead of fuzzily
    min_fuzzy_length: int = 3
    stopwords: frozenset = DEFAULT_STOPWORDS

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "enabled_combinations", frozenset(frozenset(c) for c in self.enabled_combinations))
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        unknown = self.enabled_combinations - set(ALL_COMBINATIONS)
        if unknown:
            raise ValueError(f"not a segment combination: {sorted(map(combination_key, unknown))}")


# -- per-kind clauses ------------------------------------------------------------

def author_names(reference: SegmentedReference) -> list[str]:
    """Normalized name tokens of the author segment that may be surnames."""
    out: list[str] = []
    for tok in reference.tokens(SegmentKind.AUTHOR):
        for t in tokens(tok.text):
            if len(t) > 1 and t not in _NAME_NOISE and not t.isdigit() and t not in out:
                out.append(t)
    return out


def segment_year(reference: SegmentedReference) -> str | None:
    return extract_year(reference.segment_text(SegmentKind.YEAR))


def segment_numbers(reference: SegmentedReference) -> list[str]:
    out: list[str] = []
    for d in digit_runs(reference.segment_text(SegmentKind.NUMBER)):
        if d not in out:
            out.append(d)
    return out


def start_page(reference: SegmentedReference) -> str | None:
    runs = digit_runs(reference.segment_text(SegmentKind.PAGE))
    return runs[0] if runs else None


def _fuzzy_all(field_name: str, text: str | None, config: BlockingConfig) -> Clause | None:
    terms: list[str] = []
    for t in tokens(text):
        if t not in terms:
            terms.append(t)
    if not terms:
        return None
    return And([FuzzyTerm(field_name, t, config.max_edits) if len(t) >= config.min_fuzzy_length
                else ExactTerm(field_name, t) for t in terms])


def kind_clause(reference: SegmentedReference, kind: SegmentKind, config: BlockingConfig) -> Clause | None:
    """Clause requiring one correct piece of information for ``kind``; None if unusable."""
    if kind is SegmentKind.AUTHOR:
        names = author_names(reference)
        return Or([ExactTerm("authors_surname", n) for n in names]) if names else None
    if kind is SegmentKind.YEAR:
        year = segment_year(reference)
        return ExactTerm("year", year) if year else None
    if kind is SegmentKind.TITLE:
        return _fuzzy_all("title", reference.segment_text(SegmentKind.TITLE), config)
    if kind is SegmentKind.SOURCE:
        return _fuzzy_all("source", reference.segment_text(SegmentKind.SOURCE), config)
    if kind is SegmentKind.NUMBER:
        nums = segment_numbers(reference)
        if not nums:
            return None
        return Or([ExactTerm(f, n) for n in nums for f in ("volume", "issue")])
    if kind is SegmentKind.PAGE:
        page = start_page(reference)
        return ExactTerm("pages", page) if page else None
    raise ValueError(kind)


def combination_query(reference: SegmentedReference, combo: Iterable[SegmentKind],
                      config: BlockingConfig) -> Clause | None:
    parts = []
    for kind in SEGMENT_KINDS:
        if kind in combo:
            clause = kind_clause(reference, kind, config)
            if clause is None:
                return None
            parts.append(clause)
    return And(parts)


def segment_queries(reference: SegmentedReference, combos: Iterable[frozenset] | None = None,
                    config: BlockingConfig | None = None) -> list[Clause]:
    """One query per enabled combination whose kinds are all present."""
    config = config or BlockingConfig()
    combos = config.enabled_combinations if combos is None else combos
    out = []
    for combo in sorted(combos, key=lambda c: (len(c), combination_key(c))):
        q = combination_query(reference, combo, config)
        if q is not None:
            out.append(q)
    return out


def raw_year(reference: SegmentedReference) -> str | None:
    return reference.extracted_year or extract_year(reference.raw)


def string_queries(reference: SegmentedReference, config: BlockingConfig | None = None) -> list[Clause]:
    """Bigram phrase query on titles, plus the same ANDed with the raw-string year."""
    config = config or BlockingConfig()
    year = raw_year(reference)
    toks = tokens(reference.raw, config.stopwords)
    if year:
        # drop the year itself, including suffixed forms like 1989b
        toks = [t for t in toks if not (t.startswith(year) and (len(t) == 4 or t[4:].isalpha()))]
    pairs: list[tuple[str, str]] = []
    for bg in bigrams(toks):
        if bg not in pairs:
            pairs.append(bg)
    if not pairs:
        return []
    phrases = Or([Phrase("title", a, b) for a, b in pairs])
    queries: list[Clause] = [phrases]
    if year:
        queries.append(And(ExactTerm("year", year), phrases))
    return queries


def blocking_queries(reference: SegmentedReference, config: BlockingConfig) -> list[Clause]:
    queries: list[Clause] = []
    if config.strategy in (Strategy.SEGMENTS, Strategy.COMBINED):
        queries += segment_queries(reference, config=config)
    if config.strategy in (Strategy.STRINGS, Strategy.COMBINED):
        queries += string_queries(reference, config)
    return queries


def ranked_blocks(reference: SegmentedReference, index: Index, config: BlockingConfig,
                  limit: int | None = None) -> list[list[str]]:
    """Ranked record ids per issued query, each cut at ``limit`` (default: cutoff)."""
    limit = limit or config.cutoff
    return [[h.record_id for h in index.search(q, limit)] for q in blocking_queries(reference, config)]


def union_at(blocks: Sequence[Sequence[str]], cutoff: int) -> set[str]:
    out: set[str] = set()
    for block in blocks:
        out.update(block[:cutoff])
    return out


def retrieve_candidates(reference: SegmentedReference, index: Index, config: BlockingConfig) -> set[str]:
    """Union of the top-``cutoff`` hits of every query of the configured strategy."""
    return union_at(ranked_blocks(reference, index, config), config.cutoff)


@dataclass
class CombinationStat:
    combination: frozenset
    applicable: int  # references that yield a query
    answered: int  # of those, queries returning at least one hit
    correct: int  # correct retrieved items counted by the active mode
    retrieved: int

    @property
    def precision(self) -> float | None:
        return self.correct / self.retrieved if self.retrieved else None


def combination_stats(references: Sequence[SegmentedReference], gold: GoldStandard, index: Index,
                      config: BlockingConfig | None = None, mode: str = "at1") -> list[CombinationStat]:
    """Per-combination retrieval precision on gold data.

    ``mode="at1"`` scores only the top hit of each query; ``mode="retrieved"``
    scores all hits up to the cutoff.
    """
    if mode not in ("at1", "retrieved"):
        raise ValueError(f"unknown precision mode {mode!r}")
    config = config or BlockingConfig()
    limit = 1 if mode == "at1" else config.cutoff
    stats = {combo: CombinationStat(combo, 0, 0, 0, 0) for combo in ALL_COMBINATIONS}
    # reference-major order lets the index reuse sub-clause results
    for ref in references:
        for combo in ALL_COMBINATIONS:
            q = combination_query(ref, combo, config)
            if q is None:
                continue
            st = stats[combo]
            st.applicable += 1
            hits = index.search(q, limit)
            if hits:
                st.answered += 1
            st.retrieved += len(hits)
            st.correct += sum(1 for h in hits if gold.is_match(ref.id, h.record_id))
    return list(stats.values())


def filter_combinations(references: Sequence[SegmentedReference], gold: GoldStandard, index: Index,
                        threshold: float = 0.6, config: BlockingConfig | None = None,
                        mode: str = "at1") -> frozenset:
    """Combinations whose gold precision reaches ``threshold``.

    Combinations that never yield a query or never retrieve anything are
    excluded and logged.
    """
    keep = set()
    for st in combination_stats(references, gold, index, config, mode):
        if st.precision is None:
            log.info("combination %s excluded: applicable to %d references, %d answered",
                     "+".join(combination_key(st.combination)), st.applicable, st.answered)
            continue
        if st.precision >= threshold:
            keep.add(st.combination)
    return frozenset(keep)
