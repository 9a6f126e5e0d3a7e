"""Feature vectors for (reference, record) candidate pairs.

Three groups, switchable for ablations:

* ``A`` compares reference segments with record fields,
* ``P`` carries segmentation probabilities (directly or as Jaccard weights),
* ``B`` compares only the raw reference string with the record.

A feature whose inputs are absent on either side takes ``MISSING`` (-1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .blocking import author_names, segment_numbers, segment_year, start_page
from .model import BibRecord, FeatureVector, SegmentedReference, SegmentKind
from .strsim import (
    bigrams,
    jaccard,
    levenshtein_similarity,
    longest_common_substring,
    token_levenshtein_similarity,
    weighted_jaccard,
)
from .textnorm import cologne_encode, digit_runs, extract_year, tokens

MISSING = -1.0
SCHEMA_NAME = "citematch-features"
SCHEMA_REVISION = 1
GROUPS = ("A", "P", "B")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    group: str
    description: str


SCHEMA: tuple[FeatureSpec, ...] = (
    FeatureSpec("author_lev_exact", "A", "best-match Levenshtein similarity of surnames, per record author"),
    FeatureSpec("author_lev_phonetic", "A", "same over Cologne phonetic codes"),
    FeatureSpec("author_jaccard", "A", "Jaccard of surname sets"),
    FeatureSpec("title_jaccard", "A", "Jaccard of title token sets"),
    FeatureSpec("title_lev_char", "A", "character Levenshtein similarity of normalized titles"),
    FeatureSpec("title_lev_token", "A", "token Levenshtein similarity of titles"),
    FeatureSpec("source_jaccard", "A", "Jaccard of source token sets"),
    FeatureSpec("source_lev_char", "A", "character Levenshtein similarity of normalized sources"),
    FeatureSpec("year_match", "A", "year segment equals record year"),
    FeatureSpec("pages_jaccard", "A", "Jaccard of page digit runs"),
    FeatureSpec("number_jaccard", "A", "Jaccard of number digit runs vs volume and issue"),
    FeatureSpec("first_author_probability", "P", "segmentation probability of the first surname"),
    FeatureSpec("author_weighted_jaccard", "P", "surname Jaccard weighted by segmentation probability"),
    FeatureSpec("title_weighted_jaccard", "P", "title Jaccard weighted by segmentation probability"),
    FeatureSpec("source_weighted_jaccard", "P", "source Jaccard weighted by segmentation probability"),
    FeatureSpec("year_probability", "P", "mean probability of the year segment"),
    FeatureSpec("pages_probability", "P", "mean probability of the page segment"),
    FeatureSpec("number_probability", "P", "mean probability of the number segment"),
    FeatureSpec("title_lcs_ratio", "B", "longest common substring of record title and raw string / title length"),
    FeatureSpec("source_abbrev_in_raw", "B", "record source abbreviation occurs in the raw string"),
    FeatureSpec("raw_year_match", "B", "year found in the raw string equals record year"),
    FeatureSpec("title_bigram_overlap", "B", "share of record title bigrams found in the raw string"),
)


def normalize_groups(groups: Iterable[str]) -> tuple[str, ...]:
    groups = set(groups)
    unknown = groups - set(GROUPS)
    if unknown or not groups:
        raise ValueError(f"feature groups must be a non-empty subset of {GROUPS}, got {sorted(groups)}")
    return tuple(g for g in GROUPS if g in groups)


def schema_for(groups: Iterable[str] = GROUPS) -> list[FeatureSpec]:
    groups = normalize_groups(groups)
    return [f for f in SCHEMA if f.group in groups]


def schema_version(groups: Iterable[str] = GROUPS) -> str:
    return f"{SCHEMA_NAME}/{SCHEMA_REVISION}:{'+'.join(normalize_groups(groups))}"


def schema_manifest(groups: Iterable[str] = GROUPS) -> dict:
    return {
        "schema_version": schema_version(groups),
        "missing": MISSING,
        "features": [{"index": i, "name": f.name, "group": f.group, "description": f.description}
                     for i, f in enumerate(schema_for(groups))],
    }


# -- helpers -------------------------------------------------------------------------

def _weights(toks, keep=None) -> dict[str, float]:
    """Normalized word -> max probability of the segment tokens it came from."""
    out: dict[str, float] = {}
    for tok in toks:
        for w in tokens(tok.text):
            if keep is not None and w not in keep:
                continue
            if tok.probability > out.get(w, -1.0):
                out[w] = tok.probability
    return out


def best_match_similarity(ref_names: Sequence[str], rec_names: Sequence[str], sim) -> float:
    """Greedy one-to-one assignment by descending similarity, averaged over ``rec_names``."""
    cells = sorted(
        ((sim(a, b), i, j) for i, a in enumerate(ref_names) for j, b in enumerate(rec_names)),
        key=lambda c: (-c[0], c[1], c[2]),
    )
    used_i: set[int] = set()
    used_j: set[int] = set()
    total = 0.0
    for s, i, j in cells:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        total += s
    return total / len(rec_names)


def _contains_run(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    n = len(needle)
    return any(list(haystack[i:i + n]) == list(needle) for i in range(len(haystack) - n + 1))


def _indicator(a, b) -> float:
    if a is None or b is None:
        return MISSING
    return 1.0 if a == b else 0.0


def _mean_probability(reference: SegmentedReference, kind: SegmentKind) -> float:
    p = reference.segment_probability(kind)
    return MISSING if p is None else p


# -- extraction ------------------------------------------------------------------------

def _group_a(ref: SegmentedReference, rec: BibRecord) -> list[float]:
    names = author_names(ref)
    surnames = [t for s in rec.surnames for t in tokens(s)]
    if names and surnames:
        lev_exact = best_match_similarity(names, surnames, levenshtein_similarity)
        ref_codes = [cologne_encode(n) for n in names]
        rec_codes = [cologne_encode(s) for s in surnames]
        lev_phon = best_match_similarity(ref_codes, rec_codes, levenshtein_similarity)
        author_j = jaccard(names, surnames)
    else:
        lev_exact = lev_phon = author_j = MISSING

    ref_title = tokens(ref.segment_text(SegmentKind.TITLE))
    rec_title = tokens(rec.title)
    if ref_title and rec_title:
        title_j = jaccard(ref_title, rec_title)
        title_c = levenshtein_similarity(" ".join(ref_title), " ".join(rec_title))
        title_t = token_levenshtein_similarity(ref_title, rec_title)
    else:
        title_j = title_c = title_t = MISSING

    ref_src = tokens(ref.segment_text(SegmentKind.SOURCE))
    rec_src = tokens(rec.source)
    if ref_src and rec_src:
        source_j = jaccard(ref_src, rec_src)
        source_c = levenshtein_similarity(" ".join(ref_src), " ".join(rec_src))
    else:
        source_j = source_c = MISSING

    year = _indicator(segment_year(ref), rec.year)

    ref_pages = digit_runs(ref.segment_text(SegmentKind.PAGE))
    rec_pages = digit_runs(rec.pages.start) + digit_runs(rec.pages.end) if rec.pages else []
    pages_j = jaccard(ref_pages, rec_pages) if ref_pages and rec_pages else MISSING

    ref_nums = segment_numbers(ref)
    rec_nums = digit_runs(rec.volume) + digit_runs(rec.issue)
    number_j = jaccard(ref_nums, rec_nums) if ref_nums and rec_nums else MISSING

    return [lev_exact, lev_phon, author_j, title_j, title_c, title_t,
            source_j, source_c, year, pages_j, number_j]


def _group_p(ref: SegmentedReference, rec: BibRecord) -> list[float]:
    author_toks = ref.tokens(SegmentKind.AUTHOR)
    names = author_names(ref)
    first_p = MISSING
    if names:
        for tok in author_toks:
            if names[0] in tokens(tok.text):
                first_p = tok.probability
                break
    surnames = [t for s in rec.surnames for t in tokens(s)]
    author_w = (weighted_jaccard(_weights(author_toks, set(names)), surnames)
                if names and surnames else MISSING)

    rec_title = tokens(rec.title)
    title_toks = ref.tokens(SegmentKind.TITLE)
    title_weights = _weights(title_toks)
    title_w = weighted_jaccard(title_weights, rec_title) if title_weights and rec_title else MISSING

    rec_src = tokens(rec.source)
    src_weights = _weights(ref.tokens(SegmentKind.SOURCE))
    source_w = weighted_jaccard(src_weights, rec_src) if src_weights and rec_src else MISSING

    return [first_p, author_w, title_w, source_w,
            _mean_probability(ref, SegmentKind.YEAR),
            _mean_probability(ref, SegmentKind.PAGE),
            _mean_probability(ref, SegmentKind.NUMBER)]


def _group_b(ref: SegmentedReference, rec: BibRecord) -> list[float]:
    raw_tokens = tokens(ref.raw)
    title_tokens = tokens(rec.title)
    if rec.title:
        lcs = longest_common_substring(rec.title, ref.raw) / len(rec.title)
    else:
        lcs = MISSING
    abbrev = tokens(rec.source_abbrev)
    abbrev_in = (1.0 if _contains_run(raw_tokens, abbrev) else 0.0) if abbrev else MISSING
    raw_year = ref.extracted_year or extract_year(ref.raw)
    year = _indicator(raw_year, rec.year)
    title_bigrams = set(bigrams(title_tokens))
    if title_bigrams:
        raw_bigrams = set(bigrams(raw_tokens))
        overlap = len(title_bigrams & raw_bigrams) / len(title_bigrams)
    else:
        overlap = MISSING
    return [lcs, abbrev_in, year, overlap]


_GROUP_FUNCS = {"A": _group_a, "P": _group_p, "B": _group_b}


def extract_features(reference: SegmentedReference, record: BibRecord,
                     groups: Iterable[str] = GROUPS) -> FeatureVector:
    """Feature vector of one pair; ``reference`` should be preprocessed."""
    groups = normalize_groups(groups)
    values: list[float] = []
    for g in groups:
        values += _GROUP_FUNCS[g](reference, record)
    names = tuple(f.name for f in schema_for(groups))
    return FeatureVector(tuple(float(v) for v in values), schema_version(groups), names)


def write_manifest(path, groups: Iterable[str] = GROUPS) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema_manifest(groups), fh, indent=2)
        fh.write("\n")
