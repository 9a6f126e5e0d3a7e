"""Domain types shared by every stage of the matching pipeline.

References arrive already segmented: each labeled segment is a list of
tokens and every token carries the segmenter's probability for its label.
Records are entries of the target bibliographic database.  All types are
frozen dataclasses; absent values are ``None`` (never ``""``).

The JSONL layouts read and written here are the on-disk exchange formats:

* references: ``{"id", "raw", "segments": {"author": [{"text", "probability"}, ...], ...}, "extracted_year"?}``
* records: ``{"id", "authors": [{"surname", "given"?}], "title", "source", "source_abbrev"?,
  "year"?, "volume"?, "issue"?, "pages"?: {"start", "end"?}}``
* gold: ``{"reference_id", "record_ids": [...]}``
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

_YEAR_RE = re.compile(r"^[0-9]{4}$")


class SegmentKind(str, Enum):
    """The six segment kinds used for blocking and features."""

    AUTHOR = "author"
    TITLE = "title"
    YEAR = "year"
    PAGE = "page"
    NUMBER = "number"
    SOURCE = "source"


SEGMENT_KINDS: tuple[SegmentKind, ...] = tuple(SegmentKind)

# Labels the segmenter may emit that are folded into NUMBER before use.
NATIVE_NUMBER_LABELS = ("volume", "issue")
KNOWN_LABELS = frozenset([k.value for k in SegmentKind] + list(NATIVE_NUMBER_LABELS))


class DataError(ValueError):
    """Malformed input data; carries the source line when read from a file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class SegmentToken:
    text: str
    probability: float

    def __post_init__(self):
        if not self.text or self.text != self.text.strip():
            raise DataError(f"segment token must be non-empty and stripped: {self.text!r}")
        p = float(self.probability)
        if not (0.0 <= p <= 1.0):
            raise DataError(f"token probability out of [0, 1]: {self.probability!r}")
        object.__setattr__(self, "probability", p)


@dataclass(frozen=True)
class SegmentedReference:
    id: str
    raw: str
    segments: Mapping[str, tuple[SegmentToken, ...]] = field(default_factory=dict)
    extracted_year: str | None = None

    def __post_init__(self):
        if not self.raw:
            raise DataError(f"reference {self.id!r} has an empty raw string")
        segs = {}
        for label, tokens in self.segments.items():
            label = str(getattr(label, "value", label)).lower()
            if label not in KNOWN_LABELS:
                raise DataError(f"reference {self.id!r}: unknown segment label {label!r}")
            segs[label] = tuple(tokens)
        object.__setattr__(self, "segments", segs)

    def tokens(self, kind: SegmentKind | str) -> tuple[SegmentToken, ...]:
        """Tokens of one segment, empty when the segment is absent."""
        return self.segments.get(getattr(kind, "value", kind), ())

    def has(self, kind: SegmentKind | str) -> bool:
        return bool(self.tokens(kind))

    def segment_text(self, kind: SegmentKind | str) -> str | None:
        toks = self.tokens(kind)
        return " ".join(t.text for t in toks) if toks else None

    def segment_probability(self, kind: SegmentKind | str) -> float | None:
        """Arithmetic mean of the token probabilities of a segment."""
        toks = self.tokens(kind)
        if not toks:
            return None
        return sum(t.probability for t in toks) / len(toks)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "id": self.id,
            "raw": self.raw,
            "segments": {
                label: [{"text": t.text, "probability": t.probability} for t in toks]
                for label, toks in self.segments.items()
            },
        }
        if self.extracted_year is not None:
            d["extracted_year"] = self.extracted_year
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SegmentedReference":
        try:
            segments = {
                label: tuple(SegmentToken(t["text"], t["probability"]) for t in toks)
                for label, toks in (d.get("segments") or {}).items()
            }
            return cls(id=str(d["id"]), raw=d["raw"], segments=segments,
                       extracted_year=d.get("extracted_year"))
        except KeyError as exc:
            raise DataError(f"missing key {exc.args[0]!r} in reference") from None


@dataclass(frozen=True)
class Author:
    surname: str
    given: str | None = None


@dataclass(frozen=True)
class Pages:
    start: str
    end: str | None = None


@dataclass(frozen=True)
class BibRecord:
    id: str
    title: str
    source: str
    authors: tuple[Author, ...] = ()
    source_abbrev: str | None = None
    year: str | None = None
    volume: str | None = None
    issue: str | None = None
    pages: Pages | None = None

    def __post_init__(self):
        object.__setattr__(self, "authors", tuple(self.authors))
        if self.year is not None and not _YEAR_RE.match(self.year):
            raise DataError(f"record {self.id!r}: year {self.year!r} is not 4 digits")

    @property
    def surnames(self) -> list[str]:
        return [a.surname for a in self.authors]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "id": self.id,
            "authors": [_drop_none({"surname": a.surname, "given": a.given}) for a in self.authors],
            "title": self.title,
            "source": self.source,
        }
        for key in ("source_abbrev", "year", "volume", "issue"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        if self.pages is not None:
            d["pages"] = _drop_none({"start": self.pages.start, "end": self.pages.end})
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "BibRecord":
        try:
            pages = d.get("pages")
            return cls(
                id=str(d["id"]),
                title=d["title"],
                source=d["source"],
                authors=tuple(Author(a["surname"], a.get("given")) for a in d.get("authors") or ()),
                source_abbrev=d.get("source_abbrev"),
                year=d.get("year"),
                volume=d.get("volume"),
                issue=d.get("issue"),
                pages=Pages(pages["start"], pages.get("end")) if pages else None,
            )
        except KeyError as exc:
            raise DataError(f"missing key {exc.args[0]!r} in record") from None


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


@dataclass
class FeatureVector:
    values: tuple[float, ...]
    schema_version: str
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) != len(self.names):
            raise ValueError("feature values and names differ in length")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("feature vector contains a non-finite value")


@dataclass
class CandidatePair:
    reference_id: str
    record_id: str
    features: FeatureVector | None = None
    gold_label: bool | None = None
    predicted_probability: float | None = None

    def __post_init__(self):
        p = self.predicted_probability
        if p is not None and not (0.0 <= p <= 1.0):
            raise ValueError(f"predicted probability out of [0, 1]: {p}")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"reference_id": self.reference_id, "record_id": self.record_id}
        if self.features is not None:
            d["features"] = list(self.features.values)
        if self.gold_label is not None:
            d["gold_label"] = self.gold_label
        if self.predicted_probability is not None:
            d["predicted_probability"] = self.predicted_probability
        return d


@dataclass
class GoldStandard:
    """reference_id -> every correct record id (duplicates included, may be empty)."""

    entries: dict[str, frozenset[str]] = field(default_factory=dict)

    def matches(self, reference_id: str) -> frozenset[str]:
        return self.entries.get(reference_id, frozenset())

    def is_match(self, reference_id: str, record_id: str) -> bool:
        return record_id in self.entries.get(reference_id, ())

    def matchable(self) -> list[str]:
        """Reference ids with at least one correct record."""
        return sorted(r for r, ids in self.entries.items() if ids)

    def __len__(self):
        return len(self.entries)


@dataclass
class ValidationReport:
    n_references: int
    n_records: int
    n_gold: int
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_corpus(references: Sequence[SegmentedReference],
                    records: Sequence[BibRecord],
                    gold: GoldStandard) -> ValidationReport:
    """Collect invariant violations of a loaded corpus without raising."""
    violations: list[str] = []
    ref_ids: set[str] = set()
    for ref in references:
        if ref.id in ref_ids:
            violations.append(f"duplicate reference id {ref.id!r}")
        ref_ids.add(ref.id)
        # tokens built through from_dict are validated already; re-check for hand-built ones
        for label, toks in ref.segments.items():
            for tok in toks:
                if not (0.0 <= tok.probability <= 1.0):
                    violations.append(f"reference {ref.id!r}: probability {tok.probability} out of range in {label}")
    rec_ids: set[str] = set()
    for rec in records:
        if rec.id in rec_ids:
            violations.append(f"duplicate record id {rec.id!r}")
        rec_ids.add(rec.id)
    for ref_id, ids in sorted(gold.entries.items()):
        if ref_id not in ref_ids:
            violations.append(f"gold entry for unknown reference {ref_id!r}")
        for rec_id in sorted(ids):
            if rec_id not in rec_ids:
                violations.append(f"dangling gold id {rec_id!r} for reference {ref_id!r}")
    return ValidationReport(len(references), len(records), len(gold.entries), violations)


# -- JSONL I/O ---------------------------------------------------------------

def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON: {exc.msg}", line=lineno) from None
            if not isinstance(obj, dict):
                raise DataError("expected a JSON object", line=lineno)
            yield lineno, obj


def write_jsonl(path: str | Path, rows: Iterable[Mapping[str, Any]]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def _load(path, parse):
    out = []
    for lineno, obj in iter_jsonl(path):
        try:
            out.append(parse(obj))
        except DataError as exc:
            raise DataError(str(exc), line=lineno) from None
    return out


def load_references(path: str | Path) -> list[SegmentedReference]:
    return _load(path, SegmentedReference.from_dict)


def load_records(path: str | Path) -> list[BibRecord]:
    return _load(path, BibRecord.from_dict)


def load_gold(path: str | Path) -> GoldStandard:
    entries: dict[str, frozenset[str]] = {}
    for lineno, obj in iter_jsonl(path):
        try:
            entries[str(obj["reference_id"])] = frozenset(str(r) for r in obj["record_ids"])
        except KeyError as exc:
            raise DataError(f"missing key {exc.args[0]!r} in gold entry", line=lineno) from None
    return GoldStandard(entries)


def save_references(path, references: Iterable[SegmentedReference]) -> int:
    return write_jsonl(path, (r.to_dict() for r in references))


def save_records(path, records: Iterable[BibRecord]) -> int:
    return write_jsonl(path, (r.to_dict() for r in records))


def save_gold(path, gold: GoldStandard) -> int:
    return write_jsonl(path, ({"reference_id": ref_id, "record_ids": sorted(ids)}
                              for ref_id, ids in sorted(gold.entries.items())))
