"""Convert a gold-standard corpus from delimited/tagged files to citematch JSONL.

Expected input directory (file names are matched case-insensitively by stem):

``records.{csv,tsv}``
    one bibliographic record per row.  Column names are looked up through
    ``RECORD_COLUMNS``; authors are ``;``-separated ``Surname, Given`` and
    pages are ``start-end``.
``references.{jsonl,json,csv,tsv}``
    one reference per row with an id and the raw string.  Segments come either
    from a ``segments`` object (label -> list of ``{"text", "probability"}``)
    or from an inline-tagged string such as
    ``<author>Müller, H.</author> (<year>2001</year>)``.  Tokens without a
    probability get 1.0.
``gold.{csv,tsv,jsonl}``
    reference id and matching record id, one pair per row; a reference with
    no match may appear with an empty record id.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Iterable, Iterator

from .model import (
    Author,
    BibRecord,
    DataError,
    GoldStandard,
    Pages,
    SegmentedReference,
    SegmentToken,
    save_gold,
    save_records,
    save_references,
)

RECORD_COLUMNS = {
    "id": ("id", "record_id", "docid", "doc_id"),
    "title": ("title",),
    "source": ("source", "journal", "container", "source_title"),
    "authors": ("authors", "author", "creators"),
    "source_abbrev": ("source_abbrev", "journal_abbrev", "abbreviation"),
    "year": ("year", "date", "publication_year"),
    "volume": ("volume",),
    "issue": ("issue", "number"),
    "pages": ("pages", "page"),
}
REFERENCE_COLUMNS = {
    "id": ("id", "reference_id", "ref_id"),
    "raw": ("raw", "reference", "ref_text", "reference_string", "text"),
    "tagged": ("tagged", "segmented", "annotated"),
}
GOLD_COLUMNS = {
    "reference_id": ("reference_id", "ref_id", "reference"),
    "record_id": ("record_id", "match", "docid", "doc_id", "matched_id"),
}

# inline tags of segmenter output -> segment labels; unknown tags are dropped
TAG_LABELS = {
    "author": "author", "surname": "author", "given-names": "author", "editor": "author",
    "title": "title", "source": "source", "year": "year",
    "volume": "volume", "issue": "issue",
    "fpage": "page", "lpage": "page", "page": "page",
}

_TAG_RE = re.compile(r"<(/?)([A-Za-z-]+)[^>]*>")
_YEAR_RE = re.compile(r"[0-9]{4}")


def _find(directory: Path, stem: str, suffixes: Iterable[str]) -> Path | None:
    for path in sorted(directory.iterdir()):
        if path.stem.lower() == stem and path.suffix.lower() in suffixes:
            return path
    return None


def _rows(path: Path) -> Iterator[tuple[int, dict]]:
    suffix = path.suffix.lower()
    if suffix in (".csv", ".tsv"):
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh, delimiter="\t" if suffix == ".tsv" else ",")
            for i, row in enumerate(reader, 2):
                yield i, {(k or "").strip().lower(): (v or "").strip() for k, v in row.items()}
    elif suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        items = data.items() if isinstance(data, dict) else enumerate(data, 1)
        for key, obj in items:
            if isinstance(data, dict) and isinstance(obj, dict):
                obj = {"id": key, **obj}
            yield (key if isinstance(key, int) else 0), obj
    else:
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh, 1):
                if line.strip():
                    yield i, json.loads(line)


def _get(row: dict, aliases: Iterable[str]) -> str | None:
    for a in aliases:
        v = row.get(a)
        if v not in (None, ""):
            return v if not isinstance(v, str) else v.strip()
    return None


def parse_authors(text: str | None) -> tuple[Author, ...]:
    out = []
    for part in (text or "").split(";"):
        part = part.strip()
        if not part:
            continue
        surname, _, given = part.partition(",")
        out.append(Author(surname.strip(), given.strip() or None))
    return tuple(out)


def parse_pages(text: str | None) -> Pages | None:
    if not text:
        return None
    parts = re.split(r"\s*[-–]\s*", text.strip(), maxsplit=1)
    end = parts[1] if len(parts) > 1 and parts[1] else None
    return Pages(parts[0], end)


def record_from_row(row: dict) -> BibRecord:
    rid = _get(row, RECORD_COLUMNS["id"])
    if rid is None:
        raise DataError("record without id")
    year = _get(row, RECORD_COLUMNS["year"])
    if year is not None:
        m = _YEAR_RE.search(str(year))
        year = m.group(0) if m else None
    authors = row.get("authors")
    if isinstance(authors, list):
        authors = tuple(Author(a["surname"], a.get("given")) if isinstance(a, dict) else parse_authors(a)[0]
                        for a in authors)
    else:
        authors = parse_authors(_get(row, RECORD_COLUMNS["authors"]))
    return BibRecord(
        id=str(rid),
        title=_get(row, RECORD_COLUMNS["title"]) or "",
        source=_get(row, RECORD_COLUMNS["source"]) or "",
        authors=authors,
        source_abbrev=_get(row, RECORD_COLUMNS["source_abbrev"]),
        year=year,
        volume=_get(row, RECORD_COLUMNS["volume"]),
        issue=_get(row, RECORD_COLUMNS["issue"]),
        pages=parse_pages(_get(row, RECORD_COLUMNS["pages"])),
    )


def parse_tagged(tagged: str) -> tuple[str, dict[str, tuple[SegmentToken, ...]]]:
    """Raw string and segments of an inline-tagged reference.

    Text inside a known tag is assigned to its label (innermost known tag
    wins); all text, tagged or not, forms the raw string.
    """
    raw_parts: list[str] = []
    segments: dict[str, list[SegmentToken]] = {}
    stack: list[str] = []
    pos = 0

    def emit(text: str) -> None:
        raw_parts.append(text)
        label = next((TAG_LABELS[t] for t in reversed(stack) if t in TAG_LABELS), None)
        if label:
            for word in text.split():
                segments.setdefault(label, []).append(SegmentToken(word, 1.0))

    for m in _TAG_RE.finditer(tagged):
        emit(tagged[pos:m.start()])
        closing, name = m.group(1), m.group(2).lower()
        if closing:
            if name in stack:
                del stack[len(stack) - 1 - stack[::-1].index(name)]
        else:
            stack.append(name)
        pos = m.end()
    emit(tagged[pos:])
    raw = re.sub(r"\s+", " ", "".join(raw_parts)).strip()
    return raw, {k: tuple(v) for k, v in segments.items()}


def reference_from_row(row: dict) -> SegmentedReference:
    rid = _get(row, REFERENCE_COLUMNS["id"])
    if rid is None:
        raise DataError("reference without id")
    if isinstance(row.get("segments"), dict):
        return SegmentedReference.from_dict({"id": str(rid), "raw": _get(row, REFERENCE_COLUMNS["raw"]),
                                             "segments": row["segments"]})
    tagged = _get(row, REFERENCE_COLUMNS["tagged"])
    if tagged is not None:
        raw, segments = parse_tagged(tagged)
        return SegmentedReference(str(rid), _get(row, REFERENCE_COLUMNS["raw"]) or raw, segments)
    raw = _get(row, REFERENCE_COLUMNS["raw"])
    if raw is None:
        raise DataError(f"reference {rid!r} has neither raw text nor segments")
    return SegmentedReference(str(rid), raw, {})


def _convert_rows(path: Path, parse):
    out = []
    for lineno, row in _rows(path):
        try:
            out.append(parse(row))
        except (DataError, KeyError, TypeError) as exc:
            raise DataError(f"{path.name}: {exc}", line=lineno or None) from None
    return out


def load_gold_rows(path: Path, reference_ids: Iterable[str] = ()) -> GoldStandard:
    entries: dict[str, set[str]] = {r: set() for r in reference_ids}
    for lineno, row in _rows(path):
        ref = _get(row, GOLD_COLUMNS["reference_id"])
        if ref is None:
            raise DataError(f"{path.name}: gold row without reference id", line=lineno or None)
        ids = row.get("record_ids")
        if isinstance(ids, list):
            entries.setdefault(str(ref), set()).update(map(str, ids))
            continue
        rec = _get(row, GOLD_COLUMNS["record_id"])
        entries.setdefault(str(ref), set())
        if rec is not None:
            entries[str(ref)].add(str(rec))
    return GoldStandard({k: frozenset(v) for k, v in entries.items()})


def convert_directory(src: str | Path, dest: str | Path) -> dict[str, int]:
    """Write records.jsonl, references.jsonl and gold.jsonl into ``dest``."""
    src, dest = Path(src), Path(dest)
    rec_path = _find(src, "records", (".csv", ".tsv", ".jsonl", ".json"))
    ref_path = _find(src, "references", (".csv", ".tsv", ".jsonl", ".json"))
    gold_path = _find(src, "gold", (".csv", ".tsv", ".jsonl", ".json"))
    missing = [n for n, p in (("records", rec_path), ("references", ref_path), ("gold", gold_path)) if p is None]
    if missing:
        raise DataError(f"{src}: no {', '.join(missing)} file found")
    records = _convert_rows(rec_path, record_from_row)
    references = _convert_rows(ref_path, reference_from_row)
    gold = load_gold_rows(gold_path, [r.id for r in references])
    dest.mkdir(parents=True, exist_ok=True)
    return {
        "records": save_records(dest / "records.jsonl", records),
        "references": save_references(dest / "references.jsonl", references),
        "gold": save_gold(dest / "gold.jsonl", gold),
    }
