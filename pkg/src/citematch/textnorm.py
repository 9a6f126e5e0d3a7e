"""Text normalization, Cologne phonetic codes, year extraction, number merge."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, replace
from typing import Iterable

from .model import NATIVE_NUMBER_LABELS, SegmentedReference, SegmentKind

STRIP_CHARS = ".,;:!?()[]{}\"'/\\-"
_STRIP_TABLE = str.maketrans({c: " " for c in STRIP_CHARS})

DEFAULT_STOPWORDS = frozenset(
    ["der", "die", "das", "und", "the", "of", "and", "in", "a", "für",
     "von", "zur", "zum", "on", "for"]
)
YEAR_MIN = 1400
YEAR_MAX = 2099


@dataclass(frozen=True)
class NormalizedText:
    tokens: tuple[str, ...]
    original: str


def normalize(text: str, stopwords: Iterable[str] | None = None) -> NormalizedText:
    """Lowercase, replace strip-set punctuation by spaces and split.

    Stop words are dropped only when ``stopwords`` is given.
    """
    tokens = text.lower().translate(_STRIP_TABLE).split()
    if stopwords is not None:
        stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
        tokens = [t for t in tokens if t not in stop]
    return NormalizedText(tuple(tokens), text)


def tokens(text: str | None, stopwords: Iterable[str] | None = None) -> list[str]:
    if not text:
        return []
    return list(normalize(text, stopwords).tokens)


# -- Cologne phonetics ----------------------------------------------------------

_FOLD = {"ä": "a", "ö": "o", "ü": "u", "ß": "ss"}


def _fold_letters(word: str) -> str:
    word = "".join(_FOLD.get(c, c) for c in word.lower())
    # remaining accents: é -> e etc.
    word = unicodedata.normalize("NFKD", word)
    return "".join(c for c in word if "a" <= c <= "z")


def _cologne_digit(prev: str, c: str, nxt: str, at_start: bool) -> str:
    if c in "aeijouy":
        return "0"
    if c == "h":
        return ""
    if c == "b":
        return "1"
    if c == "p":
        return "3" if nxt == "h" else "1"
    if c in "dt":
        return "8" if nxt and nxt in "csz" else "2"
    if c in "fvw":
        return "3"
    if c in "gkq":
        return "4"
    if c == "c":
        if at_start:
            return "4" if nxt and nxt in "ahkloqrux" else "8"
        if prev in ("s", "z"):
            return "8"
        return "4" if nxt and nxt in "ahkoqux" else "8"
    if c == "x":
        return "8" if prev in ("c", "k", "q") else "48"
    if c == "l":
        return "5"
    if c in "mn":
        return "6"
    if c == "r":
        return "7"
    if c in "sz":
        return "8"
    return ""


def cologne_encode(word: str) -> str:
    """Cologne phonetic code of ``word`` (Postel's table).

    Non-letters are ignored; a word without letters yields ``""``.
    """
    letters = _fold_letters(word)
    raw = []
    for i, c in enumerate(letters):
        prev = letters[i - 1] if i > 0 else ""
        nxt = letters[i + 1] if i + 1 < len(letters) else ""
        raw.append(_cologne_digit(prev, c, nxt, i == 0))
    digits = "".join(raw)
    collapsed = []
    for d in digits:
        if not collapsed or collapsed[-1] != d:
            collapsed.append(d)
    if not collapsed:
        return ""
    return collapsed[0] + "".join(d for d in collapsed[1:] if d != "0")


# -- years ----------------------------------------------------------------------

# a 4-digit run not glued to other digits, optionally followed by one letter (1989b)
_YEAR_CANDIDATE = re.compile(r"(?<![0-9])([0-9]{4})(?:[a-z])?(?![0-9])", re.IGNORECASE)
_RANGE_AFTER = re.compile(r"\s*[-–]\s*[0-9]")
_RANGE_BEFORE = re.compile(r"[0-9]\s*[-–]\s*$")


def extract_year(raw: str | None, year_min: int = YEAR_MIN, year_max: int = YEAR_MAX) -> str | None:
    """First plausible publication year in ``raw``.

    Skips 4-digit runs that belong to a page range such as ``1123-1144``.
    """
    if not raw:
        return None
    for m in _YEAR_CANDIDATE.finditer(raw):
        start = m.start(1)
        if _RANGE_AFTER.match(raw, m.end()):
            continue
        if _RANGE_BEFORE.search(raw[max(0, start - 4):start]):
            continue
        if year_min <= int(m.group(1)) <= year_max:
            return m.group(1)
    return None


def preprocess_reference(reference: SegmentedReference, year_min: int = YEAR_MIN,
                         year_max: int = YEAR_MAX) -> SegmentedReference:
    """Apply the volume/issue merge and raw-string year extraction."""
    merged = merge_number_segment(reference)
    return replace(merged, extracted_year=extract_year(merged.raw, year_min, year_max))


def merge_number_segment(reference: SegmentedReference) -> SegmentedReference:
    """Fold ``volume`` and ``issue`` tokens into one ``number`` segment.

    Token order is volume, issue, then any tokens already labeled ``number``.
    """
    segs = dict(reference.segments)
    parts = [segs.pop(label, ()) for label in NATIVE_NUMBER_LABELS]
    parts.append(segs.pop(SegmentKind.NUMBER.value, ()))
    number = tuple(tok for part in parts for tok in part)
    if number:
        segs[SegmentKind.NUMBER.value] = number
    return replace(reference, segments=segs)


_DIGITS = re.compile(r"[0-9]+")


def digit_runs(text: str | None) -> list[str]:
    """Maximal digit runs with leading zeros removed (``"007"`` -> ``"7"``)."""
    if not text:
        return []
    return [d.lstrip("0") or "0" for d in _DIGITS.findall(text)]
