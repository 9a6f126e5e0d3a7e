"""String comparison kernel used by features and fuzzy retrieval.

All similarities are bounded in [0, 1].  Two empty inputs compare as 1.0:
an absent field on both sides reads as consistent, and missingness is
flagged separately by the feature extractor.
"""

from __future__ import annotations

from typing import Hashable, Mapping, Sequence


def _edit_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def levenshtein(a: str, b: str) -> int:
    """Number of single-character insertions, deletions and substitutions.

    Bit-parallel (Myers/Hyyro) over Python ints: one pass over the longer
    string, the shorter one is the bit pattern.
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    m = len(b)
    if m == 0:
        return len(a)
    peq: dict[str, int] = {}
    for i, c in enumerate(b):
        peq[c] = peq.get(c, 0) | (1 << i)
    full = (1 << m) - 1
    high = 1 << (m - 1)
    pv, mv, score = full, 0, m
    for c in a:
        eq = peq.get(c, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | ~(xh | pv)
        mh = pv & xh
        if ph & high:
            score += 1
        elif mh & high:
            score -= 1
        ph = (ph << 1) | 1
        mh <<= 1
        pv = (mh | ~(xv | ph)) & full
        mv = ph & xv & full
    return score


def bounded_levenshtein(a: str, b: str, k: int) -> int | None:
    """Edit distance if it is at most ``k``, else ``None``.

    Only the diagonal band of width ``2k + 1`` is filled.
    """
    la, lb = len(a), len(b)
    if abs(la - lb) > k:
        return None
    if a == b:
        return 0
    big = k + 1
    prev = [j if j <= k else big for j in range(lb + 1)]
    for i in range(1, la + 1):
        lo, hi = max(1, i - k), min(lb, i + k)
        cur = [big] * (lb + 1)
        cur[0] = i if i <= k else big
        ca = a[i - 1]
        row_min = cur[0]
        for j in range(lo, hi + 1):
            v = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != b[j - 1]))
            cur[j] = v if v <= k else big
            if cur[j] < row_min:
                row_min = cur[j]
        if row_min > k:
            return None
        prev = cur
    return prev[lb] if prev[lb] <= k else None


def levenshtein_similarity(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def token_levenshtein_similarity(a_tokens: Sequence[str], b_tokens: Sequence[str]) -> float:
    """Levenshtein similarity where every token is one symbol."""
    longest = max(len(a_tokens), len(b_tokens))
    if longest == 0:
        return 1.0
    return 1.0 - _edit_distance(list(a_tokens), list(b_tokens)) / longest


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def weighted_jaccard(a: Mapping[str, float], b) -> float:
    """Jaccard where each shared item counts with its weight from ``a``.

    ``a`` maps items to weights in [0, 1] (segmentation probabilities).
    """
    b = set(b)
    union = set(a) | b
    if not union:
        return 1.0
    return sum(w for item, w in a.items() if item in b) / len(union)


def longest_common_substring(a: str, b: str) -> int:
    """Length of the longest contiguous case-folded substring shared by both.

    Binary search on the length: a shared substring of length L implies
    one of every shorter length.
    """
    a, b = a.casefold(), b.casefold()
    if len(a) > len(b):
        a, b = b, a
    lo, hi = 0, len(a)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        seen = {a[i:i + mid] for i in range(len(a) - mid + 1)}
        if any(b[j:j + mid] in seen for j in range(len(b) - mid + 1)):
            lo = mid
        else:
            hi = mid - 1
    return lo


def bigrams(tokens: Sequence[str]) -> list[tuple[str, str]]:
    return list(zip(tokens, tokens[1:]))
