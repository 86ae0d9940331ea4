"""Fuzzy drug-name recognition.

Every document token is scored against every registry name with a token-set
similarity built on the indel (insert/delete only) edit distance; pairs at or
above the threshold count as mentions.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .corpus import EpicrisisRecord
from .textproc import fold_ascii, normalize_name, read_list_file, tokenize

DEFAULT_THRESHOLD = 80


def lcs_length(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if ca == cb else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def indel_distance(a: str, b: str) -> int:
    return len(a) + len(b) - 2 * lcs_length(a, b)


def indel_ratio(a: str, b: str) -> int:
    """Similarity in [0, 100]: 100 * (1 - indel/(len(a)+len(b))), rounded half up.

    >>> indel_ratio("abcd", "abce")
    75
    """
    lensum = len(a) + len(b)
    if lensum == 0:
        return 100
    num = 100 * (lensum - indel_distance(a, b))
    # round half up on the exact rational num/lensum
    return (2 * num + lensum) // (2 * lensum)


def token_set_ratio(a: str, b: str) -> int:
    """Word-set similarity, insensitive to word order and repeated words.

    The shared words (sorted) form a common prefix ``t0``; each side's own
    words are appended to it, and the best pairwise indel ratio among the
    three strings wins. A side with no words at all scores 0 against a
    non-empty side.
    """
    sa, sb = set(a.split()), set(b.split())
    if not sa or not sb:
        return 100 if sa == sb else 0
    common = " ".join(sorted(sa & sb))
    t1 = " ".join(filter(None, [common, " ".join(sorted(sa - sb))]))
    t2 = " ".join(filter(None, [common, " ".join(sorted(sb - sa))]))
    return max(indel_ratio(common, t1), indel_ratio(common, t2), indel_ratio(t1, t2))


@dataclass(frozen=True)
class DrugEntry:
    name: str
    key: str  # normalized name, words separated by single spaces

    @property
    def words(self) -> frozenset[str]:
        return frozenset(self.key.split())


class DrugRegistry:
    """Immutable list of drug names, unique after normalization."""

    def __init__(self, names: Iterable[str]):
        entries = []
        seen: dict[str, str] = {}
        for name in names:
            key = normalize_name(name)
            if not key:
                raise ValueError(f"drug name {name!r} is empty after normalization")
            if key in seen:
                raise ValueError(f"drug names {seen[key]!r} and {name!r} collide after normalization")
            seen[key] = name
            entries.append(DrugEntry(name.strip(), key))
        self.entries: tuple[DrugEntry, ...] = tuple(entries)

    @classmethod
    def from_file(cls, path: str | Path) -> "DrugRegistry":
        return cls(read_list_file(path))

    @classmethod
    def sample(cls) -> "DrugRegistry":
        return cls.from_file(resources.files("epiextract") / "data" / "drugs_sample.txt")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class DrugMatch:
    name: str
    surface: str
    score: int
    start: int


MAX_WINDOW = 3


def extract_drugs(
    record: EpicrisisRecord,
    registry: DrugRegistry,
    threshold: int = DEFAULT_THRESHOLD,
    *,
    window: int = 1,
    fold: bool = False,
) -> list[DrugMatch]:
    """Registry drugs mentioned in ``record``, ordered by first mention.

    ``window > 1`` also scores runs of up to ``window`` consecutive tokens,
    for multi-word names. ``fold`` strips diacritics on both sides first.
    """
    if len(registry) == 0:
        raise ValueError("drug registry is empty")
    if not 0 < threshold <= 100:
        raise ValueError(f"threshold must be in (0, 100], got {threshold}")
    if not 1 <= window <= MAX_WINDOW:
        raise ValueError(f"window must be in [1, {MAX_WINDOW}], got {window}")
    prep = fold_ascii if fold else (lambda s: s)
    keys = [(e, prep(e.key)) for e in registry]
    toks = tokenize(record.text)

    best: dict[str, DrugMatch] = {}
    for i, tok in enumerate(toks):
        for n in range(1, window + 1):
            span = toks[i : i + n]
            if len(span) < n:
                break
            text = prep(" ".join(t.normalized for t in span))
            surface = record.text[span[0].start : span[-1].end]
            for entry, key in keys:
                score = token_set_ratio(text, key)
                if score < threshold:
                    continue
                cur: Optional[DrugMatch] = best.get(entry.name)
                if cur is None or score > cur.score:
                    best[entry.name] = DrugMatch(entry.name, surface, score, tok.start)
    return sorted(best.values(), key=lambda m: (m.start, m.name))
