"""Tokenization, sentence segmentation and token normalization.

A *word* is a whitespace-delimited chunk whose normalized form is non-empty.
A *sentence* ends at '.', '!' or '?' followed by whitespace (or end of text),
unless the word carrying the terminator is a known abbreviation.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

_CHUNK_RE = re.compile(r"\S+")
_TERMINATOR_RE = re.compile(r"[.!?]+(?=\s|$)")
# categories stripped from token edges: punctuation, symbols, separators, controls
_EDGE_CATEGORIES = ("P", "S", "Z", "C")


@dataclass(frozen=True)
class Token:
    surface: str
    normalized: str
    start: int

    @property
    def end(self) -> int:
        return self.start + len(self.surface)


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    start: int
    end: int


def _is_edge(ch: str) -> bool:
    return unicodedata.category(ch)[0] in _EDGE_CATEGORIES


def _lower(ch: str) -> str:
    low = ch.lower()
    # a few code points expand when lowercased (e.g. U+0130); keep those as-is
    return low if len(low) == 1 else ch


def normalize_token(surface: str) -> str:
    """Lowercase and strip leading/trailing punctuation, keeping diacritics.

    >>> normalize_token("Wysypką,")
    'wysypką'
    """
    lo, hi = 0, len(surface)
    while lo < hi and _is_edge(surface[lo]):
        lo += 1
    while hi > lo and _is_edge(surface[hi - 1]):
        hi -= 1
    return "".join(_lower(c) for c in surface[lo:hi])


def fold_ascii(text: str) -> str:
    """Drop diacritics (ą -> a, ł -> l). Used only for optional drug matching."""
    text = text.replace("ł", "l").replace("Ł", "L")
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(c for c in decomposed if not unicodedata.combining(c))


def tokenize(text: str, offset: int = 0) -> list[Token]:
    """Split ``text`` on whitespace; drop chunks that are pure punctuation.

    Internal '/', '-' and '.' survive, so "4/12" and "5.5" stay single tokens.
    ``offset`` is added to every token start (for tokenizing a slice).
    """
    tokens = []
    for m in _CHUNK_RE.finditer(text):
        norm = normalize_token(m.group())
        if norm:
            tokens.append(Token(m.group(), norm, m.start() + offset))
    return tokens


DEFAULT_ABBREVIATIONS_FILE = "abbreviations.txt"


def read_list_file(path: str | Path) -> list[str]:
    """Read a one-entry-per-line UTF-8 file; blank lines and '#' comments are skipped."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                entries.append(line)
    return entries


def load_abbreviations(path: str | Path | None = None) -> frozenset[str]:
    if path is None:
        path = resources.files("epiextract") / "data" / DEFAULT_ABBREVIATIONS_FILE
    return frozenset(normalize_token(a).rstrip(".") for a in read_list_file(path))


DEFAULT_ABBREVIATIONS = load_abbreviations()


def _word_before(text: str, pos: int) -> str:
    start = pos
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:pos]


def split_sentences(
    text: str, abbreviations: Iterable[str] | None = None
) -> list[Sentence]:
    """Segment ``text`` into sentences.

    Raises ValueError for empty or whitespace-only text.
    """
    if not text.strip():
        raise ValueError("cannot segment empty text")
    abbrev = DEFAULT_ABBREVIATIONS if abbreviations is None else frozenset(abbreviations)

    cuts = []
    for m in _TERMINATOR_RE.finditer(text):
        word = normalize_token(_word_before(text, m.start()) + m.group())
        if word.rstrip(".") in abbrev and m.group() == ".":
            continue
        cuts.append(m.end())
    if not cuts or cuts[-1] < len(text):
        cuts.append(len(text))

    spans = []
    prev = 0
    for cut in cuts:
        chunk = text[prev:cut]
        if chunk.strip():
            lead = len(chunk) - len(chunk.lstrip())
            spans.append((prev + lead, prev + len(chunk.rstrip())))
        prev = cut

    # a span with no word (e.g. "--- .") is merged into its neighbour
    sentences: list[Sentence] = []
    pending_start = None
    for start, end in spans:
        if pending_start is not None:
            start, pending_start = pending_start, None
        toks = tuple(tokenize(text[start:end], offset=start))
        if not toks:
            if sentences:
                last = sentences[-1]
                sentences[-1] = Sentence(last.tokens, last.start, end)
            else:
                pending_start = start
            continue
        sentences.append(Sentence(toks, start, end))
    if pending_start is not None:
        # the whole text has no words
        sentences.append(Sentence((), pending_start, spans[-1][1]))
    return sentences


def words(text: str) -> list[Token]:
    """All tokens of a document, in order."""
    return tokenize(text)


def normalize_name(name: str) -> str:
    """Normalize a possibly multi-word name: each word normalized, single spaces."""
    return " ".join(n for n in (normalize_token(w) for w in name.split()) if n)
