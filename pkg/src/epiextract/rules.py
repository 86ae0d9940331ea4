"""Rule-based extraction of age, sex and skin lesions.

Age and sex are read from the opening sentence only: age from its first six
tokens, sex from Polish gender-inflected cue words anywhere in that sentence.
Skin lesions are found anywhere in the document by stem containment.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .corpus import EpicrisisRecord
from .drugs import DrugRegistry, extract_drugs
from .model import (
    AGE_NO_MATCH,
    EMPTY_TEXT,
    LESION_MULTIPLE,
    SEX_AMBIGUOUS,
    SEX_NO_CUE,
    AgeValue,
    Diagnostic,
    Extraction,
    Sex,
)
from .textproc import (
    Sentence,
    Token,
    normalize_token,
    read_list_file,
    split_sentences,
    tokenize,
)

AGE_WINDOW = 6
MAX_AGE_YEARS = 18

_INT_RE = re.compile(r"\d+")
_DECIMAL_RE = re.compile(r"(\d+)[.,](\d+)")
_FRACTION_RE = re.compile(r"(\d+)/12")
_CONNECTORS = frozenset({"i"})
_NEGATIVE_SIGNS = ("-", "−")

TokenLike = Union[Token, str]


def _norm(tok: TokenLike) -> str:
    return tok.normalized if isinstance(tok, Token) else tok


def _negative(tok: TokenLike) -> bool:
    return isinstance(tok, Token) and tok.surface.startswith(_NEGATIVE_SIGNS)


def _match_at(toks: Sequence[TokenLike], i: int) -> Optional[AgeValue]:
    head = _norm(toks[i])
    if _negative(toks[i]):
        return None
    if _INT_RE.fullmatch(head):
        years = int(head)
        j = i + 1
        if j < len(toks) and _norm(toks[j]) in _CONNECTORS:
            j += 1
        if j < len(toks) and not _negative(toks[j]):
            frac = _FRACTION_RE.fullmatch(_norm(toks[j]))
            if frac and int(frac.group(1)) < 12:
                return AgeValue(years, int(frac.group(1)))
        return AgeValue(years, 0)
    dec = _DECIMAL_RE.fullmatch(head)
    if dec:
        value = Decimal(f"{dec.group(1)}.{dec.group(2)}")
        years = int(value)
        months = int(((value - years) * 12).quantize(Decimal(1), rounding=ROUND_HALF_UP))
        if months == 12:
            years, months = years + 1, 0
        return AgeValue(years, months)
    return None


def parse_age_expression(
    tokens: Sequence[TokenLike], max_years: Optional[int] = None
) -> Optional[AgeValue]:
    """Return the first age expression in ``tokens``.

    Recognized, in priority order at each position:

    * ``INT [i] N/12`` with N < 12  -> INT years, N months
    * decimal ``5.5`` or ``5,5``     -> 5 years, round(0.5 * 12) months
    * bare ``INT``                   -> INT years

    Matches above ``max_years`` are skipped.
    """
    for i in range(len(tokens)):
        age = _match_at(tokens, i)
        if age is not None and (max_years is None or age.years <= max_years):
            return age
    return None


def _first_sentence(record: EpicrisisRecord, abbreviations) -> Optional[Sentence]:
    if not record.text.strip():
        return None
    return split_sentences(record.text, abbreviations)[0]


def extract_age(
    record: EpicrisisRecord,
    notes: Optional[list[Diagnostic]] = None,
    *,
    window: int = AGE_WINDOW,
    max_years: Optional[int] = MAX_AGE_YEARS,
    abbreviations=None,
) -> Optional[AgeValue]:
    notes = [] if notes is None else notes
    first = _first_sentence(record, abbreviations)
    if first is None:
        notes.append(Diagnostic(record.id, EMPTY_TEXT))
        return None
    age = parse_age_expression(first.tokens[:window], max_years=max_years)
    if age is None:
        notes.append(Diagnostic(record.id, AGE_NO_MATCH, f"no age in first {window} tokens"))
    return age


# -- sex ----------------------------------------------------------------------


@dataclass(frozen=True)
class GenderCueLexicon:
    entries: Mapping[str, Sex]

    def __post_init__(self):
        for form in self.entries:
            if not form or normalize_token(form) != form:
                raise ValueError(f"cue form {form!r} is not normalized")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "GenderCueLexicon":
        entries: dict[str, Sex] = {}
        for form, gender in pairs:
            form = normalize_token(form)
            try:
                sex = Sex(gender.strip().upper())
            except ValueError:
                raise ValueError(f"cue {form!r}: gender must be M or F, got {gender!r}") from None
            if entries.get(form, sex) is not sex:
                raise ValueError(f"cue {form!r} maps to both genders")
            entries[form] = sex
        return cls(entries)

    @classmethod
    def from_csv(cls, path: str | Path) -> "GenderCueLexicon":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        if rows and [c.strip().lower() for c in rows[0]] == ["form", "gender"]:
            rows = rows[1:]
        bad = [r for r in rows if len(r) != 2]
        if bad:
            raise ValueError(f"{path}: expected two columns form,gender; got {bad[0]!r}")
        return cls.from_pairs((r[0], r[1]) for r in rows)

    @classmethod
    def default(cls) -> "GenderCueLexicon":
        return cls.from_csv(resources.files("epiextract") / "data" / "gender_cues.csv")

    def get(self, form: str) -> Optional[Sex]:
        return self.entries.get(form)


def extract_sex(
    record: EpicrisisRecord,
    lexicon: GenderCueLexicon,
    notes: Optional[list[Diagnostic]] = None,
    *,
    abbreviations=None,
) -> Optional[Sex]:
    """Gender of the first cue word in the first sentence (exact token match)."""
    notes = [] if notes is None else notes
    first = _first_sentence(record, abbreviations)
    if first is None:
        notes.append(Diagnostic(record.id, EMPTY_TEXT))
        return None
    hits = [(t, lexicon.get(t.normalized)) for t in first.tokens if lexicon.get(t.normalized)]
    if not hits:
        notes.append(Diagnostic(record.id, SEX_NO_CUE))
        return None
    winner = hits[0][1]
    if any(sex is not winner for _, sex in hits):
        cues = ", ".join(f"{t.normalized}={sex.value}" for t, sex in hits)
        notes.append(Diagnostic(record.id, SEX_AMBIGUOUS, cues))
    return winner


# -- skin lesions -------------------------------------------------------------


@dataclass(frozen=True)
class LesionLexicon:
    stems: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.stems)) != len(self.stems):
            raise ValueError("duplicate lesion stems")
        for stem in self.stems:
            if not stem or stem != stem.lower() or stem != stem.strip():
                raise ValueError(f"invalid lesion stem {stem!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "LesionLexicon":
        stems: list[str] = []
        for line in read_list_file(path):
            stem = normalize_token(line)
            if stem and stem not in stems:
                stems.append(stem)
        return cls(tuple(stems))

    @classmethod
    def default(cls) -> "LesionLexicon":
        return cls.from_file(resources.files("epiextract") / "data" / "lesion_stems.txt")


def _stem_in(token: str, stems: Sequence[str]) -> Optional[str]:
    found = [(token.find(s), -len(s), s) for s in stems if s in token]
    return min(found)[2] if found else None


def extract_skin_lesion(
    record: EpicrisisRecord,
    lexicon: LesionLexicon,
    notes: Optional[list[Diagnostic]] = None,
) -> Optional[str]:
    """Stem of the first document token containing any lexicon stem."""
    notes = [] if notes is None else notes
    found: list[str] = []
    for tok in tokenize(record.text):
        stem = _stem_in(tok.normalized, lexicon.stems)
        if stem is not None and stem not in found:
            found.append(stem)
    if len(found) > 1:
        notes.append(Diagnostic(record.id, LESION_MULTIPLE, ", ".join(found)))
    return found[0] if found else None


# -- combined -----------------------------------------------------------------


@dataclass
class RuleExtractor:
    """Bundles the lexicons; ``extract`` runs all four rule-based extractors."""

    gender_cues: GenderCueLexicon
    lesions: LesionLexicon
    drugs: DrugRegistry
    threshold: int = 80
    drug_window: int = 1
    fold: bool = False
    abbreviations: Optional[frozenset[str]] = None
    method: str = field(default="rule")

    def extract(self, record: EpicrisisRecord) -> Extraction:
        notes: list[Diagnostic] = []
        age = extract_age(record, notes, abbreviations=self.abbreviations)
        sex = extract_sex(record, self.gender_cues, notes, abbreviations=self.abbreviations)
        lesion = extract_skin_lesion(record, self.lesions, notes)
        matches = extract_drugs(
            record, self.drugs, self.threshold, window=self.drug_window, fold=self.fold
        )
        return Extraction(
            record_id=record.id,
            method=self.method,
            age=age,
            sex=sex,
            lesion=lesion,
            drugs=[m.name for m in matches],
            diagnostics=notes,
        )
