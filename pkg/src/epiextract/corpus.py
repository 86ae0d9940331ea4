"""Record ingestion (JSON Lines) and per-group text-length statistics."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .model import AgeValue, Language, Sex
from .textproc import normalize_name, split_sentences

UNKNOWN_GROUP = "UNKNOWN"
STATS_HEADER = (
    "group",
    "n",
    "sent_mean",
    "sent_std",
    "word_mean",
    "word_std",
    "first_sent_mean",
    "first_sent_std",
    "words_per_sentence",
)


class RecordError(ValueError):
    """Invalid input record; the message names the line and the field."""


@dataclass(frozen=True)
class GoldLabel:
    age: Optional[AgeValue] = None
    sex: Optional[Sex] = None
    lesions: tuple[str, ...] = ()
    drugs: frozenset[str] = frozenset()

    def __post_init__(self):
        if len(self.lesions) > 1:
            raise ValueError("at most one gold lesion term per record")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        if self.age is not None:
            out["age_years"] = self.age.years
            out["age_months"] = self.age.months
        if self.sex is not None:
            out["sex"] = self.sex.value
        out["lesions"] = list(self.lesions)
        out["drugs"] = sorted(self.drugs)
        return out


@dataclass(frozen=True)
class EpicrisisRecord:
    id: str
    doctor: str
    text: str
    language: Language = Language.PL
    icd10: Optional[str] = None
    gold: Optional[GoldLabel] = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"record {self.id}: text is empty")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id, "doctor": self.doctor}
        if self.icd10 is not None:
            out["icd10"] = self.icd10
        out["language"] = self.language.value
        out["text"] = self.text
        if self.gold is not None:
            out["gold"] = self.gold.to_dict()
        return out


def _field(obj: dict, name: str, lineno: int, kind=str, required=True):
    if name not in obj or obj[name] is None:
        if required:
            raise RecordError(f"line {lineno}: missing field {name!r}")
        return None
    value = obj[name]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise RecordError(f"line {lineno}: field {name!r} must be {kind.__name__}")
    return value


def _parse_gold(raw: Any, lineno: int) -> GoldLabel:
    if not isinstance(raw, dict):
        raise RecordError(f"line {lineno}: field 'gold' must be an object")
    years = _field(raw, "age_years", lineno, int, required=False)
    months = _field(raw, "age_months", lineno, int, required=False)
    age = None
    if years is not None:
        try:
            age = AgeValue(years, months or 0)
        except ValueError as exc:
            raise RecordError(f"line {lineno}: field 'gold.age_months': {exc}") from None
    elif months is not None:
        raise RecordError(f"line {lineno}: field 'gold.age_months' given without 'age_years'")

    sex = _field(raw, "sex", lineno, required=False)
    if sex is not None:
        try:
            sex = Sex(sex.strip().upper())
        except ValueError:
            raise RecordError(f"line {lineno}: field 'gold.sex' must be 'M' or 'F'") from None

    lesions = _field(raw, "lesions", lineno, list, required=False) or []
    drugs = _field(raw, "drugs", lineno, list, required=False) or []
    for name, items in (("lesions", lesions), ("drugs", drugs)):
        if not all(isinstance(x, str) for x in items):
            raise RecordError(f"line {lineno}: field 'gold.{name}' must be a list of strings")
    lesions = [normalize_name(x) for x in lesions if normalize_name(x)]
    if len(lesions) > 1:
        raise RecordError(f"line {lineno}: field 'gold.lesions' holds more than one term")
    drug_set = frozenset(normalize_name(x) for x in drugs if normalize_name(x))
    return GoldLabel(age=age, sex=sex, lesions=tuple(lesions), drugs=drug_set)


def parse_record(obj: Any, lineno: int = 1) -> EpicrisisRecord:
    if not isinstance(obj, dict):
        raise RecordError(f"line {lineno}: record must be a JSON object")
    rid = _field(obj, "id", lineno)
    if not rid.strip():
        raise RecordError(f"line {lineno}: field 'id' is empty")
    doctor = _field(obj, "doctor", lineno)
    text = _field(obj, "text", lineno)
    if not text.strip():
        raise RecordError(f"line {lineno}: field 'text' is empty")
    try:
        language = Language.parse(_field(obj, "language", lineno))
    except ValueError as exc:
        raise RecordError(f"line {lineno}: field 'language': {exc}") from None
    icd10 = _field(obj, "icd10", lineno, required=False)
    gold = _parse_gold(obj["gold"], lineno) if obj.get("gold") is not None else None
    return EpicrisisRecord(
        id=rid, doctor=doctor, text=text, language=language, icd10=icd10, gold=gold
    )


def load_records(path: str | Path) -> list[EpicrisisRecord]:
    """Load and validate a JSON Lines corpus. Blank lines are ignored."""
    records = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            record = parse_record(obj, lineno)
            if record.id in seen:
                raise RecordError(
                    f"line {lineno}: field 'id': duplicate id {record.id!r} "
                    f"(first seen on line {seen[record.id]})"
                )
            seen[record.id] = lineno
            records.append(record)
    return records


def write_records(records: Iterable[EpicrisisRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")


# -- statistics ---------------------------------------------------------------


@dataclass(frozen=True)
class DocCounts:
    sentences: int
    words: int
    first_sentence_words: int


def count_document(text: str, abbreviations=None) -> DocCounts:
    sents = split_sentences(text, abbreviations)
    n_words = sum(len(s.tokens) for s in sents)
    return DocCounts(len(sents), n_words, len(sents[0].tokens))


@dataclass(frozen=True)
class StatsRow:
    group: str
    n: int
    sent_mean: float
    sent_std: float
    word_mean: float
    word_std: float
    first_sent_mean: float
    first_sent_std: float
    words_per_sentence: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, name) for name in STATS_HEADER)


def _mean_pstd(values: Sequence[int]) -> tuple[float, float]:
    # exact rational moments, rounded once at the end
    n = len(values)
    mean = Fraction(sum(values), n)
    var = sum((Fraction(v) - mean) ** 2 for v in values) / n
    return float(mean), math.sqrt(var)


def stats_row(group: str, counts: Sequence[DocCounts]) -> StatsRow:
    """Summarize per-document counts. Standard deviations are population (ddof=0)."""
    if not counts:
        raise ValueError("cannot summarize an empty group")
    s_mean, s_std = _mean_pstd([c.sentences for c in counts])
    w_mean, w_std = _mean_pstd([c.words for c in counts])
    f_mean, f_std = _mean_pstd([c.first_sentence_words for c in counts])
    ratio = w_mean / s_mean if s_mean else 0.0
    return StatsRow(group, len(counts), s_mean, s_std, w_mean, w_std, f_mean, f_std, ratio)


def group_key(record: EpicrisisRecord, group_by: str) -> str:
    if group_by == "doctor":
        return record.doctor
    if group_by == "icd10":
        return record.icd10 or UNKNOWN_GROUP
    raise ValueError(f"unknown group key {group_by!r}")


def corpus_stats(
    records: Sequence[EpicrisisRecord], group_by: str = "doctor", abbreviations=None
) -> list[StatsRow]:
    """One StatsRow per group, groups in order of first appearance."""
    groups: dict[str, list[DocCounts]] = defaultdict(list)
    for rec in records:
        groups[group_key(rec, group_by)].append(count_document(rec.text, abbreviations))
    return [stats_row(key, counts) for key, counts in groups.items()]


def _fmt(value) -> str:
    return f"{value:.6f}" if isinstance(value, float) else str(value)


def stats_to_csv(rows: Iterable[StatsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(STATS_HEADER)
    for row in rows:
        writer.writerow([_fmt(v) for v in row.as_tuple()])
    return buf.getvalue()
