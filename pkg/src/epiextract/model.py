"""Value types shared by the extractors, the metrics and the CLI."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional


class Sex(str, enum.Enum):
    M = "M"
    F = "F"


class Language(str, enum.Enum):
    PL = "pl"
    EN = "en"

    @classmethod
    def parse(cls, value: str) -> "Language":
        try:
            return cls(value.strip().lower())
        except (ValueError, AttributeError):
            raise ValueError(f"unsupported language tag {value!r} (expected 'pl' or 'en')") from None


@dataclass(frozen=True, order=True)
class AgeValue:
    """Age with month resolution."""

    years: int
    months: int = 0

    def __post_init__(self):
        if self.years < 0:
            raise ValueError(f"negative age: {self.years}")
        if not 0 <= self.months <= 11:
            raise ValueError(f"months out of range: {self.months}")

    @property
    def exact(self) -> Fraction:
        return self.years + Fraction(self.months, 12)

    @property
    def fractional(self) -> float:
        return float(self.exact)

    def to_dict(self) -> dict[str, int]:
        return {"years": self.years, "months": self.months}

    def __str__(self):
        return f"{self.years} {self.months}/12" if self.months else str(self.years)


@dataclass(frozen=True)
class Diagnostic:
    record_id: str
    code: str
    detail: str = ""

    def to_dict(self) -> dict[str, str]:
        return {"record_id": self.record_id, "code": self.code, "detail": self.detail}


# stable diagnostic codes
AGE_NO_MATCH = "age.no_match"
EMPTY_TEXT = "text.empty"
SEX_NO_CUE = "sex.no_cue"
SEX_AMBIGUOUS = "sex.ambiguous"
SEX_UNRECOGNIZED = "sex.unrecognized"
LESION_MULTIPLE = "lesion.multiple"
AGE_UNPARSED = "age.unparsed"
LLM_PARTIAL = "llm.partial"
LLM_UNPARSEABLE = "llm.unparseable"
LLM_ERROR = "llm.error"


@dataclass
class Extraction:
    record_id: str
    method: str
    age: Optional[AgeValue] = None
    sex: Optional[Sex] = None
    lesion: Optional[str] = None
    drugs: list[str] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.drugs)) != len(self.drugs):
            raise ValueError(f"duplicate drug names in extraction for {self.record_id}")

    def note(self, code: str, detail: str = "") -> None:
        self.diagnostics.append(Diagnostic(self.record_id, code, detail))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.record_id,
            "method": self.method,
            "age": self.age.to_dict() if self.age else None,
            "sex": self.sex.value if self.sex else None,
            "lesion": self.lesion,
            "drugs": list(self.drugs),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Extraction":
        age = data.get("age")
        sex = data.get("sex")
        return cls(
            record_id=data["id"],
            method=data.get("method", ""),
            age=AgeValue(age["years"], age.get("months", 0)) if age else None,
            sex=Sex(sex) if sex else None,
            lesion=data.get("lesion"),
            drugs=list(data.get("drugs") or []),
            diagnostics=[
                Diagnostic(d["record_id"], d["code"], d.get("detail", ""))
                for d in data.get("diagnostics") or []
            ],
        )
