"""Evaluation arithmetic: accuracies, age MAE, rounded-age variants, drug score.

Everything is computed in exact rationals and converted to float at the end,
so the months/years MAE relation holds exactly.
"""
from __future__ import annotations

import csv
import io
import json
import operator
from collections import defaultdict
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Optional, Sequence, TypeVar

from .corpus import EpicrisisRecord, group_key
from .drugs import token_set_ratio
from .model import LLM_UNPARSEABLE, AgeValue, Extraction
from .textproc import normalize_name

T = TypeVar("T")

OVERALL = "ALL"


def field_accuracy(
    pairs: Sequence[tuple[Optional[T], T]],
    predicate: Callable[[T, T], bool] = operator.eq,
) -> float:
    """Share of (prediction, gold) pairs judged correct; an absent prediction is wrong."""
    if not pairs:
        raise ValueError("accuracy is undefined for an empty set of pairs")
    hits = sum(1 for pred, gold in pairs if pred is not None and predicate(pred, gold))
    return float(Fraction(hits, len(pairs)))


def age_mae(pairs: Sequence[tuple[Optional[AgeValue], AgeValue]]) -> Fraction:
    """Mean absolute age error in years, exact. Absent predictions are skipped."""
    diffs = [abs(p.exact - g.exact) for p, g in pairs if p is not None]
    if not diffs:
        raise ValueError("MAE is undefined: no present predictions")
    return sum(diffs, Fraction(0)) / len(diffs)


def years_to_months(years) -> Fraction:
    """12 * years, exact. Floats are read by their shortest decimal repr (0.15 -> 3/20)."""
    if isinstance(years, float):
        years = Fraction(repr(years))
    return 12 * Fraction(years)


def round_age_years(age: AgeValue) -> int:
    return age.years + (1 if age.months >= 6 else 0)


def rounded_age_mae(pairs: Sequence[tuple[Optional[AgeValue], AgeValue]]) -> Fraction:
    diffs = [abs(round_age_years(p) - round_age_years(g)) for p, g in pairs if p is not None]
    if not diffs:
        raise ValueError("MAE is undefined: no present predictions")
    return Fraction(sum(diffs), len(diffs))


# -- drugs --------------------------------------------------------------------


@dataclass(frozen=True)
class DrugEvalInstance:
    gold: frozenset[str]
    predicted: frozenset[str]
    correct: frozenset[str]

    def __post_init__(self):
        # fuzzy judging may credit a gold name whose predicted spelling differs,
        # so only containment in the gold set is enforced
        if not self.correct <= self.gold:
            raise ValueError("correctly found names must be gold names")

    @classmethod
    def exact(cls, gold: Iterable[str], predicted: Iterable[str]) -> "DrugEvalInstance":
        g = frozenset(normalize_name(x) for x in gold if normalize_name(x))
        p = frozenset(normalize_name(x) for x in predicted if normalize_name(x))
        return cls(g, p, g & p)

    @classmethod
    def fuzzy(
        cls, gold: Iterable[str], predicted: Iterable[str], threshold: int = 80
    ) -> "DrugEvalInstance":
        """A gold name counts as found if some prediction scores >= threshold against it."""
        g = frozenset(normalize_name(x) for x in gold if normalize_name(x))
        p = frozenset(normalize_name(x) for x in predicted if normalize_name(x))
        found = frozenset(x for x in g if any(token_set_ratio(x, y) >= threshold for y in p))
        return cls(g, p, found)


def instance_score(inst: DrugEvalInstance, literal: bool = False) -> Fraction:
    """Per-record drug score.

    Default: (min/max of the set sizes + recall) / 2. With ``literal`` the
    size term is (min + recall) / max, halved, which caps a perfect
    extraction of k > 1 drugs below 1.
    """
    n_gold, n_pred = len(inst.gold), len(inst.predicted)
    if n_gold == 0:
        return Fraction(1) if n_pred == 0 else Fraction(0)
    if n_pred == 0:
        return Fraction(0)
    recall = Fraction(len(inst.correct), n_gold)
    lo, hi = min(n_gold, n_pred), max(n_gold, n_pred)
    if literal:
        return (lo + recall) / hi / 2
    return (Fraction(lo, hi) + recall) / 2


def adjusted_accuracy(instances: Sequence[DrugEvalInstance], literal: bool = False) -> float:
    if not instances:
        raise ValueError("adjusted accuracy is undefined for no instances")
    total = sum((instance_score(i, literal) for i in instances), Fraction(0))
    return float(total / len(instances))


# -- report -------------------------------------------------------------------

REPORT_FIELDS = (
    "group",
    "n",
    "age_accuracy",
    "age_mae_years",
    "age_mae_months",
    "rounded_age_accuracy",
    "rounded_age_mae_years",
    "sex_accuracy",
    "lesion_accuracy",
    "adjusted_accuracy",
    "age_absent",
    "sex_absent",
    "lesion_absent",
    "parse_failures",
)


@dataclass(frozen=True)
class EvalReport:
    group: str
    n: int
    age_accuracy: Optional[float]
    age_mae_years: Optional[float]
    age_mae_months: Optional[float]
    rounded_age_accuracy: Optional[float]
    rounded_age_mae_years: Optional[float]
    sex_accuracy: Optional[float]
    lesion_accuracy: Optional[float]
    adjusted_accuracy: Optional[float]
    age_absent: int
    sex_absent: int
    lesion_absent: int
    parse_failures: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def lesion_matches(pred: Optional[str], gold: Optional[str]) -> bool:
    """Lesion judged correct on normalized equality or stem containment."""
    if pred is None or gold is None:
        return pred is None and gold is None
    p, g = normalize_name(pred), normalize_name(gold)
    if not p or not g:
        return p == g
    return p == g or g in p or p in g


def _na(fn, *args) -> Optional[float]:
    try:
        return float(fn(*args))
    except ValueError:
        return None


def evaluate_group(
    group: str,
    items: Sequence[tuple[EpicrisisRecord, Extraction]],
    *,
    fuzzy_drugs: bool = False,
    threshold: int = 80,
    literal: bool = False,
) -> EvalReport:
    gold_items = [(rec.gold, ext) for rec, ext in items if rec.gold is not None]

    age_pairs = [(e.age, g.age) for g, e in gold_items if g.age is not None]
    rounded = [
        (round_age_years(p) if p is not None else None, round_age_years(g)) for p, g in age_pairs
    ]
    sex_pairs = [(e.sex, g.sex) for g, e in gold_items if g.sex is not None]
    # no gold lesion means "none present"; absent prediction is then correct
    lesion_hits = [
        lesion_matches(e.lesion, g.lesions[0] if g.lesions else None) for g, e in gold_items
    ]
    make = DrugEvalInstance.fuzzy if fuzzy_drugs else DrugEvalInstance.exact
    drug_kwargs = {"threshold": threshold} if fuzzy_drugs else {}
    drug_instances = [make(g.drugs, e.drugs, **drug_kwargs) for g, e in gold_items]

    mae = None
    try:
        mae = age_mae(age_pairs)
    except ValueError:
        pass
    return EvalReport(
        group=group,
        n=len(items),
        age_accuracy=_na(field_accuracy, age_pairs),
        age_mae_years=float(mae) if mae is not None else None,
        age_mae_months=float(12 * mae) if mae is not None else None,
        rounded_age_accuracy=_na(field_accuracy, rounded),
        rounded_age_mae_years=_na(rounded_age_mae, age_pairs),
        sex_accuracy=_na(field_accuracy, sex_pairs),
        lesion_accuracy=(
            float(Fraction(sum(lesion_hits), len(lesion_hits))) if lesion_hits else None
        ),
        adjusted_accuracy=_na(adjusted_accuracy, drug_instances, literal),
        age_absent=sum(1 for p, _ in age_pairs if p is None),
        sex_absent=sum(1 for p, _ in sex_pairs if p is None),
        lesion_absent=sum(1 for _, e in gold_items if e.lesion is None),
        parse_failures=sum(
            1 for _, e in items if any(d.code == LLM_UNPARSEABLE for d in e.diagnostics)
        ),
    )


def evaluate(
    records: Sequence[EpicrisisRecord],
    extractions: Sequence[Extraction],
    group_by: str = "doctor",
    **kwargs,
) -> list[EvalReport]:
    """One report per group (in order of first appearance) plus an overall row."""
    by_id = {r.id: r for r in records}
    unknown = [e.record_id for e in extractions if e.record_id not in by_id]
    if unknown:
        raise KeyError(f"extractions reference unknown record ids: {', '.join(unknown)}")
    groups: dict[str, list] = defaultdict(list)
    pairs = [(by_id[e.record_id], e) for e in extractions]
    for rec, ext in pairs:
        groups[group_key(rec, group_by)].append((rec, ext))
    reports = [evaluate_group(key, items, **kwargs) for key, items in groups.items()]
    reports.append(evaluate_group(OVERALL, pairs, **kwargs))
    return reports


def reports_to_json(reports: Sequence[EvalReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], ensure_ascii=False, indent=2) + "\n"


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    for rep in reports:
        row = []
        for name in REPORT_FIELDS:
            value = getattr(rep, name)
            row.append("" if value is None else f"{value:.6f}" if isinstance(value, float) else value)
        writer.writerow(row)
    return buf.getvalue()
