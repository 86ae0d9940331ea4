import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epiextract.corpus import (
    STATS_HEADER,
    DocCounts,
    EpicrisisRecord,
    RecordError,
    corpus_stats,
    count_document,
    load_records,
    parse_record,
    stats_row,
    stats_to_csv,
)
from epiextract.model import AgeValue, Language, Sex


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return path


def test_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert load_records(path) == []


def test_minimal_record(tmp_path):
    path = write_jsonl(
        tmp_path / "one.jsonl",
        [{"id": "r1", "doctor": "1", "language": "pl", "text": "Pacjentka lat 5."}],
    )
    (rec,) = load_records(path)
    assert rec.id == "r1" and rec.language is Language.PL and rec.gold is None and rec.icd10 is None


def test_duplicate_id_names_both_lines(tmp_path):
    row = {"id": "r1", "doctor": "1", "language": "pl", "text": "Tekst."}
    path = write_jsonl(tmp_path / "dup.jsonl", [row, {**row, "text": "Inny."}, row])
    with pytest.raises(RecordError, match=r"line 2.*'id'.*line 1"):
        load_records(path)


@pytest.mark.parametrize(
    "row, field",
    [
        ({"doctor": "1", "language": "pl", "text": "x"}, "id"),
        ({"id": "a", "doctor": "1", "language": "de", "text": "x"}, "language"),
        ({"id": "a", "doctor": "1", "language": "pl", "text": "   "}, "text"),
        ({"id": "a", "doctor": 1, "language": "pl", "text": "x"}, "doctor"),
        ({"id": "a", "doctor": "1", "language": "pl", "text": "x", "gold": {"sex": "X"}}, "gold.sex"),
        ({"id": "a", "doctor": "1", "language": "pl", "text": "x", "gold": {"age_years": 3, "age_months": 12}}, "gold.age_months"),
        ({"id": "a", "doctor": "1", "language": "pl", "text": "x", "gold": {"lesions": ["a", "b"]}}, "gold.lesions"),
    ],
)
def test_malformed_line_names_line_and_field(tmp_path, row, field):
    good = {"id": "ok", "doctor": "1", "language": "pl", "text": "x"}
    path = write_jsonl(tmp_path / "bad.jsonl", [good, row])
    with pytest.raises(RecordError) as exc:
        load_records(path)
    assert "line 2" in str(exc.value) and field in str(exc.value)


def test_invalid_json_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a"\n', encoding="utf-8")
    with pytest.raises(RecordError, match="line 1"):
        load_records(path)


def test_gold_parsing_normalizes_drugs():
    rec = parse_record(
        {
            "id": "a",
            "doctor": "2",
            "language": "PL",
            "text": "x",
            "gold": {"age_years": 5, "age_months": 4, "sex": "f", "lesions": ["Wysypk"], "drugs": ["Zyrtec", "zyrtec "]},
        }
    )
    assert rec.gold.age == AgeValue(5, 4)
    assert rec.gold.sex is Sex.F
    assert rec.gold.lesions == ("wysypk",)
    assert rec.gold.drugs == {"zyrtec"}


def test_bundled_corpus_loads(corpus):
    assert len(corpus) == 20
    assert all(r.gold is not None for r in corpus)


# -- statistics -------------------------------------------------------------------


def test_one_record_hand_counts(make_record):
    # hand count: "Ala ma kota." = 3 words, "Kot bardzo długo śpi dzisiaj." = 5 words
    rec = make_record("Ala ma kota. Kot bardzo długo śpi dzisiaj.")
    assert count_document(rec.text) == DocCounts(2, 8, 3)
    (row,) = corpus_stats([rec])
    assert (row.n, row.sent_mean, row.word_mean, row.first_sent_mean) == (1, 2.0, 8.0, 3.0)
    assert row.words_per_sentence == 4.0
    assert (row.sent_std, row.word_std, row.first_sent_std) == (0.0, 0.0, 0.0)


def test_identical_records_zero_std(make_record):
    recs = [make_record("Ala ma kota. Kot śpi.", rid=f"r{i}") for i in range(5)]
    (row,) = corpus_stats(recs)
    assert row.sent_std == row.word_std == row.first_sent_std == 0.0


def test_icd10_grouping_unknown_bucket(make_record):
    recs = [
        make_record("A b.", rid="a", icd10="J45.0"),
        make_record("A b.", rid="b", icd10="L20.8"),
        make_record("A b.", rid="c"),
    ]
    assert [r.group for r in corpus_stats(recs, "icd10")] == ["J45.0", "L20.8", "UNKNOWN"]


def test_empty_corpus_empty_table():
    assert corpus_stats([]) == []
    assert stats_to_csv([]) == ",".join(STATS_HEADER) + "\n"


@pytest.mark.parametrize(
    "sent_mean, word_mean, quoted",
    [(Fraction("8.55"), Fraction("81.40"), 9.5), (Fraction("14.91"), Fraction("146.07"), 9.8), (Fraction("17.73"), Fraction("258.56"), 14.6)],
)
def test_words_per_sentence_matches_reported_ratio(sent_mean, word_mean, quoted):
    # 100 synthetic documents whose totals give exactly the reported means
    n = 100
    s_total, w_total = int(sent_mean * n), int(word_mean * n)
    counts = [
        DocCounts(s_total // n + (i < s_total % n), w_total // n + (i < w_total % n), 1)
        for i in range(n)
    ]
    row = stats_row("d", counts)
    assert row.sent_mean == float(sent_mean) and row.word_mean == float(word_mean)
    assert abs(row.words_per_sentence - quoted) <= 0.05


def _brute_stats(values):
    n = len(values)
    mean = Fraction(sum(values), n)
    var = sum((v - mean) ** 2 for v in values) / n
    return float(mean), math.sqrt(var)


_doc = st.lists(st.integers(min_value=1, max_value=6), min_size=1, max_size=5).map(
    lambda lens: " ".join(" ".join(["w"] * k) + "." for k in lens)
)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("123"), _doc), min_size=1, max_size=50))
def test_stats_match_brute_force(docs):
    recs = [EpicrisisRecord(id=str(i), doctor=d, text=t) for i, (d, t) in enumerate(docs)]
    rows = corpus_stats(recs)
    assert sum(r.n for r in rows) == len(recs)
    for row in rows:
        texts = [t for d, t in docs if d == row.group]
        # independent counts: sentences end in ".", words are "w"
        sents = [t.count(".") for t in texts]
        words = [t.count("w") for t in texts]
        first = [t.split(".")[0].count("w") for t in texts]
        assert (row.sent_mean, row.sent_std) == _brute_stats(sents)
        assert (row.word_mean, row.word_std) == _brute_stats(words)
        assert (row.first_sent_mean, row.first_sent_std) == _brute_stats(first)
        assert abs(row.words_per_sentence - row.word_mean / row.sent_mean) < 1e-9
