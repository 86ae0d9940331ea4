import random

import oracles
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epiextract.drugs import DrugRegistry, extract_drugs, indel_ratio, token_set_ratio


@pytest.mark.parametrize(
    "a, b, expected",
    [("zyrtec", "zyrtec", 100), ("abcd", "abce", 75), ("", "abc", 0), ("", "", 100)],
)
def test_indel_ratio_examples(a, b, expected):
    assert indel_ratio(a, b) == expected


def test_indel_ratio_half_rounds_up():
    # 100 * 2 * LCS / lensum = 100 * 2 * 1 / 8 = 25 exactly; "ab"/"cdeb": LCS 1, lensum 6 -> 33.33
    assert indel_ratio("ab", "cdeb") == 33
    # LCS 1, lensum 8 -> 25.0; LCS 3, lensum 8 -> 75; construct x.5: LCS 1, lensum 16 -> 12.5 -> 13
    assert indel_ratio("a" + "b" * 7, "a" + "c" * 7) == 13


def test_token_set_examples():
    assert token_set_ratio("kot pies", "pies kot") == 100
    assert token_set_ratio("kot kot pies", "pies kot") == 100
    assert token_set_ratio("claritine", "claritin") == oracles.token_set_ratio("claritine", "claritin")
    assert token_set_ratio("claritine", "claritin") >= 80


def test_token_set_subset_scores_full():
    # a single shared word makes t0 equal to one side's string
    assert token_set_ratio("symbicort", "symbicort turbuhaler") == 100


def test_indel_ratio_oracle_1000_pairs():
    rng = random.Random(20240501)
    for _ in range(1000):
        a = "".join(rng.choice("abcdef") for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice("abcdef") for _ in range(rng.randint(0, 12)))
        assert indel_ratio(a, b) == oracles.ratio(a, b), (a, b)


def test_token_set_oracle_1000_pairs():
    rng = random.Random(7)

    def phrase():
        return " ".join(
            "".join(rng.choice("abcdef") for _ in range(rng.randint(1, 4)))
            for _ in range(rng.randint(0, 4))
        )

    for _ in range(1000):
        a, b = phrase(), phrase()
        assert token_set_ratio(a, b) == oracles.token_set_ratio(a, b), (a, b)


_words = st.lists(st.text(alphabet="abcdef", min_size=1, max_size=4), min_size=1, max_size=4)


@settings(max_examples=300)
@given(_words, _words, st.randoms(use_true_random=False))
def test_token_set_invariances(wa, wb, rnd):
    a, b = " ".join(wa), " ".join(wb)
    base = token_set_ratio(a, b)
    assert 0 <= base <= 100
    assert token_set_ratio(b, a) == base
    shuffled = wa[:]
    rnd.shuffle(shuffled)
    duplicated = shuffled + [rnd.choice(wa)]
    assert token_set_ratio(" ".join(duplicated), b) == base


@settings(max_examples=300)
@given(st.text(alphabet="abcdef", max_size=12), st.text(alphabet="abcdef", max_size=12))
def test_indel_ratio_symmetric_bounded(a, b):
    r = indel_ratio(a, b)
    assert r == indel_ratio(b, a) and 0 <= r <= 100
    assert indel_ratio(a, a) == 100


REGISTRY = DrugRegistry(["Zyrtec", "Ventolin", "Symbicort Turbuhaler"])


def test_extract_exact_mention(make_record):
    (m,) = extract_drugs(make_record("podano Zyrtec wieczorem"), REGISTRY)
    assert (m.name, m.score, m.surface, m.start) == ("Zyrtec", 100, "Zyrtec", 7)


def test_extract_misspelling_follows_oracle(make_record):
    expected = oracles.token_set_ratio("zyrteć", "zyrtec") >= 80
    got = extract_drugs(make_record("podano zyrteć wieczorem"), REGISTRY, 80)
    assert bool(got) is expected


def test_extract_dedups_repeated_mentions(make_record):
    got = extract_drugs(make_record("Zyrtec rano, Zyrtecu nie podano wieczorem. Zyrtec."), REGISTRY)
    assert [(m.name, m.score, m.start) for m in got] == [("Zyrtec", 100, 0)]


def test_extract_orders_by_position(make_record):
    got = extract_drugs(make_record("Ventolin, potem Zyrtec."), REGISTRY)
    assert [m.name for m in got] == ["Ventolin", "Zyrtec"]


def test_empty_registry_is_an_error(make_record):
    with pytest.raises(ValueError, match="empty"):
        extract_drugs(make_record("Zyrtec"), DrugRegistry([]))


@pytest.mark.parametrize("threshold", [0, 101])
def test_threshold_bounds(make_record, threshold):
    with pytest.raises(ValueError):
        extract_drugs(make_record("Zyrtec"), REGISTRY, threshold)


def test_registry_rejects_normalized_duplicates():
    with pytest.raises(ValueError, match="collide"):
        DrugRegistry(["Zyrtec", "ZYRTEC."])


def test_sample_registry_has_50_names():
    assert len(DrugRegistry.sample()) == 50


def test_ascii_folding_option(make_record):
    reg = DrugRegistry(["Pyralgina"])
    rec = make_record("podano pyrałgina")
    assert extract_drugs(rec, reg, 100) == []
    assert [m.name for m in extract_drugs(rec, reg, 100, fold=True)] == ["Pyralgina"]


def test_window_matches_multiword_names(make_record):
    # neither misspelled word alone reaches 80; the two-token run does
    reg = DrugRegistry(["Ventolin Forte"])
    rec = make_record("zalecono wentolin fortę")
    assert extract_drugs(rec, reg, 80) == []
    (m,) = extract_drugs(rec, reg, 80, window=2)
    assert m.surface == "wentolin fortę"
    assert m.score == oracles.token_set_ratio("wentolin fortę", "ventolin forte")


_doc_words = st.lists(st.sampled_from(["zyrtec", "zyrtecu", "zyrtek", "ventolinu", "wentolin", "symbicort", "kot"]), min_size=1, max_size=8)


@settings(max_examples=100, deadline=None)
@given(_doc_words, st.integers(1, 100), st.integers(1, 100))
def test_raising_threshold_never_adds_matches(make_record, words, t1, t2):
    lo, hi = sorted((t1, t2))
    rec = make_record(" ".join(words))
    names_lo = {m.name for m in extract_drugs(rec, REGISTRY, lo)}
    names_hi = {m.name for m in extract_drugs(rec, REGISTRY, hi)}
    assert names_hi <= names_lo
    assert all(m.score >= hi for m in extract_drugs(rec, REGISTRY, hi))


@pytest.mark.parametrize("window", [0, 4])
def test_window_bounds(make_record, window):
    with pytest.raises(ValueError, match="window"):
        extract_drugs(make_record("Zyrtec"), REGISTRY, window=window)
