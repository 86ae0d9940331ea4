"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import contextlib
import itertools
import json
import random
import time
from fractions import Fraction

import oracles
import pytest

from conftest import GOLDEN
from epiextract.cli import main
from epiextract.corpus import DocCounts, stats_row
from epiextract.drugs import indel_ratio, token_set_ratio
from epiextract.llm import ParseStatus, extract_via_llm, parse_llm_output, translate_record
from epiextract.metrics import DrugEvalInstance, adjusted_accuracy, age_mae, years_to_months
from epiextract.mock import MockChatModel
from epiextract.model import LLM_UNPARSEABLE, AgeValue, Language, Sex
from epiextract.rules import GenderCueLexicon, extract_sex, parse_age_expression
from epiextract.textproc import tokenize


@pytest.fixture
def criterion(capsys):
    @contextlib.contextmanager
    def check(number, title):
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"\nFAIL criterion {number}: {title}")
            raise
        with capsys.disabled():
            print(f"\nPASS criterion {number}: {title}")

    return check


def test_criterion_1_age_grammar(criterion):
    with criterion(1, "age grammar"):
        for text in ("5 i 4/12", "5 4/12"):
            age = parse_age_expression(tokenize(text))
            assert abs(age.fractional - (5 + 4 / 12)) < 1e-12
            assert age.exact == 5 + Fraction(4, 12)
        assert parse_age_expression(tokenize("5.5")) == AgeValue(5, 6)


def test_criterion_2_months_years(criterion):
    with criterion(2, "MAE months = 12 x years"):
        assert years_to_months(0.150) == Fraction("1.8")
        assert years_to_months(0.763) == Fraction("9.156")
        rng = random.Random(2)
        pairs = [
            (AgeValue(rng.randint(0, 18), rng.randint(0, 11)), AgeValue(rng.randint(0, 18), rng.randint(0, 11)))
            for _ in range(200)
        ]
        years = age_mae(pairs)
        months = Fraction(sum(abs(12 * p.years + p.months - 12 * g.years - g.months) for p, g in pairs), len(pairs))
        assert 12 * years == months


def test_criterion_3_words_per_sentence(criterion):
    with criterion(3, "words-per-sentence ratios"):
        n = 100
        for sent_mean, word_mean, quoted in [("8.55", "81.40", 9.5), ("14.91", "146.07", 9.8), ("17.73", "258.56", 14.6)]:
            s_total, w_total = int(Fraction(sent_mean) * n), int(Fraction(word_mean) * n)
            counts = [DocCounts(s_total // n + (i < s_total % n), w_total // n + (i < w_total % n), 1) for i in range(n)]
            row = stats_row("g", counts)
            assert row.sent_mean == float(sent_mean) and row.word_mean == float(word_mean)
            assert abs(row.words_per_sentence - quoted) <= 0.05


def test_criterion_4_fuzzy_ratio(criterion):
    with criterion(4, "fuzzy ratio oracle and token-set invariance"):
        start = time.perf_counter()
        rng = random.Random(4)
        for _ in range(1000):
            a = "".join(rng.choice("abcdeł") for _ in range(rng.randint(0, 12)))
            b = "".join(rng.choice("abcdeł") for _ in range(rng.randint(0, 12)))
            assert indel_ratio(a, b) == oracles.ratio(a, b)
        for _ in range(1000):
            wa = ["".join(rng.choice("abcd") for _ in range(rng.randint(1, 5))) for _ in range(rng.randint(1, 4))]
            wb = ["".join(rng.choice("abcd") for _ in range(rng.randint(1, 5))) for _ in range(rng.randint(1, 4))]
            base = token_set_ratio(" ".join(wa), " ".join(wb))
            shuffled = wa[:]
            rng.shuffle(shuffled)
            dup = shuffled + rng.sample(wa, rng.randint(1, len(wa)))
            rng.shuffle(dup)
            assert token_set_ratio(" ".join(dup), " ".join(wb)) == base
            assert token_set_ratio(" ".join(wb), " ".join(dup)) == base
        assert time.perf_counter() - start < 10


def test_criterion_5_adjusted_accuracy(criterion):
    with criterion(5, "adjusted accuracy oracle"):
        universe = "abcd"
        subsets = [set(c) for k in range(5) for c in itertools.combinations(universe, k)]
        cases = [(g, p) for g in subsets for p in subsets]
        instances = [DrugEvalInstance.exact(g, p) for g, p in cases]
        checked = 0
        for (c1, i1), (c2, i2) in itertools.product(zip(cases, instances), repeat=2):
            assert adjusted_accuracy([i1, i2]) == float(oracles.adjusted_accuracy([c1, c2]))
            checked += 1
        assert checked == 65536
        for k in range(5):
            gold = universe[:k]
            assert adjusted_accuracy([DrugEvalInstance.exact(gold, gold)]) == 1.0


def test_criterion_6_translation_loses_sex(criterion, make_record, chat_client):
    with criterion(6, "translation drops the sex cue"):
        pl_text = "Pacjentka lat 5 przyjęta z powodu wysypki."
        model = MockChatModel(translations={pl_text: "The patient, aged 5, was admitted because of a rash."})
        pl = make_record(pl_text)
        en = translate_record(pl, chat_client(model))
        assert en.language is Language.EN and en.text.startswith("The patient")
        lexicon = GenderCueLexicon.default()
        assert extract_sex(pl, lexicon) is Sex.F
        assert extract_sex(en, lexicon) is None


def test_criterion_7_llm_contract(criterion, make_record, chat_client, corpus_path, tmp_path, capsys):
    with criterion(7, "LLM output contract"):
        text = "Pacjentka lat 5 i 4/12 przyjęta z powodu wysypki. Zalecono Zyrtec."
        keyed = "⟨age=5 i 4/12 | sex=F | drugs=Zyrtec | skin_changes=wysypka⟩"
        prose = (
            "The child was admitted to hospital and after treatment was discharged home "
            "in good general condition with recommendations for further care."
        )
        model = MockChatModel(responses={text: keyed, "Dziecko lat 3.": prose})
        client = chat_client(model)
        ext = extract_via_llm(make_record(text), None, client)
        assert (ext.age, ext.sex, ext.drugs, ext.lesion) == (AgeValue(5, 4), Sex.F, ["zyrtec"], "wysypka")
        assert parse_llm_output(prose).status is ParseStatus.UNPARSEABLE
        bad = extract_via_llm(make_record("Dziecko lat 3."), None, client)
        assert [d.code for d in bad.diagnostics] == [LLM_UNPARSEABLE]

        outputs = []
        for i in range(2):
            out = tmp_path / f"run{i}.jsonl"
            argv = ["extract", "--method", "llm", "--endpoint", "mock", "--input", str(corpus_path), "--output", str(out)]
            assert main(argv) == 0
            outputs.append(out.read_bytes())
        capsys.readouterr()
        assert outputs[0] == outputs[1] and outputs[0]


def test_criterion_8_golden_end_to_end(criterion, corpus_path, tmp_path, capsys):
    with criterion(8, "rule extract + evaluate match golden files"):
        start = time.perf_counter()
        ext = tmp_path / "rule_extractions.jsonl"
        report = tmp_path / "rule_eval.json"
        assert main(["extract", "--method", "rule", "--input", str(corpus_path), "--output", str(ext)]) == 0
        assert main(["evaluate", "--input", str(corpus_path), "--extractions", str(ext), "--output", str(report)]) == 0
        elapsed = time.perf_counter() - start
        capsys.readouterr()
        for name in ("rule_extractions.jsonl", "rule_eval.json", "rule_eval.csv"):
            assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes(), name
        assert json.loads(report.read_text())[-1]["n"] == 20
        assert elapsed < 5
