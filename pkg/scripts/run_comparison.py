"""Compare rule extraction with LLM extraction on a corpus and print a per-group table.

Conditions: rules on Polish text, LLM on Polish text, and LLM on the LLM's own
English translation. Without --endpoint the in-process mock model is used, so
the numbers only demonstrate the pipeline, not real model quality.
"""
from __future__ import annotations

import argparse
from importlib import resources

from epiextract.corpus import load_records
from epiextract.drugs import DrugRegistry
from epiextract.llm import ChatClient, LlmEndpointConfig, LlmExtractor, translate_record
from epiextract.metrics import evaluate
from epiextract.mock import MockChatModel
from epiextract.rules import GenderCueLexicon, LesionLexicon, RuleExtractor

COLUMNS = ("age_accuracy", "age_mae_months", "sex_accuracy", "lesion_accuracy", "adjusted_accuracy")


def fmt(value) -> str:
    return "   n/a" if value is None else f"{value:6.3f}"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", default=str(resources.files("epiextract") / "data" / "synthetic_corpus.jsonl"))
    ap.add_argument("--endpoint", help="chat-completion base URL (default: in-process mock)")
    ap.add_argument("--model", default="mock")
    ap.add_argument("--group-by", default="doctor", choices=["doctor", "icd10"])
    args = ap.parse_args()

    records = load_records(args.input)
    rules = RuleExtractor(GenderCueLexicon.default(), LesionLexicon.default(), DrugRegistry.sample())
    if args.endpoint:
        client = ChatClient(LlmEndpointConfig(args.endpoint, model=args.model))
    else:
        client = ChatClient(LlmEndpointConfig("http://mock.invalid", model=args.model), transport=MockChatModel().transport())

    with client:
        llm = LlmExtractor(client)
        english = [translate_record(r, client) for r in records]
        by_id = {e.id: r.id for e, r in zip(english, records)}
        translated = []
        for rec in english:
            ext = llm.extract(rec)
            ext.record_id = by_id[rec.id]
            translated.append(ext)
        conditions = {
            "rule/pl": [rules.extract(r) for r in records],
            "llm/pl": [llm.extract(r) for r in records],
            "llm/en": translated,
        }

    print(f"{'condition':10} {'group':8} " + " ".join(f"{c[:14]:>14}" for c in COLUMNS))
    for name, extractions in conditions.items():
        for rep in evaluate(records, extractions, group_by=args.group_by):
            print(f"{name:10} {rep.group:8} " + " ".join(f"{fmt(getattr(rep, c)):>14}" for c in COLUMNS))


if __name__ == "__main__":
    main()
