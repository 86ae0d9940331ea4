"""Command line entry point: ``extract``, ``evaluate``, ``stats``, ``translate``.

Settings come from CLI flags, then an optional ``--config`` file of flat
``key = value`` lines, then built-in defaults (in that order of precedence).
Exit status: 0 ok, 1 record-level errors, 2 configuration/startup error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Optional, Sequence

from .corpus import RecordError, corpus_stats, load_records, stats_to_csv, write_records
from .drugs import MAX_WINDOW, DrugRegistry
from .llm import (
    ChatClient,
    LlmEndpointConfig,
    LlmError,
    LlmExtractor,
    PromptSpec,
    PromptTemplate,
    translate_record,
)
from .metrics import evaluate, reports_to_csv, reports_to_json
from .model import LLM_ERROR, Extraction
from .rules import GenderCueLexicon, LesionLexicon, RuleExtractor
from .textproc import load_abbreviations

log = logging.getLogger("epiextract")

EXIT_OK, EXIT_RECORD_ERRORS, EXIT_CONFIG = 0, 1, 2
MOCK_ENDPOINT = "mock"


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    input: Optional[str] = None
    output: Optional[str] = None
    extractions: Optional[str] = None
    method: str = "rule"
    gender_lexicon: Optional[str] = None
    lesion_lexicon: Optional[str] = None
    drug_db: Optional[str] = None
    abbreviations: Optional[str] = None
    threshold: int = 80
    drug_window: int = 1
    fold_ascii: bool = False
    fuzzy_drugs: bool = False
    literal_score: bool = False
    group_by: str = "doctor"
    concurrency: int = 4
    endpoint: Optional[str] = None
    model: str = "default"
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 2
    api_key_env: str = "LLM_API_KEY"
    prompt_template: Optional[str] = None

    def validate(self, command: str) -> None:
        if self.method not in ("rule", "llm"):
            raise ConfigError(f"method must be 'rule' or 'llm', got {self.method!r}")
        if not 0 < self.threshold <= 100:
            raise ConfigError(f"threshold must be in (0, 100], got {self.threshold}")
        if self.group_by not in ("doctor", "icd10"):
            raise ConfigError(f"group-by must be 'doctor' or 'icd10', got {self.group_by!r}")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if not 1 <= self.drug_window <= MAX_WINDOW:
            raise ConfigError(f"drug-window must be in [1, {MAX_WINDOW}]")
        if not self.input:
            raise ConfigError("--input is required")
        needs_endpoint = command == "translate" or (command == "extract" and self.method == "llm")
        if needs_endpoint and not self.endpoint:
            raise ConfigError("an LLM endpoint is required (--endpoint URL, or 'mock')")
        if command in ("extract", "translate") and not self.output:
            raise ConfigError("--output is required")
        if command == "evaluate" and not self.extractions:
            raise ConfigError("--extractions is required")
        for name in ("gender_lexicon", "lesion_lexicon", "drug_db", "abbreviations", "prompt_template"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name.replace('_', '-')}: cannot read {path}")

    def endpoint_config(self) -> LlmEndpointConfig:
        base = "http://mock.invalid" if self.endpoint == MOCK_ENDPOINT else self.endpoint
        return LlmEndpointConfig(
            base_url=base,
            model=self.model,
            temperature=self.temperature,
            timeout=self.timeout,
            max_retries=self.max_retries,
            api_key_env=self.api_key_env,
        )


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _coerce(name: str, value: Any, kind: type) -> Any:
    if not isinstance(value, str) or kind is str:
        return value
    try:
        if kind is bool:
            return _BOOL[value.strip().lower()]
        return kind(value)
    except (KeyError, ValueError):
        raise ConfigError(f"{name}: cannot read {value!r} as {kind.__name__}") from None


def read_config_file(path: str | Path) -> dict[str, str]:
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    known = {f.name: f for f in fields(RunConfig)}
    unknown = sorted(set(file_values) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {}
    defaults = RunConfig()
    for name in known:
        kind = type(getattr(defaults, name)) if getattr(defaults, name) is not None else str
        cli_value = getattr(args, name, None)
        if cli_value is not None:
            kwargs[name] = cli_value
        elif name in file_values:
            kwargs[name] = _coerce(name, file_values[name], kind)
    return RunConfig(**kwargs)


# -- commands -----------------------------------------------------------------


def _load_inputs(cfg: RunConfig):
    try:
        return load_records(cfg.input)
    except OSError as exc:
        raise ConfigError(f"cannot read input {cfg.input}: {exc.strerror}") from None
    except RecordError as exc:
        raise ConfigError(f"{cfg.input}: {exc}") from None


def _abbreviations(cfg: RunConfig):
    return load_abbreviations(cfg.abbreviations) if cfg.abbreviations else None


def _rule_extractor(cfg: RunConfig) -> RuleExtractor:
    try:
        cues = GenderCueLexicon.from_csv(cfg.gender_lexicon) if cfg.gender_lexicon else GenderCueLexicon.default()
        lesions = LesionLexicon.from_file(cfg.lesion_lexicon) if cfg.lesion_lexicon else LesionLexicon.default()
        registry = DrugRegistry.from_file(cfg.drug_db) if cfg.drug_db else DrugRegistry.sample()
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load lexicon: {exc}") from None
    if len(registry) == 0:
        raise ConfigError("drug registry is empty")
    return RuleExtractor(
        gender_cues=cues,
        lesions=lesions,
        drugs=registry,
        threshold=cfg.threshold,
        drug_window=cfg.drug_window,
        fold=cfg.fold_ascii,
        abbreviations=_abbreviations(cfg),
    )


def _chat_client(cfg: RunConfig) -> ChatClient:
    transport = None
    if cfg.endpoint == MOCK_ENDPOINT:
        from .mock import MockChatModel

        transport = MockChatModel().transport()
    try:
        return ChatClient(cfg.endpoint_config(), transport=transport)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _run_pool(fn, records, concurrency: int):
    """Apply ``fn`` to every record; results (value or exception) keep input order."""

    def safe(rec):
        try:
            return fn(rec), None
        except LlmError as exc:
            return None, str(exc)

    if concurrency == 1:
        return [safe(r) for r in records]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        return list(pool.map(safe, records))


def run_extract(cfg: RunConfig) -> int:
    records = _load_inputs(cfg)
    if cfg.method == "rule":
        extractor = _rule_extractor(cfg)
        results = [(extractor.extract(r), None) for r in records]
    else:
        spec = PromptSpec(template=PromptTemplate.from_file(cfg.prompt_template)) if cfg.prompt_template else PromptSpec()
        with _chat_client(cfg) as client:
            results = _run_pool(LlmExtractor(client, spec).extract, records, cfg.concurrency)

    errors = []
    extractions: list[Extraction] = []
    for rec, (ext, err) in zip(records, results):
        if err is not None:
            # keep one line per record; the failure shows up as an all-absent row
            errors.append({"id": rec.id, "error": err})
            log.error("record %s: %s", rec.id, err)
            ext = Extraction(record_id=rec.id, method=f"llm:{cfg.model}")
            ext.note(LLM_ERROR, err)
        extractions.append(ext)
    with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
        for ext in extractions:
            fh.write(json.dumps(ext.to_dict(), ensure_ascii=False) + "\n")

    summary = {
        "records": len(records),
        "extracted": len(extractions) - len(errors),
        "errors": len(errors),
        "absent": {
            "age": sum(e.age is None for e in extractions),
            "sex": sum(e.sex is None for e in extractions),
            "lesion": sum(e.lesion is None for e in extractions),
            "drugs": sum(not e.drugs for e in extractions),
        },
        "record_errors": errors,
    }
    print(json.dumps(summary, ensure_ascii=False, indent=2))
    return EXIT_RECORD_ERRORS if errors else EXIT_OK


def load_extractions(path: str | Path) -> list[Extraction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(Extraction.from_dict(json.loads(line)))
                except (ValueError, KeyError, TypeError) as exc:
                    raise ConfigError(f"{path}: line {lineno}: bad extraction ({exc})") from None
    return out


def run_evaluate(cfg: RunConfig) -> int:
    records = _load_inputs(cfg)
    try:
        extractions = load_extractions(cfg.extractions)
    except OSError as exc:
        raise ConfigError(f"cannot read extractions {cfg.extractions}: {exc.strerror}") from None
    try:
        reports = evaluate(
            records,
            extractions,
            group_by=cfg.group_by,
            fuzzy_drugs=cfg.fuzzy_drugs,
            threshold=cfg.threshold,
            literal=cfg.literal_score,
        )
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_RECORD_ERRORS
    if cfg.output:
        out = Path(cfg.output)
        out.write_text(reports_to_json(reports), encoding="utf-8")
        out.with_suffix(".csv").write_text(reports_to_csv(reports), encoding="utf-8")
    else:
        sys.stdout.write(reports_to_csv(reports))
    return EXIT_OK


def run_stats(cfg: RunConfig) -> int:
    records = _load_inputs(cfg)
    text = stats_to_csv(corpus_stats(records, cfg.group_by, _abbreviations(cfg)))
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def run_translate(cfg: RunConfig) -> int:
    records = _load_inputs(cfg)
    template = PromptTemplate.from_file(cfg.prompt_template) if cfg.prompt_template else None

    def one(rec):
        try:
            return translate_record(rec, client, template)
        except ValueError as exc:
            raise LlmError(str(exc)) from None

    with _chat_client(cfg) as client:
        results = _run_pool(one, records, cfg.concurrency)
    translated = [r for r, err in results if err is None]
    errors = [(rec.id, err) for rec, (_, err) in zip(records, results) if err is not None]
    for rid, err in errors:
        log.error("record %s: %s", rid, err)
    write_records(translated, cfg.output)
    print(json.dumps({"records": len(records), "translated": len(translated), "errors": len(errors)}))
    return EXIT_RECORD_ERRORS if errors else EXIT_OK


COMMANDS = {
    "extract": run_extract,
    "evaluate": run_evaluate,
    "stats": run_stats,
    "translate": run_translate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--input", help="JSON Lines corpus")
    common.add_argument("--output", help="output file")
    common.add_argument("--abbreviations", help="sentence-splitter abbreviation list")
    common.add_argument("--group-by", dest="group_by", choices=["doctor", "icd10"])
    common.add_argument("--concurrency", type=int, help="max requests in flight (default 4)")
    common.add_argument("--threshold", type=int, help="fuzzy drug-match threshold (default 80)")
    common.add_argument("-v", "--verbose", action="store_true")

    llm = argparse.ArgumentParser(add_help=False)
    llm.add_argument("--endpoint", help="chat-completion base URL, or 'mock'")
    llm.add_argument("--model", help="model name sent to the endpoint")
    llm.add_argument("--temperature", type=float)
    llm.add_argument("--timeout", type=float, help="request timeout, seconds")
    llm.add_argument("--max-retries", dest="max_retries", type=int)
    llm.add_argument("--api-key-env", dest="api_key_env", help="env var holding the bearer token")
    llm.add_argument("--prompt-template", dest="prompt_template")

    ap = argparse.ArgumentParser(prog="epiextract", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", parents=[common, llm], help="extract fields from a corpus")
    ex.add_argument("--method", choices=["rule", "llm"])
    ex.add_argument("--gender-lexicon", dest="gender_lexicon")
    ex.add_argument("--lesion-lexicon", dest="lesion_lexicon")
    ex.add_argument("--drug-db", dest="drug_db")
    ex.add_argument("--drug-window", dest="drug_window", type=int, help="max tokens per drug-name window")
    ex.add_argument("--fold-ascii", dest="fold_ascii", action="store_true", default=None)

    ev = sub.add_parser("evaluate", parents=[common], help="score extractions against gold labels")
    ev.add_argument("--extractions", help="extraction JSON Lines from `extract`")
    ev.add_argument("--fuzzy-drugs", dest="fuzzy_drugs", action="store_true", default=None)
    ev.add_argument("--literal-score", dest="literal_score", action="store_true", default=None)

    sub.add_parser("stats", parents=[common], help="text-length statistics per group")
    sub.add_parser("translate", parents=[common, llm], help="translate a Polish corpus to English")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = build_config(args)
        cfg.validate(args.command)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
