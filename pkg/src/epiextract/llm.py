"""LLM extraction over any chat-completion endpoint.

The model is asked to answer in a single keyed block::

    ⟨age=5 i 4/12 | sex=F | drugs=Zyrtec, Ventolin | skin_changes=None⟩

and missing information is reported as ``key=None``.
"""
from __future__ import annotations

import enum
import logging
import os
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import httpx

from .corpus import EpicrisisRecord
from .model import (
    AGE_UNPARSED,
    LLM_PARTIAL,
    LLM_UNPARSEABLE,
    SEX_UNRECOGNIZED,
    Extraction,
    Language,
    Sex,
)
from .rules import parse_age_expression
from .textproc import normalize_name, normalize_token, tokenize

log = logging.getLogger(__name__)

DEFAULT_KEYS = ("age", "sex", "drugs", "skin_changes")
EXAMPLE_VALUES = {
    "age": "5 i 4/12",
    "sex": "F",
    "drugs": "Zyrtec, Ventolin",
    "skin_changes": "None",
}
USER_MARKER = "### user"

Messages = list[dict[str, str]]


class LlmError(RuntimeError):
    """Transport or protocol failure talking to the chat endpoint."""


# -- prompt -------------------------------------------------------------------


@dataclass(frozen=True)
class PromptTemplate:
    system: str
    user: str

    @classmethod
    def parse(cls, text: str) -> "PromptTemplate":
        system, sep, user = text.partition(USER_MARKER)
        if not sep:
            user = "{{context}}"
        return cls(system.strip("\n"), user.strip("\n"))

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptTemplate":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def packaged(cls, name: str) -> "PromptTemplate":
        return cls.parse((resources.files("epiextract") / "data" / name).read_text(encoding="utf-8"))

    def render(self, **values: str) -> Messages:
        def fill(text: str) -> str:
            for key, value in values.items():
                text = text.replace("{{" + key + "}}", value)
            return text

        return [
            {"role": "system", "content": fill(self.system)},
            {"role": "user", "content": fill(self.user)},
        ]


def format_llm_output(values: Mapping[str, Optional[str]], brackets: str = "⟨⟩") -> str:
    """Render a keyed block; ``None`` values are written as ``key=None``."""
    body = " | ".join(f"{k}={'None' if v is None else v}" for k, v in values.items())
    return f"{brackets[0]}{body}{brackets[1]}"


@dataclass(frozen=True)
class PromptSpec:
    template: PromptTemplate = field(
        default_factory=lambda: PromptTemplate.packaged("extraction_prompt.txt")
    )
    keys: tuple[str, ...] = DEFAULT_KEYS
    example: Mapping[str, str] = field(default_factory=lambda: dict(EXAMPLE_VALUES))

    def __post_init__(self):
        if not self.keys:
            raise ValueError("prompt needs at least one key")
        missing = [k for k in self.keys if k not in self.example]
        if missing:
            raise ValueError(f"no example value for keys {missing}")

    def example_output(self) -> str:
        return format_llm_output({k: self.example[k] for k in self.keys}, brackets="<>")


def build_prompt(record: EpicrisisRecord, spec: Optional[PromptSpec] = None) -> Messages:
    spec = spec or PromptSpec()
    if not record.text.strip():
        raise ValueError(f"record {record.id}: empty text")
    return spec.template.render(
        keys=", ".join(spec.keys), example=spec.example_output(), context=record.text
    )


# -- response parsing ---------------------------------------------------------


class ParseStatus(str, enum.Enum):
    OK = "OK"
    PARTIAL = "PARTIAL"
    UNPARSEABLE = "UNPARSEABLE"


@dataclass(frozen=True)
class ParsedLlmOutput:
    values: dict[str, Optional[str]]
    status: ParseStatus
    raw: str

    def get(self, key: str) -> Optional[str]:
        return self.values.get(key)


_BLOCK_RES = (re.compile(r"⟨([^⟨⟩]*)⟩"), re.compile(r"<([^<>]*)>"))


def _canon_key(key: str) -> str:
    return re.sub(r"[\s\-]+", "_", key.strip().lower())


def _clean_value(value: str) -> Optional[str]:
    value = value.strip()
    return None if not value or value.lower() == "none" else value


def _parse_block(body: str, wanted: Mapping[str, str]) -> dict[str, Optional[str]]:
    found: dict[str, Optional[str]] = {}
    for segment in body.split("|"):
        key, sep, value = segment.partition("=")
        key = wanted.get(_canon_key(key))
        if sep and key and key not in found:
            found[key] = _clean_value(value)
    return found


def _scan_text(text: str, wanted: Mapping[str, str]) -> dict[str, Optional[str]]:
    found: dict[str, Optional[str]] = {}
    alts = "|".join(
        re.escape(k).replace("_", r"[\s_\-]") for k in sorted(wanted, key=len, reverse=True)
    )
    pattern = re.compile(rf"(?<!\w)({alts})\s*=\s*([^|\n<>⟨⟩]*)", re.IGNORECASE)
    for m in pattern.finditer(text):
        key = wanted[_canon_key(m.group(1))]
        if key not in found:
            found[key] = _clean_value(m.group(2))
    return found


def parse_llm_output(
    response: Union[str, bytes], expected_keys: Sequence[str] = DEFAULT_KEYS
) -> ParsedLlmOutput:
    """Parse a keyed model answer. Never raises; prose answers come back UNPARSEABLE."""
    if isinstance(response, bytes):
        response = response.decode("utf-8", errors="replace")
    wanted = {_canon_key(k): k for k in expected_keys}

    found: dict[str, Optional[str]] = {}
    for block_re in _BLOCK_RES:
        for m in reversed(list(block_re.finditer(response))):
            found = _parse_block(m.group(1), wanted)
            if found:
                break
        if found:
            break
    if not found:
        found = _scan_text(response, wanted)

    if not found:
        status = ParseStatus.UNPARSEABLE
    elif len(found) == len(wanted):
        status = ParseStatus.OK
    else:
        status = ParseStatus.PARTIAL
    return ParsedLlmOutput({k: found[k] for k in expected_keys if k in found}, status, response)


# -- endpoint -----------------------------------------------------------------


@dataclass(frozen=True)
class LlmEndpointConfig:
    base_url: str
    model: str = "default"
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 2
    api_key_env: str = "LLM_API_KEY"
    backoff: float = 0.5

    def __post_init__(self):
        if not self.base_url.strip():
            raise ValueError("base_url is required")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


_RETRYABLE = {408, 429, 500, 502, 503, 504}


class ChatClient:
    """Minimal chat-completion client: POST {base}/v1/chat/completions."""

    def __init__(self, config: LlmEndpointConfig, transport: Optional[httpx.BaseTransport] = None):
        self.config = config
        headers = {}
        key = os.environ.get(config.api_key_env) if config.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            timeout=config.timeout,
            transport=transport,
            headers=headers,
        )

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self) -> None:
        self._http.close()

    def complete(self, messages: Messages) -> str:
        payload = {
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        }
        attempts = self.config.max_retries + 1
        last = ""
        for attempt in range(attempts):
            if attempt and self.config.backoff:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                resp = self._http.post("/v1/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("chat request failed (attempt %d/%d): %s", attempt + 1, attempts, last)
                continue
            if resp.status_code in _RETRYABLE:
                last = f"HTTP {resp.status_code}"
                log.warning("chat request failed (attempt %d/%d): %s", attempt + 1, attempts, last)
                continue
            if resp.status_code != 200:
                raise LlmError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise LlmError(f"malformed chat-completion response: {resp.text[:200]}") from None
            if not isinstance(content, str):
                raise LlmError("chat-completion content is not a string")
            return content
        raise LlmError(f"giving up after {attempts} attempts: {last}")


# -- extraction ---------------------------------------------------------------

_SEX_WORDS = {
    Sex.M: {"m", "male", "man", "boy", "masculine", "mężczyzna", "męska", "męski", "chłopiec", "chłopak"},
    Sex.F: {"f", "k", "female", "woman", "girl", "feminine", "kobieta", "żeńska", "żeński", "dziewczynka", "dziewczyna"},
}


def normalize_sex(value: Optional[str]) -> Optional[Sex]:
    if value is None:
        return None
    word = normalize_token(value)
    for sex, forms in _SEX_WORDS.items():
        if word in forms:
            return sex
    return None


def split_drugs(value: Optional[str]) -> list[str]:
    out: list[str] = []
    for part in (value or "").split(","):
        name = normalize_name(part)
        if name and name.lower() != "none" and name not in out:
            out.append(name)
    return out


def to_extraction(record_id: str, parsed: ParsedLlmOutput, method: str) -> Extraction:
    ext = Extraction(record_id=record_id, method=method)
    if parsed.status is ParseStatus.UNPARSEABLE:
        ext.note(LLM_UNPARSEABLE, " ".join(parsed.raw.split())[:200])
        return ext
    if parsed.status is ParseStatus.PARTIAL:
        missing = [k for k in DEFAULT_KEYS if k not in parsed.values]
        ext.note(LLM_PARTIAL, "missing: " + ", ".join(missing))

    age_text = parsed.get("age")
    if age_text is not None:
        ext.age = parse_age_expression(tokenize(age_text))
        if ext.age is None:
            ext.note(AGE_UNPARSED, age_text)
    sex_text = parsed.get("sex")
    ext.sex = normalize_sex(sex_text)
    if sex_text is not None and ext.sex is None:
        ext.note(SEX_UNRECOGNIZED, sex_text)
    ext.drugs = split_drugs(parsed.get("drugs"))
    ext.lesion = parsed.get("skin_changes")
    return ext


def _client_for(endpoint: Union[ChatClient, LlmEndpointConfig]) -> tuple[ChatClient, bool]:
    if isinstance(endpoint, ChatClient):
        return endpoint, False
    return ChatClient(endpoint), True


def extract_via_llm(
    record: EpicrisisRecord,
    spec: Optional[PromptSpec],
    endpoint: Union[ChatClient, LlmEndpointConfig],
) -> Extraction:
    """One chat request for ``record``; raises LlmError if the endpoint fails."""
    spec = spec or PromptSpec()
    client, owned = _client_for(endpoint)
    try:
        content = client.complete(build_prompt(record, spec))
    finally:
        if owned:
            client.close()
    parsed = parse_llm_output(content, spec.keys)
    return to_extraction(record.id, parsed, f"llm:{client.config.model}")


class LlmExtractor:
    """Thread-safe callable wrapper used by the CLI's worker pool."""

    def __init__(self, client: ChatClient, spec: Optional[PromptSpec] = None):
        self.client = client
        self.spec = spec or PromptSpec()

    def extract(self, record: EpicrisisRecord) -> Extraction:
        return extract_via_llm(record, self.spec, self.client)


def translate_record(
    record: EpicrisisRecord,
    endpoint: Union[ChatClient, LlmEndpointConfig],
    template: Optional[PromptTemplate] = None,
) -> EpicrisisRecord:
    """Polish record -> English copy with id suffixed "-en"."""
    if record.language is not Language.PL:
        raise ValueError(f"record {record.id} is not Polish (language={record.language.value})")
    template = template or PromptTemplate.packaged("translation_prompt.txt")
    client, owned = _client_for(endpoint)
    try:
        text = client.complete(template.render(context=record.text)).strip()
    finally:
        if owned:
            client.close()
    if not text:
        raise LlmError(f"record {record.id}: empty translation")
    return EpicrisisRecord(
        id=f"{record.id}-en",
        doctor=record.doctor,
        text=text,
        language=Language.EN,
        icd10=record.icd10,
        gold=record.gold,
    )
