"""Deterministic stand-in for a chat-completion model.

Speaks the same wire protocol as a real endpoint, either in-process through an
``httpx.MockTransport`` or over loopback HTTP via :meth:`MockChatModel.serve`.
Extraction answers come from simple keyword heuristics; translations from an
explicit mapping or a small word glossary.
"""
from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Iterator, Mapping, Optional, Union

import httpx

from .drugs import DrugRegistry
from .llm import DEFAULT_KEYS, format_llm_output
from .rules import GenderCueLexicon, LesionLexicon, parse_age_expression
from .textproc import split_sentences, tokenize

Responder = Callable[[str], str]

GLOSSARY = {
    "pacjent": "patient",
    "pacjentka": "patient",
    "dziecko": "child",
    "chłopiec": "boy",
    "dziewczynka": "girl",
    "lat": "years",
    "lata": "years",
    "roku": "year",
    "i": "and",
    "z": "with",
    "w": "in",
    "przyjęty": "admitted",
    "przyjęta": "admitted",
    "przyjęte": "admitted",
    "był": "was",
    "była": "was",
    "było": "was",
    "wysypki": "rash",
    "wysypka": "rash",
    "wysypką": "rash",
    "astmy": "asthma",
    "kaszlu": "cough",
    "zalecono": "recommended",
    "podano": "given",
    "leczenie": "treatment",
}


PHRASES = {("z", "powodu"): "because of", ("w", "wywiadzie"): "history of"}


def _glossary_translate(text: str) -> str:
    """Word-by-word gloss, sentence by sentence; unknown words pass through."""
    sentences = []
    for sent in split_sentences(text):
        words = [t.normalized for t in sent.tokens]
        out, i = [], 0
        while i < len(words):
            pair = tuple(words[i : i + 2])
            if pair in PHRASES:
                out.append(PHRASES[pair])
                i += 2
            else:
                out.append(GLOSSARY.get(words[i], words[i]))
                i += 1
        line = " ".join(out)
        if line:
            sentences.append(line[:1].upper() + line[1:] + ".")
    return " ".join(sentences)


class MockChatModel:
    """Answers chat-completion requests deterministically.

    ``responses`` maps the user message (the record text) to a canned reply,
    or is a callable computing one. ``fail_first`` makes the first N requests
    answer with HTTP ``fail_status``.
    """

    def __init__(
        self,
        responses: Union[Mapping[str, str], Responder, None] = None,
        translations: Optional[Mapping[str, str]] = None,
        fail_first: int = 0,
        fail_status: int = 500,
        registry: Optional[DrugRegistry] = None,
    ):
        self.responses = responses
        self.translations = dict(translations or {})
        self.fail_first = fail_first
        self.fail_status = fail_status
        self.registry = registry or DrugRegistry.sample()
        self.cues = GenderCueLexicon.default()
        self.lesions = LesionLexicon.default()
        self.requests: list[dict] = []
        self._lock = threading.Lock()

    # heuristic "model" --------------------------------------------------------

    def _extract(self, text: str) -> str:
        if not text.strip():
            return format_llm_output(dict.fromkeys(DEFAULT_KEYS))
        toks = tokenize(text)
        first = split_sentences(text)[0].tokens
        age = parse_age_expression(first, max_years=18)
        sex = next((self.cues.get(t.normalized) for t in toks if self.cues.get(t.normalized)), None)
        words = {t.normalized for t in toks}
        drugs = [e.name for e in self.registry if set(e.key.split()) <= words]
        lesion = next(
            (t.normalized for t in toks if any(s in t.normalized for s in self.lesions.stems)),
            None,
        )
        return format_llm_output(
            {
                "age": str(age) if age else None,
                "sex": {"M": "male", "F": "female"}[sex.value] if sex else None,
                "drugs": ", ".join(drugs) or None,
                "skin_changes": lesion,
            }
        )

    def reply(self, messages: list[dict]) -> str:
        system = next((m["content"] for m in messages if m.get("role") == "system"), "")
        user = next((m["content"] for m in reversed(messages) if m.get("role") == "user"), "")
        if "translate" in system.lower():
            if user in self.translations:
                return self.translations[user]
            return _glossary_translate(user)
        if callable(self.responses):
            return self.responses(user)
        if self.responses is not None and user in self.responses:
            return self.responses[user]
        return self._extract(user)

    # protocol -----------------------------------------------------------------

    def handle(self, body: bytes) -> tuple[int, dict]:
        with self._lock:
            n = len(self.requests)
            try:
                payload = json.loads(body)
            except ValueError:
                return 400, {"error": {"message": "invalid JSON"}}
            self.requests.append(payload)
        if n < self.fail_first:
            return self.fail_status, {"error": {"message": "mock failure"}}
        messages = payload.get("messages")
        if not isinstance(messages, list):
            return 400, {"error": {"message": "messages must be a list"}}
        content = self.reply(messages)
        return 200, {
            "id": f"mock-{n}",
            "object": "chat.completion",
            "model": payload.get("model", "mock"),
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": content},
                    "finish_reason": "stop",
                }
            ],
        }

    def transport(self) -> httpx.MockTransport:
        def handler(request: httpx.Request) -> httpx.Response:
            if request.method != "POST" or not request.url.path.endswith("/v1/chat/completions"):
                return httpx.Response(404, json={"error": {"message": "not found"}})
            status, data = self.handle(request.content)
            return httpx.Response(status, json=data)

        return httpx.MockTransport(handler)

    @contextmanager
    def serve(self, host: str = "127.0.0.1", port: int = 0) -> Iterator[str]:
        """Run on a loopback HTTP server; yields the base URL."""
        model = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                if not self.path.endswith("/v1/chat/completions"):
                    self.send_error(404)
                    return
                length = int(self.headers.get("Content-Length") or 0)
                status, data = model.handle(self.rfile.read(length))
                body = json.dumps(data).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        server = ThreadingHTTPServer((host, port), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            yield f"http://{host}:{server.server_address[1]}"
        finally:
            server.shutdown()
            server.server_close()
            thread.join()
