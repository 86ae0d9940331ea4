import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from epiextract.corpus import EpicrisisRecord, load_records  # noqa: E402
from epiextract.llm import ChatClient, LlmEndpointConfig  # noqa: E402
from epiextract.model import Language  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def corpus_path() -> Path:
    return Path(str(resources.files("epiextract") / "data" / "synthetic_corpus.jsonl"))


@pytest.fixture(scope="session")
def corpus(corpus_path):
    return load_records(corpus_path)


@pytest.fixture(scope="session")
def make_record():
    def make(text, rid="r1", doctor="1", language=Language.PL, **kw):
        return EpicrisisRecord(id=rid, doctor=doctor, text=text, language=language, **kw)

    return make


@pytest.fixture
def chat_client():
    """Factory: ChatClient wired to a MockChatModel through an in-process transport."""
    clients = []

    def make(model, **cfg):
        cfg.setdefault("backoff", 0)
        client = ChatClient(
            LlmEndpointConfig(base_url="http://mock.test", model="mock-1", **cfg),
            transport=model.transport(),
        )
        clients.append(client)
        return client

    yield make
    for c in clients:
        c.close()
