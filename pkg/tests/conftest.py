from __future__ import annotations

from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def fixture_dataset_path() -> Path:
    return DATA_DIR / "fixture_dataset.jsonl"


@pytest.fixture
def fixture_kg_path() -> Path:
    return DATA_DIR / "fixture_kg.jsonl"


@pytest.fixture
def predict_server():
    from stubs import StubPredictServer

    server = StubPredictServer().start()
    yield server
    server.stop()


@pytest.fixture
def wiki_server():
    from stubs import StubWikiServer

    server = StubWikiServer().start()
    yield server
    server.stop()
