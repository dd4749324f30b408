import json
from pathlib import Path

import pytest

from synoie.corpus import load_corpus

import worked_example as wx

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def example_corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("wx") / "example.jsonl"
    path.write_text(json.dumps(wx.RECORD) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def example_sentence(example_corpus_path):
    return load_corpus(example_corpus_path)[0]
