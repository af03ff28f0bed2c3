from __future__ import annotations

import json
from pathlib import Path

import pytest

from iccc.udtree import DepTree, ReadReport, read_conllu_file

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def golden_trees() -> dict[str, DepTree]:
    report = ReadReport()
    trees = {t.caption_ref[1]: t for t in read_conllu_file(DATA_DIR / "golden20.conllu", report)}
    assert report.rejected == 0, report.as_dict()
    return trees


@pytest.fixture(scope="session")
def golden_units() -> dict:
    return json.loads((DATA_DIR / "golden20_units.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def mini_trees() -> list[DepTree]:
    report = ReadReport()
    trees = list(read_conllu_file(DATA_DIR / "mini_corpus.conllu", report))
    assert report.rejected == 0, report.as_dict()
    assert len(trees) == 1000
    return trees


@pytest.fixture(scope="session")
def mini_paths() -> dict[str, Path]:
    return {
        "records": DATA_DIR / "mini_corpus.jsonl",
        "conllu": DATA_DIR / "mini_corpus.conllu",
    }
