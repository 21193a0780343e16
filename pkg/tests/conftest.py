import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mockworld import (  # noqa: E402
    build_mock_docs,
    gazetteer,
    write_gazetteer,
    write_mock_corpus,
)

from ctxner.datagen import (  # noqa: E402
    MockLlmClient,
    generate_positives,
    negative_sampling,
    positive_swap,
)
from ctxner.rerank import train_lexical_scorer  # noqa: E402


@pytest.fixture(scope="session")
def mock_docs():
    return build_mock_docs()


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    return write_mock_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def gazetteer_table():
    return gazetteer()


@pytest.fixture(scope="session")
def gazetteer_file(tmp_path_factory):
    return write_gazetteer(tmp_path_factory.mktemp("gaz") / "gazetteer.tsv")


@pytest.fixture(scope="session")
def mock_dataset(mock_docs):
    """Synthetic retrieval examples generated with the mock LLM."""
    positives, _ = generate_positives(mock_docs, MockLlmClient(), seed=11)
    sampled = negative_sampling(mock_docs, len(positives), seed=11)
    swapped, _ = positive_swap(positives, seed=11)
    return positives, sampled + swapped


@pytest.fixture(scope="session")
def lexical_model_path(tmp_path_factory, mock_dataset):
    positives, negatives = mock_dataset
    path = tmp_path_factory.mktemp("model") / "lexical_scorer.json"
    train_lexical_scorer(positives + negatives, model_path=path)
    return path
