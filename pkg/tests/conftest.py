from __future__ import annotations

import time
from pathlib import Path

import pytest
import torch

from povshift.core import EntitySpec, Gender
from povshift.ingest import load_pov_document
from povshift.ranker import ModelConfig, save_model, train
from povshift.ranker.provider import HashEmbeddingProvider
from povshift.synthetic import generate_corpus, synthetic_examples

DATA = Path(__file__).resolve().parents[1] / "src" / "povshift" / "data"

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def running_example():
    return load_pov_document(DATA / "running_example.json")


@pytest.fixture(scope="session")
def excerpt():
    return load_pov_document(DATA / "running_example_excerpt.json")


@pytest.fixture(scope="session")
def nick() -> EntitySpec:
    return EntitySpec.from_name("Nick Flynn", Gender.MASCULINE)


@pytest.fixture(scope="session")
def synthetic_train():
    return generate_corpus(20, seed=0, prefix="train")


@pytest.fixture(scope="session")
def synthetic_test():
    return generate_corpus(10, seed=1000, prefix="test")


@pytest.fixture(scope="session")
def synthetic_train_examples(synthetic_train):
    return synthetic_examples(synthetic_train)


@pytest.fixture(scope="session")
def trained_run(synthetic_train_examples):
    """Default-config ranker trained on the 20-document synthetic corpus,
    with the wall-clock training time in seconds."""
    start = time.perf_counter()
    model = train(synthetic_train_examples, ModelConfig(seed=0), HashEmbeddingProvider())
    return model, time.perf_counter() - start


@pytest.fixture(scope="session")
def trained(trained_run):
    return trained_run[0]


@pytest.fixture(scope="session")
def model_path(trained, tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("models") / "ranker.povm"
    save_model(trained, path)
    return path
