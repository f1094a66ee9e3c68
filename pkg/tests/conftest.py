import pytest

from signgan.config import ExperimentConfig
from signgan.ingestion import load_dataset, write_synthetic_corpus


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Two synthetic signers, 11 frames each: 20 consecutive-frame samples."""
    root = tmp_path_factory.mktemp("corpus")
    write_synthetic_corpus(root, 2, 11, seed=0)
    return root


@pytest.fixture(scope="session")
def samples(corpus):
    got, skipped = load_dataset(corpus)
    assert not skipped
    return got


@pytest.fixture
def tiny_config():
    return ExperimentConfig().replace(
        model={"base_channels": 8},
        training={"parser_epochs": 1, "predictor_epochs": 1},
    )
