import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cohemark import FcmConfig, HashEmbedder, NsscConfig, train
from cohemark.sampler import CorpusMockLm
from cohemark.synthcorpus import make_corpus


@pytest.fixture(scope="session")
def pool():
    return make_corpus(sentences_per_topic=150, seed=1)


@pytest.fixture(scope="session")
def embedder():
    return HashEmbedder()


@pytest.fixture(scope="session")
def model(pool, embedder):
    return train(embedder.embed_texts(pool), FcmConfig(seed=7), embedder.spec.identity)


@pytest.fixture(scope="session")
def nssc():
    return NsscConfig()


@pytest.fixture(scope="session")
def mock_lm(pool, embedder):
    return CorpusMockLm(pool, similarity_weighting=True, embedder=embedder)
