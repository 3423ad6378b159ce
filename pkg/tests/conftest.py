import os
import sys

import numpy as np
import pytest

# Add repository root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from uwdecode.corpus import CorpusConfig, build_corpus
from uwdecode.decoder import LanguageModel, Lexicon
from uwdecode.experiments import AcousticConfig, ExperimentConfig, RegressorConfig
from uwdecode.frontend import FrontendConfig


@pytest.fixture
def frontend_cfg():
    return FrontendConfig()


@pytest.fixture
def tiny_lexicon():
    return Lexicon.from_words({'a': 1, 'b': 2, 'c': 1})


@pytest.fixture
def tiny_lm(tiny_lexicon):
    return LanguageModel.uniform(tiny_lexicon.words)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def small_corpus_cfg():
    return CorpusConfig(vocab_size=4, words_per_utt=(2, 3), n_train=8, n_dev=2, n_test=3,
                        noise_types=('white', 'band'), seed=7)


@pytest.fixture(scope='session')
def small_corpus(small_corpus_cfg):
    return build_corpus(small_corpus_cfg, FrontendConfig())


@pytest.fixture(scope='session')
def small_experiment_cfg(small_corpus_cfg, tmp_path_factory):
    return ExperimentConfig(
        corpus=small_corpus_cfg,
        acoustic=AcousticConfig(hidden=(16,), context=1, epochs=3, learning_rate=0.05, batch_size=64),
        regressor=RegressorConfig(epochs=2, learning_rate=0.01, batch_size=64),
        th_grid=(1.0, 4.0),
        k_grid=(1.0, 5.0),
        topology_grid=('C1', 'C3'),
        feature_grid=('f1', 'f2'),
        out_dir=str(tmp_path_factory.mktemp('run')),
    ).validate()
