import random

import pytest

from subwordlab import TrainerConfig, build_frequency_table, train
from subwordlab.corpus import iter_text_lines

from tests.helpers import corpus_lines, make_lexicon


@pytest.fixture(scope="session")
def lexicons():
    """(common word lexicon, capitalized entity lexicon) shared by the suite."""
    common = make_lexicon(random.Random(11), 4000)
    entities = [w.capitalize() for w in make_lexicon(random.Random(12), 600, 3, 5)]
    return common, entities


@pytest.fixture(scope="session")
def small_corpus_path(tmp_path_factory, lexicons):
    """A few hundred KB; quick unit-level training."""
    common, entities = lexicons
    path = tmp_path_factory.mktemp("corpus") / "small.txt"
    lines = corpus_lines(4000, seed=101, lexicon=common[:1500], proper_nouns=entities[:100])
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def small_table(small_corpus_path):
    return build_frequency_table(iter_text_lines(small_corpus_path))


@pytest.fixture(scope="session")
def small_model(small_table):
    """A trained model of modest size; reused wherever a realistic model helps."""
    return train(small_table, TrainerConfig(target_vocab_size=800, seed_size=3000))
