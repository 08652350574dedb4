"""Subword tokenization lab.

Trains unigram language-model vocabularies of exactly-fixed sizes from raw
text, segments text with Viterbi decoding, and measures how segmentation
interacts with token-classification labels.
"""

from .corpus import (
    BOUNDARY_MARKER,
    CorpusError,
    LanguageDistribution,
    NormalizationConfig,
    WordFrequencyTable,
    build_frequency_table,
    detokenize,
    language_distribution,
    merge_frequency_tables,
    normalize_text,
    pretokenize,
)
from .lattice import SegmentationLattice, build_lattice
from .trainer import (
    EmptyCorpusError,
    PathlessWordError,
    PieceTable,
    SeedVocabulary,
    TrainerConfig,
    TrainerError,
    VocabularyFloorError,
    em_round,
    make_seed_vocabulary,
    prune_round,
    train,
)
from .segmenter import (
    DEFAULT_SPECIAL_TOKENS,
    Encoding,
    ModelFormatError,
    SubwordModel,
    UNK_TOKEN,
    decode,
    encode,
    fragmentation,
    load_model,
    save_model,
    segment_scored,
    viterbi_segment,
)
from .analysis import (
    ConllFormatError,
    CorrelationReport,
    LabeledSentence,
    SegmentationStats,
    build_report,
    canonical_json,
    emit_report,
    entity_spans,
    fragmentation_error_correlation,
    is_entity_token,
    parse_conll,
    segmentation_stats,
    with_predictions,
)

__version__ = "0.1.0"
