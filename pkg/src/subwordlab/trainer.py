"""Fixed-size unigram vocabulary training.

Seed extraction enumerates character and substring candidates from the word
table, EM re-estimates piece probabilities over per-word segmentation
lattices, and iterative pruning drops the lowest-utility pieces until the
vocabulary lands on the requested size exactly.

All heavy passes run over fixed-size chunks of the (lexicographically
ordered) unique words and merge partial results in chunk order, so results
are bit-identical for any worker count.
"""

from __future__ import annotations

import logging
import math
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

from .corpus import WordFrequencyTable
from .lattice import NEG_INF, Edge, edge_marginals, viterbi_best, viterbi_score
from .segmenter import DEFAULT_SPECIAL_TOKENS, SubwordModel

logger = logging.getLogger(__name__)

_CHUNK_WORDS = 256
_MIN_EXPECTED_COUNT = 1e-300

# word, frequency, candidate piece spans (start, end, surface)
_Work = tuple[str, int, list[tuple[int, int, str]]]
_T = TypeVar("_T")


class TrainerError(Exception):
    """Vocabulary training failed."""


class EmptyCorpusError(TrainerError):
    pass


class PathlessWordError(TrainerError):
    """A word has no segmentation path under the current pieces."""


class VocabularyFloorError(TrainerError):
    """Required pieces alone exceed the requested vocabulary size."""


@dataclass(frozen=True)
class TrainerConfig:
    """Training knobs; `target_vocab_size` counts special tokens.

    `seed_size=None` resolves to min(1_000_000, 25 x target).
    """

    target_vocab_size: int
    seed_size: int | None = None
    max_piece_length: int = 16
    shrink_factor: float = 0.75
    em_iterations_per_round: int = 2
    character_coverage: float = 0.9995

    def __post_init__(self) -> None:
        if self.target_vocab_size < 1:
            raise ValueError("target_vocab_size must be positive")
        if self.seed_size is None:
            object.__setattr__(
                self, "seed_size", min(1_000_000, 25 * self.target_vocab_size)
            )
        if self.seed_size < 1:
            raise ValueError("seed_size must be positive")
        if self.max_piece_length < 1:
            raise ValueError("max_piece_length must be positive")
        if not 0.0 < self.shrink_factor < 1.0:
            raise ValueError("shrink_factor must be in (0, 1)")
        if self.em_iterations_per_round < 1:
            raise ValueError("em_iterations_per_round must be positive")
        if not 0.0 < self.character_coverage <= 1.0:
            raise ValueError("character_coverage must be in (0, 1]")


@dataclass
class SeedVocabulary:
    """Candidate pieces with raw counts, plus the coverage character set."""

    pieces: dict[str, int]
    required_chars: frozenset[str]


@dataclass
class PieceTable:
    """Piece log-probabilities for one EM/prune generation.

    The probabilities form a distribution (sum of exp = 1 within 1e-9) and
    the coverage characters in `required_chars` are always present.
    """

    log_probs: dict[str, float]
    required_chars: frozenset[str] = frozenset()
    generation: int = 0

    def __len__(self) -> int:
        return len(self.log_probs)

    def max_piece_length(self) -> int:
        return max(len(p) for p in self.log_probs)

    def validate(self, tolerance: float = 1e-9) -> None:
        mass = math.fsum(math.exp(lp) for lp in self.log_probs.values())
        if abs(mass - 1.0) > tolerance:
            raise ValueError(f"piece probabilities sum to {mass!r}")
        missing = self.required_chars - self.log_probs.keys()
        if missing:
            raise ValueError(f"required pieces missing: {sorted(missing)}")

    @classmethod
    def from_counts(
        cls,
        counts: dict[str, int],
        required_chars: frozenset[str] = frozenset(),
        generation: int = 0,
    ) -> "PieceTable":
        total = sum(counts.values())
        if total <= 0:
            raise ValueError("no counts to normalize")
        log_probs = {p: math.log(counts[p] / total) for p in sorted(counts)}
        return cls(log_probs, required_chars, generation)


def make_seed_vocabulary(table: WordFrequencyTable, cfg: TrainerConfig) -> SeedVocabulary:
    """Coverage characters plus the best multi-character substring candidates.

    Characters are taken by descending frequency until `character_coverage`
    of the character mass is reached. Substrings of length 2..max_piece_length
    are counted exactly (per starting position, weighted by word frequency)
    over the words those characters fully cover, ranked by count x length,
    and truncated to the seed size.
    """
    if not table.entries:
        raise EmptyCorpusError("empty corpus")

    char_counts: Counter[str] = Counter()
    for word, freq in table.entries.items():
        for ch in word:
            char_counts[ch] += freq
    total_chars = sum(char_counts.values())
    threshold = cfg.character_coverage * total_chars
    required: list[str] = []
    covered_mass = 0
    for ch, count in sorted(char_counts.items(), key=lambda kv: (-kv[1], kv[0])):
        required.append(ch)
        covered_mass += count
        if covered_mass >= threshold:
            break
    required_chars = frozenset(required)
    if cfg.seed_size < len(required_chars):
        raise VocabularyFloorError(
            f"seed_size {cfg.seed_size} cannot hold the {len(required_chars)} coverage characters"
        )

    substr_counts: Counter[str] = Counter()
    for word, freq in table.entries.items():
        if not required_chars.issuperset(word):
            continue
        n = len(word)
        for i in range(n):
            hi = min(n, i + cfg.max_piece_length)
            for j in range(i + 2, hi + 1):
                substr_counts[word[i:j]] += freq

    budget = cfg.seed_size - len(required_chars)
    ranked = sorted(substr_counts.items(), key=lambda kv: (-kv[1] * len(kv[0]), kv[0]))
    pieces: dict[str, int] = {ch: char_counts[ch] for ch in sorted(required_chars)}
    for surface, count in ranked[:budget]:
        pieces[surface] = count
    return SeedVocabulary(pieces, required_chars)


def _map_chunks(
    fn: Callable[[list[_Work]], _T], work: list[_Work], threads: int
) -> list[_T]:
    """Apply fn per fixed-size chunk; results come back in chunk order."""
    chunks = [work[k : k + _CHUNK_WORDS] for k in range(0, len(work), _CHUNK_WORDS)]
    if threads <= 1 or len(chunks) <= 1:
        return [fn(chunk) for chunk in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def _prepare_work(entries: dict[str, int], vocab: Iterable[str], max_len: int) -> list[_Work]:
    candidate = set(vocab)
    work: list[_Work] = []
    intern = sys.intern
    for word, freq in entries.items():
        n = len(word)
        spans: list[tuple[int, int, str]] = []
        for i in range(n):
            hi = min(n, i + max_len)
            for j in range(i + 1, hi + 1):
                piece = word[i:j]
                if piece in candidate:
                    spans.append((i, j, intern(piece)))
        work.append((word, freq, spans))
    return work


def _edges_for(spans: list[tuple[int, int, str]], log_probs: dict[str, float]) -> list[Edge]:
    edges: list[Edge] = []
    get = log_probs.get
    for i, j, piece in spans:
        lp = get(piece)
        if lp is not None:
            edges.append((i, j, piece, lp))
    return edges


def _expected_counts(
    work: list[_Work], log_probs: dict[str, float], threads: int
) -> tuple[dict[str, float], float]:
    """E-step: posterior piece counts and the corpus log-likelihood."""

    def run(chunk: list[_Work]) -> tuple[dict[str, float], float]:
        expected: dict[str, float] = {}
        loglik = 0.0
        for word, freq, spans in chunk:
            edges = _edges_for(spans, log_probs)
            z, weights = edge_marginals(len(word), edges)
            if z == NEG_INF:
                raise PathlessWordError(f"no segmentation path for word {word!r}")
            loglik += freq * z
            for (_, _, piece, _), weight in zip(edges, weights):
                expected[piece] = expected.get(piece, 0.0) + freq * weight
        return expected, loglik

    expected: dict[str, float] = {}
    loglik = 0.0
    for chunk_expected, chunk_ll in _map_chunks(run, work, threads):
        loglik += chunk_ll
        for piece, count in chunk_expected.items():
            expected[piece] = expected.get(piece, 0.0) + count
    return expected, loglik


def _m_step(expected: dict[str, float], previous: PieceTable) -> PieceTable:
    """Normalize expected counts into a fresh distribution.

    Every prior piece keeps an entry: posterior mass that underflows to zero
    is clamped to a negligible floor so log-probs stay finite and removal
    remains the pruner's decision. The clamp perturbs the distribution by
    ~1e-300, far below the 1e-9 normalization tolerance.
    """
    counts = {
        piece: max(expected.get(piece, 0.0), _MIN_EXPECTED_COUNT)
        for piece in sorted(previous.log_probs)
    }
    total = math.fsum(counts.values())
    log_probs = {piece: math.log(count / total) for piece, count in counts.items()}
    return PieceTable(log_probs, previous.required_chars, previous.generation + 1)


def em_round(
    table: WordFrequencyTable, pieces: PieceTable, *, threads: int = 1
) -> tuple[PieceTable, float]:
    """One EM step over the word table.

    The E-step marginalizes over every segmentation of each word (forward-
    backward, weighted by word frequency); the M-step renormalizes expected
    counts. The returned log-likelihood is evaluated under the input table,
    so successive calls report a non-decreasing sequence.
    """
    work = _prepare_work(table.entries, pieces.log_probs, pieces.max_piece_length())
    expected, loglik = _expected_counts(work, pieces.log_probs, threads)
    return _m_step(expected, pieces), loglik


def _viterbi_losses(
    work: list[_Work], log_probs: dict[str, float], threads: int
) -> dict[str, float]:
    """Per-piece likelihood loss if removed, summed over Viterbi paths.

    Only pieces on a word's best path can lose anything for that word; the
    loss is freq x (best score - best score without the piece). Pieces whose
    removal leaves a word pathless get infinite loss.
    """

    def run(chunk: list[_Work]) -> dict[str, float]:
        losses: dict[str, float] = {}
        for word, freq, spans in chunk:
            edges = _edges_for(spans, log_probs)
            n = len(word)
            best = viterbi_best(n, edges)
            if best is None:
                raise PathlessWordError(f"no segmentation path for word {word!r}")
            score, _, path = best
            for piece in dict.fromkeys(path):
                alternative = viterbi_score(n, edges, exclude=piece)
                if alternative == NEG_INF:
                    losses[piece] = math.inf
                else:
                    losses[piece] = losses.get(piece, 0.0) + freq * (score - alternative)
        return losses

    losses: dict[str, float] = {}
    for chunk_losses in _map_chunks(run, work, threads):
        for piece, loss in chunk_losses.items():
            losses[piece] = losses.get(piece, 0.0) + loss
    return losses


def _apply_prune(
    pieces: PieceTable, losses: dict[str, float], shrink_factor: float, floor: int
) -> PieceTable:
    n = len(pieces)
    keep = max(min(math.ceil(n * shrink_factor), n - 1), floor)
    required = [p for p in pieces.log_probs if p in pieces.required_chars]
    if len(required) > keep:
        raise VocabularyFloorError("vocabulary floor exceeds target")
    removable = [p for p in pieces.log_probs if p not in pieces.required_chars]
    removable.sort(key=lambda p: (-losses.get(p, 0.0), p))
    kept = sorted(required + removable[: keep - len(required)])
    total = _log_sum_exp(pieces.log_probs[p] for p in kept)
    log_probs = {p: pieces.log_probs[p] - total for p in kept}
    return PieceTable(log_probs, pieces.required_chars, pieces.generation + 1)


def _log_sum_exp(values: Iterable[float]) -> float:
    values = list(values)
    top = max(values)
    return top + math.log(math.fsum(math.exp(v - top) for v in values))


def prune_round(
    table: WordFrequencyTable,
    pieces: PieceTable,
    cfg: TrainerConfig,
    *,
    floor: int | None = None,
    threads: int = 1,
) -> PieceTable:
    """Shrink the piece table by the configured factor, never below the floor.

    Unused pieces (loss 0) go first; coverage characters always survive. The
    kept probabilities are renormalized. `floor` defaults to the target size
    minus the default special-token count.
    """
    if floor is None:
        floor = cfg.target_vocab_size - len(DEFAULT_SPECIAL_TOKENS)
    if len(pieces) <= floor:
        raise ValueError(f"piece table already at or below the prune floor {floor}")
    work = _prepare_work(table.entries, pieces.log_probs, pieces.max_piece_length())
    losses = _viterbi_losses(work, pieces.log_probs, threads)
    return _apply_prune(pieces, losses, cfg.shrink_factor, floor)


def train(
    table: WordFrequencyTable,
    cfg: TrainerConfig,
    *,
    specials: Sequence[str] = DEFAULT_SPECIAL_TOKENS,
    threads: int = 1,
) -> SubwordModel:
    """Train a model with exactly `cfg.target_vocab_size` entries.

    Words containing characters outside the coverage set are excluded from
    EM and pruning (they have no lattice path). Piece IDs are assigned after
    the specials by descending log-probability, ties broken lexicographically.
    """
    specials = tuple(specials)
    if len(set(specials)) != len(specials):
        raise ValueError("duplicate special token")
    if not table.entries:
        raise EmptyCorpusError("empty corpus")

    seed = make_seed_vocabulary(table, cfg)
    floor = cfg.target_vocab_size - len(specials)
    if cfg.target_vocab_size < len(specials) + len(seed.required_chars) + 1:
        raise VocabularyFloorError("vocabulary floor exceeds target")

    covered = {
        word: freq
        for word, freq in table.entries.items()
        if seed.required_chars.issuperset(word)
    }
    dropped = len(table.entries) - len(covered)
    if dropped:
        logger.info("excluding %d words outside character coverage", dropped)
    if not covered:
        raise TrainerError("no corpus word is fully covered by the coverage characters")

    pieces = PieceTable.from_counts(seed.pieces, seed.required_chars)
    work = _prepare_work(covered, pieces.log_probs, cfg.max_piece_length)

    round_index = 0
    while True:
        loglik = NEG_INF
        for _ in range(cfg.em_iterations_per_round):
            expected, loglik = _expected_counts(work, pieces.log_probs, threads)
            pieces = _m_step(expected, pieces)
        logger.info("round=%d vocab=%d loglik=%.6f", round_index, len(pieces), loglik)
        if len(pieces) <= floor:
            break
        losses = _viterbi_losses(work, pieces.log_probs, threads)
        pieces = _apply_prune(pieces, losses, cfg.shrink_factor, floor)
        surviving = pieces.log_probs
        work = [
            (word, freq, [s for s in spans if s[2] in surviving])
            for word, freq, spans in work
        ]
        round_index += 1

    if len(pieces) != floor:
        raise TrainerError(
            f"corpus supports only {len(pieces)} pieces; "
            f"target {cfg.target_vocab_size} needs {floor} after {len(specials)} specials"
        )
    ordered = dict(sorted(pieces.log_probs.items(), key=lambda kv: (-kv[1], kv[0])))
    return SubwordModel(
        log_probs=ordered,
        normalization=table.normalization,
        specials=specials,
    )
