"""Shared test utilities: independent oracles and synthetic data generators.

The oracles here deliberately avoid the library's dynamic programs: they
enumerate, recurse, or recompute in two passes so library results can be
checked against an independent route.
"""

from __future__ import annotations

import itertools
import math
import random
from pathlib import Path

from subwordlab import NormalizationConfig, SubwordModel
from subwordlab.segmenter import UNK_TOKEN

ENTITY_TYPES = ("PER", "ORG", "LOC", "MISC")

_CONSONANTS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"
_CODAS = "lnrst"


def hand_model(probs: dict[str, float], **kwargs) -> SubwordModel:
    """Model from piece -> probability (must sum to ~1)."""
    return SubwordModel(
        {piece: math.log(p) for piece, p in probs.items()},
        kwargs.pop("normalization", NormalizationConfig()),
        **kwargs,
    )


def random_model(rng: random.Random, alphabet: str, max_pieces: int) -> SubwordModel:
    """Random vocabulary of substrings over the alphabet with random probabilities."""
    pieces = set(alphabet[: rng.randint(1, len(alphabet))])
    while len(pieces) < rng.randint(1, max_pieces):
        length = rng.randint(1, 4)
        pieces.add("".join(rng.choice(alphabet) for _ in range(length)))
    weights = {p: rng.uniform(0.05, 1.0) for p in sorted(pieces)}
    total = sum(weights.values())
    return hand_model({p: w / total for p, w in weights.items()})


def enumerate_segmentations(word: str, model: SubwordModel) -> list[tuple[list[str], float]]:
    """Every segmentation of the word, by exhaustive recursion.

    Uses the same problem definition as the segmenter (in-vocabulary pieces,
    single-character fallback wherever no piece starts) but searches all
    paths instead of running the dynamic program. Fallback pieces are NOT
    merged here; scores count one fallback penalty per character.
    """
    vocab = model.log_probs
    unk_score = model.unk_log_prob
    n = len(word)
    results: list[tuple[list[str], float]] = []

    def recurse(pos: int, pieces: list[str], score: float) -> None:
        if pos == n:
            results.append((list(pieces), score))
            return
        found = False
        for end in range(pos + 1, n + 1):
            piece = word[pos:end]
            if piece in vocab:
                found = True
                pieces.append(piece)
                recurse(end, pieces, score + vocab[piece])
                pieces.pop()
        if not found:
            pieces.append(UNK_TOKEN)
            recurse(pos + 1, pieces, score + unk_score)
            pieces.pop()

    recurse(0, [], 0.0)
    return results


def best_segmentation_reference(word: str, model: SubwordModel) -> tuple[list[str], float]:
    """Expected segmenter output: max score, then fewest pieces, then lexicographic."""
    candidates = enumerate_segmentations(word, model)
    best_score = max(score for _, score in candidates)
    tied = [pieces for pieces, score in candidates if score == best_score]
    winner = min(tied, key=lambda pieces: (len(pieces), tuple(pieces)))
    merged: list[str] = []
    for piece in winner:
        if piece == UNK_TOKEN and merged and merged[-1] == UNK_TOKEN:
            continue
        merged.append(piece)
    return merged, best_score


def enumerate_piece_paths(word: str, vocab: dict[str, float]) -> list[tuple[list[str], float]]:
    """All segmentations into vocabulary pieces only (no fallback); log scores."""
    n = len(word)
    results: list[tuple[list[str], float]] = []

    def recurse(pos: int, pieces: list[str], score: float) -> None:
        if pos == n:
            results.append((list(pieces), score))
            return
        for end in range(pos + 1, n + 1):
            piece = word[pos:end]
            if piece in vocab:
                pieces.append(piece)
                recurse(end, pieces, score + vocab[piece])
                pieces.pop()

    recurse(0, [], 0.0)
    return results


def expected_counts_reference(
    entries: dict[str, int], vocab: dict[str, float]
) -> tuple[dict[str, float], float]:
    """Posterior piece counts and corpus log-likelihood by path enumeration."""
    counts: dict[str, float] = {}
    loglik = 0.0
    for word, freq in entries.items():
        paths = enumerate_piece_paths(word, vocab)
        if not paths:
            raise AssertionError(f"no path for {word!r}")
        z = sum(math.exp(score) for _, score in paths)
        loglik += freq * math.log(z)
        for pieces, score in paths:
            posterior = math.exp(score) / z
            for piece in pieces:
                counts[piece] = counts.get(piece, 0.0) + freq * posterior
    return counts, loglik


def pearson_two_pass(xs: list[float], ys: list[float]) -> float | None:
    """Plain two-pass population Pearson correlation."""
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    var_x = sum((x - mean_x) ** 2 for x in xs) / n
    var_y = sum((y - mean_y) ** 2 for y in ys) / n
    if var_x == 0.0 or var_y == 0.0:
        return None
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys)) / n
    return cov / math.sqrt(var_x * var_y)


def entity_spans_reference(labels: list[str]) -> list[tuple[int, int]]:
    """Span extraction by explicit span-id assignment, then grouping."""
    span_ids: list[int | None] = []
    next_id = -1
    open_type: str | None = None
    for label in labels:
        if label == "O":
            span_ids.append(None)
            open_type = None
            continue
        label_type = label.split("-", 1)[1] if "-" in label else label
        if open_type is None or label.startswith("B-") or label_type != open_type:
            next_id += 1
        span_ids.append(next_id)
        open_type = label_type
    spans: list[tuple[int, int]] = []
    for span_id, group in itertools.groupby(
        range(len(span_ids)), key=lambda i: span_ids[i]
    ):
        indices = list(group)
        if span_id is not None:
            spans.append((indices[0], indices[-1] + 1))
    return spans


def random_bio_labels(rng: random.Random, length: int) -> list[str]:
    """BIO sequences incl. malformed ones (I- openings, type switches)."""
    labels = []
    for _ in range(length):
        roll = rng.random()
        if roll < 0.45:
            labels.append("O")
        else:
            prefix = "B-" if roll < 0.75 else "I-"
            labels.append(prefix + rng.choice(ENTITY_TYPES))
    return labels


# ---------------------------------------------------------------------------
# Synthetic corpora


def make_lexicon(rng: random.Random, size: int, min_syllables: int = 1,
                 max_syllables: int = 3) -> list[str]:
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    syllables += [c + v + coda for c in _CONSONANTS[:8] for v in _VOWELS for coda in _CODAS]
    words: set[str] = set()
    while len(words) < size:
        count = rng.randint(min_syllables, max_syllables)
        words.add("".join(rng.choice(syllables) for _ in range(count)))
    return sorted(words)


def _zipf_cumulative(size: int, exponent: float) -> list[float]:
    return list(itertools.accumulate((rank + 1) ** -exponent for rank in range(size)))


def zipf_draw(rng: random.Random, items: list[str], k: int, exponent: float = 1.0) -> list[str]:
    return rng.choices(items, cum_weights=_zipf_cumulative(len(items), exponent), k=k)


def corpus_lines(
    n_sentences: int,
    seed: int,
    lexicon: list[str],
    proper_nouns: list[str],
    zipf_exponent: float = 1.0,
) -> list[str]:
    """Sentences with Zipfian word frequencies, sentence-initial capitals, and
    occasional capitalized proper nouns. Lower exponents flatten the
    distribution, spreading mass onto rarer words."""
    rng = random.Random(seed)
    cum = _zipf_cumulative(len(lexicon), zipf_exponent)
    lines = []
    for _ in range(n_sentences):
        words = rng.choices(lexicon, cum_weights=cum, k=rng.randint(4, 14))
        words[0] = words[0].capitalize()
        if proper_nouns and rng.random() < 0.3:
            position = rng.randint(1, len(words))
            words.insert(position, rng.choice(proper_nouns))
        lines.append(" ".join(words))
    return lines


def conll_sentences(
    n_sentences: int,
    seed: int,
    lexicon: list[str],
    entity_lexicon: list[str],
    entity_rate: float = 0.18,
    zipf_exponent: float = 1.0,
) -> list[tuple[list[str], list[str]]]:
    """Synthetic token-classification data: common words labeled O, spans of
    1-3 capitalized rare words labeled B-X/I-X."""
    rng = random.Random(seed)
    cum = _zipf_cumulative(len(lexicon), zipf_exponent)
    sentences = []
    for _ in range(n_sentences):
        tokens: list[str] = []
        labels: list[str] = []
        target_len = rng.randint(5, 12)
        while len(tokens) < target_len:
            if rng.random() < entity_rate:
                entity_type = rng.choice(ENTITY_TYPES)
                for position in range(rng.randint(1, 3)):
                    tokens.append(rng.choice(entity_lexicon))
                    labels.append(("B-" if position == 0 else "I-") + entity_type)
            else:
                tokens.append(rng.choices(lexicon, cum_weights=cum, k=1)[0])
                labels.append("O")
        sentences.append((tokens, labels))
    return sentences


def write_conll(
    path: Path,
    sentences: list[tuple[list[str], list[str]]],
    labels_override: list[list[str]] | None = None,
) -> Path:
    with open(path, "w", encoding="utf-8") as handle:
        for index, (tokens, labels) in enumerate(sentences):
            final = labels_override[index] if labels_override else labels
            for token, label in zip(tokens, final):
                handle.write(f"{token} {label}\n")
            handle.write("\n")
    return path


def corrupt_label(label: str, rng: random.Random) -> str:
    if label == "O":
        return "B-" + rng.choice(ENTITY_TYPES)
    return "O"
