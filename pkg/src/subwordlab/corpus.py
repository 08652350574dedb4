"""Corpus ingestion: normalization, whitespace pre-tokenization, word counts."""

from __future__ import annotations

import random
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

BOUNDARY_MARKER = "▁"

_VALID_FORMS = ("NFC", "NFKC")


class CorpusError(Exception):
    """Corpus input could not be read or decoded."""


@dataclass(frozen=True)
class NormalizationConfig:
    """How raw text is normalized before pre-tokenization.

    The configuration is recorded in every model trained from the corpus so
    that encoding applies exactly the transform the trainer saw. `form=None`
    disables Unicode normalization.
    """

    form: str | None = "NFKC"
    lowercase: bool = False
    collapse_whitespace: bool = True

    def __post_init__(self) -> None:
        if self.form is not None and self.form not in _VALID_FORMS:
            raise ValueError(
                f"normalization form must be one of {_VALID_FORMS} or None, got {self.form!r}"
            )

    def to_dict(self) -> dict:
        return {
            "form": self.form,
            "lowercase": self.lowercase,
            "collapse_whitespace": self.collapse_whitespace,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationConfig":
        return cls(
            form=data.get("form"),
            lowercase=bool(data.get("lowercase", False)),
            collapse_whitespace=bool(data.get("collapse_whitespace", True)),
        )


def normalize_text(raw: str, cfg: NormalizationConfig | None = None) -> str:
    """Apply Unicode normalization, optional lowercasing, and whitespace cleanup.

    With `collapse_whitespace` every whitespace run becomes a single U+0020;
    leading and trailing whitespace is stripped either way.
    """
    cfg = cfg or NormalizationConfig()
    text = raw
    if cfg.form is not None:
        text = unicodedata.normalize(cfg.form, text)
    if cfg.lowercase:
        text = text.lower()
    if cfg.collapse_whitespace:
        return " ".join(text.split())
    return text.strip()


def pretokenize(sentence: str) -> list[str]:
    """Split a normalized sentence on whitespace, prefixing each word with the marker.

    Sentences that contain the marker character itself do not round-trip.
    """
    return [BOUNDARY_MARKER + word for word in sentence.split()]


def detokenize(pieces: Iterable[str]) -> str:
    """Invert pretokenize: marker back to space, leading space stripped."""
    text = "".join(pieces).replace(BOUNDARY_MARKER, " ")
    return text[1:] if text.startswith(" ") else text


@dataclass
class WordFrequencyTable:
    """Unique pre-tokenized words with occurrence counts.

    `entries` iterates in lexicographic order. `total_words` is the sum of
    counts and `total_chars` the count-weighted character sum; both are
    validated at construction. The normalization the words were built with
    travels along so trained models can record it.
    """

    entries: dict[str, int]
    total_words: int
    total_chars: int
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)

    def __post_init__(self) -> None:
        if self.total_words != sum(self.entries.values()):
            raise ValueError("total_words does not match entry counts")
        if self.total_chars != sum(c * len(w) for w, c in self.entries.items()):
            raise ValueError("total_chars does not match entry counts")

    @classmethod
    def from_counts(
        cls, counts: dict[str, int], normalization: NormalizationConfig | None = None
    ) -> "WordFrequencyTable":
        entries: dict[str, int] = {}
        for word in sorted(counts):
            count = counts[word]
            if not word:
                raise ValueError("empty word in frequency table")
            if count <= 0:
                raise ValueError(f"non-positive count {count} for word {word!r}")
            entries[word] = count
        return cls(
            entries=entries,
            total_words=sum(entries.values()),
            total_chars=sum(c * len(w) for w, c in entries.items()),
            normalization=normalization or NormalizationConfig(),
        )


def merge_frequency_tables(tables: Iterable[WordFrequencyTable]) -> WordFrequencyTable:
    """Merge shard tables; integer addition makes the result shard-order independent."""
    tables = list(tables)
    if not tables:
        raise ValueError("no tables to merge")
    norm = tables[0].normalization
    for t in tables[1:]:
        if t.normalization != norm:
            raise ValueError("cannot merge tables built with different normalization")
    merged: Counter[str] = Counter()
    for t in tables:
        merged.update(t.entries)
    return WordFrequencyTable.from_counts(dict(merged), norm)


def reservoir_sample(stream: Iterable[str], k: int, seed: int) -> list[str]:
    """Keep a uniform k-sample of the stream, deterministic for a fixed seed."""
    rng = random.Random(seed)
    sample: list[str] = []
    for index, item in enumerate(stream):
        if index < k:
            sample.append(item)
        else:
            j = rng.randint(0, index)
            if j < k:
                sample[j] = item
    return sample


def build_frequency_table(
    sentences: Iterable[str],
    cfg: NormalizationConfig | None = None,
    max_sentences: int | None = None,
    sample_seed: int = 0,
) -> WordFrequencyTable:
    """Count pre-tokenized words over the stream.

    When `max_sentences` is set the stream is reservoir-sampled first, keyed
    by `sample_seed`, so repeated runs over the same stream retain the same
    sentences.
    """
    cfg = cfg or NormalizationConfig()
    if max_sentences is not None:
        if max_sentences < 1:
            raise ValueError("max_sentences must be positive")
        sentences = reservoir_sample(sentences, max_sentences, sample_seed)
    counts: Counter[str] = Counter()
    for sentence in sentences:
        counts.update(pretokenize(normalize_text(sentence, cfg)))
    return WordFrequencyTable.from_counts(dict(counts), cfg)


@dataclass
class LanguageDistribution:
    """Per-language word counts over a tagged corpus."""

    per_language: dict[str, int]
    total: int

    def proportions(self) -> dict[str, float]:
        if self.total == 0:
            return {}
        return {tag: count / self.total for tag, count in self.per_language.items()}


def language_distribution(pairs: Iterable[tuple[str, str]]) -> LanguageDistribution:
    """Count whitespace-delimited words per language tag."""
    counts: Counter[str] = Counter()
    for tag, sentence in pairs:
        if not tag:
            raise ValueError("empty language tag")
        counts[tag] += len(sentence.split())
    per_language = {tag: counts[tag] for tag in sorted(counts)}
    return LanguageDistribution(per_language, sum(per_language.values()))


def iter_text_lines(path: str | Path) -> Iterator[str]:
    """Yield lines of a UTF-8 text file, stripped of line endings.

    Decoding failures report the line number and absolute byte offset; I/O
    failures report the line being read.
    """
    path = Path(path)
    lineno = 0
    offset = 0
    try:
        with open(path, "rb") as handle:
            for raw in handle:
                lineno += 1
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError as exc:
                    raise CorpusError(
                        f"{path}:{lineno}: invalid UTF-8 at byte offset {offset + exc.start}"
                    ) from exc
                offset += len(raw)
                yield line.rstrip("\r\n")
    except OSError as exc:
        raise CorpusError(f"{path}: I/O error near line {lineno + 1}: {exc}") from exc


def iter_tagged_lines(path: str | Path) -> Iterator[tuple[str, str]]:
    """(language tag, sentence) pairs from a directory of <lang>.txt files or a 2-column TSV."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.txt"))
        if not files:
            raise CorpusError(f"{path}: no *.txt files in language directory")
        for part in files:
            for line in iter_text_lines(part):
                if line:
                    yield part.stem, line
        return
    for lineno, line in enumerate(iter_text_lines(path), start=1):
        if not line:
            continue
        if "\t" not in line:
            raise CorpusError(f"{path}:{lineno}: expected 'lang<TAB>sentence'")
        tag, sentence = line.split("\t", 1)
        if not tag:
            raise CorpusError(f"{path}:{lineno}: empty language tag")
        yield tag, sentence
