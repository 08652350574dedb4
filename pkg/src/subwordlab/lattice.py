"""Per-word segmentation lattices and the dynamic programs that run on them.

A lattice edge is (start, end, piece, log_prob) over character positions of a
single word. Edges are kept sorted by start position; every routine below
relies on that order so a node's score is final before any edge leaves it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

NEG_INF = float("-inf")

Edge = tuple[int, int, str, float]


@dataclass
class SegmentationLattice:
    """All in-vocabulary substring spans of one word."""

    word: str
    edges: list[Edge]


def build_lattice(
    word: str, pieces: Mapping[str, float], max_piece_length: int | None = None
) -> SegmentationLattice:
    """One edge per (position, substring) whose substring is an in-vocabulary piece.

    `max_piece_length` bounds the scan; pass the vocabulary's longest piece
    length to skip lookups that cannot match.
    """
    n = len(word)
    limit = n if max_piece_length is None else max_piece_length
    edges: list[Edge] = []
    for i in range(n):
        hi = min(n, i + limit)
        for j in range(i + 1, hi + 1):
            piece = word[i:j]
            log_prob = pieces.get(piece)
            if log_prob is not None:
                edges.append((i, j, piece, log_prob))
    return SegmentationLattice(word, edges)


def log_add(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def edge_marginals(n: int, edges: Sequence[Edge]) -> tuple[float, list[float]]:
    """Forward-backward over the lattice in log space.

    Returns (log Z, posterior weight per edge). Z is the total probability of
    all full segmentations; weights sum to the expected piece count per
    position. A pathless lattice returns (-inf, []).
    """
    alpha = [NEG_INF] * (n + 1)
    alpha[0] = 0.0
    for i, j, _, lp in edges:
        a = alpha[i]
        if a == NEG_INF:
            continue
        alpha[j] = log_add(alpha[j], a + lp)
    z = alpha[n]
    if z == NEG_INF:
        return NEG_INF, []
    beta = [NEG_INF] * (n + 1)
    beta[n] = 0.0
    for idx in range(len(edges) - 1, -1, -1):
        i, j, _, lp = edges[idx]
        b = beta[j]
        if b == NEG_INF:
            continue
        beta[i] = log_add(beta[i], lp + b)
    exp = math.exp
    return z, [exp(alpha[i] + lp + beta[j] - z) for i, j, _, lp in edges]


def viterbi_best(
    n: int, edges: Sequence[Edge]
) -> tuple[float, int, tuple[str, ...]] | None:
    """Highest-scoring full path: (score, piece count, piece sequence).

    Ties resolve to fewer pieces, then the lexicographically smallest piece
    sequence, so decoding is deterministic. Returns None when no path spans
    the word.
    """
    best: list[tuple[float, int, tuple[str, ...]] | None] = [None] * (n + 1)
    best[0] = (0.0, 0, ())
    for i, j, piece, lp in edges:
        at = best[i]
        if at is None:
            continue
        cand = (at[0] + lp, at[1] + 1, at[2] + (piece,))
        cur = best[j]
        if cur is None or _beats(cand, cur):
            best[j] = cand
    return best[n]


def _beats(cand: tuple[float, int, tuple[str, ...]], cur: tuple[float, int, tuple[str, ...]]) -> bool:
    if cand[0] != cur[0]:
        return cand[0] > cur[0]
    if cand[1] != cur[1]:
        return cand[1] < cur[1]
    return cand[2] < cur[2]


def viterbi_score(n: int, edges: Sequence[Edge], exclude: str | None = None) -> float:
    """Best full-path score, optionally skipping every edge of one piece."""
    best = [NEG_INF] * (n + 1)
    best[0] = 0.0
    for i, j, piece, lp in edges:
        if piece == exclude:
            continue
        a = best[i]
        if a == NEG_INF:
            continue
        s = a + lp
        if s > best[j]:
            best[j] = s
    return best[n]
