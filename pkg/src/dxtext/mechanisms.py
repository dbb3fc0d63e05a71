"""Word-level sanitization mechanisms.

* ``laplace-dx``: add multidimensional Laplace noise to the embedding and
  snap to the nearest vocabulary word.
* ``laplace-dx-fixed``: the same, followed by a rank-based resampling step
  that only looks at the snapped word.
* ``exponential-baseline``: sample a replacement with probability
  proportional to ``exp(-epsilon/2 * ||w - x||)``.

The 1-D Laplace mechanism over positive integers is included as the
reference behaviour.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .noise import sample_laplace_1d, sample_noise_batch, sample_noise
from .vocab import Vocabulary, _smallest_k, distances, lookup, nearest_neighbors, pairwise_distances

LAPLACE = "laplace-dx"
LAPLACE_FIXED = "laplace-dx-fixed"
EXPONENTIAL = "exponential-baseline"
VARIANTS = (LAPLACE, LAPLACE_FIXED, EXPONENTIAL)

# temperature constants reported for the rank-based fix
DEFAULT_C = {"glove-wiki-300": 0.04, "word2vec-300": 0.007}

# ranks whose cumulative tail mass falls below this are dropped
RANK_TAIL_MASS = 1e-12


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    variant: str = LAPLACE
    c: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.variant == LAPLACE_FIXED and not (self.c is not None and self.c > 0):
            raise ValueError(f"{LAPLACE_FIXED} needs a positive temperature c")


@dataclass(frozen=True)
class SanitizedToken:
    original: str
    output: str
    in_vocabulary: bool
    punctuation: bool = False
    changed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "changed", self.original != self.output)

    def to_dict(self) -> dict:
        return {
            "original": self.original,
            "output": self.output,
            "changed": self.changed,
            "in_vocabulary": self.in_vocabulary,
            "punctuation": self.punctuation,
        }


@dataclass
class SanitizedText:
    """Token report for one sanitized text plus its layout."""

    tokens: List[SanitizedToken]
    epsilon: float
    # per line, per whitespace chunk: indices into ``tokens``
    layout: List[List[List[int]]] = field(default_factory=list, repr=False)

    @property
    def sanitized_count(self) -> int:
        return sum(1 for t in self.tokens if t.in_vocabulary)

    @property
    def composed_epsilon(self) -> float:
        """Privacy level of the whole text under sequential composition."""
        return self.sanitized_count * self.epsilon

    @property
    def text(self) -> str:
        lines = []
        for line in self.layout:
            chunks = ["".join(self.tokens[i].output for i in chunk) for chunk in line]
            lines.append(" ".join(chunks))
        return "\n".join(lines)


# --------------------------------------------------------------------------
# multidimensional Laplace


def perturb_embedding(w, epsilon: float, rng: np.random.Generator, noise=None) -> np.ndarray:
    """Return ``w + eta`` with ``eta`` drawn from the multidimensional Laplace law.

    ``noise`` may supply a pre-drawn :class:`~dxtext.noise.NoiseVector`.
    """
    w = np.asarray(w, dtype=np.float64)
    if noise is None:
        noise = sample_noise(w.shape[0], epsilon, rng)
    if noise.dimension != w.shape[0]:
        raise ValueError(f"noise has dimension {noise.dimension}, embedding {w.shape[0]}")
    return w + noise.vector


def sanitize_word_laplace(vocab: Vocabulary, word: int, epsilon: float, rng: np.random.Generator) -> int:
    w_star = perturb_embedding(vocab.embedding(word), epsilon, rng)
    ids, _ = nearest_neighbors(vocab, w_star[None, :])
    return int(ids[0])


def sanitize_laplace_batch(vocab: Vocabulary, words: Sequence[int], epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`sanitize_word_laplace` over many words."""
    words = np.asarray(words, dtype=np.int64)
    W = vocab.matrix[words].astype(np.float64)
    W += sample_noise_batch(vocab.dimension, epsilon, rng, len(words))
    ids, _ = nearest_neighbors(vocab, W)
    return ids


# --------------------------------------------------------------------------
# rank-based post-processing


def rank_horizon(size: int, epsilon: float, c: float) -> int:
    """Largest rank kept in the sampling table for a vocabulary of ``size`` words."""
    t = c * epsilon
    keep = math.ceil(-math.log(RANK_TAIL_MASS) / t) if t > 0 else size
    return int(min(size - 1, keep))


def rank_cdf(size: int, epsilon: float, c: float) -> np.ndarray:
    """Cumulative probabilities of ranks ``0..K`` under ``exp(-c eps rank)``.

    The last entry is exactly 1.
    """
    if not epsilon > 0 or not c > 0:
        raise ValueError("epsilon and c must be positive")
    K = rank_horizon(size, epsilon, c)
    logw = -c * epsilon * np.arange(K + 1, dtype=np.float64)
    p = np.exp(logw - logw.max())
    cdf = np.cumsum(p / p.sum())
    cdf[-1] = 1.0
    return cdf


def rank_probabilities(size: int, epsilon: float, c: float) -> np.ndarray:
    return np.diff(rank_cdf(size, epsilon, c), prepend=0.0)


def sample_rank(size: int, epsilon: float, c: float, rng: np.random.Generator, count: Optional[int] = None):
    cdf = rank_cdf(size, epsilon, c)
    u = rng.random(count)
    r = np.searchsorted(cdf, u, side="right")
    return int(r) if count is None else r


def neighbor_at_rank(vocab: Vocabulary, center: int, rank: int) -> int:
    """The word ranked ``rank`` from ``center`` (rank 0 is ``center`` itself)."""
    if rank == 0:
        return int(center)
    d = distances(vocab, vocab.embedding(center))
    d[center] = np.inf
    return int(_smallest_k(d, rank)[-1])


def rank_post_process(vocab: Vocabulary, x_star: int, epsilon: float, c: float, rng: np.random.Generator) -> int:
    """Resample around the snapped word ``x_star``.

    Word ``x`` is returned with probability proportional to
    ``exp(-c * epsilon * rank(x_star, x))``. Only ``x_star`` is consulted, so
    the step is post-processing of the private output.
    """
    rank = sample_rank(vocab.size, epsilon, c, rng)
    return neighbor_at_rank(vocab, x_star, rank)


def sanitize_word_fixed(vocab: Vocabulary, word: int, epsilon: float, c: float, rng: np.random.Generator) -> int:
    x_star = sanitize_word_laplace(vocab, word, epsilon, rng)
    return rank_post_process(vocab, x_star, epsilon, c, rng)


def rank_post_process_batch(vocab: Vocabulary, x_stars: Sequence[int], epsilon: float, c: float, rng: np.random.Generator) -> np.ndarray:
    x_stars = np.asarray(x_stars, dtype=np.int64)
    ranks = sample_rank(vocab.size, epsilon, c, rng, count=len(x_stars))
    return np.array([neighbor_at_rank(vocab, int(x), int(r)) for x, r in zip(x_stars, ranks)], dtype=np.int64)


# --------------------------------------------------------------------------
# exponential mechanism baseline


def exponential_probabilities(vocab: Vocabulary, word: int, epsilon: float) -> np.ndarray:
    """Replacement law ``exp(-eps/2 ||w - x||)`` normalized over the vocabulary."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    logw = -0.5 * epsilon * distances(vocab, vocab.embedding(word))
    p = np.exp(logw - logw.max())
    return p / p.sum()


def _sample_from_logits(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    logits = logits - logits.max(axis=1, keepdims=True)
    cdf = np.cumsum(np.exp(logits), axis=1)
    u = rng.random(logits.shape[0]) * cdf[:, -1]
    out = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(out, logits.shape[1] - 1)


def sanitize_word_exponential(vocab: Vocabulary, word: int, epsilon: float, rng: np.random.Generator) -> int:
    logits = -0.5 * epsilon * distances(vocab, vocab.embedding(word))
    return int(_sample_from_logits(logits[None, :], rng)[0])


def sanitize_exponential_batch(vocab: Vocabulary, words: Sequence[int], epsilon: float, rng: np.random.Generator) -> np.ndarray:
    words = np.asarray(words, dtype=np.int64)
    out = np.empty(len(words), dtype=np.int64)
    rows = max(1, 2_000_000 // vocab.size)
    for start in range(0, len(words), rows):
        block = words[start:start + rows]
        D = pairwise_distances(vocab, vocab.matrix[block])
        out[start:start + rows] = _sample_from_logits(-0.5 * epsilon * D, rng)
    return out


# --------------------------------------------------------------------------
# dispatch


def sanitize_word(vocab: Vocabulary, word: int, params: PrivacyParams, rng: np.random.Generator) -> int:
    if params.variant == LAPLACE:
        return sanitize_word_laplace(vocab, word, params.epsilon, rng)
    if params.variant == LAPLACE_FIXED:
        return sanitize_word_fixed(vocab, word, params.epsilon, params.c, rng)
    return sanitize_word_exponential(vocab, word, params.epsilon, rng)


def sanitize_batch(vocab: Vocabulary, words: Sequence[int], params: PrivacyParams, rng: np.random.Generator) -> np.ndarray:
    """Sanitize many words independently with the selected variant."""
    if params.variant == LAPLACE:
        return sanitize_laplace_batch(vocab, words, params.epsilon, rng)
    if params.variant == LAPLACE_FIXED:
        x_stars = sanitize_laplace_batch(vocab, words, params.epsilon, rng)
        return rank_post_process_batch(vocab, x_stars, params.epsilon, params.c, rng)
    return sanitize_exponential_batch(vocab, words, params.epsilon, rng)


# --------------------------------------------------------------------------
# 1-D reference


def laplace_1d_mechanism(a: int, epsilon: float, rng: np.random.Generator, size: Optional[int] = None):
    """``a + Laplace(1/epsilon)`` rounded to the nearest integer, at least 1."""
    if a < 1:
        raise ValueError(f"a must be a positive integer, got {a}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    noisy = np.rint(a + sample_laplace_1d(1.0 / epsilon, rng, size=size))
    out = np.maximum(noisy, 1).astype(np.int64)
    return int(out) if size is None else out


# --------------------------------------------------------------------------
# text pipeline

_PUNCT = set(string.punctuation) | set("\u201c\u201d\u2018\u2019\u00ab\u00bb\u2026\u2013\u2014")


def split_chunk(chunk: str) -> List[tuple]:
    """Split one whitespace-delimited chunk into ``(piece, is_punctuation)``.

    Leading and trailing punctuation runs become their own pieces.
    """
    i, j = 0, len(chunk)
    while i < j and chunk[i] in _PUNCT:
        i += 1
    while j > i and chunk[j - 1] in _PUNCT:
        j -= 1
    pieces = []
    if i > 0:
        pieces.append((chunk[:i], True))
    if j > i:
        pieces.append((chunk[i:j], False))
    if j < len(chunk):
        pieces.append((chunk[j:], True))
    return pieces


def sanitize_text(vocab: Vocabulary, text: str, params: PrivacyParams, rng: np.random.Generator) -> SanitizedText:
    """Sanitize ``text`` word by word.

    Punctuation is split off and passed through; out-of-vocabulary words are
    passed through and do not count toward the composed privacy level.
    Output words are the vocabulary's spelling.
    """
    tokens: List[SanitizedToken] = []
    layout: List[List[List[int]]] = []
    if text == "":
        return SanitizedText(tokens, params.epsilon, layout)
    for line in text.split("\n"):
        line_layout = []
        for chunk in line.split():
            idx = []
            for piece, is_punct in split_chunk(chunk):
                if is_punct:
                    tok = SanitizedToken(piece, piece, in_vocabulary=False, punctuation=True)
                else:
                    wid = lookup(vocab, piece)
                    if wid is None:
                        tok = SanitizedToken(piece, piece, in_vocabulary=False)
                    else:
                        out = sanitize_word(vocab, wid, params, rng)
                        tok = SanitizedToken(piece, vocab.words[out], in_vocabulary=True)
                idx.append(len(tokens))
                tokens.append(tok)
            line_layout.append(idx)
        layout.append(line_layout)
    return SanitizedText(tokens, params.epsilon, layout)
