"""Selection conditions, neighbor-gap statistics and output-proportion experiments."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np

from .dotprod import DistParams, cdf_z_monte_carlo_many
from .mechanisms import LAPLACE, PrivacyParams, laplace_1d_mechanism, sanitize_batch
from .noise import NoiseVector
from .vocab import Vocabulary, k_nearest, neighbor_ids, sample_words, synthetic_vocabulary

__all__ = [
    "check_original_closer",
    "check_nearest_beats_other",
    "loss",
    "loss_vectors",
    "TableQuantities",
    "word_quantities",
    "table_quantities",
    "selection_probability_curves",
    "ProportionRow",
    "ProportionReport",
    "proportions_experiment",
    "proportions_1d",
    "synthetic_vocabulary",
]


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def check_original_closer(eta: NoiseVector, w, x) -> bool:
    """Whether ``w + eta`` stays closer to ``w`` than to ``x``.

    Tests ``r cos(theta(eta, x - w)) < ||w - x|| / 2``.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    gap = x - w
    dist = float(np.linalg.norm(gap))
    if dist == 0.0:
        raise ValueError("x must differ from w")
    if eta.radius == 0.0:
        return True
    return eta.radius * _cos(eta.vector, gap) < 0.5 * dist


def check_nearest_beats_other(eta: NoiseVector, w, x, y) -> bool:
    """Whether ``w + eta`` is closer to ``x`` than to ``y``.

    Tests ``||w - x|| cos(theta(w - x, y - x)) + r cos(theta(eta, y - x)) < ||y - x|| / 2``.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    yx = y - x
    span = float(np.linalg.norm(yx))
    if span == 0.0:
        raise ValueError("x must differ from y")
    wx = w - x
    lhs = float(np.linalg.norm(wx)) * _cos(wx, yx) + eta.radius * _cos(eta.vector, yx)
    return lhs < 0.5 * span


def loss_vectors(w, xs, eta) -> np.ndarray:
    """``L(x) = ||w - x||^2 - 2 <x, eta>`` for each row of ``xs``."""
    w = np.asarray(w, dtype=np.float64)
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    eta = eta.vector if isinstance(eta, NoiseVector) else np.asarray(eta, dtype=np.float64)
    diff = xs - w
    return np.einsum("ij,ij->i", diff, diff) - 2.0 * xs @ eta


def loss(vocab: Vocabulary, w: int, x: int, eta) -> float:
    return float(loss_vectors(vocab.embedding(w), vocab.embedding(x), eta)[0])


# --------------------------------------------------------------------------
# neighbor-gap statistics


@dataclass(frozen=True)
class TableQuantities:
    """Mean thresholds of ``Z`` deciding original-vs-neighbor selection.

    ``z_w_x1 = ||w - x1|| / 2`` and
    ``z_x1_xj = (||w - xj||^2 - ||w - x1||^2) / (2 ||x1 - xj||)``.
    """

    z_w_x1: float
    z_x1_x2: float
    z_x1_x101: float
    sample_size: int
    vocabulary: str = ""
    dimension: int = 0
    far_rank: int = 101

    def __post_init__(self):
        if not self.z_w_x1 > 0:
            raise ValueError("z_w_x1 must be positive")
        if not all(math.isfinite(v) for v in (self.z_w_x1, self.z_x1_x2, self.z_x1_x101)):
            raise ValueError("quantities must be finite")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        d = self.to_dict()
        writer = csv.DictWriter(buf, fieldnames=list(d), lineterminator="\n")
        writer.writeheader()
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in d.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _z_between(w, xi, xj) -> float:
    dwi = float(np.sum((w - xi) ** 2))
    dwj = float(np.sum((w - xj) ** 2))
    return (dwj - dwi) / (2.0 * float(np.linalg.norm(xi - xj)))


def word_quantities(vocab: Vocabulary, w: int, far_rank: int = 101):
    """``(z_w_x1, z_x1_x2, z_x1_xfar)`` for a single word."""
    nl = k_nearest(vocab, w, far_rank)
    wv = vocab.embedding(w)
    x1, x2, xf = (vocab.embedding(int(nl.ids[i])) for i in (0, 1, far_rank - 1))
    return 0.5 * float(nl.distances[0]), _z_between(wv, x1, x2), _z_between(wv, x1, xf)


def table_quantities(
    vocab: Vocabulary, sample_size: int, rng: np.random.Generator, far_rank: int = 101
) -> TableQuantities:
    """Average the selection thresholds over ``sample_size`` uniformly sampled words."""
    if far_rank < 2:
        raise ValueError("far_rank must be at least 2")
    if vocab.size <= far_rank:
        raise ValueError(f"vocabulary of {vocab.size} words has no neighbor of rank {far_rank}")
    words = sample_words(vocab, sample_size, rng)
    q = np.array([word_quantities(vocab, w, far_rank) for w in words])
    m = q.mean(axis=0)
    return TableQuantities(
        float(m[0]), float(m[1]), float(m[2]), sample_size, vocab.name, vocab.dimension, far_rank
    )


@dataclass(frozen=True)
class CurvePoint:
    epsilon: float
    f_w_x1: float
    se_w_x1: float
    f_x1_x2: float
    se_x1_x2: float
    trials: int


def selection_probability_curves(
    quantities: TableQuantities,
    n: int,
    epsilons: Sequence[float],
    trials: int,
    rng: np.random.Generator,
) -> List[CurvePoint]:
    """``F_Z(z_w_x1)`` and ``F_Z(z_x1_x2)`` over an epsilon grid by Monte Carlo.

    Each epsilon draws from its own spawned stream.
    """
    children = rng.spawn(len(epsilons))
    out = []
    for eps, g in zip(epsilons, children):
        a, b = cdf_z_monte_carlo_many(
            [quantities.z_w_x1, quantities.z_x1_x2], DistParams(n, eps), trials, g
        )
        out.append(CurvePoint(float(eps), a.value, a.standard_error, b.value, b.standard_error, trials))
    return out


def curves_to_csv(points: Sequence[CurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "f_w_x1", "se_w_x1", "f_x1_x2", "se_x1_x2", "trials"])
    for p in points:
        w.writerow([repr(p.epsilon), repr(p.f_w_x1), repr(p.se_w_x1), repr(p.f_x1_x2), repr(p.se_x1_x2), p.trials])
    return buf.getvalue()


def curves_to_json(points: Sequence[CurvePoint]) -> str:
    return json.dumps({"points": [asdict(p) for p in points]}, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# output proportions


@dataclass(frozen=True)
class ProportionRow:
    epsilon: float
    original: float
    close: float
    distant: float
    trials: int

    def __post_init__(self):
        total = self.original + self.close + self.distant
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"proportions sum to {total}, not 1")


@dataclass
class ProportionReport:
    """Per-epsilon frequencies of original / close / distant outputs."""

    rows: List[ProportionRow]
    variant: str
    close_k: int
    c: Optional[float] = None
    vocabulary: str = ""

    @property
    def epsilon_grid(self) -> List[float]:
        return [r.epsilon for r in self.rows]

    def row(self, epsilon: float) -> ProportionRow:
        for r in self.rows:
            if r.epsilon == epsilon:
                return r
        raise KeyError(epsilon)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "original", "close", "distant", "trials"])
        for r in self.rows:
            w.writerow([repr(r.epsilon), repr(r.original), repr(r.close), repr(r.distant), r.trials])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "variant": self.variant,
            "close_k": self.close_k,
            "c": self.c,
            "vocabulary": self.vocabulary,
            "rows": [asdict(r) for r in self.rows],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _row(eps: float, counts: np.ndarray) -> ProportionRow:
    total = int(counts.sum())
    orig, close, distant = (float(v) / total for v in counts)
    return ProportionRow(float(eps), orig, close, distant, total)


def proportions_experiment(
    vocab: Vocabulary,
    epsilons: Sequence[float],
    rng: np.random.Generator,
    variant: str = LAPLACE,
    c: Optional[float] = None,
    samples: int = 5000,
    close_k: int = 100,
    trials_per_word: int = 1,
) -> ProportionReport:
    """Classify mechanism outputs as original, close (ranks 1..close_k) or distant.

    One word sample is drawn and shared by every epsilon; each epsilon then
    runs on its own spawned stream.
    """
    if not 1 <= close_k < vocab.size:
        raise ValueError(f"close_k must be in [1, {vocab.size - 1}], got {close_k}")
    if trials_per_word < 1:
        raise ValueError("trials_per_word must be positive")
    words = np.asarray(sample_words(vocab, samples, rng), dtype=np.int64)
    close_sets = neighbor_ids(vocab, words, close_k)
    children = rng.spawn(len(epsilons))
    rows = []
    repeated = np.repeat(words, trials_per_word)
    close_rep = np.repeat(close_sets, trials_per_word, axis=0)
    for eps, g in zip(epsilons, children):
        params = PrivacyParams(float(eps), variant, c)
        out = sanitize_batch(vocab, repeated, params, g)
        is_orig = out == repeated
        is_close = (close_rep == out[:, None]).any(axis=1) & ~is_orig
        counts = np.array([is_orig.sum(), is_close.sum(), (~is_orig & ~is_close).sum()])
        rows.append(_row(eps, counts))
    return ProportionReport(rows, variant, close_k, c, vocab.name)


def proportions_1d(
    a: int,
    epsilons: Sequence[float],
    trials: int,
    rng: np.random.Generator,
    close_radius: int = 100,
) -> ProportionReport:
    """Original / within ``close_radius`` / beyond frequencies for the 1-D Laplace mechanism."""
    if close_radius < 0:
        raise ValueError("close_radius must be non-negative")
    children = rng.spawn(len(epsilons))
    rows = []
    for eps, g in zip(epsilons, children):
        out = laplace_1d_mechanism(a, float(eps), g, size=trials)
        gap = np.abs(out - a)
        counts = np.array([(gap == 0).sum(), ((gap > 0) & (gap <= close_radius)).sum(), (gap > close_radius).sum()])
        rows.append(_row(eps, counts))
    return ProportionReport(rows, "laplace-1d", close_radius, None, f"integers>=1 a={a}")
