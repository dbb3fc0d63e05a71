"""Noise samplers for the multidimensional Laplace mechanism.

A noise vector with density proportional to ``exp(-epsilon * ||eta||)`` is
built as ``eta = r * u`` where ``u`` is uniform on the unit sphere and ``r``
is Gamma distributed with shape ``n`` and rate ``epsilon``.

All samplers take a :class:`numpy.random.Generator`. Reproducible, splittable
streams come from :func:`make_rng`, which keys a ``SeedSequence`` by
``(seed, stream)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream)``."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return make_rng(self.seed, self.stream)

    def spawn(self, index: int) -> np.random.Generator:
        """Generator for sub-task ``index`` of this stream."""
        return make_rng(self.seed, self.stream, index)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` and an optional stream path.

    ``make_rng(s, i)`` and ``make_rng(s, j)`` are statistically independent
    for ``i != j`` and identical for ``i == j``.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng: Union[np.random.Generator, RngStream, int, None]) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None:
        return make_rng(0)
    return make_rng(int(rng))


@dataclass(frozen=True)
class NoiseVector:
    """Noise ``eta = radius * direction``."""

    radius: float
    direction: np.ndarray

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError(f"radius must be non-negative, got {self.radius}")
        norm = float(np.linalg.norm(self.direction))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"direction must have unit norm, got {norm}")

    @property
    def dimension(self) -> int:
        return int(self.direction.shape[0])

    @property
    def vector(self) -> np.ndarray:
        return self.radius * self.direction

    @classmethod
    def zero(cls, n: int) -> "NoiseVector":
        direction = np.zeros(n)
        direction[0] = 1.0
        return cls(0.0, direction)

    @classmethod
    def from_vector(cls, eta) -> "NoiseVector":
        eta = np.asarray(eta, dtype=np.float64)
        scale = float(np.max(np.abs(eta))) if eta.size else 0.0
        if scale == 0.0:
            return cls.zero(eta.shape[0])
        # rescale first so tiny or huge vectors keep a unit direction
        u = eta / scale
        nu = float(np.linalg.norm(u))
        return cls(scale * nu, u / nu)


def _check_dim(n: int) -> None:
    if int(n) != n or n < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {n}")


def _check_eps(epsilon: float) -> None:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")


def sample_unit_direction(n: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Sample direction(s) uniformly on the unit sphere in ``R^n``.

    Draws ``n`` standard normals and normalizes. Rows that come out as the
    zero vector are re-drawn.

    Returns an array of shape ``(n,)`` or ``(size, n)``.
    """
    _check_dim(n)
    m = 1 if size is None else int(size)
    u = rng.standard_normal((m, n))
    norms = np.linalg.norm(u, axis=1)
    bad = norms == 0.0
    while bad.any():
        u[bad] = rng.standard_normal((int(bad.sum()), n))
        norms[bad] = np.linalg.norm(u[bad], axis=1)
        bad = norms == 0.0
    u /= norms[:, None]
    return u[0] if size is None else u


def sample_radius(n: int, epsilon: float, rng: np.random.Generator, size: Optional[int] = None):
    """Sample the noise length from Gamma(shape=n, rate=epsilon).

    The density is ``epsilon**n r**(n-1) exp(-epsilon r) / Gamma(n)``.
    """
    _check_dim(n)
    _check_eps(epsilon)
    r = rng.standard_gamma(float(n), size=size) / epsilon
    return float(r) if size is None else r


def sample_noise(n: int, epsilon: float, rng: np.random.Generator) -> NoiseVector:
    """Sample one multidimensional Laplace noise vector."""
    radius = sample_radius(n, epsilon, rng)
    direction = sample_unit_direction(n, rng)
    return NoiseVector(radius, direction)


def sample_noise_batch(n: int, epsilon: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Sample ``size`` noise vectors as a ``(size, n)`` array."""
    radius = sample_radius(n, epsilon, rng, size=size)
    return radius[:, None] * sample_unit_direction(n, rng, size=size)


def sample_laplace_1d(scale: float, rng: np.random.Generator, size: Optional[int] = None):
    """Zero-mean Laplace draw(s) with the given scale (``1/epsilon`` at sensitivity one)."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    x = rng.laplace(0.0, scale, size=size)
    return float(x) if size is None else x
