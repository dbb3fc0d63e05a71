"""The noisy dot-product distribution ``Z = R * K``.

``R`` is the noise length (Gamma, shape ``n``, rate ``epsilon``) and ``K``
the cosine between a uniform random direction and any fixed vector. ``Z`` is
the projection of the Laplace noise on a fixed unit vector; whether the
nearest-neighbor step returns the original word is decided by events of the
form ``Z <= z``.

Closed forms are evaluated in log space. The CDF has no closed form; the
primary estimator is Monte Carlo, quadrature is kept as a cross-check.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize, special

from .noise import sample_radius, sample_unit_direction

DEFAULT_TRIALS = 10_000
# normals drawn per Monte Carlo chunk
_CHUNK_ELEMENTS = 2_000_000


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        self.achieved = achieved
        super().__init__(f"{message} (achieved abs. error {achieved:.3g})")


@dataclass(frozen=True)
class DistParams:
    n: int
    epsilon: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "epsilon", float(self.epsilon))


@dataclass(frozen=True)
class CdfEstimate:
    """Monte Carlo estimate of ``Pr[Z <= z]``."""

    value: float
    trials: int
    standard_error: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"probability out of range: {self.value}")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        se = math.sqrt(self.value * (1.0 - self.value) / self.trials)
        object.__setattr__(self, "standard_error", se)


# --------------------------------------------------------------------------
# densities


def _log_beta_norm(n: int) -> float:
    return special.betaln((n - 1) / 2.0, 0.5)


def pdf_angular(k, n: int):
    """Density of the cosine ``K`` in ``n`` dimensions; zero outside [-1, 1].

    ``f(k) = (1 - k^2)^((n-3)/2) / B((n-1)/2, 1/2)``. At ``n = 2`` the
    density is unbounded at ``k = +-1`` and ``inf`` is returned there.
    """
    k = np.asarray(k, dtype=np.float64)
    out = np.zeros_like(k)
    inside = np.abs(k) <= 1.0
    with np.errstate(divide="ignore"):
        logp = (n - 3) / 2.0 * np.log1p(-k[inside] ** 2) - _log_beta_norm(n)
    out[inside] = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def cdf_angular(k, n: int):
    """``Pr[K <= k]``; for ``k < 0`` this is ``I_{1-k^2}((n-1)/2, 1/2) / 2``."""
    k = np.clip(np.asarray(k, dtype=np.float64), -1.0, 1.0)
    lower = 0.5 * special.betainc((n - 1) / 2.0, 0.5, 1.0 - k * k)
    out = np.where(k < 0, lower, 1.0 - lower)
    return float(out) if out.ndim == 0 else out


def pdf_radius(r, params: DistParams):
    """Gamma density of the noise length: ``eps^n r^(n-1) e^(-eps r) / Gamma(n)``."""
    r = np.asarray(r, dtype=np.float64)
    n, eps = params.n, params.epsilon
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    out[pos] = np.exp(n * math.log(eps) + (n - 1) * np.log(rp) - eps * rp - special.gammaln(n))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# moments


def log_double_factorial(m: int) -> float:
    """``log(m!!)`` for ``m >= -1`` with ``(-1)!! = 0!! = 1``."""
    if m < -1:
        raise ValueError(f"double factorial undefined for {m}")
    if m <= 0:
        return 0.0
    if m % 2 == 0:
        h = m // 2
        return h * math.log(2.0) + special.gammaln(h + 1)
    # m = 2h - 1:  m!! = (2h)! / (2^h h!)
    h = (m + 1) // 2
    return special.gammaln(2 * h + 1) - h * math.log(2.0) - special.gammaln(h + 1)


def moment_angular(j: int, n: int) -> float:
    """``E[K^j]``: 1 for ``j = 0``, 0 for odd ``j``, and
    ``(n-2)!! (j-1)!! / (n-2+j)!!`` for even ``j``."""
    if int(j) != j or j < 0:
        raise ValueError(f"j must be a non-negative integer, got {j}")
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    if j == 0:
        return 1.0
    if j % 2:
        return 0.0
    if j > 100_000:
        return math.exp(
            log_double_factorial(n - 2) + log_double_factorial(j - 1) - log_double_factorial(n - 2 + j)
        )
    # prod_{i=1}^{j/2} (2i - 1) / (n + 2i - 2); exact integer ratio when small
    h = j // 2
    if h <= 1000:
        num = math.prod(range(1, 2 * h, 2))
        den = math.prod(range(n, n + 2 * h - 1, 2))
        return num / den
    i = np.arange(1, h + 1, dtype=np.float64)
    return float(np.prod((2 * i - 1) / (n + 2 * i - 2)))


def mean_z(params: DistParams) -> float:
    return 0.0


def var_z(params: DistParams) -> float:
    """``Var[Z] = (n + 1) / epsilon^2``."""
    return (params.n + 1) / params.epsilon ** 2


# --------------------------------------------------------------------------
# sampling


def sample_angular(n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` draws of ``K = <u, e1>`` for uniform unit directions ``u``."""
    return sample_unit_direction(n, rng, size=size)[:, 0]


def sample_z(params: DistParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` draws of ``Z = R K``."""
    r = sample_radius(params.n, params.epsilon, rng, size=size)
    return r * sample_angular(params.n, rng, size)


def _chunks(trials: int, n: int) -> List[int]:
    step = max(1, _CHUNK_ELEMENTS // n)
    sizes = [step] * (trials // step)
    if trials % step:
        sizes.append(trials % step)
    return sizes


def map_chunks(fn, trials: int, n: int, rng: np.random.Generator, workers: int = 1):
    """Apply ``fn(child_rng, size)`` over chunks of ``trials``.

    Each chunk owns a child generator spawned from ``rng`` in chunk order, so
    the list of results is identical for any number of workers.
    """
    sizes = _chunks(trials, n)
    children = rng.spawn(len(sizes))
    if workers <= 1 or len(sizes) == 1:
        return [fn(g, s) for g, s in zip(children, sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, children, sizes))


def cdf_z_monte_carlo_many(
    zs: Sequence[float],
    params: DistParams,
    trials: int = DEFAULT_TRIALS,
    rng: np.random.Generator = None,
    workers: int = 1,
) -> List[CdfEstimate]:
    """Monte Carlo ``Pr[Z <= z]`` for several thresholds from one set of draws."""
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    if rng is None:
        raise ValueError("an explicit random generator is required")
    zs = np.asarray(list(zs), dtype=np.float64)

    def count(g, size):
        z = sample_z(params, g, size)
        return (z[:, None] <= zs[None, :]).sum(axis=0)

    hits = np.sum(map_chunks(count, trials, params.n, rng, workers), axis=0)
    return [CdfEstimate(float(h) / trials, trials) for h in hits]


def cdf_z_monte_carlo(
    z: float,
    params: DistParams,
    trials: int = DEFAULT_TRIALS,
    rng: np.random.Generator = None,
    workers: int = 1,
) -> CdfEstimate:
    """Fraction of ``trials`` draws with ``R K <= z``."""
    return cdf_z_monte_carlo_many([z], params, trials, rng, workers)[0]


# --------------------------------------------------------------------------
# quadrature cross-checks


def _r_max(params: DistParams, z: float) -> float:
    return abs(z) + 50.0 * params.n / params.epsilon


def pdf_z_numeric(z: float, params: DistParams, rtol: float = 1e-6) -> float:
    """``f_Z(z) = int_{|z|}^{r_max} f_G(r) f_B(z/r) / r dr`` by adaptive quadrature.

    Integrates in ``t`` with ``r = |z| + t^2``, which removes the endpoint
    singularity of ``f_B`` at ``n = 2``.
    """
    n, eps = params.n, params.epsilon
    a = abs(z)
    log_norm = n * math.log(eps) - special.gammaln(n) - _log_beta_norm(n)

    def integrand(t):
        r = a + t * t
        if r <= 0.0:
            return 0.0
        # (1 - z^2/r^2) = (r - a)(r + a) / r^2 = t^2 (r + a) / r^2
        if t == 0.0:
            if n == 2:
                # (t^2)^(-1/2) * 2t -> 2 as t -> 0
                logv = log_norm + (n - 1) * math.log(r) - eps * r - math.log(r) \
                    + (n - 3) / 2.0 * (math.log(r + a) - 2 * math.log(r))
                return 2.0 * math.exp(logv)
            return 0.0
        logv = (
            log_norm
            + (n - 2) * math.log(r)
            - eps * r
            + (n - 3) / 2.0 * (2 * math.log(t) + math.log(r + a) - 2 * math.log(r))
        )
        return 2.0 * t * math.exp(logv)

    upper = math.sqrt(_r_max(params, z) - a)
    peak = math.sqrt(max((n - 1) / eps - a, 0.0))
    points = [peak] if 0 < peak < upper else None
    val, err, info = _quad(integrand, 0.0, upper, rtol, points)
    return val


def _quad(f, a, b, rtol, points=None):
    val, err, info = integrate.quad(
        f, a, b, epsabs=1e-14, epsrel=rtol, limit=400, points=points, full_output=1
    )[:3]
    if err > max(rtol * abs(val), 1e-12):
        raise QuadratureError("quadrature did not converge", err)
    return val, err, info


def cdf_z_numeric(z: float, params: DistParams, rtol: float = 1e-8) -> float:
    """``Pr[Z <= z]`` by quadrature of ``f_G(r) Pr[K <= z/r]`` over ``r``.

    Lengths below ``|z|`` put ``z/r`` outside [-1, 1] and contribute the
    Gamma CDF mass ``Pr[R < z]`` when ``z > 0``.
    """
    n, eps = params.n, params.epsilon
    a = abs(z)
    head = special.gammainc(n, eps * a) if z > 0 else 0.0
    if z == 0:
        return 0.5

    def integrand(r):
        return pdf_radius(r, params) * cdf_angular(z / r, n)

    peak = max((n - 1) / eps, a)
    upper = _r_max(params, z)
    points = [peak] if a < peak < upper else None
    val, _, _ = _quad(integrand, a, upper, rtol, points)
    return float(min(1.0, max(0.0, head + val)))


# --------------------------------------------------------------------------
# tail and concentration bounds


def _check_c(c: float) -> None:
    if not c > 1:
        raise ValueError(f"c must exceed 1, got {c}")


def gamma_tail_upper(c: float, n: int) -> float:
    """Bound on ``Pr[R >= c n / eps]``: ``(c e^(1-c))^n`` for ``c > 1``."""
    _check_c(c)
    return math.exp(n * (math.log(c) + 1.0 - c))


def gamma_tail_lower(c: float, n: int) -> float:
    """Bound on ``Pr[R <= n / (c eps)]``: ``(c e^((1-c)/c))^(-n)`` for ``c > 1``."""
    _check_c(c)
    return math.exp(-n * (math.log(c) + (1.0 - c) / c))


def angular_tail(c: float, n: int = None) -> float:
    """Bound on ``Pr[|K| >= c / sqrt(n)]``: ``min(1, 2 e^(-c^2/2))``."""
    return min(1.0, 2.0 * math.exp(-c * c / 2.0))


def z_concentration_bound(c1: float, c2: float, n: int) -> float:
    """Lower bound on ``Pr[|Z| <= c1 c2 sqrt(n) / eps]``, clamped to [0, 1]."""
    _check_c(c2)
    a = -math.expm1(-c1 * c1 / 2.0)
    b = -math.expm1(n * (math.log(c2) + 1.0 - c2))
    return min(1.0, max(0.0, 2.0 * a * b - 1.0))


def concentration_constants(n: int, level: float = 0.99) -> Tuple[float, float]:
    """Constants ``(c1, c2)`` that make the concentration bound equal ``level``
    with both factors of the product equal."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    factor = math.sqrt((1.0 + level) / 2.0)
    c1 = math.sqrt(-2.0 * math.log1p(-factor))
    # (c2 e^(1-c2))^n = 1 - factor  <=>  c2 - 1 - log c2 = -log(1 - factor) / n
    target = -math.log1p(-factor) / n
    c2 = optimize.brentq(lambda c: c - 1.0 - math.log(c) - target, 1.0 + 1e-12, 1e6, xtol=1e-14)
    return c1, c2


def concentration_radius(params: DistParams, level: float = 0.99) -> float:
    """Half-width ``c1 c2 sqrt(n) / eps`` holding at least ``level`` of the mass."""
    c1, c2 = concentration_constants(params.n, level)
    return c1 * c2 * math.sqrt(params.n) / params.epsilon


def chebyshev_bound(m: int, delta: float, params: DistParams) -> float:
    """Bound on ``Pr[|mean of m draws of Z| > delta]``: ``(n+1) / (m eps^2 delta^2)``."""
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return min(1.0, var_z(params) / (m * delta * delta))
