"""Word-embedding text sanitization under metric differential privacy.

Submodules
----------
vocab
    Embedding storage, file formats and exact nearest-neighbor queries.
noise
    Seeded streams and multidimensional Laplace noise.
dotprod
    The noisy dot-product distribution ``Z = R K`` and its bounds.
mechanisms
    Word-level mechanisms and the text pipeline.
analysis
    Selection conditions, neighbor-gap statistics and experiments.
"""

from .dotprod import DistParams, cdf_z_monte_carlo, cdf_z_numeric, moment_angular, var_z
from .mechanisms import (
    EXPONENTIAL,
    LAPLACE,
    LAPLACE_FIXED,
    VARIANTS,
    PrivacyParams,
    SanitizedText,
    SanitizedToken,
    sanitize_text,
    sanitize_word,
)
from .noise import NoiseVector, RngStream, make_rng, sample_noise
from .vocab import (
    Vocabulary,
    VocabularyFormatError,
    k_nearest,
    load_vocabulary,
    nearest_neighbor,
    nn_rank,
    synthetic_vocabulary,
)

__version__ = "0.1.0"

__all__ = [
    "DistParams",
    "cdf_z_monte_carlo",
    "cdf_z_numeric",
    "moment_angular",
    "var_z",
    "EXPONENTIAL",
    "LAPLACE",
    "LAPLACE_FIXED",
    "VARIANTS",
    "PrivacyParams",
    "SanitizedText",
    "SanitizedToken",
    "sanitize_text",
    "sanitize_word",
    "NoiseVector",
    "RngStream",
    "make_rng",
    "sample_noise",
    "Vocabulary",
    "VocabularyFormatError",
    "k_nearest",
    "load_vocabulary",
    "nearest_neighbor",
    "nn_rank",
    "synthetic_vocabulary",
]
