"""Per-proposal appearance descriptors: color histograms and visual words."""

from .vector import FeatureVector, combine, combine_matrices
from .hoc import extract_hoc, hoc_matrix
from .patches import flatten_patch, sample_patches
from .codebook import Codebook, WordMap, assign_words, train_codebook
from .bovw import bovw_matrix, extract_bovw
from .normalize import FeatureNormalizer, NormalizationStats, normalize_features

__all__ = [
    "FeatureVector",
    "combine",
    "combine_matrices",
    "extract_hoc",
    "hoc_matrix",
    "flatten_patch",
    "sample_patches",
    "Codebook",
    "train_codebook",
    "assign_words",
    "WordMap",
    "extract_bovw",
    "bovw_matrix",
    "FeatureNormalizer",
    "NormalizationStats",
    "normalize_features",
]
