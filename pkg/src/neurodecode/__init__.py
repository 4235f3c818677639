"""neurodecode: voxel-to-latent decoding with oracle-backed evaluation.

Maps measured voxel activity to latent feature spaces via cross-validated
ridge regression with train-statistics renormalization, scores predictions
with caption and image metric suites, and validates itself end to end
against a synthetic linear encoder with known ground truth.
"""

from .datastore import (
    Manifest,
    ManifestEntry,
    RoiMask,
    apply_roi_mask,
    average_repeats,
    read_manifest,
    read_matrix,
    split_rows,
    write_manifest,
    write_matrix,
)
from .imagemetrics import (
    EmbeddingSet,
    GaussianMoments,
    GrayImage,
    frechet_distance,
    moments,
    nway_accuracy,
    pixcorr,
    ssim,
)
from .renorm import RenormStats, compute_stats, renormalize
from .ridge import (
    DEFAULT_ALPHA_GRID,
    AlphaGrid,
    RidgeModel,
    cross_validate_alpha,
    fit_ridge,
    fit_with_cv,
    predict,
)
from .synth import SynthSpec, closed_loop_score, generate
from .textmetrics import corpus_mean, cosine_similarity, meteor, tokenize

__version__ = "0.1.0"

__all__ = [
    "AlphaGrid",
    "DEFAULT_ALPHA_GRID",
    "EmbeddingSet",
    "GaussianMoments",
    "GrayImage",
    "Manifest",
    "ManifestEntry",
    "RenormStats",
    "RidgeModel",
    "RoiMask",
    "SynthSpec",
    "apply_roi_mask",
    "average_repeats",
    "closed_loop_score",
    "compute_stats",
    "corpus_mean",
    "cosine_similarity",
    "cross_validate_alpha",
    "fit_ridge",
    "fit_with_cv",
    "frechet_distance",
    "generate",
    "meteor",
    "moments",
    "nway_accuracy",
    "pixcorr",
    "predict",
    "read_manifest",
    "read_matrix",
    "renormalize",
    "split_rows",
    "ssim",
    "tokenize",
    "write_manifest",
    "write_matrix",
]
