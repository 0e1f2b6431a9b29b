"""Simplex-constrained local dictionary learning and fast bipartite spectral clustering.

Data points are coded as sparse convex combinations of learned landmark atoms;
the codes double as a bipartite similarity graph whose reduced (atom-side)
Laplacian drives a spectral clustering step that scales linearly in the number
of points.
"""

from .encoder import (
    EncoderParams,
    EncoderTape,
    default_step_size,
    encode,
    encode_batch,
    loss,
    loss_grad_x,
    momentum_schedule,
)
from .simplex import project_simplex, projection_vjp
from .spectral import (
    cluster_pipeline,
    clustering_accuracy,
    harmonic_extend,
    kmeans,
    reduced_adjacency,
    schur_laplacian,
    spectral_embed,
)
from .trainer import (
    TrainConfig,
    TrainingDiverged,
    decode,
    grad_dictionary,
    init_dictionary,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "EncoderParams",
    "EncoderTape",
    "TrainConfig",
    "TrainingDiverged",
    "cluster_pipeline",
    "clustering_accuracy",
    "decode",
    "default_step_size",
    "encode",
    "encode_batch",
    "grad_dictionary",
    "harmonic_extend",
    "init_dictionary",
    "kmeans",
    "loss",
    "loss_grad_x",
    "momentum_schedule",
    "project_simplex",
    "projection_vjp",
    "reduced_adjacency",
    "schur_laplacian",
    "spectral_embed",
    "train",
]
