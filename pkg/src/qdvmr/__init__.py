"""Trainable video moment retrieval and highlight detection on feature files."""

from .featurestore import (
    Batch,
    DatasetManifest,
    FeatureDataset,
    ManifestError,
    MaskedQuery,
    SampleRecord,
    SyntheticConfig,
    TensorFormatError,
    ValidationError,
    clip_labels_from_moments,
    collate,
    generate_synthetic,
    load_manifest,
    mask_query,
    read_tensor,
    write_tensor,
)
from .metrics import EvalReport
from .trainer import (
    ABLATION_GRID,
    LossWeights,
    MomentRetrievalModel,
    TrainConfig,
    ablate,
    evaluate_checkpoint,
    load_checkpoint,
    make_config,
    save_checkpoint,
    total_loss,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ABLATION_GRID",
    "Batch",
    "DatasetManifest",
    "EvalReport",
    "FeatureDataset",
    "LossWeights",
    "ManifestError",
    "MaskedQuery",
    "MomentRetrievalModel",
    "SampleRecord",
    "SyntheticConfig",
    "TensorFormatError",
    "TrainConfig",
    "ValidationError",
    "ablate",
    "clip_labels_from_moments",
    "collate",
    "evaluate_checkpoint",
    "generate_synthetic",
    "load_checkpoint",
    "load_manifest",
    "make_config",
    "mask_query",
    "read_tensor",
    "save_checkpoint",
    "total_loss",
    "train",
    "write_tensor",
]
