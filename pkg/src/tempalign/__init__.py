"""Differentiable temporal-alignment toolkit.

Smoothed dynamic time warping as a trainable alignment objective, a
contrastive temporal regularizer that prevents embedding collapse, a
desk-scale encoder and training loop, a synthetic phase-structured dataset
generator, and the alignment evaluation metrics, all behind one CLI.
"""

from .alignment import (
    AlignmentPath,
    AlignmentResult,
    dtw,
    dtw_bruteforce,
    soft_dtw,
    soft_dtw_embedding_grad,
    soft_dtw_grad,
)
from .encoder import (
    EncoderConfig,
    EncoderParams,
    TrainConfig,
    TrainResult,
    encode,
    encode_backward,
    gradient_check,
    init_params,
    load_checkpoint,
    make_pairs,
    sample_frames,
    save_checkpoint,
    stack_context,
    train,
)
from .errors import (
    ContractViolationError,
    DatasetFormatError,
    DegenerateEmbeddingError,
    ParameterError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .loss import LavConfig, LossReport, l2_normalize, lav_loss, pair_loss, resolve_loss_arm
from .metrics import (
    EvalReport,
    embed_video,
    evaluate,
    frame_retrieval_ap,
    kendall_tau,
    mean_offdiag_selfdist,
    phase_classification,
    phase_progression,
)
from .numeric import make_rng, pairwise_sq_dist, softmin, softmin_weights
from .regularizer import CIdmConfig, contrastive_idm, idm_loss, idm_similarity
from .synthdata import (
    GenConfig,
    SyntheticVideo,
    generate,
    read_dataset,
    split_dataset,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentPath",
    "AlignmentResult",
    "CIdmConfig",
    "ContractViolationError",
    "DatasetFormatError",
    "DegenerateEmbeddingError",
    "EncoderConfig",
    "EncoderParams",
    "EvalReport",
    "GenConfig",
    "LavConfig",
    "LossReport",
    "ParameterError",
    "SyntheticVideo",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "UndefinedMetricError",
    "contrastive_idm",
    "dtw",
    "dtw_bruteforce",
    "embed_video",
    "encode",
    "encode_backward",
    "evaluate",
    "frame_retrieval_ap",
    "generate",
    "gradient_check",
    "idm_loss",
    "idm_similarity",
    "init_params",
    "kendall_tau",
    "l2_normalize",
    "lav_loss",
    "load_checkpoint",
    "make_pairs",
    "make_rng",
    "mean_offdiag_selfdist",
    "pair_loss",
    "pairwise_sq_dist",
    "phase_classification",
    "phase_progression",
    "read_dataset",
    "resolve_loss_arm",
    "sample_frames",
    "save_checkpoint",
    "softmin",
    "softmin_weights",
    "soft_dtw",
    "soft_dtw_embedding_grad",
    "soft_dtw_grad",
    "split_dataset",
    "stack_context",
    "train",
    "write_dataset",
]
