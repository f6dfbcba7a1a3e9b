"""Minimal float64 neural-network engine: layers, backprop, Adam, training.

Values are plain numpy arrays (row-major float64); layer forward/backward
passes are hand-derived, so gradients can be audited against finite
differences.  No GPU, no autodiff beyond the fixed layer set.
"""

from .ops import (
    ELU_ALPHA,
    PROB_FLOOR,
    LabelOutOfRange,
    ShapeMismatch,
    activate,
    as_tensor,
    conv2d,
    dense,
    depthwise_separable_conv,
    flatten,
    pool2d,
    scce_loss,
    separable_param_count,
    standard_param_count,
)
from .graph import LayerSpec, ModelGraph, backprop, build_model, count_params, forward
from .optim import AdamState, adam_step
from .training import (
    EmptyDataset,
    EpochRecord,
    TrainConfig,
    TrainHistory,
    evaluate,
    train,
)
from .checkpoint import BadCheckpoint, CheckpointBundle, load_checkpoint, save_checkpoint

__all__ = [
    "ELU_ALPHA",
    "PROB_FLOOR",
    "LabelOutOfRange",
    "ShapeMismatch",
    "activate",
    "as_tensor",
    "conv2d",
    "dense",
    "depthwise_separable_conv",
    "flatten",
    "pool2d",
    "scce_loss",
    "separable_param_count",
    "standard_param_count",
    "LayerSpec",
    "ModelGraph",
    "backprop",
    "build_model",
    "count_params",
    "forward",
    "AdamState",
    "adam_step",
    "EmptyDataset",
    "EpochRecord",
    "TrainConfig",
    "TrainHistory",
    "evaluate",
    "train",
    "BadCheckpoint",
    "CheckpointBundle",
    "load_checkpoint",
    "save_checkpoint",
]
