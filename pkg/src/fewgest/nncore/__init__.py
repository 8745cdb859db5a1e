from .layers import (BatchNorm, Conv1d, Dense, DepthwiseConv1d, Dropout,
                     Flatten, GroupedPointwiseConv1d, Layer, LeakyReLU,
                     MaxPool1d, PointwiseConv1d, ReLU, Reshape, Softmax,
                     he_uniform)
from .losses import cross_entropy, mse, one_hot
from .network import (InvertedResidual, SeparableConv1d, Sequential,
                      parameter_count)
from .optim import Adam, OptimizerConfig
from .checkpoint import (assign_tensors, file_sha256, load_checkpoint,
                         save_checkpoint)

__all__ = [
    "BatchNorm", "Conv1d", "Dense", "DepthwiseConv1d", "Dropout", "Flatten",
    "GroupedPointwiseConv1d", "Layer", "LeakyReLU", "MaxPool1d",
    "PointwiseConv1d", "ReLU", "Reshape", "Softmax", "he_uniform",
    "cross_entropy", "mse", "one_hot", "InvertedResidual", "SeparableConv1d",
    "Sequential", "parameter_count", "Adam", "OptimizerConfig",
    "assign_tensors", "file_sha256", "load_checkpoint", "save_checkpoint",
]
