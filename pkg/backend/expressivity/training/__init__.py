"""
Datasets, initialization, Adam, batch norm and the training loop
"""

from .datasets import (
    DEFAULT_BAND,
    LABEL_THRESHOLD,
    Dataset,
    DatasetKind,
    label_from_psi,
    make_dataset,
    psi_circle,
    psi_xor,
    quadratic_target,
)
from .init import is_frozen, xavier_init
from .optim import Adam, AdamConfig, AdamState, adam_step
from .batchnorm import BatchNormLayer, fold_batch_norm
from .trainer import TrainConfig, TrainRecord, train

__all__ = [
    "DEFAULT_BAND",
    "LABEL_THRESHOLD",
    "Dataset",
    "DatasetKind",
    "label_from_psi",
    "make_dataset",
    "psi_circle",
    "psi_xor",
    "quadratic_target",
    "is_frozen",
    "xavier_init",
    "Adam",
    "AdamConfig",
    "AdamState",
    "adam_step",
    "BatchNormLayer",
    "fold_batch_norm",
    "TrainConfig",
    "TrainRecord",
    "train",
]
