"""Complement cross entropy and baseline losses for imbalanced classification."""

from .data import BatchPlan, LabeledDataset, batches, generate_blobs, load_csv, load_idx, normalize
from .imbalance import ClassDistribution, ImbalanceSpec, measure_ratio, plan_long_tailed, plan_step, subsample
from .losses import (
    LossConfig,
    LossReport,
    balanced_complement_entropy,
    complement_cross_entropy,
    complement_entropy,
    cross_entropy,
    focal_loss,
    modulated_complement_entropy,
)
from .metrics import ConfusionMatrix, accumulate, balanced_accuracy, recall
from .model import MLP, SGD, SgdConfig, lr_at
from .tensor import OneHotBatch, ProbBatch, log_softmax, one_hot, softmax

__version__ = "0.1.0"
