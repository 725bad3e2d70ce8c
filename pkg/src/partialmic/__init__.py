"""Partial-label multi-instrument classification with an attention BiLSTM."""

from .augment import AugmentConfig, augment_batch, concat_augment, label_or, mixup, \
    sample_mixup_weight
from .dataio import Batch, Dataset, DatasetError, Example, encode_label, generate_synthetic, \
    load_dataset, make_batches, save_dataset, split_train_val
from .gradcheck import finite_difference_check
from .losses import LossConfig, TargetMask, focal_loss, map_labels_to_targets
from .metrics import MetricsReport, class_prf1, confusion_counts, evaluate
from .model import ModelConfig, ModelParams, init_params, load_checkpoint, model_backward, \
    model_forward, save_checkpoint
from .optim import AdamState, adam_step
from .trainer import TrainConfig, run_experiment, train

__version__ = "0.1.0"
