"""Training loop, checkpoint selection and end-to-end experiment runs."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentConfig, augment_batch
from .dataio import Dataset, load_dataset, make_batches, split_train_val
from .losses import LossConfig, TargetMask, focal_loss
from .metrics import evaluate, write_report_csv
from .model import ModelConfig, ModelParams, init_params, model_backward, model_forward, \
    save_checkpoint
from .optim import AdamState, adam_step
from .plotting import write_f1_plot

log = logging.getLogger(__name__)

SELECTION_METRICS = ("val_macro_f1", "val_micro_f1")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 5e-4
    val_fraction: float = 0.15
    seed: int = 0
    selection_metric: str = "val_macro_f1"
    loss: LossConfig = field(default_factory=LossConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.selection_metric not in SELECTION_METRICS:
            raise ValueError(f"selection_metric must be one of {SELECTION_METRICS}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        """Build from a (possibly partial) nested dict; unknown keys are rejected."""
        nested = {"loss": LossConfig, "augment": AugmentConfig, "model": ModelConfig}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in d.items():
            if key in nested:
                if not isinstance(value, dict):
                    raise ValueError(f"config key {key!r} must be an object")
                sub = nested[key]
                sub_known = {f.name for f in dataclasses.fields(sub)}
                bad = set(value) - sub_known
                if bad:
                    raise ValueError(f"unknown config keys in {key!r}: {sorted(bad)}")
                kwargs[key] = sub(**value)
            else:
                kwargs[key] = value
        return cls(**kwargs)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_macro_f1: float
    val_micro_f1: float
    seconds: float


@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def _epoch_step(params, state, batches, config: TrainConfig, seed_root):
    total_loss, total_items = 0.0, 0
    for b, batch in enumerate(batches):
        rng = np.random.default_rng([*seed_root, b])
        sub_batches = augment_batch(batch, config.augment, rng)
        n = sum(len(sb) for sb in sub_batches)
        grads = None
        for sb in sub_batches:
            preds, cache = model_forward(params, sb.features, config.model, train=True, rng=rng)
            loss, dp = focal_loss(preds.clip_probs, TargetMask(sb.targets, sb.mask), config.loss)
            if not np.all(np.isfinite(loss)):
                raise TrainingError(
                    f"non-finite loss in batch {b} (sequence length {sb.features.shape[1]})")
            g = model_backward(params, cache, dp)
            grads = g if grads is None else ModelParams(
                **{k: v + getattr(g, k) for k, v in grads.items()})
            total_loss += float(loss.sum())
        total_items += n
        grads = ModelParams(**{k: v / n for k, v in grads.items()})
        new, state = adam_step(params, grads, state)
        params = ModelParams(**new)
    return params, state, total_loss / max(total_items, 1)


def train(config: TrainConfig, train_set: Dataset, progress=None):
    """Fit a model on ``train_set``; returns ``(best_params, history)``.

    A ``val_fraction`` share of clips is held out for checkpoint selection.
    Every random draw derives from ``config.seed`` so repeated calls give
    identical results. ``progress(record, params)`` is called after every
    epoch with the parameters reached at that epoch.
    """
    D, C = config.model.input_dim, config.model.num_classes
    if train_set.feature_dim != D or train_set.num_classes != C:
        raise ValueError(
            f"dataset (D={train_set.feature_dim}, C={train_set.num_classes}) does not match "
            f"model config (D={D}, C={C})")

    fit_set, val_set = split_train_val(train_set, config.val_fraction, config.seed)
    params = init_params(config.model, config.seed)
    state = AdamState(lr=config.learning_rate)
    history = TrainHistory()
    best, best_score = params.copy(), -np.inf

    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        order_seed = int(np.random.default_rng([config.seed, epoch]).integers(2 ** 63))
        batches = make_batches(fit_set, config.batch_size, shuffle=True, seed=order_seed)
        params, state, train_loss = _epoch_step(params, state, batches, config,
                                                (config.seed, epoch))
        report = evaluate(params, val_set, config=config.model)
        record = EpochRecord(epoch, train_loss, report.macro_f1, report.micro_f1,
                             time.perf_counter() - start)
        history.rows.append(record)
        score = getattr(record, config.selection_metric)
        if score > best_score:
            best, best_score = params.copy(), score
        log.debug("epoch %d loss %.6f val macro-F1 %.4f", epoch, train_loss, report.macro_f1)
        if progress is not None:
            progress(record, params)
    return best, history


def write_history_csv(history: TrainHistory, path, include_time: bool = False) -> None:
    """Write one row per epoch. ``seconds`` is left blank unless ``include_time``,
    which keeps the file byte-identical across reruns."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_macro_f1", "val_micro_f1", "seconds"])
        for r in history.rows:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.val_macro_f1), repr(r.val_micro_f1),
                        f"{r.seconds:.3f}" if include_time else ""])


def run_experiment(data_root, config: TrainConfig, out_dir, include_time: bool = False,
                   progress=None) -> int:
    """Train on the ``train`` split, score the best checkpoint on ``test``.

    Writes ``model.plab``, ``history.csv``, ``report.csv``, ``f1.svg`` and
    ``config.json`` into ``out_dir``.
    """
    dataset = load_dataset(data_root)
    train_set, test_set = dataset.split("train"), dataset.split("test")
    leaked = {ex.clip_id for ex in train_set.examples} & {ex.clip_id for ex in test_set.examples}
    if leaked:
        raise TrainingError(f"clips in both train and test: {sorted(leaked)[:5]}")
    if len(test_set) == 0:
        log.warning("dataset has no test clips; report.csv will be empty")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    params, history = train(config, train_set, progress=progress)
    save_checkpoint(params, out / "model.plab")
    write_history_csv(history, out / "history.csv", include_time=include_time)
    report = evaluate(params, test_set, config=config.model)
    write_report_csv(report, out / "report.csv")
    write_f1_plot(report, out / "f1.svg")
    log.info("test macro-F1 %.4f micro-F1 %.4f", report.macro_f1, report.micro_f1)
    return 0
