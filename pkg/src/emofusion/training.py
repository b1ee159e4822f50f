"""Mini-batch training with Adam, per-epoch metrics and early stopping."""

from __future__ import annotations

import csv
import math
import os
import time
import zlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import vision
from .dataset import ClipSample
from .errors import ConfigError, NumericError
from .model import FusionModel
from .optim import AdamState, adam_step
from .tensor import softmax_cross_entropy

__all__ = ["TrainConfig", "EpochReport", "train", "evaluate", "write_epoch_log", "epoch_order"]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-4
    weight_decay: float = 5e-5
    max_epochs: int = 10
    patience: int = 1
    shuffle_seed: int = 0
    # augmented copies per clip, generated on the fly (0 disables augmentation)
    augment_copies: int = 0
    augment_seed: int = 0
    decoupled_decay: bool = False
    eval_batch_size: int = 32

    def __post_init__(self):
        if self.batch_size < 1 or self.eval_batch_size < 1:
            raise ConfigError("batch sizes must be at least 1")
        # zero is allowed so a run can be checked to leave parameters untouched
        if not self.learning_rate >= 0:
            raise ConfigError("learning rate must be non-negative")
        if self.weight_decay < 0:
            raise ConfigError("weight decay must be non-negative")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be positive")
        if self.patience < 1:
            raise ConfigError("patience must be positive")
        if self.augment_copies < 0:
            raise ConfigError("augment_copies must be non-negative")


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    wall_seconds: float

    def row(self) -> list[str]:
        return [str(self.epoch), repr(self.train_loss), repr(self.train_accuracy),
                repr(self.val_loss), repr(self.val_accuracy), f"{self.wall_seconds:.3f}"]


def _inputs(model: FusionModel, batch: Sequence[ClipSample], visuals: Sequence[np.ndarray] | None = None):
    stack = np.stack(visuals if visuals is not None else [s.visual for s in batch])
    if model.mode == "video":
        return stack, None
    if any(s.audio is None for s in batch):
        raise ConfigError("audio+video model needs samples loaded with audio")
    return stack, np.stack([s.audio for s in batch])


def evaluate(model: FusionModel, samples: Sequence[ClipSample], batch_size: int = 32
             ) -> tuple[float, float, np.ndarray]:
    """Mean cross-entropy, accuracy and a ``confusion[true][pred]`` count matrix."""
    if not samples:
        raise ConfigError("cannot evaluate an empty set")
    n_classes = model.config.n_classes
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    total = 0.0
    for start in range(0, len(samples), batch_size):
        batch = samples[start:start + batch_size]
        labels = np.array([s.label for s in batch])
        scores = model.forward_fused(*_inputs(model, batch))
        total += softmax_cross_entropy(scores, labels).item() * len(batch)
        pred = np.argmax(scores.data, axis=1)
        np.add.at(confusion, (labels, pred), 1)
    return total / len(samples), float(np.trace(confusion)) / len(samples), confusion


def _augment_seed(config: TrainConfig, clip_id: str) -> int:
    return config.augment_seed * 1_000_003 + zlib.crc32(clip_id.encode())


def epoch_order(n_items: int, config: TrainConfig, epoch: int) -> np.ndarray:
    """Permutation used for ``epoch``; depends only on the seed and epoch index."""
    return np.random.default_rng([config.shuffle_seed, epoch]).permutation(n_items)


def train(model: FusionModel, train_set: Sequence[ClipSample], val_set: Sequence[ClipSample],
          config: TrainConfig = TrainConfig(),
          on_epoch: Callable[[EpochReport], None] | None = None) -> tuple[FusionModel, list[EpochReport]]:
    """Train ``model`` in place and return the best-validation snapshot with all reports.

    Each clip contributes ``1 + augment_copies`` items per epoch; copy ``k > 0``
    is the clip's frame stack augmented with a seed derived from its id, so
    augmented variants never cross into the validation set.  With an empty
    validation set there is no early stopping, validation metrics are NaN and
    the final model is returned.
    """
    if not train_set:
        raise ConfigError("training set is empty")
    overlap = {s.clip_id for s in train_set} & {s.clip_id for s in val_set}
    if overlap:
        raise ConfigError(f"training and validation sets share clips: {sorted(overlap)[:5]}")

    params = model.parameters()
    state = AdamState(learning_rate=config.learning_rate, weight_decay=config.weight_decay,
                      decoupled=config.decoupled_decay)
    items = [(i, k) for i in range(len(train_set)) for k in range(config.augment_copies + 1)]
    reports: list[EpochReport] = []
    best, best_acc, stale = None, -math.inf, 0

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = epoch_order(len(items), config, epoch)
        loss_sum, correct = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            picked = [items[j] for j in order[start:start + config.batch_size]]
            batch = [train_set[i] for i, _ in picked]
            visuals = [s.visual if k == 0 else vision.augment(s.visual, _augment_seed(config, s.clip_id) + k)
                       for s, (_, k) in zip(batch, picked)]
            labels = np.array([s.label for s in batch])
            model.zero_grad()
            where = (f"epoch {epoch}, batch starting at position {start} "
                     f"(clips: {', '.join(s.clip_id for s in batch)})")
            scores = model.forward_fused(*_inputs(model, batch, visuals))
            try:
                loss = softmax_cross_entropy(scores, labels)
            except NumericError as exc:
                raise NumericError(f"{exc} in {where}") from exc
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"non-finite loss {value} in {where}")
            loss.backward()
            adam_step(params, state)
            loss_sum += value * len(batch)
            correct += int(np.sum(np.argmax(scores.data, axis=1) == labels))
        model.zero_grad()

        if val_set:
            val_loss, val_acc, _ = evaluate(model, val_set, config.eval_batch_size)
        else:
            val_loss = val_acc = math.nan
        report = EpochReport(epoch, loss_sum / len(items), correct / len(items), val_loss, val_acc,
                             time.perf_counter() - t0)
        reports.append(report)
        if on_epoch is not None:
            on_epoch(report)

        if not val_set:
            continue
        if val_acc > best_acc:
            best, best_acc, stale = model.copy(), val_acc, 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    return (best if best is not None else model), reports


LOG_HEADER = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "seconds"]


def write_epoch_log(path: str | os.PathLike, reports: Sequence[EpochReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_HEADER)
        for r in reports:
            w.writerow(r.row())
