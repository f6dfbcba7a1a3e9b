"""Seeded training loop with early stopping on validation loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import ModelGraph, backprop, clone_params, forward
from .ops import PROB_FLOOR, as_tensor
from .optim import AdamState, adam_step


class EmptyDataset(ValueError):
    """Training or validation split holds no samples."""


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int
    patience: int
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 42
    restore_best: bool = True

    def __post_init__(self) -> None:
        if min(self.max_epochs, self.patience, self.batch_size) < 1:
            raise ValueError("max_epochs, patience, and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int  # 1-indexed
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord]
    stopped_epoch: int
    best_epoch: int


def evaluate(model: ModelGraph, x, y, batch_size: int = 256) -> tuple[float, float]:
    """Mean scce loss and top-1 accuracy, computed in batches."""
    x = as_tensor(x)
    y = np.asarray(y)
    n = len(y)
    if n == 0:
        raise EmptyDataset("cannot evaluate on an empty set")
    loss_sum = 0.0
    hits = 0
    for lo in range(0, n, batch_size):
        probs = forward(model, x[lo : lo + batch_size])
        labels = y[lo : lo + batch_size]
        picked = probs[np.arange(len(labels)), labels]
        loss_sum += float(-np.log(np.maximum(picked, PROB_FLOOR)).sum())
        hits += int((probs.argmax(axis=1) == labels).sum())
    return loss_sum / n, hits / n


def train(model: ModelGraph, train_set, val_set, cfg: TrainConfig,
          val_metrics_fn=None, progress=None) -> tuple[ModelGraph, TrainHistory]:
    """Adam-train until max_epochs or patience consecutive non-improvements.

    An epoch improves only when its validation loss is strictly below the
    best seen; best_epoch is the first epoch attaining the minimum.  With
    restore_best the returned model carries that epoch's exact parameters.
    Everything (shuffling included) is determined by cfg.seed.

    val_metrics_fn, when given, replaces the built-in validation pass and
    must return (val_loss, val_accuracy) for the current model: an
    instrumentation seam, also handy when validation needs augmentation-
    free preprocessing.
    """
    x_train, y_train = train_set
    x_val, y_val = val_set
    x_train = as_tensor(x_train)
    y_train = np.asarray(y_train)
    if len(y_train) == 0:
        raise EmptyDataset("training split is empty")
    if val_metrics_fn is None and len(np.asarray(y_val)) == 0:
        raise EmptyDataset("validation split is empty")

    rng = np.random.default_rng(cfg.seed)
    state = AdamState.for_params(model.parameters)
    history: list[EpochRecord] = []
    best_loss = np.inf
    best_epoch = 0
    best_params = clone_params(model.parameters)
    bad_epochs = 0
    stopped_epoch = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(y_train))
        loss_sum = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            loss, _, grads = backprop(model, x_train[idx], y_train[idx])
            adam_step(model.parameters, grads, state, lr=cfg.learning_rate)
            loss_sum += loss * len(idx)
        train_loss = loss_sum / len(y_train)

        if val_metrics_fn is not None:
            val_loss, val_acc = val_metrics_fn(model)
        else:
            val_loss, val_acc = evaluate(model, x_val, y_val, cfg.batch_size)

        record = EpochRecord(epoch, train_loss, float(val_loss), float(val_acc))
        history.append(record)
        if progress is not None:
            progress(record)

        stopped_epoch = epoch
        if val_loss < best_loss:
            best_loss = val_loss
            best_epoch = epoch
            best_params = clone_params(model.parameters)
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break

    if cfg.restore_best:
        model.parameters = best_params
    return model, TrainHistory(epochs=history, stopped_epoch=stopped_epoch,
                               best_epoch=best_epoch)
