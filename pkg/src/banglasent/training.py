"""Mini-batch training loop, evaluation, and cross-annotation pre-training.

The loop is deterministic given (params, data, seed): each epoch draws a
shuffle permutation and fresh dropout masks from one seeded generator, and
batches are visited in permutation order. Per-epoch metrics mirror the usual
loss / val_loss / acc / val_acc curves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .checkpoint import params_checksum
from .numerics import LossKind
from .recurrent import ModelParams, model_backward, model_forward, model_loss, predict_classes
from . import numerics

__all__ = [
    "SgdConfig",
    "AdamConfig",
    "OptimizerConfig",
    "TrainConfig",
    "LabeledSet",
    "TrainingHistory",
    "train",
    "evaluate",
    "pretrain_transfer",
    "write_history_csv",
    "read_history_csv",
    "make_optimizer",
    "lstm_checksum",
]

_EVAL_CHUNK = 512


@dataclass(frozen=True)
class SgdConfig:
    lr: float = 0.01

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")


OptimizerConfig = Union[SgdConfig, AdamConfig]


class _Sgd:
    def __init__(self, cfg: SgdConfig):
        self.lr = cfg.lr

    def step(self, tensors, grads):
        for name, tensor in tensors.items():
            tensor -= self.lr * grads[name]

    def state_tensors(self):
        return {}

    def state_meta(self):
        return {"optimizer": "sgd", "lr": self.lr}


class _Adam:
    def __init__(self, cfg: AdamConfig, tensors):
        self.cfg = cfg
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}

    def step(self, tensors, grads):
        c = self.cfg
        self.t += 1
        bias1 = 1.0 - c.beta1**self.t
        bias2 = 1.0 - c.beta2**self.t
        for name, tensor in tensors.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            tensor -= c.lr * (m / bias1) / (np.sqrt(v / bias2) + c.eps)

    def state_tensors(self):
        out = {f"m.{k}": v for k, v in self.m.items()}
        out.update({f"v.{k}": v for k, v in self.v.items()})
        return out

    def state_meta(self):
        return {
            "optimizer": "adam",
            "lr": self.cfg.lr,
            "beta1": self.cfg.beta1,
            "beta2": self.cfg.beta2,
            "eps": self.cfg.eps,
            "t": self.t,
        }


def make_optimizer(cfg: OptimizerConfig, tensors):
    if isinstance(cfg, SgdConfig):
        return _Sgd(cfg)
    if isinstance(cfg, AdamConfig):
        return _Adam(cfg, tensors)
    raise TypeError(f"unknown optimizer config {cfg!r}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    loss: LossKind
    batch_size: int = 32
    optimizer: OptimizerConfig = AdamConfig()
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class LabeledSet:
    """Encoded sequences paired with integer class targets."""

    sequences: np.ndarray
    classes: np.ndarray

    def __post_init__(self):
        seq = np.asarray(self.sequences, dtype=np.int64)
        cls = np.asarray(self.classes, dtype=np.int64)
        if seq.ndim != 2:
            raise ValueError(f"sequences must be 2-D, got {seq.shape}")
        if cls.shape != (seq.shape[0],):
            raise ValueError(
                f"{cls.shape[0] if cls.ndim else 'scalar'} classes "
                f"for {seq.shape[0]} sequences"
            )
        object.__setattr__(self, "sequences", seq)
        object.__setattr__(self, "classes", cls)

    def __len__(self) -> int:
        return self.sequences.shape[0]


@dataclass
class TrainingHistory:
    """Per-epoch loss / val_loss / acc / val_acc records."""

    loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)

    def append(self, loss: float, val_loss: float, acc: float, val_acc: float):
        self.loss.append(loss)
        self.val_loss.append(val_loss)
        self.acc.append(acc)
        self.val_acc.append(val_acc)

    def __len__(self) -> int:
        return len(self.loss)


def _check_labels(data: LabeledSet, n_out: int, name: str) -> None:
    n_classes = n_out if n_out > 1 else 2
    if len(data) and (data.classes.min() < 0 or data.classes.max() >= n_classes):
        raise ValueError(
            f"{name}: class labels must lie in 0..{n_classes - 1} "
            f"for a {n_out}-node head"
        )


def evaluate(
    params: ModelParams, data: LabeledSet, loss: LossKind
) -> tuple[float, float]:
    """Inference-mode mean loss and accuracy. Pure; no dropout, no rng."""
    loss.check_head(params.n_out)
    _check_labels(data, params.n_out, "evaluate")
    if len(data) == 0:
        raise ValueError("evaluate needs a non-empty dataset")
    total_loss = 0.0
    correct = 0
    for start in range(0, len(data), _EVAL_CHUNK):
        seq = data.sequences[start : start + _EVAL_CHUNK]
        cls = data.classes[start : start + _EVAL_CHUNK]
        cache = model_forward(params, seq, training=False)
        total_loss += model_loss(cache, cls) * len(seq)
        correct += int((predict_classes(cache.probs, params.n_out) == cls).sum())
    return total_loss / len(data), correct / len(data)


def train(
    params: ModelParams,
    train_set: LabeledSet,
    val_set: LabeledSet,
    cfg: TrainConfig,
    optimizer=None,
) -> tuple[ModelParams, TrainingHistory]:
    """Optimize ``params`` in place over seeded mini-batches.

    Each epoch: shuffle, then forward (training mode, fresh dropout masks),
    backward, optimizer step per batch; afterwards full-train and full-val
    metrics are appended to the history. A non-finite loss aborts with a
    diagnostic rather than continuing to diverge.

    Passing an ``optimizer`` built with :func:`make_optimizer` resumes or
    exposes its moment buffers (for the state sidecar); by default a fresh
    one is created from ``cfg.optimizer``.
    """
    cfg.loss.check_head(params.n_out)
    _check_labels(train_set, params.n_out, "train_set")
    _check_labels(val_set, params.n_out, "val_set")
    history = TrainingHistory()
    if cfg.epochs == 0:
        return params, history
    n = len(train_set)
    if n == 0:
        raise ValueError("training set is empty")
    if cfg.batch_size > n:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds dataset size {n}")

    rng = np.random.default_rng(cfg.seed)
    tensors = params.tensors()
    opt = optimizer if optimizer is not None else make_optimizer(cfg.optimizer, tensors)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            cache = model_forward(
                params, train_set.sequences[idx], training=True, rng=rng
            )
            batch_loss = model_loss(cache, train_set.classes[idx])
            if not np.isfinite(batch_loss):
                raise RuntimeError(
                    f"non-finite loss {batch_loss} at epoch {epoch + 1}, "
                    f"batch starting {start} (lr too high or data broken)"
                )
            grads = model_backward(cache, train_set.classes[idx], cfg.loss)
            opt.step(tensors, grads)
        train_loss, train_acc = evaluate(params, train_set, cfg.loss)
        val_loss, val_acc = evaluate(params, val_set, cfg.loss)
        history.append(train_loss, val_loss, train_acc, val_acc)
    return params, history


def lstm_checksum(params: ModelParams) -> str:
    """Digest of the carried-over tensors (embedding + cell, no head)."""
    names = tuple(n for n in params.tensors() if n not in ("head_w", "head_b"))
    return params_checksum(params, only=names)


def pretrain_transfer(
    params: ModelParams,
    phase_a: tuple[LabeledSet, LabeledSet],
    phase_b: tuple[LabeledSet, LabeledSet],
    cfg_a: TrainConfig,
    cfg_b: TrainConfig,
    reinit_head: bool = False,
) -> tuple[ModelParams, tuple[TrainingHistory, TrainingHistory]]:
    """Train on one annotation column, then continue on the other.

    Embedding and LSTM weights always carry across the handoff. The head is
    kept too by default (training simply continues in the same model);
    ``reinit_head`` redraws it, for when label semantics differ across
    columns. Each phase is a (train, val) pair.
    """
    for name, (tr, va) in (("phase_a", phase_a), ("phase_b", phase_b)):
        for part in (tr, va):
            _check_labels(part, params.n_out, name)
    params, hist_a = train(params, phase_a[0], phase_a[1], cfg_a)
    if reinit_head:
        head_seed = int(np.random.SeedSequence([cfg_b.seed, 1]).generate_state(1)[0])
        params.head_w[...] = numerics.init_params(params.head_w.shape, head_seed)
        params.head_b[...] = 0.0
    params, hist_b = train(params, phase_b[0], phase_b[1], cfg_b)
    return params, (hist_a, hist_b)


def write_history_csv(history: TrainingHistory, path) -> None:
    """CSV export with header ``epoch,loss,val_loss,acc,val_acc``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "val_loss", "acc", "val_acc"])
        for epoch in range(len(history)):
            writer.writerow(
                [
                    epoch + 1,
                    repr(history.loss[epoch]),
                    repr(history.val_loss[epoch]),
                    repr(history.acc[epoch]),
                    repr(history.val_acc[epoch]),
                ]
            )


def read_history_csv(path) -> TrainingHistory:
    history = TrainingHistory()
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            history.append(
                float(row["loss"]),
                float(row["val_loss"]),
                float(row["acc"]),
                float(row["val_acc"]),
            )
    return history
