"""Experiment tags, matrix enumeration, and the end-to-end runner.

A tag names one cell of the experiment grid:

    <dataset>_<loss>_<text>_<labelmod>_<vocab>[_<pretrain>]

    dataset   BRBT | Bangla | RB      (case-insensitive on parse)
    loss      bin | cat
    text      PN | FT
    labelmod  ra | ato2
    vocab     1 (full) | 2 (fixed cap 500)
    pretrain  pre1 | pre2             (optional; which column pre-trains)

``bin`` pairs only with ``ra`` (1-node head); ``ra`` + ``cat`` uses a 2-node
head and ``ato2`` always uses the 3-node head. The optional suffix marks
transfer runs: ``pre1`` trains on label1 first and finishes on label2,
``pre2`` the reverse. The plain grid has 36 cells; with both pre-training
orders it doubles to 72.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import time
from dataclasses import dataclass, replace
from pathlib import Path

from . import annotations as ann
from . import corpus as cp
from .checkpoint import save_checkpoint
from .curves import emit_curves
from .numerics import LossKind
from .recurrent import ModelParams, init_model
from .training import LabeledSet, TrainConfig, TrainingHistory, pretrain_transfer, train, evaluate, write_history_csv

__all__ = [
    "DATASET_TAGS",
    "FIXED_VOCAB_CAP",
    "ExperimentConfig",
    "ExperimentReport",
    "RunSettings",
    "TagError",
    "parse_tag",
    "format_tag",
    "enumerate_matrix",
    "derive_seed",
    "run_experiment",
]

DATASET_TAGS = ("BRBT", "Bangla", "RB")
TEXT_MODES = ("PN", "FT")
LOSS_TAGS = ("bin", "cat")
LABEL_MODS = ("ra", "ato2")
VOCAB_TAGS = (1, 2)
FIXED_VOCAB_CAP = 500

_PRETRAIN_SUFFIX = {"label1_first": "pre1", "label2_first": "pre2"}
_SUFFIX_PRETRAIN = {v: k for k, v in _PRETRAIN_SUFFIX.items()}
_DATASET_BY_LOWER = {t.lower(): t for t in DATASET_TAGS}


class TagError(ValueError):
    """Raised for malformed tags or illegal tag combinations."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the experiment grid."""

    dataset: str
    loss_tag: str
    text_mode: str
    label_mod: str
    vocab_tag: int
    active_labels: str = "label1"
    pretrain_order: str = "none"

    def __post_init__(self):
        if self.dataset not in DATASET_TAGS:
            raise TagError(f"unknown dataset tag {self.dataset!r}")
        if self.loss_tag not in LOSS_TAGS:
            raise TagError(f"unknown loss tag {self.loss_tag!r}")
        if self.text_mode not in TEXT_MODES:
            raise TagError(f"unknown text tag {self.text_mode!r}")
        if self.label_mod not in LABEL_MODS:
            raise TagError(f"unknown label-mod tag {self.label_mod!r}")
        if self.vocab_tag not in VOCAB_TAGS:
            raise TagError(f"unknown vocab tag {self.vocab_tag!r}")
        if self.label_mod == "ato2" and self.loss_tag == "bin":
            raise TagError(
                "'bin' is incompatible with 'ato2': binary loss needs a "
                "1-node head, but ato2 keeps three classes"
            )
        if self.active_labels not in ("label1", "label2"):
            raise TagError(f"active_labels must be label1/label2, got {self.active_labels!r}")
        if self.pretrain_order not in ("none", "label1_first", "label2_first"):
            raise TagError(f"bad pretrain_order {self.pretrain_order!r}")
        if self.pretrain_order == "label1_first" and self.active_labels != "label2":
            raise TagError("pre-training on label1 must finish on label2")
        if self.pretrain_order == "label2_first" and self.active_labels != "label1":
            raise TagError("pre-training on label2 must finish on label1")

    @property
    def n_out(self) -> int:
        if self.label_mod == "ato2":
            return 3
        return 1 if self.loss_tag == "bin" else 2

    @property
    def loss_kind(self) -> LossKind:
        return (
            LossKind.BINARY_CROSSENTROPY
            if self.loss_tag == "bin"
            else LossKind.CATEGORICAL_CROSSENTROPY
        )

    @property
    def pretrain_labels(self) -> str | None:
        """Column used for the pre-training phase, if any."""
        if self.pretrain_order == "none":
            return None
        return "label1" if self.pretrain_order == "label1_first" else "label2"

    def tag(self) -> str:
        base = (
            f"{self.dataset}_{self.loss_tag}_{self.text_mode}"
            f"_{self.label_mod}_{self.vocab_tag}"
        )
        if self.pretrain_order == "none":
            return base
        return f"{base}_{_PRETRAIN_SUFFIX[self.pretrain_order]}"


def format_tag(config: ExperimentConfig) -> str:
    return config.tag()


def parse_tag(tag: str) -> ExperimentConfig:
    """Parse a tag string; raises :class:`TagError` with the violated rule."""
    parts = tag.split("_")
    if len(parts) not in (5, 6):
        raise TagError(
            f"tag {tag!r} must look like <dataset>_<loss>_<text>_<labelmod>_<vocab>"
            f"[_<pretrain>]"
        )
    dataset = _DATASET_BY_LOWER.get(parts[0].lower())
    if dataset is None:
        raise TagError(f"unknown dataset tag {parts[0]!r} in {tag!r}")
    try:
        vocab_tag = int(parts[4])
    except ValueError:
        raise TagError(f"vocab tag must be 1 or 2, got {parts[4]!r}") from None
    active, order = "label1", "none"
    if len(parts) == 6:
        order = _SUFFIX_PRETRAIN.get(parts[5])
        if order is None:
            raise TagError(f"unknown pre-training suffix {parts[5]!r} in {tag!r}")
        active = "label2" if order == "label1_first" else "label1"
    return ExperimentConfig(
        dataset=dataset,
        loss_tag=parts[1],
        text_mode=parts[2],
        label_mod=parts[3],
        vocab_tag=vocab_tag,
        active_labels=active,
        pretrain_order=order,
    )


def enumerate_matrix(include_pretrain: bool = False) -> list[ExperimentConfig]:
    """Every legal grid cell in deterministic lexical tag order.

    3 datasets x 2 text modes x 3 legal loss/label-mod pairs x 2 vocab
    modes = 36 cells; ``include_pretrain`` replaces each with its two
    transfer variants, 72 in total.
    """
    configs = []
    for dataset in DATASET_TAGS:
        for text_mode in TEXT_MODES:
            for label_mod, loss_tag in (("ra", "bin"), ("ra", "cat"), ("ato2", "cat")):
                for vocab_tag in VOCAB_TAGS:
                    base = ExperimentConfig(
                        dataset=dataset,
                        loss_tag=loss_tag,
                        text_mode=text_mode,
                        label_mod=label_mod,
                        vocab_tag=vocab_tag,
                    )
                    if not include_pretrain:
                        configs.append(base)
                        continue
                    configs.append(
                        replace(
                            base,
                            pretrain_order="label1_first",
                            active_labels="label2",
                        )
                    )
                    configs.append(
                        replace(
                            base,
                            pretrain_order="label2_first",
                            active_labels="label1",
                        )
                    )
    return sorted(configs, key=lambda c: c.tag())


def derive_seed(master_seed: int, tag: str) -> int:
    """Per-cell seed from the master seed and the tag, stable across runs."""
    digest = hashlib.sha256(f"{master_seed}:{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % (2**31)


@dataclass(frozen=True)
class RunSettings:
    """Pipeline knobs the tag grammar does not cover."""

    maxlen: int = 128
    embed_dim: int = 128
    hidden: int = 128
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    dropout_rate: float = 0.20
    peephole_cell: str = "new"
    pretrain_epochs: int | None = None  # None: same as the main phase


@dataclass(frozen=True)
class ExperimentReport:
    tag: str
    config: ExperimentConfig
    n_out: int
    chance: float
    split_sizes: dict
    vocab_size: int
    test_loss: float
    test_accuracy: float
    margin_over_chance: float
    seed: int
    wall_time_s: float
    history: TrainingHistory
    pretrain_history: TrainingHistory | None

    def to_json(self) -> str:
        payload = {
            "tag": self.tag,
            "config": {
                "dataset": self.config.dataset,
                "loss_tag": self.config.loss_tag,
                "text_mode": self.config.text_mode,
                "label_mod": self.config.label_mod,
                "vocab_tag": self.config.vocab_tag,
                "active_labels": self.config.active_labels,
                "pretrain_order": self.config.pretrain_order,
            },
            "n_out": self.n_out,
            "chance": self.chance,
            "split_sizes": self.split_sizes,
            "vocab_size": self.vocab_size,
            "test_loss": self.test_loss,
            "test_accuracy": self.test_accuracy,
            "margin_over_chance": self.margin_over_chance,
            "seed": self.seed,
            "wall_time_s": self.wall_time_s,
            "epochs": len(self.history),
            "pretrain_epochs": (
                len(self.pretrain_history) if self.pretrain_history else 0
            ),
        }
        return json.dumps(payload, indent=2)


def _labeled_view(dataset: cp.EncodedDataset, which: str, label_mod: str) -> LabeledSet:
    """Apply the label transform to one column of an encoded split."""
    if label_mod == "ra":
        filtered, classes = ann.apply_ra(dataset, which)
        return LabeledSet(filtered.sequences, classes)
    filtered, classes = ann.apply_ato2(dataset, which)
    return LabeledSet(filtered.sequences, classes)


def run_experiment(
    config: ExperimentConfig,
    corpus_path,
    out_dir,
    train_cfg: TrainConfig,
    settings: RunSettings = RunSettings(),
) -> ExperimentReport:
    """Run one grid cell end to end and write its artifacts.

    Pipeline: filter rows by dataset tag (script detection on the raw text),
    select the text variant, normalize + tokenize, transform the active label
    column, build the vocabulary on the surviving rows, encode, split, train
    (with an optional pre-training phase on the other column), evaluate on
    the held-out test split, then write report.json, history.csv, the SVG
    curves, and a checkpoint under ``out_dir/<tag>/``.

    The training seed is derived from ``train_cfg.seed`` (the master seed)
    and the tag, so a cell behaves identically standalone or inside the
    matrix. All output lands in the tag's own directory; re-running a tag
    replaces only that directory.
    """
    tag = config.tag()
    try:
        return _run_experiment(config, corpus_path, out_dir, train_cfg, settings, tag)
    except TagError:
        raise
    except (ValueError, OSError, RuntimeError) as exc:
        raise RuntimeError(f"[{tag}] {exc}") from exc


def _run_experiment(config, corpus_path, out_dir, train_cfg, settings, tag):
    started = time.perf_counter()
    seed = derive_seed(train_cfg.seed, tag)
    samples = cp.load_corpus(corpus_path)
    rows = cp.filter_by_dataset_tag(samples, config.dataset)
    if not rows:
        raise ValueError(f"no rows match dataset tag {config.dataset!r}")

    texts = []
    kept_rows = []
    for sample in rows:
        text = cp.select_text(sample, config.text_mode)
        if text is None:
            continue  # PN mode and no tagged variant for this row
        kept_rows.append(sample)
        texts.append(text)
    if not kept_rows:
        raise ValueError(f"no rows carry a {config.text_mode!r} text variant")

    token_lists = [cp.tokenize(cp.normalize_text(t)) for t in texts]
    labels1 = [s.label1 for s in kept_rows]
    labels2 = [s.label2 for s in kept_rows]

    # transform the active column first; the vocabulary and the split are
    # built over the rows that survive it
    if config.label_mod == "ra":
        active = labels1 if config.active_labels == "label1" else labels2
        keep, _ = ann.ra_classes(active)
        token_lists = [tl for tl, k in zip(token_lists, keep) if k]
        labels1 = [lab for lab, k in zip(labels1, keep) if k]
        labels2 = [lab for lab, k in zip(labels2, keep) if k]
        if not token_lists:
            raise ValueError("every row was dropped by the 'ra' transform")

    vocab = cp.build_vocab(
        token_lists,
        mode="full" if config.vocab_tag == 1 else "fixed",
        cap=None if config.vocab_tag == 1 else FIXED_VOCAB_CAP,
    )
    encoded = cp.encode_corpus(token_lists, labels1, labels2, vocab, settings.maxlen)
    train_ds, val_ds, test_ds = cp.split_shuffle(encoded, settings.ratios, seed)

    params = init_model(
        vocab_size=vocab.size,
        embed_dim=settings.embed_dim,
        hidden=settings.hidden,
        n_out=config.n_out,
        seed=seed,
        dropout_rate=settings.dropout_rate,
        peephole_cell=settings.peephole_cell,
    )
    cfg = replace(train_cfg, seed=seed)

    active = config.active_labels
    train_active = _labeled_view(train_ds, active, config.label_mod)
    val_active = _labeled_view(val_ds, active, config.label_mod)
    test_active = _labeled_view(test_ds, active, config.label_mod)

    pretrain_history = None
    if config.pretrain_order == "none":
        params, history = train(params, train_active, val_active, cfg)
    else:
        other = config.pretrain_labels
        phase_a = (
            _labeled_view(train_ds, other, config.label_mod),
            _labeled_view(val_ds, other, config.label_mod),
        )
        cfg_a = replace(
            cfg,
            epochs=settings.pretrain_epochs
            if settings.pretrain_epochs is not None
            else cfg.epochs,
        )
        params, (pretrain_history, history) = pretrain_transfer(
            params, phase_a, (train_active, val_active), cfg_a, cfg
        )

    test_loss, test_accuracy = evaluate(params, test_active, cfg.loss)
    chance = 1.0 / config.n_out if config.n_out > 1 else 0.5
    wall = time.perf_counter() - started

    report = ExperimentReport(
        tag=tag,
        config=config,
        n_out=config.n_out,
        chance=chance,
        split_sizes={
            "train": len(train_active),
            "val": len(val_active),
            "test": len(test_active),
        },
        vocab_size=vocab.size,
        test_loss=test_loss,
        test_accuracy=test_accuracy,
        margin_over_chance=test_accuracy - chance,
        seed=seed,
        wall_time_s=wall,
        history=history,
        pretrain_history=pretrain_history,
    )

    tag_dir = Path(out_dir) / tag
    if tag_dir.exists():
        shutil.rmtree(tag_dir)
    tag_dir.mkdir(parents=True)
    with open(tag_dir / "report.json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    if len(history) > 0:
        emit_curves(history, tag_dir)
    else:
        write_history_csv(history, tag_dir / "history.csv")
    if pretrain_history is not None:
        write_history_csv(pretrain_history, tag_dir / "pretrain_history.csv")
    save_checkpoint(params, tag_dir / "checkpoint.ckpt")
    cp.write_vocab_tsv(vocab, tag_dir / "vocab.tsv")
    return report
