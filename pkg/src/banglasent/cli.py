"""Command-line entry points.

Subcommands: toy, prepare, split, agree, train, eval, run, matrix, plot.
Exit codes: 0 success, 1 usage error (bad arguments or tags), 2 data error
(unreadable or inconsistent inputs).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import annotations as ann
from . import corpus as cp
from .checkpoint import load_checkpoint, save_checkpoint, save_optimizer_state
from .curves import emit_curves
from .experiments import (
    ExperimentConfig,
    RunSettings,
    TagError,
    derive_seed,
    enumerate_matrix,
    parse_tag,
    run_experiment,
)
from .numerics import LossKind
from .recurrent import init_model
from .synthetic import write_toy_corpus
from .training import (
    AdamConfig,
    LabeledSet,
    SgdConfig,
    TrainConfig,
    evaluate,
    make_optimizer,
    read_history_csv,
    train,
    write_history_csv,
)

__all__ = ["cli_main", "main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; we reserve 2 for data errors
    def error(self, message):
        raise _UsageError(message)


def _load_config_file(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".json"):
        return json.loads(text)
    try:
        import tomllib as toml  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as toml
    return toml.loads(text)


_CONFIG_KEYS = (
    "epochs", "batch_size", "seed", "optimizer", "lr", "beta1", "beta2",
    "eps", "loss", "maxlen", "embed_dim", "hidden", "dropout_rate",
    "peephole_cell", "ratios", "pretrain_epochs",
)


def _apply_config_file(args) -> None:
    """Fill unset training options from --config; explicit flags win."""
    if not getattr(args, "config", None):
        return
    values = _load_config_file(args.config)
    unknown = set(values) - set(_CONFIG_KEYS)
    if unknown:
        raise _UsageError(f"unknown config keys: {sorted(unknown)}")
    for key, value in values.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _train_config(args) -> TrainConfig:
    loss_tag = getattr(args, "loss", None) or "bin"
    loss = (
        LossKind.BINARY_CROSSENTROPY
        if loss_tag == "bin"
        else LossKind.CATEGORICAL_CROSSENTROPY
    )
    lr = args.lr
    if (args.optimizer or "adam") == "sgd":
        opt = SgdConfig(lr=lr if lr is not None else 0.01)
    else:
        opt = AdamConfig(
            lr=lr if lr is not None else 1e-3,
            beta1=args.beta1 if args.beta1 is not None else 0.9,
            beta2=args.beta2 if args.beta2 is not None else 0.999,
            eps=args.eps if args.eps is not None else 1e-8,
        )
    return TrainConfig(
        epochs=args.epochs if args.epochs is not None else 10,
        loss=loss,
        batch_size=args.batch_size if args.batch_size is not None else 32,
        optimizer=opt,
        seed=args.seed if args.seed is not None else 0,
    )


def _run_settings(args) -> RunSettings:
    ratios = RunSettings().ratios
    if getattr(args, "ratios", None):
        if isinstance(args.ratios, str):
            ratios = tuple(float(v) for v in args.ratios.split(","))
        else:
            ratios = tuple(float(v) for v in args.ratios)
        if len(ratios) != 3:
            raise _UsageError("--ratios needs three comma-separated fractions")
    return RunSettings(
        maxlen=args.maxlen if args.maxlen is not None else 128,
        embed_dim=args.embed_dim if args.embed_dim is not None else 128,
        hidden=args.hidden if args.hidden is not None else 128,
        ratios=ratios,
        dropout_rate=args.dropout_rate if args.dropout_rate is not None else 0.20,
        peephole_cell=args.peephole_cell or "new",
        pretrain_epochs=getattr(args, "pretrain_epochs", None),
    )


def _add_train_opts(sub) -> None:
    sub.add_argument("--epochs", type=int, default=None)
    sub.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    sub.add_argument("--optimizer", choices=("sgd", "adam"), default=None)
    sub.add_argument("--lr", type=float, default=None)
    sub.add_argument("--beta1", type=float, default=None)
    sub.add_argument("--beta2", type=float, default=None)
    sub.add_argument("--eps", type=float, default=None)
    sub.add_argument("--maxlen", type=int, default=None)
    sub.add_argument("--embed-dim", dest="embed_dim", type=int, default=None)
    sub.add_argument("--hidden", type=int, default=None)
    sub.add_argument("--dropout-rate", dest="dropout_rate", type=float, default=None)
    sub.add_argument(
        "--peephole-cell", dest="peephole_cell", choices=("new", "prev"), default=None
    )


def _add_common(sub) -> None:
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--config", default=None, help="TOML or JSON key-value file")
    sub.add_argument("--out", default=".", help="output directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="banglasent", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    toy = subs.add_parser("toy", help="write a seeded synthetic corpus")
    toy.add_argument("--samples", type=int, default=200)
    toy.add_argument("--classes", type=int, default=2, choices=(2, 3))
    toy.add_argument("--agreement", type=float, default=0.85)
    _add_common(toy)

    prepare = subs.add_parser("prepare", help="normalize, tokenize and encode a corpus")
    prepare.add_argument("corpus")
    prepare.add_argument("--text-mode", dest="text_mode", choices=("PN", "FT"), default="FT")
    prepare.add_argument("--maxlen", type=int, default=None)
    prepare.add_argument("--vocab", choices=("full", "fixed"), default="full")
    prepare.add_argument("--cap", type=int, default=500)
    _add_common(prepare)

    split = subs.add_parser("split", help="shuffle and split an encoded dataset")
    split.add_argument("dataset")
    split.add_argument("--ratios", default=None)
    _add_common(split)

    agree = subs.add_parser("agree", help="dual-annotation agreement report")
    agree.add_argument("corpus")
    agree.add_argument("--json", action="store_true", help="also write agreement.json")
    _add_common(agree)

    tr = subs.add_parser("train", help="train on prepared train/val datasets")
    tr.add_argument("--train", dest="train_path", required=True)
    tr.add_argument("--val", dest="val_path", required=True)
    tr.add_argument("--label-column", dest="label_column", choices=("label1", "label2"), default="label1")
    tr.add_argument("--label-mod", dest="label_mod", choices=("ra", "ato2"), default="ra")
    tr.add_argument("--loss", choices=("bin", "cat"), default=None)
    _add_train_opts(tr)
    _add_common(tr)

    ev = subs.add_parser("eval", help="evaluate a checkpoint on a dataset")
    ev.add_argument("--data", required=True)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--label-column", dest="label_column", choices=("label1", "label2"), default="label1")
    ev.add_argument("--label-mod", dest="label_mod", choices=("ra", "ato2"), default="ra")
    ev.add_argument("--loss", choices=("bin", "cat"), default=None)
    _add_common(ev)

    run = subs.add_parser("run", help="run one experiment tag end to end")
    run.add_argument("tag")
    run.add_argument("--corpus", required=True)
    run.add_argument("--loss", default=None, help=argparse.SUPPRESS)
    run.add_argument("--ratios", default=None)
    run.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int, default=None)
    _add_train_opts(run)
    _add_common(run)

    matrix = subs.add_parser("matrix", help="run or list every experiment tag")
    matrix.add_argument("--corpus", default=None)
    matrix.add_argument("--pretrain", action="store_true", help="include both pre-training orders")
    matrix.add_argument("--dry-run", dest="dry_run", action="store_true")
    matrix.add_argument("--workers", type=int, default=1)
    matrix.add_argument("--loss", default=None, help=argparse.SUPPRESS)
    matrix.add_argument("--ratios", default=None)
    matrix.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int, default=None)
    _add_train_opts(matrix)
    _add_common(matrix)

    plot = subs.add_parser("plot", help="render SVG curves from a history CSV")
    plot.add_argument("history")
    _add_common(plot)

    return parser


def _labeled_from_encoded(dataset, column: str, label_mod: str) -> LabeledSet:
    if label_mod == "ra":
        filtered, classes = ann.apply_ra(dataset, column)
        return LabeledSet(filtered.sequences, classes)
    _, classes = ann.apply_ato2(dataset, column)
    return LabeledSet(dataset.sequences, classes)


def _n_out_for(label_mod: str, loss_tag: str) -> int:
    if label_mod == "ato2":
        if loss_tag == "bin":
            raise _UsageError("--loss bin is incompatible with --label-mod ato2")
        return 3
    return 1 if loss_tag == "bin" else 2


def _cmd_toy(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "toy_corpus.jsonl"
    samples = write_toy_corpus(
        path,
        n_samples=args.samples,
        n_classes=args.classes,
        seed=args.seed if args.seed is not None else 0,
        label2_agreement=args.agreement,
    )
    print(f"wrote {len(samples)} samples to {path}")
    return 0


def _cmd_prepare(args) -> int:
    samples = cp.load_corpus(args.corpus)
    stats = cp.corpus_stats(samples)
    texts = []
    for s in samples:
        text = cp.select_text(s, args.text_mode)
        if text is None:
            raise ValueError(f"sample {s.id} has no {args.text_mode} text variant")
        texts.append(text)
    token_lists = [cp.tokenize(cp.normalize_text(t)) for t in texts]
    vocab = cp.build_vocab(
        token_lists,
        mode=args.vocab,
        cap=args.cap if args.vocab == "fixed" else None,
    )
    encoded = cp.encode_corpus(
        token_lists,
        [s.label1 for s in samples],
        [s.label2 for s in samples],
        vocab,
        args.maxlen if args.maxlen is not None else 128,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cp.save_encoded(out / "dataset.enc", encoded, vocab)
    cp.write_vocab_tsv(vocab, out / "vocab.tsv")
    print(json.dumps({"rows": len(encoded), "vocab_size": vocab.size, **stats}))
    return 0


def _cmd_split(args) -> int:
    dataset, vocab = cp.load_encoded(args.dataset)
    raw_ratios = args.ratios if args.ratios is not None else "0.7,0.15,0.15"
    if isinstance(raw_ratios, str):
        ratios = tuple(float(v) for v in raw_ratios.split(","))
    else:
        ratios = tuple(float(v) for v in raw_ratios)
    if len(ratios) != 3:
        raise _UsageError("--ratios needs three comma-separated fractions")
    seed = args.seed if args.seed is not None else 0
    train_ds, val_ds, test_ds = cp.split_shuffle(dataset, ratios, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train_ds), ("val", val_ds), ("test", test_ds)):
        cp.save_encoded(out / f"{name}.enc", part, vocab)
    print(
        json.dumps({"train": len(train_ds), "val": len(val_ds), "test": len(test_ds)})
    )
    return 0


def _cmd_agree(args) -> int:
    samples = cp.load_corpus(args.corpus)
    if not samples:
        raise ValueError(f"{args.corpus}: corpus is empty")
    report = ann.confusion_matrix(
        [s.label1 for s in samples], [s.label2 for s in samples]
    )
    print(report.to_table())
    if args.json:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "agreement.json", "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    return 0


def _cmd_train(args) -> int:
    train_ds, vocab = cp.load_encoded(args.train_path)
    val_ds, _ = cp.load_encoded(args.val_path)
    loss_tag = args.loss or ("cat" if args.label_mod == "ato2" else "bin")
    n_out = _n_out_for(args.label_mod, loss_tag)
    args.loss = loss_tag
    cfg = _train_config(args)
    settings = _run_settings(args)
    params = init_model(
        vocab_size=vocab.size,
        embed_dim=settings.embed_dim,
        hidden=settings.hidden,
        n_out=n_out,
        seed=cfg.seed,
        dropout_rate=settings.dropout_rate,
        peephole_cell=settings.peephole_cell,
    )
    train_set = _labeled_from_encoded(train_ds, args.label_column, args.label_mod)
    val_set = _labeled_from_encoded(val_ds, args.label_column, args.label_mod)
    optimizer = make_optimizer(cfg.optimizer, params.tensors())
    params, history = train(params, train_set, val_set, cfg, optimizer=optimizer)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, out / "checkpoint.ckpt")
    save_optimizer_state(
        out / "checkpoint.opt", optimizer.state_tensors(), optimizer.state_meta()
    )
    write_history_csv(history, out / "history.csv")
    if len(history):
        print(
            json.dumps(
                {
                    "epochs": len(history),
                    "final_loss": history.loss[-1],
                    "final_val_acc": history.val_acc[-1],
                }
            )
        )
    return 0


def _cmd_eval(args) -> int:
    dataset, _ = cp.load_encoded(args.data)
    params = load_checkpoint(args.checkpoint)
    loss_tag = args.loss or ("bin" if params.n_out == 1 else "cat")
    loss = (
        LossKind.BINARY_CROSSENTROPY
        if loss_tag == "bin"
        else LossKind.CATEGORICAL_CROSSENTROPY
    )
    data = _labeled_from_encoded(dataset, args.label_column, args.label_mod)
    loss_value, accuracy = evaluate(params, data, loss)
    print(json.dumps({"loss": loss_value, "accuracy": accuracy}))
    return 0


def _cmd_run(args) -> int:
    config = parse_tag(args.tag)
    args.loss = config.loss_tag
    cfg = _train_config(args)
    settings = _run_settings(args)
    report = run_experiment(config, args.corpus, args.out, cfg, settings)
    print(report.to_json())
    return 0


def _cmd_matrix(args) -> int:
    configs = enumerate_matrix(include_pretrain=args.pretrain)
    if args.dry_run:
        for config in configs:
            print(config.tag())
        return 0
    if not args.corpus:
        raise _UsageError("matrix needs --corpus unless --dry-run is given")
    settings = _run_settings(args)

    def one(config: ExperimentConfig):
        args.loss = config.loss_tag
        cfg = _train_config(args)
        return run_experiment(config, args.corpus, args.out, cfg, settings)

    reports = []
    if args.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        args.loss = None
        base_cfg = _train_config(args)
        jobs = [
            (
                config,
                args.corpus,
                args.out,
                replace(
                    base_cfg,
                    loss=config.loss_kind,
                ),
                settings,
            )
            for config in configs
        ]
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            reports = list(pool.map(_run_cell, jobs))
    else:
        reports = [one(config) for config in configs]
    summary = [
        {
            "tag": r.tag,
            "test_accuracy": r.test_accuracy,
            "margin_over_chance": r.margin_over_chance,
        }
        for r in reports
    ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "matrix_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(f"ran {len(reports)} experiments; summary in {out / 'matrix_summary.json'}")
    return 0


def _run_cell(job):
    config, corpus_path, out_dir, cfg, settings = job
    return run_experiment(config, corpus_path, out_dir, cfg, settings)


def _cmd_plot(args) -> int:
    history = read_history_csv(args.history)
    if len(history) == 0:
        raise ValueError(f"{args.history}: no epochs to plot")
    paths = emit_curves(history, args.out)
    print(json.dumps(paths))
    return 0


_COMMANDS = {
    "toy": _cmd_toy,
    "prepare": _cmd_prepare,
    "split": _cmd_split,
    "agree": _cmd_agree,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "matrix": _cmd_matrix,
    "plot": _cmd_plot,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = _COMMANDS[args.command]
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        _apply_config_file(args)
        return handler(args)
    except (_UsageError, TagError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
