"""Command-line entry point.

Subcommands cover the full pipeline: `synth` writes a synthetic dataset,
`preprocess` applies the view-invariant transform, `pretrain` runs the
alternating clustering/prediction training loop, `encode` dumps sequence
features, `probe` trains and scores the linear classifier, and `report`
renders the training log and evaluation report to CSV series and figures.

Command-line flags override config-file values. Every subcommand is
reproducible from its flags, config and seed alone.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .data import (
    default_manifest_path,
    load_jsonl,
    save_jsonl,
    synth_generate,
)
from .errors import ProtoseqError
from .evaluate import extract_encodings, probe_eval, probe_train, stratified_split
from .preprocess import preprocess_dataset
from .trainer import TrainConfig, train


def _cmd_synth(args) -> int:
    dataset = synth_generate(
        n_per_class=args.n_per_class,
        classes=args.classes,
        n_frames=args.frames,
        joint_count=args.joints,
        noise_sigma=args.noise,
        seed=args.seed,
    )
    save_jsonl(dataset, args.out, args.manifest)
    print(f"wrote {len(dataset)} sequences to {args.out}")
    return 0


def _cmd_preprocess(args) -> int:
    dataset = load_jsonl(args.data, args.manifest)
    transformed = preprocess_dataset(dataset)
    out_manifest = args.out_manifest or default_manifest_path(args.out)
    save_jsonl(transformed, args.out, out_manifest)
    print(f"wrote {len(transformed)} view-invariant sequences to {args.out}")
    return 0


def _load_config(args) -> TrainConfig:
    cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.epochs is not None:
        cfg.pretrain_epochs = args.epochs
    if args.no_pc:
        cfg.use_pc = False
    if args.no_rp:
        cfg.use_rp = False
    cfg.validate()
    return cfg


def _cmd_pretrain(args) -> int:
    cfg = _load_config(args)
    dataset = load_jsonl(args.data, args.manifest)
    path = train(
        dataset,
        cfg,
        args.out,
        log_path=args.log,
        threads=args.threads,
    )
    print(f"wrote checkpoint to {path}")
    return 0


def _cmd_encode(args) -> int:
    dataset = load_jsonl(args.data, args.manifest)
    features, labels = extract_encodings(dataset, args.ckpt, threads=args.threads)
    with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id", "label"] + [f"c{i}" for i in range(features.shape[1])]
        )
        for seq, label, row in zip(dataset.sequences, labels, features):
            writer.writerow([seq.id, int(label)] + [repr(float(x)) for x in row])
    print(f"wrote {features.shape[0]} x {features.shape[1]} features to {args.out}")
    return 0


def _cmd_probe(args) -> int:
    dataset = load_jsonl(args.data, args.manifest)
    features, labels = extract_encodings(dataset, args.ckpt, threads=args.threads)
    _, _, cfg = load_checkpoint(args.ckpt)
    seed = args.seed if args.seed is not None else cfg.seed
    epochs = args.epochs if args.epochs is not None else cfg.probe_epochs
    lr = args.lr if args.lr is not None else cfg.probe_lr
    train_idx, test_idx = stratified_split(labels, args.split, seed)
    model = probe_train(
        features[train_idx], labels[train_idx], lr=lr, epochs=epochs, seed=seed
    )
    report = probe_eval(model, features[test_idx], labels[test_idx])
    report.save_json(args.out)
    confusion_csv = args.confusion_csv or str(Path(args.out).with_suffix(".confusion.csv"))
    report.save_confusion_csv(confusion_csv)
    print(
        f"probe accuracy {report.accuracy:.4f} on {len(test_idx)} held-out "
        f"sequences; report at {args.out}"
    )
    return 0


def _cmd_report(args) -> int:
    from . import report as report_mod

    written = report_mod.render(args.log, args.eval, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoseq",
        description="Unsupervised skeleton-sequence representation learning "
        "and linear-probe evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--manifest", default=None, help="manifest path (default: derived)")
    p.add_argument("--classes", type=int, default=3, help="number of classes")
    p.add_argument("--n-per-class", type=int, default=100, help="sequences per class")
    p.add_argument("--frames", type=int, default=50, help="frames per sequence")
    p.add_argument("--joints", type=int, default=8, help="joints per frame (>= 4)")
    p.add_argument("--noise", type=float, default=0.02, help="coordinate noise sigma")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("preprocess", help="apply the view-invariant transform")
    p.add_argument("--data", required=True, help="input JSONL path")
    p.add_argument("--manifest", default=None, help="input manifest (default: derived)")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--out-manifest", default=None, help="output manifest path")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("pretrain", help="run the alternating training loop")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--data", required=True, help="training JSONL path")
    p.add_argument("--manifest", default=None, help="manifest (default: derived)")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--log", default=None, help="JSONL training-log path")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--epochs", type=int, default=None, help="override epoch count")
    p.add_argument("--threads", type=int, default=1, help="encoding threads")
    p.add_argument("--no-pc", action="store_true", help="disable prototype contrast")
    p.add_argument("--no-rp", action="store_true", help="disable reverse prediction")
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("encode", help="dump per-sequence features to CSV")
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="JSONL path")
    p.add_argument("--manifest", default=None, help="manifest (default: derived)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--threads", type=int, default=1, help="encoding threads")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("probe", help="train/evaluate the linear classifier")
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="labeled JSONL path")
    p.add_argument("--manifest", default=None, help="manifest (default: derived)")
    p.add_argument("--out", required=True, help="evaluation report JSON path")
    p.add_argument(
        "--confusion-csv", default=None, help="confusion CSV path (default: derived)"
    )
    p.add_argument("--split", type=float, default=0.7, help="train fraction")
    p.add_argument("--epochs", type=int, default=None, help="probe epochs")
    p.add_argument("--lr", type=float, default=None, help="probe learning rate")
    p.add_argument("--seed", type=int, default=None, help="split/init seed")
    p.add_argument("--threads", type=int, default=1, help="encoding threads")
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("report", help="render log/report to CSV and figures")
    p.add_argument("--log", default=None, help="training-log JSONL path")
    p.add_argument("--eval", default=None, help="evaluation report JSON path")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ProtoseqError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
