"""Command-line entry point covering every pipeline stage.

Results go to standard output, progress notes to standard error.  Exit codes:
0 success, 2 usage error, 1 runtime failure.  All randomness flows from
--seed (default 42) so identical invocations produce identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .augmentation import AugmentConfig, expand_dataset
from .dataset import (
    LabelMap,
    SplitConfig,
    dataset_to_arrays,
    load_class_tree,
    render_synthetic_corpus,
    save_class_tree,
    stratified_split,
)
from .imagecore import GrayImage, decode_image, encode_image, to_grayscale
from .model_zoo import (
    ARCHITECTURE_NAMES,
    DEFAULT_PATIENCE,
    MODEL_INPUT_SHAPE,
    ArchitectureId,
    build_architecture,
)
from .pipeline import recognize_page, to_report
from .preprocess import PreprocessConfig, preprocess
from .segmentation import SegmentationParams, boxes_to_manifest, segment_page
from .tensornet import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train

DEFAULT_SEED = 42
GLYPH_SIDE = MODEL_INPUT_SHAPE[1]


def _load_gray(path: str) -> GrayImage:
    img = decode_image(Path(path).read_bytes())
    return to_grayscale(img) if not isinstance(img, GrayImage) else img


def _add_preprocess_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--median-kernel", type=int, default=3,
                   help="odd median filter size (1 disables smoothing)")
    p.add_argument("--polarity", choices=("auto", "ink_dark", "ink_light"), default="auto")
    p.add_argument("--threshold-override", type=int, default=None,
                   help="fixed binarization threshold instead of the computed one")


def _add_segmentation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--noise-floor", type=int, default=0)
    p.add_argument("--min-band", type=int, default=3)
    p.add_argument("--min-gap", type=int, default=2)
    p.add_argument("--min-ink", type=int, default=5)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--patience", type=int, default=None,
                   help="early stopping patience (default: per-architecture)")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--restore-best", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--stratified", action=argparse.BooleanOptionalAction, default=True)


def _pre_cfg(args) -> PreprocessConfig:
    return PreprocessConfig(
        median_kernel=args.median_kernel,
        polarity=args.polarity,
        threshold_override=args.threshold_override,
    )


def _seg_params(args) -> SegmentationParams:
    return SegmentationParams(
        noise_floor=args.noise_floor,
        min_band=args.min_band,
        min_gap=args.min_gap,
        min_ink=args.min_ink,
    )


def _write_or_print(data: bytes, out: str | None) -> None:
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.write(data.decode())


def cmd_preprocess(args) -> int:
    binary, otsu = preprocess(_load_gray(args.image), _pre_cfg(args))
    if args.out:
        Path(args.out).write_bytes(encode_image(binary, "png"))
        print(f"wrote {args.out}", file=sys.stderr)
    print(f"threshold={otsu.threshold} "
          f"within_class_variance={otsu.within_class_variance:.6f}")
    return 0


def cmd_segment(args) -> int:
    binary, _ = preprocess(_load_gray(args.image), _pre_cfg(args))
    _, boxes_per_line = segment_page(binary, _seg_params(args))
    manifest = boxes_to_manifest([b for line in boxes_per_line for b in line])
    _write_or_print(manifest.encode(), args.out)
    return 0


def cmd_augment(args) -> int:
    ds = load_class_tree(args.data, GLYPH_SIDE)
    lo, hi = args.contrast_range
    cfg = AugmentConfig(
        rotation_deg=args.rotation_deg,
        scale_factor=args.scale_factor,
        shift_frac=args.shift_frac,
        shear_deg=args.shear_deg,
        brightness_delta=args.brightness_delta,
        contrast_range=(lo, hi),
    )
    expanded = expand_dataset(ds, args.per_class, cfg, seed=args.seed)
    save_class_tree(expanded, args.out)
    print(f"classes={len(expanded.label_map)} per_class={args.per_class} out={args.out}")
    return 0


def cmd_render_corpus(args) -> int:
    ds = render_synthetic_corpus(args.classes, args.per_class, args.side, seed=args.seed)
    save_class_tree(ds, args.out)
    print(f"classes={args.classes} per_class={args.per_class} out={args.out}")
    return 0


def _split_arrays(args):
    ds = load_class_tree(args.data, GLYPH_SIDE)
    split = SplitConfig(val_fraction=args.val_fraction, seed=args.seed,
                        stratified=args.stratified)
    train_ds, val_ds = stratified_split(ds, split)
    return ds.label_map, dataset_to_arrays(train_ds), dataset_to_arrays(val_ds)


def _train_once(args, arch: ArchitectureId):
    labels, (x_tr, y_tr), (x_val, y_val) = _split_arrays(args)
    model = build_architecture(arch, len(labels), seed=args.seed)
    patience = args.patience if args.patience is not None else DEFAULT_PATIENCE[arch.name]
    cfg = TrainConfig(
        max_epochs=args.max_epochs,
        patience=patience,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
        restore_best=args.restore_best,
    )

    def progress(record):
        print(f"epoch {record.epoch}: train_loss={record.train_loss:.4f} "
              f"val_loss={record.val_loss:.4f} val_accuracy={record.val_accuracy:.4f}",
              file=sys.stderr)

    model, history = train(model, (x_tr, y_tr), (x_val, y_val), cfg, progress=progress)
    return labels, model, history, (x_val, y_val)


def _arch_row_name(name: str, pooling: str | None) -> str:
    return f"{name} ({pooling} pooling)" if pooling else name


def cmd_train(args) -> int:
    pooling = args.pooling if args.arch == "mobilenet_micro" else None
    arch = ArchitectureId(args.arch, pooling=pooling)
    labels, model, history, _ = _train_once(args, arch)
    best = history.epochs[history.best_epoch - 1]
    meta = {
        "seed": args.seed,
        "best_epoch": history.best_epoch,
        "stopped_epoch": history.stopped_epoch,
        "val_accuracy": best.val_accuracy,
        "val_loss": best.val_loss,
    }
    model_id = save_checkpoint(args.out, model, list(labels.names),
                               architecture=arch.name, pooling=arch.pooling, meta=meta)
    history_path = args.history or f"{args.out}.history.json"
    doc = {
        "architecture": arch.name,
        "pooling": arch.pooling,
        "best_epoch": history.best_epoch,
        "stopped_epoch": history.stopped_epoch,
        "epochs": [
            {"epoch": r.epoch, "train_loss": r.train_loss,
             "val_loss": r.val_loss, "val_accuracy": r.val_accuracy}
            for r in history.epochs
        ],
    }
    Path(history_path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    print(f"model_id={model_id} best_epoch={history.best_epoch} "
          f"val_accuracy={best.val_accuracy:.4f} val_loss={best.val_loss:.4f}")
    return 0


TABLE_HEADER = "Model | Validation Accuracy | Validation Loss"


def _table_row(name: str, accuracy: float, loss: float) -> str:
    return f"{name} | {accuracy * 100:.2f}% | {loss:.4f}"


def cmd_evaluate(args) -> int:
    if not args.model and not args.arch:
        print("evaluate needs --model and/or --arch", file=sys.stderr)
        return 2
    rows = []
    for path in args.model or ():
        bundle = load_checkpoint(path)
        labels, _, (x_val, y_val) = _split_arrays(args)
        if list(labels.names) != list(bundle.labels):
            raise ValueError(f"checkpoint {path} labels do not match --data classes")
        loss, acc = evaluate(bundle.model, x_val, y_val)
        rows.append(_table_row(_arch_row_name(bundle.architecture or "unknown",
                                              bundle.pooling), acc, loss))
    if args.arch:
        pooling = args.pooling if args.arch == "mobilenet_micro" else None
        arch = ArchitectureId(args.arch, pooling=pooling)
        _, model, _, (x_val, y_val) = _train_once(args, arch)
        loss, acc = evaluate(model, x_val, y_val)
        rows.append(_table_row(_arch_row_name(arch.name, arch.pooling), acc, loss))
    print(TABLE_HEADER)
    for row in rows:
        print(row)
    return 0


def cmd_recognize(args) -> int:
    bundle = load_checkpoint(args.model)
    result = recognize_page(
        _load_gray(args.image),
        bundle.model,
        LabelMap(bundle.labels),
        _pre_cfg(args),
        _seg_params(args),
        top_k=args.top_k,
        model_id=bundle.model_id,
    )
    _write_or_print(to_report(result, args.format), args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(model_path=args.model, max_upload_bytes=args.max_upload_bytes)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brahmi-ocr",
        description="OCR pipeline for Ashokan Brahmi inscription images.",
    )
    parser.add_argument("--config", default=None,
                        help="optional JSON file of per-subcommand flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="denoise and binarize an image")
    p.add_argument("--image", required=True)
    p.add_argument("--out", default=None, help="write the binarized PNG here")
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("segment", help="emit the character box manifest of a page")
    p.add_argument("--image", required=True)
    p.add_argument("--out", default=None)
    _add_preprocess_flags(p)
    _add_segmentation_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("augment", help="expand a class tree with jittered copies")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--rotation-deg", type=float, default=10.0)
    p.add_argument("--scale-factor", type=float, default=0.2)
    p.add_argument("--shift-frac", type=float, default=0.15)
    p.add_argument("--shear-deg", type=float, default=10.0)
    p.add_argument("--brightness-delta", type=float, default=25.0)
    p.add_argument("--contrast-range", type=float, nargs=2, default=(0.8, 1.2),
                   metavar=("LO", "HI"))
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("render-corpus", help="write a synthetic glyph class tree")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--side", type=int, default=GLYPH_SIDE)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_render_corpus)

    p = sub.add_parser("train", help="train an architecture on a class tree")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", choices=ARCHITECTURE_NAMES, required=True)
    p.add_argument("--pooling", choices=("max", "avg"), default="avg")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", default=None, help="history JSON path")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="print an accuracy/loss table")
    p.add_argument("--data", required=True)
    p.add_argument("--model", action="append", default=[],
                   help="checkpoint to evaluate; repeatable")
    p.add_argument("--arch", choices=ARCHITECTURE_NAMES, default=None,
                   help="also train this architecture fresh and report it")
    p.add_argument("--pooling", choices=("max", "avg"), default="avg")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_train_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("recognize", help="run full-page recognition")
    p.add_argument("--image", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--out", default=None)
    _add_preprocess_flags(p)
    _add_segmentation_flags(p)
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("serve", help="start the HTTP recognition service")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-upload-bytes", type=int, default=10 * 1024 * 1024)
    p.set_defaults(func=cmd_serve)

    if config:
        choices = next(
            a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
        ).choices
        for name, defaults in config.items():
            if name not in choices:
                raise ValueError(f"config section {name!r} is not a subcommand")
            choices[name].set_defaults(**{k.replace("-", "_"): v
                                          for k, v in defaults.items()})
    return parser


def _peek_config(argv: list[str]) -> dict | None:
    peek = argparse.ArgumentParser(add_help=False)
    peek.add_argument("--config", default=None)
    known, _ = peek.parse_known_args(argv)
    if known.config is None:
        return None
    return json.loads(Path(known.config).read_text())


def run_cli(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        parser = build_parser(_peek_config(argv))
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    except (OSError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 1
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
