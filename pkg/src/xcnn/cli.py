"""Command-line front end: split | train | eval | explain | featmaps.

Every subcommand reads one TOML config (-c/--config); individual flags
override config values, and the XCNN_OUTPUT_DIR environment variable
overrides the output directory only (flag beats env beats config).

Exit codes are a stable scripting contract: 0 success, 1 usage or
config problem, 2 runtime failure.
"""

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import cam as cammod
from . import data as datamod
from . import train as trainmod
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, EngineError
from .metrics import confusion_matrix, per_class_metrics, write_report
from .model import Model, build_model, load_checkpoint, predict

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract reserves 2 for runtime
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _out_dir(cfg: RunConfig, args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    env = os.environ.get("XCNN_OUTPUT_DIR")
    if env:
        return Path(env)
    return Path(cfg.output_dir)


def _manifest_path(args, out: Path) -> Path:
    return Path(args.manifest) if getattr(args, "manifest", None) else out / "manifest.csv"


def _load_model(args, out: Path) -> Model:
    ckpt = Path(args.checkpoint) if getattr(args, "checkpoint", None) else out / "model.ckpt"
    return load_checkpoint(ckpt)


def _write_split_counts(manifest, path) -> None:
    """Per-family train/val/test count table next to the manifest."""
    counts = manifest.counts_by_family()
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["family", "train", "val", "test", "total"])
        tot = [0, 0, 0]
        for fam in manifest.families():
            c = counts[fam]
            row = [c["train"], c["val"], c["test"]]
            tot = [a + b for a, b in zip(tot, row)]
            w.writerow([fam] + row + [sum(row)])
        w.writerow(["total"] + tot + [sum(tot)])


def cmd_split(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    root = args.root or cfg.data.root
    if not root:
        raise ConfigError("no dataset root: set data.root or pass --root")
    seed = cfg.split_seed if args.seed is None else args.seed
    index = datamod.scan_dataset(root)
    manifest = datamod.stratified_split(index, seed)
    out.mkdir(parents=True, exist_ok=True)
    datamod.write_manifest(manifest, out / "manifest.csv")
    _write_split_counts(manifest, out / "split_counts.csv")
    n = len(manifest.records)
    print(f"scanned {index.total} images in {len(manifest.families())} families"
          f" (skipped {len(index.skipped)})")
    print(f"split seed={seed} train={len(manifest.paths('train'))}"
          f" val={len(manifest.paths('val'))} test={len(manifest.paths('test'))}"
          f" total={n}")
    print(f"wrote {out / 'manifest.csv'}")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    manifest = datamod.read_manifest(_manifest_path(args, out))
    hp = cfg.hyperparams()
    if args.epochs is not None:
        hp.epochs = args.epochs
    if args.lr is not None:
        hp.learning_rate = args.lr
    if args.batch_size is not None:
        hp.batch_size = args.batch_size
    if args.seed is not None:
        hp.seed = args.seed

    start_epoch = 0
    if args.resume:
        model = load_checkpoint(args.resume)
        start_epoch = int(model.meta.get("epoch", 0))
    else:
        labels = manifest.families()
        model = build_model(cfg.model_config(len(labels)), labels)
    print(f"model: {model.num_params()} parameters, labels={list(model.labels)}")
    logs = trainmod.train(model, manifest, hp, out, start_epoch=start_epoch)
    last = logs[-1]
    print(f"final epoch={last.epoch} train_loss={last.train_loss:.4f}"
          f" val_loss={last.val_loss:.4f} top1={last.top1:.4f} top5={last.top5:.4f}")
    print(f"wrote {out / 'model.ckpt'}")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    manifest = datamod.read_manifest(_manifest_path(args, out))
    model = _load_model(args, out)
    split = args.split or cfg.eval.split
    fams = manifest.families()
    if sorted(model.labels) != list(fams):
        raise DataError(f"label map mismatch: checkpoint has {list(model.labels)}, "
                        f"manifest has {list(fams)}")
    images, y = trainmod._load_split(manifest, split, model.config.input_size,
                                     model.labels)
    if len(images) == 0:
        raise DataError(f"manifest has no images in split {split!r}")
    logits = trainmod.batched_logits(model, images, cfg.train.batch_size)
    preds = logits.argmax(axis=1)
    cm = confusion_matrix(y, preds, model.config.num_classes, model.labels)
    report = per_class_metrics(cm)
    dest = out / f"eval_{split}"
    paths = write_report(report, cm, dest)
    k5 = min(5, model.config.num_classes)
    top5 = trainmod.topk_accuracy(logits, y, k5)
    print(f"split={split} n={report.total} top1={report.top1:.4f} top5={top5:.4f}")
    print(f"macro_precision={report.macro_precision:.4f}"
          f" macro_recall={report.macro_recall:.4f} macro_f1={report.macro_f1:.4f}")
    print(f"micro_f1={report.micro_f1:.4f}")
    print(f"wrote {paths['metrics']}")
    return 0


def _resolve_class(model: Model, name: str):
    if not name:
        return None
    if name not in model.labels:
        raise ConfigError(f"unknown class {name!r}; model labels: {list(model.labels)}")
    return model.labels.index(name)


def cmd_explain(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    model = _load_model(args, out)
    images = list(args.images) or list(cfg.explain.images)
    if not images:
        raise ConfigError("no images: pass paths on the command line or set "
                          "explain.images in the config")
    method = args.method or cfg.explain.method
    layer = args.layer or cfg.explain.layer or None
    class_index = _resolve_class(model, args.class_name or cfg.explain.class_name)
    alpha = cfg.explain.alpha if args.alpha is None else args.alpha
    fn = cammod.hirescam if method == "hirescam" else cammod.gradcam
    size = model.config.input_size

    for path in images:
        x = datamod.load_image(path, size, cfg.data.normalization)
        m = fn(model, x, class_index=class_index, layer=layer)
        m = cammod.upsample_cam(m, size)
        probs = _softmax(trainmod.batched_logits(model, x[None], 1)[0])
        pred = int(probs.argmax())
        bias = float(model.params["head.bias"].data[m.class_index])
        dest = out / "explain" / f"{Path(path).stem}_{method}"
        dest.mkdir(parents=True, exist_ok=True)
        cammod.write_cam_csv(m, dest / "cam_raw.csv")
        from .render import colormap, save_png
        save_png(colormap(m.upsampled), dest / "cam.png")
        # the overlay base is the resized image as the model saw it
        base = np.rint(x.transpose(1, 2, 0) * 255.0).astype(np.uint8)
        save_png(cammod.overlay(m, base, alpha), dest / "overlay.png")
        print(f"image={path}")
        print(f"predicted={model.labels[pred]} index={pred}"
              f" confidence={probs[pred]:.6f}")
        print(f"explained={model.labels[m.class_index]} index={m.class_index}"
              f" logit={m.logit:.6f} bias={bias:.6f}")
        print(f"method={method} layer={m.layer} raw_sum={float(m.raw.sum()):.6f}")
        print(f"wrote {dest}")
    return 0


def cmd_featmaps(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    model = _load_model(args, out)
    layer = args.layer or cfg.explain.layer or model.last_conv_name
    x = datamod.load_image(args.image, model.config.input_size,
                           cfg.data.normalization)
    out.mkdir(parents=True, exist_ok=True)
    png = out / f"featuregrid_{layer}.png"
    grid = cammod.feature_grid(model, x, layer, png_path=png)
    print(f"layer={layer} channels={len(grid.tiles)} grid={grid.rows}x{grid.cols}"
          f" constant_channels={len(grid.constant_channels)}")
    print(f"wrote {png}")
    return 0


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="xcnn", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("-c", "--config", required=True, help="TOML config file")
        sp.add_argument("--out", help="output directory (beats XCNN_OUTPUT_DIR)")

    sp = sub.add_parser("split",
                        help="scan the dataset and write a split manifest")
    common(sp)
    sp.add_argument("--root", help="dataset root (beats data.root)")
    sp.add_argument("--seed", type=int, help="split seed (beats config seed)")
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("train",
                        help="train from the manifest and write a checkpoint")
    common(sp)
    sp.add_argument("--manifest", help="manifest path (default: <out>/manifest.csv)")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--seed", type=int, help="shuffle seed override")
    sp.add_argument("--resume", help="checkpoint to continue from; epoch "
                                     "numbering and the log carry on")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval",
                        help="evaluate a checkpoint on one split")
    common(sp)
    sp.add_argument("--manifest", help="manifest path (default: <out>/manifest.csv)")
    sp.add_argument("--checkpoint", help="default: <out>/model.ckpt")
    sp.add_argument("--split", choices=["train", "val", "test"])
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("explain",
                        help="write CAM artifacts for one or more images")
    common(sp)
    sp.add_argument("images", nargs="*", help="image paths (default: explain.images)")
    sp.add_argument("--checkpoint", help="default: <out>/model.ckpt")
    sp.add_argument("--method", choices=["hirescam", "gradcam"])
    sp.add_argument("--layer", help="conv layer name (default: last)")
    sp.add_argument("--class", dest="class_name",
                    help="class name to explain (default: prediction)")
    sp.add_argument("--alpha", type=float, help="overlay blend in [0, 1]")
    sp.set_defaults(func=cmd_explain)

    sp = sub.add_parser("featmaps",
                        help="write a per-channel feature map grid PNG")
    common(sp)
    sp.add_argument("image", help="image path")
    sp.add_argument("--checkpoint", help="default: <out>/model.ckpt")
    sp.add_argument("--layer", help="conv layer name (default: last)")
    sp.set_defaults(func=cmd_featmaps)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(cfg, args)
    except ConfigError as e:
        print(f"xcnn: config error: {e}", file=sys.stderr)
        return USAGE_EXIT
    except EngineError as e:
        print(f"xcnn: error: {e}", file=sys.stderr)
        return RUNTIME_EXIT
    except OSError as e:
        print(f"xcnn: error: {e}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    raise SystemExit(main())
