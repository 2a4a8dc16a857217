# -*- coding: utf-8 -*-

"""
命令行入口

退出码: 0成功, 1用法错误, 2数据错误, 3数值失败
"""

__all__ = ["main", "build_parser"]

import argparse
import json
import logging
import os
import sys
import time
from typing import List, Optional

import numpy as np

from nulitenet.arch.builders import architecture_names, build_architecture
from nulitenet.arch.cost import count_macs, count_params
from nulitenet.arch.describe import describe_nodes, describe_table, format_millions
from nulitenet.arch.network import Network
from nulitenet.config import DEFAULT_LR_DROPS, augment_get_conf, train_get_conf
from nulitenet.core.tensor import DTYPE, Rng
from nulitenet.data.augment import center_crop
from nulitenet.data.dataset import Dataset, load_native, save_native
from nulitenet.data.ingest import ingest_folder, load_image
from nulitenet.data.synth import synth_dataset
from nulitenet.errors import DataError, NuLiteError, UsageError
from nulitenet.store.checkpoint import checkpoint_meta, checkpoint_size, load_checkpoint, write_checkpoint
from nulitenet.train.engine import evaluate, run_folds, train_model, write_epoch_csv

logger = logging.getLogger("nulitenet")

# 手机端测得的模型大小(MB), 仅作对照
REPORTED_MODEL_MB = {"nu-lite-a": 1.07, "nu-lite-b": 3.6, "squeezenet": 2.86}

WARMUP_RUNS = 3


class _Parser(argparse.ArgumentParser):
    """解析失败抛UsageError, 由main统一转成退出码1"""

    def error(self, message):
        raise UsageError("%s: %s" % (self.prog, message))


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1, got %d" % value)
    return value


def _input_size(text):
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected HxW, got %r" % text)
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("sizes must be >= 1")
    return h, w


def _load_data(path: str, skip_bad: bool = False) -> Dataset:
    """NULD文件或按类分目录的图片, skip_bad只对目录生效"""
    if os.path.isdir(path):
        return ingest_folder(path, skip_bad=skip_bad)
    if not os.path.exists(path):
        raise DataError("dataset not found: %s" % path)
    return load_native(path)


# ---------------------------------------------------------------- 子命令

def cmd_describe(args) -> List[str]:
    graph = build_architecture(args.arch, args.classes)
    lines = describe_table(graph)
    if args.verbose:
        lines += [""] + describe_nodes(graph)
    return lines


def cmd_count_params(args) -> List[str]:
    report = count_params(build_architecture(args.arch, args.classes))
    if args.csv:
        return report.to_csv_lines()
    lines = ["%s %d %d" % (row.id, row.params, row.macs) for row in report.rows if row.params]
    lines.append("total %d (%s)" % (report.total_params, format_millions(report.total_params)))
    return lines


def cmd_train(args) -> List[str]:
    drops = args.lr_drops
    if drops is None and args.epochs is not None:
        # 缩短训练时只保留落在范围内的默认降速点
        drops = [e for e in DEFAULT_LR_DROPS if e <= args.epochs]
    cfg = train_get_conf(epochs=args.epochs, batch_size=args.batch, lr0=args.lr, momentum=args.momentum,
                         weight_decay=args.weight_decay, seed=args.seed,
                         lr_drop_epochs=tuple(drops) if drops is not None else None)
    logger.info("config: %s", cfg.describe())
    data = _load_data(args.data, args.skip_bad)
    graph = build_architecture(args.arch, data.num_classes)
    augment_cfg = augment_get_conf(enabled=not args.no_augment)
    os.makedirs(args.out, exist_ok=True)
    lines = [cfg.describe()]

    if args.folds:
        results = run_folds(graph, data, cfg, args.folds, args.workers, augment_cfg)
        for res in results:
            stem = os.path.join(args.out, "fold-%02d" % (res.fold + 1))
            write_checkpoint(res.checkpoint, stem + ".nult")
            write_epoch_csv(res.records, stem + ".csv")
            lines.append("fold %d top1=%.4f top5=%.4f" % (res.fold + 1, res.final.top1, res.final.top5))
        top1 = float(np.mean([r.final.top1 for r in results]))
        top5 = float(np.mean([r.final.top5 for r in results]))
        lines.append("mean over %d folds: top1=%.4f top5=%.4f" % (len(results), top1, top5))
        return lines

    ckpt, records = train_model(graph, data, cfg, augment_cfg=augment_cfg)
    write_checkpoint(ckpt, os.path.join(args.out, "model.nult"))
    write_epoch_csv(records, os.path.join(args.out, "epochs.csv"))
    lines.append("final top1=%.4f top5=%.4f" % (records[-1].top1, records[-1].top5))
    return lines


def cmd_eval(args) -> List[str]:
    net = load_checkpoint(args.model)
    data = _load_data(args.data, args.skip_bad)
    if data.num_classes != net.num_classes:
        raise DataError("model %s has %d classes but the dataset has %d"
                        % (args.model, net.num_classes, data.num_classes))
    top1, top5 = evaluate(net, data)
    return ["samples=%d top1=%.4f top5=%.4f" % (len(data), top1, top5)]


def cmd_bench(args) -> List[str]:
    net = load_checkpoint(args.model)
    h, w = args.input
    x = Rng(args.seed).random((1, 3, h, w)).astype(DTYPE)
    macs = count_macs(net.graph, (3, h, w)).total_macs
    for _ in range(WARMUP_RUNS):
        net.predict(x)
    times = []
    for _ in range(args.repeat):
        start = time.perf_counter()
        net.predict(x)
        times.append((time.perf_counter() - start) * 1000.0)
    return ["%s input=%dx%d repeat=%d" % (net.arch_id, h, w, args.repeat),
            "min_ms=%.3f median_ms=%.3f mean_ms=%.3f" % (min(times), float(np.median(times)),
                                                         float(np.mean(times))),
            "macs=%d" % macs]


def cmd_classify(args) -> List[str]:
    net = load_checkpoint(args.model)
    if args.image.lower().endswith(".nuld"):
        data = load_native(args.image)
        if not 0 <= args.index < len(data):
            raise DataError("sample index %d out of range [0, %d)" % (args.index, len(data)))
        image, names = data.images[args.index], data.class_names
    else:
        try:
            image = load_image(args.image)
        except OSError as e:
            raise DataError("cannot read image %s: %s" % (args.image, e)) from e
        names = None
    if names is None or len(names) != net.num_classes:
        names = tuple("class_%02d" % c for c in range(net.num_classes))
    k = args.topk
    if k > net.num_classes:
        logger.warning("topk %d exceeds %d classes, clamping", k, net.num_classes)
        k = net.num_classes
    probs = net.predict(center_crop(image)[None])[0]
    order = sorted(range(net.num_classes), key=lambda c: (-probs[c], c))[:k]
    return ["%d %s %.6f" % (rank, names[c], probs[c]) for rank, c in enumerate(order, start=1)]


def cmd_make_synth(args) -> List[str]:
    ds = synth_dataset(args.classes, args.per_class, Rng(args.seed))
    save_native(ds, args.out)
    return ["wrote %d samples, %d classes to %s" % (len(ds), ds.num_classes, args.out)]


def cmd_compare(args) -> List[str]:
    lines = ["arch | params | macs | checkpoint MiB | reported MB"]
    for arch in architecture_names():
        graph = build_architecture(arch, args.classes)
        report = count_params(graph)
        size = checkpoint_size(Network(graph)) / float(2 ** 20)
        reported = REPORTED_MODEL_MB.get(arch)
        lines.append("%s | %d (%s) | %d | %.3f | %s" % (
            arch, report.total_params, format_millions(report.total_params), report.total_macs,
            size, "%g" % reported if reported else "-"))
    return lines


def cmd_inspect(args) -> List[str]:
    meta = checkpoint_meta(args.model)
    if args.json_meta:
        return [json.dumps(meta, indent=2, sort_keys=True)]
    lines = ["%s classes=%d tensors=%d floats=%d" % (meta["arch_id"], meta["num_classes"],
                                                    meta["tensor_count"], meta["float_count"])]
    lines += ["%s %s" % (t["name"], "x".join(str(d) for d in t["dims"])) for t in meta["tensors"]]
    return lines


def cmd_curves(args) -> List[str]:
    from nulitenet.plot import plot_curves
    plot_curves(args.csv, args.out, args.labels, args.metric)
    return ["wrote %s" % args.out]


# ---------------------------------------------------------------- 参数解析

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nulitenet", description="NU-LiteNet / SqueezeNet compact CNN toolkit")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="stderr log level")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    archs = architecture_names()

    def arch_flags(p):
        p.add_argument("--arch", required=True, choices=archs)
        p.add_argument("--classes", type=_positive, default=50)

    p = sub.add_parser("describe", help="Table-1 style layer table")
    arch_flags(p)
    p.add_argument("--verbose", action="store_true", help="also print the per-node table")
    p.set_defaults(handler=cmd_describe)

    p = sub.add_parser("count-params", help="per-layer parameter and MAC counts")
    arch_flags(p)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(handler=cmd_count_params)

    p = sub.add_parser("train", help="train from scratch, optionally k-fold")
    p.add_argument("--data", required=True, help="NULD file or class-per-directory image folder")
    p.add_argument("--arch", required=True, choices=archs)
    p.add_argument("--folds", type=_positive)
    p.add_argument("--epochs", type=_positive)
    p.add_argument("--batch", type=_positive)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--lr-drops", type=int, nargs="*", help="epochs at which lr is multiplied by 0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive, default=1, help="threads for --folds")
    p.add_argument("--no-augment", action="store_true", help="center crop instead of random crop + flip")
    p.add_argument("--skip-bad", action="store_true", help="skip undecodable images in a folder dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="top-1 / top-5 of a checkpoint on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--skip-bad", action="store_true", help="skip undecodable images in a folder dataset")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("bench", help="single-image forward latency")
    p.add_argument("--model", required=True)
    p.add_argument("--repeat", type=_positive, default=10)
    p.add_argument("--input", type=_input_size, default=(224, 224), help="HxW, e.g. 1080x1620")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("classify", help="rank classes for one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True, help="PPM, PNG or JPEG image, or a NULD file with --index")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--topk", type=_positive, default=5)
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("make-synth", help="write a synthetic NULD dataset")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_make_synth)

    p = sub.add_parser("compare", help="params, MACs and checkpoint size of every architecture")
    p.add_argument("--classes", type=_positive, default=50)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("inspect", help="checkpoint header and tensor inventory")
    p.add_argument("--model", required=True)
    p.add_argument("--json-meta", action="store_true", help="dump header metadata as JSON")
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("curves", help="plot accuracy vs epoch from epoch CSVs")
    p.add_argument("--csv", required=True, nargs="+")
    p.add_argument("--labels", nargs="+")
    p.add_argument("--metric", default="val_top1", choices=["val_top1", "val_top5", "train_loss"])
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_curves)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        sys.stderr.write("error: %s\n" % e)
        return e.exit_code
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        lines = args.handler(args)
    except NuLiteError as e:
        sys.stderr.write("error: %s\n" % e)
        return e.exit_code
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
