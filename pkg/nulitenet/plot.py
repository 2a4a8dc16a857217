# -*- coding: utf-8 -*-

"""
从epoch CSV画top-1准确率随epoch变化的曲线
matplotlib是可选依赖, 只在调用时导入
"""

__all__ = ["read_epoch_csv", "plot_curves"]

import csv
from typing import Dict, List, Optional, Sequence

from nulitenet.errors import DataError, UsageError
from nulitenet.train.engine import CSV_HEADER


def read_epoch_csv(path: str) -> Dict[str, List[float]]:
    """读取epoch CSV, 返回列名 -> 数值列表"""
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise DataError("cannot read %s: %s" % (path, e)) from e
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise DataError("%s: expected header %s" % (path, ",".join(CSV_HEADER)))
    columns = {name: [] for name in CSV_HEADER}
    for row in rows[1:]:
        for name, value in zip(CSV_HEADER, row):
            columns[name].append(float(value))
    return columns


def plot_curves(csv_paths: Sequence[str], out_path: str, labels: Optional[Sequence[str]] = None,
                metric: str = "val_top1"):
    """
    @desc 每个CSV一条曲线, 横轴epoch, 纵轴准确率(%)
    :param csv_paths: epoch CSV列表
    :param out_path: 输出图片路径, 格式由扩展名决定
    :param labels: 图例, 默认用文件名
    :param metric: val_top1 | val_top5 | train_loss
    """
    if metric not in CSV_HEADER[2:]:
        raise UsageError("metric must be one of %s" % ", ".join(CSV_HEADER[2:]))
    labels = list(labels or csv_paths)
    if len(labels) != len(csv_paths):
        raise UsageError("got %d labels for %d curves" % (len(labels), len(csv_paths)))
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        raise UsageError("the curves command needs matplotlib (pip install nulitenet[plot])") from e

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for path, label in zip(csv_paths, labels):
        columns = read_epoch_csv(path)
        values = columns[metric]
        if metric != "train_loss":
            values = [100.0 * v for v in values]
        ax.plot(columns["epoch"], values, label=label, linewidth=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss" if metric == "train_loss" else metric.replace("val_", "") + " accuracy (%)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.savefig(out_path, bbox_inches="tight", dpi=150)
    plt.close(fig)
