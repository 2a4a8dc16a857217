# -*- coding: utf-8 -*-

"""
训练引擎: 小批量SGD、逐epoch评估、k折交叉验证
"""

__all__ = ["EpochRecord", "FoldResult", "train_model", "evaluate", "predict_dataset",
           "run_folds", "write_epoch_csv", "CSV_HEADER"]

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from nulitenet.arch.graph import NetGraph
from nulitenet.arch.network import Network
from nulitenet.config import AugmentConfig, TrainConfig
from nulitenet.core import layers as L
from nulitenet.core.tensor import Rng
from nulitenet.data.augment import augment_batch, center_crop_batch
from nulitenet.data.dataset import Dataset
from nulitenet.errors import DataError, NumericError
from nulitenet.store.checkpoint import Checkpoint
from nulitenet.train.kfold import kfold_split
from nulitenet.train.metrics import top_k_accuracy
from nulitenet.train.optim import OptimizerState, lr_at_epoch, sgd_step

logger = logging.getLogger(__name__)

CSV_HEADER = ("epoch", "lr", "train_loss", "val_top1", "val_top5")

# Rng子流编号
_INIT_STREAM, _SHUFFLE_STREAM, _AUGMENT_STREAM = 0, 1, 2


@dataclass(frozen=True)
class EpochRecord(object):
    epoch: int
    lr: float
    train_loss: float
    top1: float
    top5: float

    def csv_row(self) -> Tuple[str, ...]:
        return ("%d" % self.epoch, "%.10g" % self.lr, "%.8f" % self.train_loss,
                "%.6f" % self.top1, "%.6f" % self.top5)


@dataclass(frozen=True)
class FoldResult(object):
    fold: int
    checkpoint: Checkpoint
    records: Tuple[EpochRecord, ...]

    @property
    def final(self) -> EpochRecord:
        return self.records[-1]


def predict_dataset(net: Network, data: Dataset, indices: Sequence[int], batch_size: int = 64) -> np.ndarray:
    """eval模式 + 中心裁剪, 分批求概率"""
    indices = np.asarray(indices, dtype=np.int64)
    chunks = []
    for start in range(0, indices.size, batch_size):
        idx = indices[start:start + batch_size]
        chunks.append(net.predict(center_crop_batch(data.images[idx])))
    if not chunks:
        return np.zeros((0, net.num_classes))
    return np.concatenate(chunks)


def evaluate(net: Network, data: Dataset, indices: Optional[Sequence[int]] = None,
             batch_size: int = 64) -> Tuple[float, float]:
    """
    @desc 在给定样本上计算top-1与top-5
    :return: (top1, top5), 类别数少于5时top-5取k=类别数
    """
    if indices is None:
        indices = np.arange(len(data))
    if len(indices) == 0:
        raise DataError("cannot evaluate on an empty set")
    probs = predict_dataset(net, data, indices, batch_size)
    labels = data.labels[np.asarray(indices, dtype=np.int64)]
    k5 = min(5, net.num_classes)
    return top_k_accuracy(probs, labels, 1), top_k_accuracy(probs, labels, k5)


def train_model(graph: NetGraph, data: Dataset, cfg: TrainConfig,
                train_indices: Optional[Sequence[int]] = None,
                test_indices: Optional[Sequence[int]] = None,
                augment_cfg: Optional[AugmentConfig] = None,
                on_epoch: Optional[Callable[[EpochRecord], None]] = None):
    """
    @desc 从头训练一个模型
    每个epoch: 用cfg.seed派生的子流打乱训练样本, 逐批 增强 -> 前向 -> 损失 -> 反向 -> sgd_step;
    结束后在留出集上评估(eval模式BN, 中心裁剪), 没有留出集时在训练集上评估
    :param graph: NetGraph
    :param data: Dataset
    :param cfg: TrainConfig
    :param train_indices: 训练样本下标, 默认全部
    :param test_indices: 留出样本下标
    :param augment_cfg: AugmentConfig, 默认随机裁剪 + 翻转
    :param on_epoch: 每个epoch结束时的回调
    :return: (Checkpoint, [EpochRecord])
    """
    if data.num_classes != graph.num_classes:
        raise DataError("dataset has %d classes, model %s expects %d"
                        % (data.num_classes, graph.name, graph.num_classes))
    train_idx = np.arange(len(data)) if train_indices is None else np.asarray(train_indices, dtype=np.int64)
    if train_idx.size == 0:
        raise DataError("training set is empty")
    eval_idx = train_idx if test_indices is None or len(test_indices) == 0 else \
        np.asarray(test_indices, dtype=np.int64)
    augment_cfg = augment_cfg or AugmentConfig()

    root = Rng(cfg.seed)
    net = Network(graph, root.spawn(_INIT_STREAM))
    shuffle_rng = root.spawn(_SHUFFLE_STREAM)
    augment_rng = root.spawn(_AUGMENT_STREAM)
    params = net.parameters()
    decay = net.decay_names()
    state = OptimizerState(params)
    logger.info("training %s on %d samples: %s", graph.name, train_idx.size, cfg.describe())

    records = []
    for epoch in range(1, cfg.epochs + 1):
        lr = lr_at_epoch(cfg, epoch)
        order = train_idx[shuffle_rng.permutation(train_idx.size)]
        loss_sum = 0.0
        for batch, start in enumerate(range(0, order.size, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            x = augment_batch(data.images[idx], augment_cfg, augment_rng)
            logits = net.forward(x, L.TRAIN)
            loss, grad, _ = L.softmax_cross_entropy(logits, data.labels[idx])
            if not np.isfinite(loss):
                raise NumericError("non-finite loss at epoch %d batch %d" % (epoch, batch + 1))
            grads = net.backward(grad)
            sgd_step(params, grads, state, lr, cfg.momentum, cfg.weight_decay, decay)
            loss_sum += loss * idx.size
            logger.debug("epoch %d batch %d loss %.6f", epoch, batch + 1, loss)
        top1, top5 = evaluate(net, data, eval_idx, cfg.batch_size)
        record = EpochRecord(epoch, lr, loss_sum / order.size, top1, top5)
        records.append(record)
        logger.info("epoch %d lr %g loss %.5f top1 %.4f top5 %.4f", epoch, lr, record.train_loss, top1, top5)
        if on_epoch is not None:
            on_epoch(record)
    return Checkpoint.from_network(net), records


def run_folds(graph: NetGraph, data: Dataset, cfg: TrainConfig, folds: int, workers: int = 1,
              augment_cfg: Optional[AugmentConfig] = None) -> List[FoldResult]:
    """
    @desc k折交叉验证, 每折独立的模型和随机流(种子cfg.seed + 折号)
    :param workers: 并行线程数, 每折互不共享状态
    :return: 按折号排序的FoldResult
    """
    splits = kfold_split(data, folds, cfg.seed)

    def one(fold):
        train_idx, test_idx = splits[fold]
        logger.info("fold %d/%d: %d train, %d test", fold + 1, folds, train_idx.size, test_idx.size)
        ckpt, records = train_model(graph, data, replace(cfg, seed=cfg.seed + fold),
                                    train_idx, test_idx, augment_cfg)
        return FoldResult(fold, ckpt, tuple(records))

    if workers <= 1:
        return [one(fold) for fold in range(folds)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(folds)))


def write_epoch_csv(records: Sequence[EpochRecord], path: str):
    """epoch,lr,train_loss,val_top1,val_top5, 含表头"""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow(record.csv_row())
