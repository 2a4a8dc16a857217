# -*- coding: utf-8 -*-

__all__ = ["kfold_split"]

from typing import List, Tuple

import numpy as np

from nulitenet.core.tensor import Rng
from nulitenet.errors import DataError, UsageError


def kfold_split(data, folds: int, seed: int = 0) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    @desc 分层k折划分
    每个类别内部先随机打乱, 再接着上一个类别的位置轮流分到各折,
    因此各折测试集大小最多相差1, 样本数不少于folds的类别在每一折都出现
    :param data: Dataset或标签数组
    :param folds: 折数, >= 2
    :param seed: 打乱用的种子
    :return: [(train_indices, test_indices)], 均为升序int64数组
    """
    if folds < 2:
        raise UsageError("folds must be >= 2, got %r" % folds)
    labels = np.asarray(getattr(data, "labels", data), dtype=np.int64).reshape(-1)
    if labels.size == 0:
        raise DataError("cannot split an empty dataset")
    classes, counts = np.unique(labels, return_counts=True)
    short = [int(c) for c, n in zip(classes, counts) if n < folds]
    if short:
        raise DataError("classes with fewer than %d samples: %s" % (folds, ", ".join(map(str, short))))
    rng = Rng(seed)
    assignment = np.empty(labels.size, dtype=np.int64)
    cursor = 0
    for c in classes:
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(members.size)]
        assignment[members] = (cursor + np.arange(members.size)) % folds
        cursor = (cursor + members.size) % folds
    everything = np.arange(labels.size)
    return [(everything[assignment != k], everything[assignment == k]) for k in range(folds)]
