# -*- coding: utf-8 -*-

__all__ = ["top_k_accuracy", "label_ranks"]

from typing import Sequence

import numpy as np

from nulitenet.errors import UsageError


def label_ranks(probs: np.ndarray, labels: Sequence[int]) -> np.ndarray:
    """
    @desc 真实类别在每行中的名次(0为第一)
    概率相同时下标小的排在前面
    """
    probs = np.asarray(probs)
    n, c = probs.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise UsageError("got %d labels for %d rows" % (labels.shape[0], n))
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise UsageError("label out of range [0, %d)" % c)
    mine = probs[np.arange(n), labels][:, None]
    ahead = (probs > mine) | ((probs == mine) & (np.arange(c)[None, :] < labels[:, None]))
    return ahead.sum(axis=1)


def top_k_accuracy(probs: np.ndarray, labels: Sequence[int], k: int) -> float:
    """真实类别落在前k个概率中的行所占比例"""
    c = np.asarray(probs).shape[1]
    if not 1 <= k <= c:
        raise UsageError("k must be in [1, %d], got %r" % (c, k))
    ranks = label_ranks(probs, labels)
    if ranks.size == 0:
        return 0.0
    return float(np.mean(ranks < k))
