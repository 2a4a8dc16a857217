# -*- coding: utf-8 -*-

"""
带动量的SGD与分段学习率
"""

__all__ = ["OptimizerState", "sgd_step", "lr_at_epoch"]

from collections import OrderedDict
from typing import Dict, Iterable, Optional

import numpy as np

from nulitenet.config import TrainConfig
from nulitenet.errors import ShapeError, UsageError


class OptimizerState(object):

    def __init__(self, params: Optional[Dict[str, np.ndarray]] = None):
        """
        @desc 每个参数一个速度张量, 初始为0; steps记录每个参数被更新的次数
        """
        self.velocity = OrderedDict()
        self.steps = OrderedDict()
        for name, p in (params or {}).items():
            self._ensure(name, p)

    def _ensure(self, name, p):
        if name not in self.velocity:
            self.velocity[name] = np.zeros_like(p)
            self.steps[name] = 0
        elif self.velocity[name].shape != p.shape:
            raise ShapeError("velocity for %s has dims %r, parameter has %r"
                             % (name, self.velocity[name].shape, p.shape))
        return self.velocity[name]


def sgd_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: OptimizerState,
             lr: float, momentum: float, weight_decay: float, decay: Optional[Iterable[str]] = None):
    """
    @desc 一步SGD, 权重衰减作为L2梯度项:
    v <- momentum * v + (grad + weight_decay * param); param <- param - lr * v
    :param params: 参数名 -> 数组, 原地更新
    :param grads: 参数名 -> 梯度
    :param state: OptimizerState
    :param decay: 施加权重衰减的参数名, None表示全部
    :return: (params, state)
    """
    if lr <= 0:
        raise UsageError("learning rate must be > 0, got %r" % lr)
    decay = None if decay is None else set(decay)
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError("gradient for %s has dims %r, parameter has %r" % (name, g.shape, p.shape))
        v = state._ensure(name, p)
        if weight_decay and (decay is None or name in decay):
            g = g + weight_decay * p
        v *= momentum
        v += g
        p -= (lr * v).astype(p.dtype, copy=False)
        state.steps[name] += 1
    return params, state


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """
    @desc lr0 * lr_factor ^ (不超过epoch的降速点个数), epoch从1开始
    """
    if not 1 <= epoch <= cfg.epochs:
        raise UsageError("epoch %r out of range [1, %d]" % (epoch, cfg.epochs))
    drops = sum(1 for e in cfg.lr_drop_epochs if e <= epoch)
    return cfg.lr0 * cfg.lr_factor ** drops
