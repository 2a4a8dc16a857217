# -*- coding: utf-8 -*-

"""
训练与数据增强的全局配置
"""

__all__ = ["TrainConfig", "AugmentConfig", "train_get_conf", "augment_get_conf",
           "BN_EPSILON", "BN_MOMENTUM", "IMAGE_SIZE", "CROP_SIZE", "DEFAULT_LR_DROPS"]

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

from nulitenet.errors import UsageError

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.1
IMAGE_SIZE = 256
CROP_SIZE = 224
DEFAULT_LR_DROPS = (26, 51, 76)


@dataclass(frozen=True)
class TrainConfig(object):
    """
    @desc SGD训练超参数, 默认值即论文的训练配方
    """
    lr0: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0005
    batch_size: int = 128
    epochs: int = 100
    lr_drop_epochs: Tuple[int, ...] = DEFAULT_LR_DROPS
    lr_factor: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.lr0 > 0:
            raise UsageError("lr0 must be > 0, got %r" % self.lr0)
        if not 0 <= self.momentum < 1:
            raise UsageError("momentum must be in [0, 1), got %r" % self.momentum)
        if self.weight_decay < 0:
            raise UsageError("weight_decay must be >= 0, got %r" % self.weight_decay)
        if self.batch_size < 1:
            raise UsageError("batch_size must be >= 1, got %r" % self.batch_size)
        if self.epochs < 1:
            raise UsageError("epochs must be >= 1, got %r" % self.epochs)
        if not self.lr_factor > 0:
            raise UsageError("lr_factor must be > 0, got %r" % self.lr_factor)
        drops = tuple(int(e) for e in self.lr_drop_epochs)
        for prev, cur in zip(drops, drops[1:]):
            if cur <= prev:
                raise UsageError("lr_drop_epochs must be strictly increasing: %r" % (drops,))
        if drops and (drops[0] < 1 or drops[-1] > self.epochs):
            raise UsageError("lr_drop_epochs must lie within [1, %d]: %r" % (self.epochs, drops))
        object.__setattr__(self, "lr_drop_epochs", drops)

    def describe(self) -> str:
        """启动时回显的配置行"""
        return "lr=%g momentum=%g batch=%d wd=%g epochs=%d" % (
            self.lr0, self.momentum, self.batch_size, self.weight_decay, self.epochs)


@dataclass(frozen=True)
class AugmentConfig(object):
    """随机裁剪 + 水平翻转"""
    crop: int = CROP_SIZE
    hflip_prob: float = 0.5
    enabled: bool = True
    image_size: int = field(default=IMAGE_SIZE, repr=False)

    def __post_init__(self):
        if not 1 <= self.crop <= self.image_size:
            raise UsageError("crop must be in [1, %d], got %r" % (self.image_size, self.crop))
        if not 0 <= self.hflip_prob <= 1:
            raise UsageError("hflip_prob must be in [0, 1], got %r" % self.hflip_prob)

    @property
    def max_offset(self) -> int:
        return self.image_size - self.crop

    @property
    def center_offset(self) -> int:
        return self.max_offset // 2


@lru_cache(maxsize=64)
def train_get_conf(**overrides) -> TrainConfig:
    """
    @desc 在默认超参数上叠加覆盖项, 构建训练配置
    值为None的覆盖项被忽略, 便于直接传入命令行参数
    :param overrides: TrainConfig字段
    :return: TrainConfig
    for example:
    cfg = train_get_conf(epochs=200, lr0=0.01, seed=7)
    """
    known = set(TrainConfig.__dataclass_fields__)
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise UsageError("unknown training options: %s" % ", ".join(unknown))
    return TrainConfig(**{k: v for k, v in overrides.items() if v is not None})


@lru_cache(maxsize=8)
def augment_get_conf(enabled: bool = True, hflip_prob: float = 0.5) -> AugmentConfig:
    """构建数据增强配置"""
    return AugmentConfig(enabled=enabled, hflip_prob=hflip_prob)
