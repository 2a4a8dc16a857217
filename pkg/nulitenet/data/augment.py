# -*- coding: utf-8 -*-

"""
训练时的数据增强: 随机裁剪224x224 + 水平翻转
"""

__all__ = ["augment", "augment_batch", "center_crop", "center_crop_batch", "hflip", "to_chw"]

from typing import Optional

import numpy as np

from nulitenet.config import AugmentConfig
from nulitenet.core.tensor import DTYPE, Rng
from nulitenet.errors import DataError

_DEFAULT = AugmentConfig()


def _check_image(image: np.ndarray, cfg: AugmentConfig):
    if image.shape != (cfg.image_size, cfg.image_size, 3):
        raise DataError("augment expects a %dx%dx3 image, got %r" % (cfg.image_size, cfg.image_size, image.shape))


def to_chw(image: np.ndarray) -> np.ndarray:
    """HWC uint8 -> CHW float32, 缩放到[0, 1]"""
    return np.ascontiguousarray(image.transpose(2, 0, 1), dtype=DTYPE) / DTYPE(255)


def hflip(chw: np.ndarray) -> np.ndarray:
    """沿宽度方向镜像, 对合变换"""
    return np.ascontiguousarray(chw[..., ::-1])


def _crop(image, oy, ox, cfg):
    return image[oy:oy + cfg.crop, ox:ox + cfg.crop]


def center_crop(image: np.ndarray, cfg: AugmentConfig = _DEFAULT) -> np.ndarray:
    """评估用的中心裁剪, 偏移(16, 16)"""
    _check_image(image, cfg)
    off = cfg.center_offset
    return to_chw(_crop(image, off, off, cfg))


def augment(image: np.ndarray, cfg: AugmentConfig = _DEFAULT, rng: Optional[Rng] = None) -> np.ndarray:
    """
    @desc 单张图片增强
    左上角偏移在[0, 32]x[0, 32]上均匀采样, 以hflip_prob的概率水平翻转;
    cfg.enabled为False时退化为中心裁剪且不消耗rng
    :param image: (256, 256, 3) uint8
    :param cfg: AugmentConfig
    :param rng: Rng, 每张图依次消耗: 纵向偏移, 横向偏移, 翻转
    :return: (3, 224, 224) float32, 取值[0, 1]
    """
    if not cfg.enabled:
        return center_crop(image, cfg)
    _check_image(image, cfg)
    if rng is None:
        raise DataError("augment needs an rng when enabled")
    oy = int(rng.integers(0, cfg.max_offset + 1))
    ox = int(rng.integers(0, cfg.max_offset + 1))
    flip = bool(rng.random() < cfg.hflip_prob)
    out = to_chw(_crop(image, oy, ox, cfg))
    return hflip(out) if flip else out


def augment_batch(images: np.ndarray, cfg: AugmentConfig = _DEFAULT, rng: Optional[Rng] = None) -> np.ndarray:
    """按顺序逐张增强, 堆叠成(B, 3, crop, crop)"""
    return np.stack([augment(img, cfg, rng) for img in images])


def center_crop_batch(images: np.ndarray, cfg: AugmentConfig = _DEFAULT) -> np.ndarray:
    return np.stack([center_crop(img, cfg) for img in images])
