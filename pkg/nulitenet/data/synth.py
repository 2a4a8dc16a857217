# -*- coding: utf-8 -*-

"""
合成数据集: 每个类别有自己的主色和几何形状, 供桌面规模的训练验证
"""

__all__ = ["synth_dataset", "class_color", "SHAPES"]

import colorsys

import numpy as np

from nulitenet.config import IMAGE_SIZE
from nulitenet.core.tensor import Rng
from nulitenet.data.dataset import Dataset
from nulitenet.errors import UsageError

SHAPES = ("disk", "square", "triangle", "ring", "cross", "stripes")

_YY, _XX = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE].astype(np.float64)


def class_color(label: int, classes: int) -> np.ndarray:
    """色相按类别均分色环, 饱和度与亮度固定"""
    r, g, b = colorsys.hsv_to_rgb(label / float(classes), 0.85, 0.95)
    return np.array([r, g, b]) * 255.0


def _mask(shape: str, cy: float, cx: float, radius: float) -> np.ndarray:
    dy, dx = _YY - cy, _XX - cx
    if shape == "disk":
        return dy ** 2 + dx ** 2 <= radius ** 2
    if shape == "square":
        return (np.abs(dy) <= radius) & (np.abs(dx) <= radius)
    if shape == "triangle":
        return (dy <= radius) & (np.abs(dx) <= (dy + radius) / 2.0)
    if shape == "ring":
        d2 = dy ** 2 + dx ** 2
        return (d2 <= radius ** 2) & (d2 >= (0.6 * radius) ** 2)
    if shape == "cross":
        bar = radius / 3.0
        inside = (np.abs(dy) <= radius) & (np.abs(dx) <= radius)
        return inside & ((np.abs(dy) <= bar) | (np.abs(dx) <= bar))
    # stripes
    return (np.abs(dy) <= radius) & (np.abs(dx) <= radius) & ((_YY // 12) % 2 == 0)


def synth_dataset(classes: int, per_class: int, rng: Rng) -> Dataset:
    """
    @desc 生成classes * per_class张256x256图片
    形状与主色由类别决定, 位置、大小、背景亮度与噪声随样本随机
    :param classes: 类别数, >= 2
    :param per_class: 每类样本数, >= 1
    :param rng: Rng
    :return: Dataset, 样本按类别顺序排列
    """
    if classes < 2:
        raise UsageError("synthetic dataset needs >= 2 classes, got %r" % classes)
    if per_class < 1:
        raise UsageError("per_class must be >= 1, got %r" % per_class)
    count = classes * per_class
    images = np.empty((count, IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.uint8)
    labels = np.repeat(np.arange(classes), per_class)
    for i, label in enumerate(labels):
        background = rng.integers(20, 60)
        radius = rng.integers(50, 80)
        cy, cx = rng.integers(radius + 8, IMAGE_SIZE - radius - 8, size=2)
        canvas = np.full((IMAGE_SIZE, IMAGE_SIZE, 3), float(background))
        mask = _mask(SHAPES[label % len(SHAPES)], float(cy), float(cx), float(radius))
        canvas[mask] = class_color(int(label), classes)
        canvas += rng.normal(canvas.shape, 8.0)
        images[i] = np.clip(np.round(canvas), 0, 255).astype(np.uint8)
    names = tuple("class_%02d" % c for c in range(classes))
    return Dataset(images, labels, names)
