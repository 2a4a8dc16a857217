# -*- coding: utf-8 -*-

"""
四维稠密张量(N, C, H, W)与可复现随机数发生器

Tensor4就是C连续的float32 numpy数组, 这里只提供构造、校验和索引
"""

__all__ = ["Tensor4", "DTYPE", "Rng", "zeros", "randn", "index", "assign",
           "check_dims", "check_tensor", "check_finite", "flat_offset"]

from typing import Sequence, Tuple

import numpy as np

from nulitenet.errors import NumericError, ShapeError, UsageError

Tensor4 = np.ndarray
DTYPE = np.float32

# 单个张量允许的最大元素个数
MAX_ELEMENTS = 2 ** 40


class Rng(object):

    def __init__(self, seed: int = 0):
        """
        @desc 显式状态的伪随机数发生器
        算法固定为numpy的PCG64(64位状态转移 + XSL-RR输出),
        正态分布由Generator.standard_normal的ziggurat变换生成,
        同一种子在所有平台得到相同序列
        :param seed: 64位整数种子
        """
        if not isinstance(seed, (int, np.integer)):
            raise UsageError("seed must be an integer, got %r" % (seed,))
        self.seed = int(seed) & (2 ** 64 - 1)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def spawn(self, stream: int) -> "Rng":
        """派生一个独立的子流, 同一(seed, stream)总是得到同一个子流"""
        return Rng((self.seed * 0x9E3779B97F4A7C15 + int(stream) + 1) & (2 ** 64 - 1))

    def normal(self, size, std: float = 1.0) -> np.ndarray:
        return self._gen.standard_normal(size, dtype=np.float64) * std

    def integers(self, low: int, high: int, size=None):
        """[low, high)上的均匀整数"""
        return self._gen.integers(low, high, size=size)

    def random(self, size=None):
        return self._gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def check_dims(dims: Sequence[int]) -> Tuple[int, int, int, int]:
    """校验维度: 四个正整数且元素总数不溢出"""
    if len(dims) != 4:
        raise ShapeError("Tensor4 needs 4 dims, got %r" % (tuple(dims),))
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ShapeError("all dims must be >= 1, got %r" % (dims,))
    count = 1
    for d in dims:
        count *= d
    if count > MAX_ELEMENTS:
        raise ShapeError("element count %d overflows the addressable size" % count)
    return dims


def check_tensor(t: np.ndarray, name: str = "tensor") -> np.ndarray:
    if not isinstance(t, np.ndarray) or t.ndim != 4:
        raise ShapeError("%s must be a rank-4 array, got %r" % (name, getattr(t, "shape", type(t))))
    check_dims(t.shape)
    return t


def check_finite(t: np.ndarray, where: str = "tensor") -> np.ndarray:
    """NaN/Inf视为违约, 直接抛出"""
    if not np.all(np.isfinite(t)):
        raise NumericError("non-finite values in %s" % where)
    return t


def zeros(dims: Sequence[int]) -> Tensor4:
    return np.zeros(check_dims(dims), dtype=DTYPE)


def randn(dims: Sequence[int], std: float, rng: Rng) -> Tensor4:
    """
    @desc 正态分布N(0, std^2)独立采样, 按固定顺序消耗rng状态
    :param dims: (n, c, h, w)
    :param std: 标准差, 必须为正
    :param rng: Rng
    :return: Tensor4
    """
    if not std > 0:
        raise UsageError("std must be > 0, got %r" % (std,))
    dims = check_dims(dims)
    return rng.normal(dims, std).astype(DTYPE)


def flat_offset(dims: Sequence[int], n: int, c: int, y: int, x: int) -> int:
    """行主序偏移 ((n*C + c)*H + y)*W + x"""
    N, C, H, W = dims
    for name, value, bound in (("n", n, N), ("c", c, C), ("y", y, H), ("x", x, W)):
        if not 0 <= value < bound:
            raise ShapeError("index %s=%d out of range [0, %d)" % (name, value, bound))
    return ((n * C + c) * H + y) * W + x


def index(t: Tensor4, n: int, c: int, y: int, x: int) -> float:
    check_tensor(t)
    return t.reshape(-1)[flat_offset(t.shape, n, c, y, x)].item()


def assign(t: Tensor4, n: int, c: int, y: int, x: int, value: float) -> Tensor4:
    """原地写入一个元素, 只用于构造阶段"""
    check_tensor(t)
    if not t.flags.c_contiguous:
        raise ShapeError("assign needs a C-contiguous tensor")
    t.reshape(-1)[flat_offset(t.shape, n, c, y, x)] = value
    return t
