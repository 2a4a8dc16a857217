# -*- coding: utf-8 -*-

import numpy as np
import pytest

from nulitenet.core.tensor import Rng
from nulitenet.data.synth import synth_dataset


def numeric_grad(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """
    @desc 中心差分 (f(x+eps) - f(x-eps)) / 2eps, 原地扰动后恢复
    :param f: 无参函数, 返回标量, 读取x的当前值
    :param x: float64数组
    """
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        plus = f()
        x[i] = old - eps
        minus = f()
        x[i] = old
        grad[i] = (plus - minus) / (2 * eps)
    return grad


def rel_error(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture(scope="session")
def toy_data():
    """两类各20张的合成集"""
    return synth_dataset(2, 20, Rng(5))
