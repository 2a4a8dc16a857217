# -*- coding: utf-8 -*-

"""
解析梯度与中心差分的对照

随机实例在float64下进行, 误差只反映公式本身;
float32用例用1e-2的步长, 确认生产精度同样满足误差界
"""

import numpy as np
import pytest

from nulitenet.arch.builders import NuLiteBlockSpec, build_nu_lite_block
from nulitenet.arch.graph import LayerSpec, NetGraph
from nulitenet.arch.network import Network
from nulitenet.core import layers as L
from nulitenet.core.tensor import Rng
from tests.conftest import numeric_grad, rel_error

TOL = 1e-3
INSTANCES = 20


def _weighted_sum(out, r):
    return float((out * r).sum())


@pytest.mark.parametrize("case", range(INSTANCES))
def test_conv_gradient(case):
    rng = Rng(100 + case)
    k = (1, 3, 5, 7)[case % 4]
    stride = int(rng.integers(1, 3))
    pad = int(rng.integers(0, k // 2 + 1))
    c_in, c_out = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    size = k + int(rng.integers(0, 4))
    x = rng.normal((int(rng.integers(1, 3)), c_in, size, size))
    p = L.ConvParams(c_in, c_out, k, stride, pad, rng.normal((c_out, c_in, k, k)), rng.normal(c_out))
    out = L.conv2d_forward(x, p)
    r = rng.normal(out.shape)
    gx, gw, gb = L.conv2d_backward(x, p, r)

    def f():
        return _weighted_sum(L.conv2d_forward(x, p), r)

    assert rel_error(gx, numeric_grad(f, x)) < TOL
    assert rel_error(gw, numeric_grad(f, p.weight)) < TOL
    assert rel_error(gb, numeric_grad(f, p.bias)) < TOL


@pytest.mark.parametrize("case", range(INSTANCES))
def test_maxpool_gradient(case):
    rng = Rng(200 + case)
    k, stride = ((3, 2), (2, 2), (3, 1), (2, 1))[case % 4]
    h, w = int(rng.integers(k, k + 5)), int(rng.integers(k, k + 5))
    x = rng.normal((2, 2, h, w))
    out, argmax = L.maxpool_forward(x, k, stride)
    r = rng.normal(out.shape)
    gx = L.maxpool_backward(argmax, r, x.shape)

    def f():
        return _weighted_sum(L.maxpool_forward(x, k, stride)[0], r)

    assert rel_error(gx, numeric_grad(f, x)) < TOL


@pytest.mark.parametrize("case", range(INSTANCES))
def test_global_avgpool_gradient(case):
    rng = Rng(300 + case)
    x = rng.normal((2, int(rng.integers(1, 4)), int(rng.integers(1, 6)), int(rng.integers(1, 6))))
    r = rng.normal((x.shape[0], x.shape[1], 1, 1))
    gx = L.global_avgpool_backward(r, x.shape)
    assert rel_error(gx, numeric_grad(lambda: _weighted_sum(L.global_avgpool_forward(x), r), x)) < TOL


@pytest.mark.parametrize("case", range(INSTANCES))
def test_batchnorm_gradient(case):
    rng = Rng(400 + case)
    x = rng.normal((4, 3, 5, 5)) * 2 + 1
    p = L.BatchNormParams(3, gamma=rng.normal(3), beta=rng.normal(3))
    r = rng.normal(x.shape)
    gx, gg, gb = L.batchnorm_backward(x, p, r)

    def f():
        return _weighted_sum(L.batchnorm_forward(x, p, L.TRAIN), r)

    assert rel_error(gx, numeric_grad(f, x)) < TOL
    assert rel_error(gg, numeric_grad(f, p.gamma)) < TOL
    assert rel_error(gb, numeric_grad(f, p.beta)) < TOL


@pytest.mark.parametrize("case", range(INSTANCES))
def test_relu_gradient(case):
    rng = Rng(500 + case)
    x = rng.normal((2, 3, 4, 4))
    # 远离不可导点0
    x = np.sign(x) * (np.abs(x) + 1e-2)
    r = rng.normal(x.shape)
    gx = L.relu_backward(x, r)
    assert rel_error(gx, numeric_grad(lambda: _weighted_sum(L.relu_forward(x), r), x)) < TOL


@pytest.mark.parametrize("case", range(INSTANCES))
def test_linear_gradient(case):
    rng = Rng(600 + case)
    n, fin, fout = int(rng.integers(1, 4)), int(rng.integers(1, 9)), int(rng.integers(1, 6))
    x = rng.normal((n, fin))
    p = L.LinearParams(fin, fout, rng.normal((fout, fin)), rng.normal(fout))
    r = rng.normal((n, fout))
    gx, gw, gb = L.linear_backward(x, p, r)

    def f():
        return _weighted_sum(L.linear_forward(x, p), r)

    assert rel_error(gx, numeric_grad(f, x)) < TOL
    assert rel_error(gw, numeric_grad(f, p.weight)) < TOL
    assert rel_error(gb, numeric_grad(f, p.bias)) < TOL


@pytest.mark.parametrize("case", range(INSTANCES))
def test_softmax_cross_entropy_gradient(case):
    rng = Rng(700 + case)
    n, c = int(rng.integers(1, 5)), int(rng.integers(2, 8))
    logits = rng.normal((n, c)) * 3
    labels = rng.integers(0, c, size=n)
    _, grad, _ = L.softmax_cross_entropy(logits, labels)
    numeric = numeric_grad(lambda: L.softmax_cross_entropy(logits, labels)[0], logits)
    assert rel_error(grad, numeric) < TOL


EPS32 = 1e-2


def _f32(a):
    return np.asarray(a, dtype=np.float32)


def _sum64(out, r):
    return float((np.asarray(out, dtype=np.float64) * np.asarray(r, dtype=np.float64)).sum())


def test_float32_conv():
    rng = Rng(800)
    x = _f32(rng.normal((2, 3, 6, 6)))
    p = L.ConvParams(3, 4, 3, 1, 1, _f32(rng.normal((4, 3, 3, 3))), _f32(rng.normal(4)))
    out = L.conv2d_forward(x, p)
    assert out.dtype == np.float32
    r = _f32(rng.normal(out.shape))
    gx, gw, gb = L.conv2d_backward(x, p, r)

    def f():
        return _sum64(L.conv2d_forward(x, p), r)

    assert rel_error(gx, numeric_grad(f, x, EPS32)) < TOL
    assert rel_error(gw, numeric_grad(f, p.weight, EPS32)) < TOL
    assert rel_error(gb, numeric_grad(f, p.bias, EPS32)) < TOL


def test_float32_maxpool():
    rng = Rng(801)
    # 取值间隔0.1, 扰动不会改变窗口内的最大值
    x = _f32(rng.permutation(2 * 2 * 7 * 7).reshape(2, 2, 7, 7) * 0.1)
    out, argmax = L.maxpool_forward(x, 3, 2)
    r = _f32(rng.normal(out.shape))
    gx = L.maxpool_backward(argmax, r, x.shape)
    assert rel_error(gx, numeric_grad(lambda: _sum64(L.maxpool_forward(x, 3, 2)[0], r), x, EPS32)) < TOL


def test_float32_global_avgpool():
    rng = Rng(802)
    x = _f32(rng.normal((2, 3, 4, 5)))
    r = _f32(rng.normal((2, 3, 1, 1)))
    gx = L.global_avgpool_backward(r, x.shape)
    assert rel_error(gx, numeric_grad(lambda: _sum64(L.global_avgpool_forward(x), r), x, EPS32)) < TOL


def test_float32_batchnorm():
    rng = Rng(803)
    x = _f32(rng.normal((4, 3, 5, 5)) * 2 + 1)
    p = L.BatchNormParams(3, gamma=_f32(rng.normal(3)), beta=_f32(rng.normal(3)))
    r = _f32(rng.normal(x.shape))
    gx, gg, gb = L.batchnorm_backward(x, p, r)

    def f():
        return _sum64(L.batchnorm_forward(x, p, L.TRAIN), r)

    assert rel_error(gx, numeric_grad(f, x, EPS32)) < TOL
    assert rel_error(gg, numeric_grad(f, p.gamma, EPS32)) < TOL
    assert rel_error(gb, numeric_grad(f, p.beta, EPS32)) < TOL


def test_float32_relu():
    rng = Rng(804)
    x = rng.normal((2, 3, 4, 4))
    x = _f32(np.sign(x) * (np.abs(x) + 0.1))
    r = _f32(rng.normal(x.shape))
    gx = L.relu_backward(x, r)
    assert rel_error(gx, numeric_grad(lambda: _sum64(L.relu_forward(x), r), x, EPS32)) < TOL


def test_float32_linear():
    rng = Rng(805)
    x = _f32(rng.normal((3, 8)))
    p = L.LinearParams(8, 5, _f32(rng.normal((5, 8))), _f32(rng.normal(5)))
    r = _f32(rng.normal((3, 5)))
    gx, gw, gb = L.linear_backward(x, p, r)

    def f():
        return _sum64(L.linear_forward(x, p), r)

    assert rel_error(gx, numeric_grad(f, x, EPS32)) < TOL
    assert rel_error(gw, numeric_grad(f, p.weight, EPS32)) < TOL
    assert rel_error(gb, numeric_grad(f, p.bias, EPS32)) < TOL


def test_float32_softmax_cross_entropy():
    rng = Rng(806)
    logits = _f32(rng.normal((4, 6)) * 3)
    labels = rng.integers(0, 6, size=4)
    _, grad, _ = L.softmax_cross_entropy(logits, labels)
    assert grad.dtype == np.float32
    numeric = numeric_grad(lambda: float(L.softmax_cross_entropy(logits, labels)[0]), logits, EPS32)
    assert rel_error(grad, numeric) < TOL


def _tiny_graph() -> NetGraph:
    layers = [
        LayerSpec("input", "input"),
        LayerSpec("conv1", "conv", ("input",), 3, 8, 3, 1, 1),
        LayerSpec("conv1/bn", "batchnorm", ("conv1",), 8, 8),
        LayerSpec("conv1/relu", "relu", ("conv1/bn",)),
    ]
    block = build_nu_lite_block(NuLiteBlockSpec("A", 8), "conv1/relu", "block1")
    layers += list(block.layers)
    layers += [
        LayerSpec("pool1", "maxpool", (block.output,), kernel=3, stride=2),
        LayerSpec("pool2", "global_avgpool", ("pool1",)),
        LayerSpec("fc", "linear", ("pool2",), block.out_channels, 3, bias=True),
        LayerSpec("prob", "softmax", ("fc",)),
    ]
    return NetGraph("tiny", tuple(layers), (3, 7, 7), 3)


def _to_float64(net: Network):
    for rec in net.records.values():
        for attr in ("weight", "bias", "gamma", "beta", "running_mean", "running_var"):
            value = getattr(rec, attr, None)
            if value is not None:
                setattr(rec, attr, value.astype(np.float64))


def test_network_gradient_through_block():
    rng = Rng(9)
    net = Network(_tiny_graph(), rng)
    _to_float64(net)
    for rec in net.records.values():
        if isinstance(rec, L.BatchNormParams):
            rec.gamma[...] = rng.normal(rec.channels) + 1
            rec.beta[...] = rng.normal(rec.channels)
    x = rng.normal((4, 3, 7, 7))
    labels = np.array([0, 1, 2, 1])

    logits = net.forward(x, L.TRAIN)
    _, grad, _ = L.softmax_cross_entropy(logits, labels)
    grads = net.backward(grad)
    assert list(grads) == list(net.parameters())

    def f():
        return L.softmax_cross_entropy(net.forward(x, L.TRAIN), labels)[0]

    for name, param in net.parameters().items():
        assert rel_error(grads[name], numeric_grad(f, param)) < TOL, name


def test_backward_needs_train_forward():
    net = Network(_tiny_graph())
    net.forward(np.zeros((2, 3, 7, 7), dtype=np.float32))
    with pytest.raises(RuntimeError):
        net.backward(np.zeros((2, 3), dtype=np.float32))
