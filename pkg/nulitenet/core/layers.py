# -*- coding: utf-8 -*-

"""
可微算子集合: 卷积、池化、批归一化、ReLU、拼接、全连接、softmax交叉熵

每个算子都是纯函数, 前向和反向分开; 反向需要的中间量由前向输入重新计算,
只有batchnorm的训练模式会通过自己的参数记录更新滑动统计量
"""

__all__ = ["ConvParams", "BatchNormParams", "LinearParams",
           "conv2d_out_size", "pool_out_size", "im2col", "col2im",
           "conv2d_forward", "conv2d_backward",
           "maxpool_forward", "maxpool_backward",
           "global_avgpool_forward", "global_avgpool_backward",
           "batchnorm_forward", "batchnorm_backward",
           "relu_forward", "relu_backward",
           "concat_channels", "split_channels",
           "linear_forward", "linear_backward",
           "softmax", "softmax_cross_entropy"]

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from nulitenet.config import BN_EPSILON, BN_MOMENTUM
from nulitenet.core.tensor import DTYPE, Rng, check_tensor
from nulitenet.errors import ShapeError, UsageError

TRAIN = "train"
EVAL = "eval"


def _he_normal(shape, fan_in: int, rng: Rng) -> np.ndarray:
    """N(0, 2/fan_in)初始化"""
    return rng.normal(shape, math.sqrt(2.0 / fan_in)).astype(DTYPE)


@dataclass
class ConvParams(object):
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    pad: int = 0
    weight: np.ndarray = None
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1 or self.pad < 0:
            raise UsageError("conv needs kernel >= 1, stride >= 1, pad >= 0; got k=%r s=%r p=%r"
                             % (self.kernel, self.stride, self.pad))
        expected = (self.out_channels, self.in_channels, self.kernel, self.kernel)
        if self.weight is None:
            self.weight = np.zeros(expected, dtype=DTYPE)
        if tuple(self.weight.shape) != expected:
            raise ShapeError("conv weight dims %r, expected %r" % (tuple(self.weight.shape), expected))
        if self.bias is not None and tuple(self.bias.shape) != (self.out_channels,):
            raise ShapeError("conv bias length %r, expected %d" % (self.bias.shape, self.out_channels))

    @classmethod
    def create(cls, in_channels, out_channels, kernel, stride=1, pad=0, bias=False, rng=None):
        """He初始化权重, 偏置置零"""
        rng = rng or Rng(0)
        fan_in = in_channels * kernel * kernel
        weight = _he_normal((out_channels, in_channels, kernel, kernel), fan_in, rng)
        return cls(in_channels, out_channels, kernel, stride, pad, weight,
                   np.zeros(out_channels, dtype=DTYPE) if bias else None)


@dataclass
class BatchNormParams(object):
    channels: int
    gamma: np.ndarray = None
    beta: np.ndarray = None
    running_mean: np.ndarray = None
    running_var: np.ndarray = None
    momentum: float = BN_MOMENTUM
    epsilon: float = BN_EPSILON

    def __post_init__(self):
        c = self.channels
        if self.gamma is None:
            self.gamma = np.ones(c, dtype=DTYPE)
        if self.beta is None:
            self.beta = np.zeros(c, dtype=DTYPE)
        if self.running_mean is None:
            self.running_mean = np.zeros(c, dtype=DTYPE)
        if self.running_var is None:
            self.running_var = np.ones(c, dtype=DTYPE)
        for name in ("gamma", "beta", "running_mean", "running_var"):
            if tuple(getattr(self, name).shape) != (c,):
                raise ShapeError("batchnorm %s length must be %d" % (name, c))
        if np.any(self.running_var < 0):
            raise UsageError("batchnorm running_var must be >= 0")
        if not 0 < self.momentum < 1:
            raise UsageError("batchnorm momentum must be in (0, 1), got %r" % self.momentum)
        if not self.epsilon > 0:
            raise UsageError("batchnorm epsilon must be > 0, got %r" % self.epsilon)


@dataclass
class LinearParams(object):
    in_features: int
    out_features: int
    weight: np.ndarray = None
    bias: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.weight is None:
            self.weight = np.zeros((self.out_features, self.in_features), dtype=DTYPE)
        if self.bias is None:
            self.bias = np.zeros(self.out_features, dtype=DTYPE)
        if tuple(self.weight.shape) != (self.out_features, self.in_features):
            raise ShapeError("linear weight dims %r, expected %r"
                             % (tuple(self.weight.shape), (self.out_features, self.in_features)))
        if tuple(self.bias.shape) != (self.out_features,):
            raise ShapeError("linear bias length must be %d" % self.out_features)

    @classmethod
    def create(cls, in_features, out_features, rng=None):
        rng = rng or Rng(0)
        return cls(in_features, out_features,
                   _he_normal((out_features, in_features), in_features, rng),
                   np.zeros(out_features, dtype=DTYPE))


# ---------------------------------------------------------------- 尺寸计算

def conv2d_out_size(h: int, k: int, stride: int, pad: int) -> int:
    """
    @desc 卷积输出边长, 向下取整
    :return: floor((h + 2*pad - k) / stride) + 1
    """
    if stride < 1:
        raise ShapeError("stride must be >= 1, got %d" % stride)
    if h + 2 * pad < k:
        raise ShapeError("kernel %d larger than padded input %d" % (k, h + 2 * pad))
    return (h + 2 * pad - k) // stride + 1


def pool_out_size(h: int, k: int, stride: int) -> int:
    """
    @desc 池化输出边长, 向上取整(ceil mode), 边缘窗口截断到有效元素
    最后一个窗口的起点若落在输入之外则丢弃该窗口; stride <= k时不会发生
    :return: ceil((h - k) / stride) + 1
    """
    if stride < 1:
        raise ShapeError("stride must be >= 1, got %d" % stride)
    if h < k:
        raise ShapeError("kernel %d larger than input %d" % (k, h))
    out = -(-(h - k) // stride) + 1
    if (out - 1) * stride >= h:
        out -= 1
    return out


# ---------------------------------------------------------------- 卷积

def im2col(x: np.ndarray, k: int, stride: int, pad: int) -> Tuple[np.ndarray, int, int]:
    """
    @desc 把卷积窗口展开成矩阵
    :return: (col, oh, ow), col形状为(N*oh*ow, C*k*k), 列顺序(c, ky, kx)
    """
    n, c, h, w = x.shape
    oh = conv2d_out_size(h, k, stride, pad)
    ow = conv2d_out_size(w, k, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    col = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * k * k)
    return col, oh, ow


def col2im(col: np.ndarray, x_shape: Sequence[int], k: int, stride: int, pad: int) -> np.ndarray:
    """im2col的伴随: 重叠位置累加"""
    n, c, h, w = x_shape
    oh = conv2d_out_size(h, k, stride, pad)
    ow = conv2d_out_size(w, k, stride, pad)
    cols = col.reshape(n, oh, ow, c, k, k).transpose(0, 3, 4, 5, 1, 2)
    img = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=col.dtype)
    for ky in range(k):
        y_end = ky + stride * oh
        for kx in range(k):
            x_end = kx + stride * ow
            img[:, :, ky:y_end:stride, kx:x_end:stride] += cols[:, :, ky, kx]
    return img[:, :, pad:pad + h, pad:pad + w]


def _check_conv_input(x, p: ConvParams):
    check_tensor(x, "conv input")
    if x.shape[1] != p.in_channels:
        raise ShapeError("conv expects %d input channels, got %d" % (p.in_channels, x.shape[1]))


def conv2d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """
    @desc 卷积前向, 窗口点积加偏置
    :param x: (N, C_in, H, W)
    :param p: ConvParams
    :return: (N, C_out, H', W')
    """
    _check_conv_input(x, p)
    n = x.shape[0]
    col, oh, ow = im2col(x, p.kernel, p.stride, p.pad)
    out = col @ p.weight.reshape(p.out_channels, -1).T
    if p.bias is not None:
        out += p.bias
    return np.ascontiguousarray(out.reshape(n, oh, ow, p.out_channels).transpose(0, 3, 1, 2))


def conv2d_backward(x: np.ndarray, p: ConvParams, grad_out: np.ndarray):
    """
    @desc 卷积反向
    :return: (grad_x, grad_weight, grad_bias), 无偏置时grad_bias为None
    """
    _check_conv_input(x, p)
    n, _, h, w = x.shape
    oh = conv2d_out_size(h, p.kernel, p.stride, p.pad)
    ow = conv2d_out_size(w, p.kernel, p.stride, p.pad)
    if tuple(grad_out.shape) != (n, p.out_channels, oh, ow):
        raise ShapeError("conv grad_out dims %r, expected %r"
                         % (tuple(grad_out.shape), (n, p.out_channels, oh, ow)))
    col, _, _ = im2col(x, p.kernel, p.stride, p.pad)
    g = grad_out.transpose(0, 2, 3, 1).reshape(-1, p.out_channels)
    w_mat = p.weight.reshape(p.out_channels, -1)
    grad_weight = (g.T @ col).reshape(p.weight.shape)
    grad_bias = g.sum(axis=0) if p.bias is not None else None
    grad_x = col2im(g @ w_mat, x.shape, p.kernel, p.stride, p.pad)
    return np.ascontiguousarray(grad_x), grad_weight, grad_bias


# ---------------------------------------------------------------- 池化

def maxpool_forward(x: np.ndarray, k: int, stride: int):
    """
    @desc ceil mode最大池化
    越界部分用-inf填充, 相当于把边缘窗口截断到有效元素
    :return: (out, argmax), argmax记录每个最大值在输入中的平铺偏移, 并列时取窗口内第一个
    """
    check_tensor(x, "maxpool input")
    n, c, h, w = x.shape
    oh = pool_out_size(h, k, stride)
    ow = pool_out_size(w, k, stride)
    pad_h = max(0, (oh - 1) * stride + k - h)
    pad_w = max(0, (ow - 1) * stride + k - w)
    xp = x
    if pad_h or pad_w:
        xp = np.pad(x, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)), constant_values=-np.inf)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    win = win.reshape(n, c, oh, ow, k * k)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    ky, kx = np.divmod(arg, k)
    ys = np.arange(oh).reshape(1, 1, oh, 1) * stride + ky
    xs = np.arange(ow).reshape(1, 1, 1, ow) * stride + kx
    planes = (np.arange(n).reshape(n, 1, 1, 1) * c + np.arange(c).reshape(1, c, 1, 1))
    argmax = (planes * h + ys) * w + xs
    return np.ascontiguousarray(out), argmax.astype(np.int64)


def maxpool_backward(argmax: np.ndarray, grad_out: np.ndarray, in_dims: Sequence[int]) -> np.ndarray:
    """梯度只回传到最大值位置, 窗口重叠处累加"""
    if argmax.shape != grad_out.shape:
        raise ShapeError("maxpool argmax dims %r differ from grad_out %r" % (argmax.shape, grad_out.shape))
    size = int(np.prod(in_dims))
    if argmax.size and (argmax.min() < 0 or argmax.max() >= size):
        raise ShapeError("maxpool argmax index out of range for input dims %r" % (tuple(in_dims),))
    grad = np.bincount(argmax.ravel(), weights=grad_out.ravel(), minlength=size)
    return grad.astype(grad_out.dtype).reshape(tuple(in_dims))


def global_avgpool_forward(x: np.ndarray) -> np.ndarray:
    check_tensor(x, "avgpool input")
    return x.mean(axis=(2, 3), keepdims=True, dtype=np.float64).astype(x.dtype)


def global_avgpool_backward(grad_out: np.ndarray, in_dims: Sequence[int]) -> np.ndarray:
    h, w = in_dims[2], in_dims[3]
    return np.broadcast_to(grad_out / (h * w), tuple(in_dims)).astype(grad_out.dtype)


# ---------------------------------------------------------------- 批归一化

def _batch_stats(x: np.ndarray):
    mean = x.mean(axis=(0, 2, 3), dtype=np.float64)
    var = x.var(axis=(0, 2, 3), dtype=np.float64)
    return mean, var


def batchnorm_forward(x: np.ndarray, p: BatchNormParams, mode: str = TRAIN) -> np.ndarray:
    """
    @desc 批归一化
    train模式用批统计量(有偏方差)归一化, 并以momentum更新滑动统计量(无偏方差);
    eval模式用滑动统计量
    :param x: (N, C, H, W)
    :param p: BatchNormParams, train模式下会被原地更新
    :param mode: "train" | "eval"
    """
    check_tensor(x, "batchnorm input")
    if x.shape[1] != p.channels:
        raise ShapeError("batchnorm expects %d channels, got %d" % (p.channels, x.shape[1]))
    shape = (1, -1, 1, 1)
    if mode == TRAIN:
        m = x.shape[0] * x.shape[2] * x.shape[3]
        if m < 2:
            raise ShapeError("batchnorm train mode needs N*H*W >= 2, got %d" % m)
        mean, var = _batch_stats(x)
        unbiased = var * m / (m - 1)
        p.running_mean[...] = (1 - p.momentum) * p.running_mean + p.momentum * mean
        p.running_var[...] = (1 - p.momentum) * p.running_var + p.momentum * unbiased
    elif mode == EVAL:
        mean = p.running_mean.astype(np.float64)
        var = p.running_var.astype(np.float64)
    else:
        raise UsageError("batchnorm mode must be 'train' or 'eval', got %r" % (mode,))
    inv = 1.0 / np.sqrt(var + p.epsilon)
    scale = (p.gamma * inv).reshape(shape)
    shift = (p.beta - p.gamma * mean * inv).reshape(shape)
    return (x * scale + shift).astype(x.dtype)


def batchnorm_backward(x: np.ndarray, p: BatchNormParams, grad_out: np.ndarray):
    """
    @desc 经过批统计量的反向传播
    :return: (grad_x, grad_gamma, grad_beta)
    """
    if grad_out.shape != x.shape or x.shape[1] != p.channels:
        raise ShapeError("batchnorm grad_out dims %r differ from input %r" % (grad_out.shape, x.shape))
    shape = (1, -1, 1, 1)
    m = x.shape[0] * x.shape[2] * x.shape[3]
    mean, var = _batch_stats(x)
    inv = 1.0 / np.sqrt(var + p.epsilon)
    xhat = (x - mean.reshape(shape)) * inv.reshape(shape)
    g = grad_out.astype(np.float64)
    grad_beta = g.sum(axis=(0, 2, 3))
    grad_gamma = (g * xhat).sum(axis=(0, 2, 3))
    grad_x = (p.gamma * inv / m).reshape(shape) * (
        m * g - grad_beta.reshape(shape) - xhat * grad_gamma.reshape(shape))
    dtype = x.dtype
    return grad_x.astype(dtype), grad_gamma.astype(dtype), grad_beta.astype(dtype)


# ---------------------------------------------------------------- 逐元素与拼接

def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0).astype(x.dtype, copy=False)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return np.where(x > 0, grad_out, 0).astype(grad_out.dtype, copy=False)


def concat_channels(parts: Sequence[np.ndarray]) -> np.ndarray:
    """
    @desc 按通道拼接, 保持顺序
    :param parts: 同N、H、W的张量列表
    """
    if not parts:
        raise ShapeError("concat needs at least one part")
    ref = parts[0].shape
    for t in parts:
        check_tensor(t, "concat part")
        if (t.shape[0], t.shape[2], t.shape[3]) != (ref[0], ref[2], ref[3]):
            raise ShapeError("concat parts disagree on N/H/W: %r vs %r" % (t.shape, ref))
    if len(parts) == 1:
        return parts[0]
    return np.concatenate(parts, axis=1)


def split_channels(t: np.ndarray, sizes: Sequence[int]) -> List[np.ndarray]:
    """concat的反向: 按通道数切分"""
    if sum(sizes) != t.shape[1]:
        raise ShapeError("split sizes %r do not sum to %d channels" % (list(sizes), t.shape[1]))
    bounds = np.cumsum(sizes)[:-1]
    return [np.ascontiguousarray(part) for part in np.split(t, bounds, axis=1)]


# ---------------------------------------------------------------- 全连接与分类头

def _flatten(x: np.ndarray) -> np.ndarray:
    return x.reshape(x.shape[0], -1)


def linear_forward(x: np.ndarray, p: LinearParams) -> np.ndarray:
    """
    @desc y = x @ W^T + b, 输入先展平成(N, F)
    :return: (N, out_features)
    """
    flat = _flatten(x)
    if flat.shape[1] != p.in_features:
        raise ShapeError("linear expects %d features, got %d" % (p.in_features, flat.shape[1]))
    return flat @ p.weight.T + p.bias


def linear_backward(x: np.ndarray, p: LinearParams, grad_out: np.ndarray):
    """:return: (grad_x, grad_weight, grad_bias), grad_x与x同形状"""
    flat = _flatten(x)
    if flat.shape[1] != p.in_features or grad_out.shape != (flat.shape[0], p.out_features):
        raise ShapeError("linear grad_out dims %r inconsistent with input %r" % (grad_out.shape, x.shape))
    grad_x = (grad_out @ p.weight).reshape(x.shape)
    return grad_x, grad_out.T @ flat, grad_out.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """减去行最大值以保证数值稳定"""
    z = _flatten(logits).astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: Sequence[int]):
    """
    @desc softmax + 平均负对数似然
    :param logits: (N, C)
    :param labels: N个类别下标
    :return: (loss, grad_logits, probs), grad_logits = (probs - onehot) / N
    """
    flat = _flatten(logits)
    n, c = flat.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise ShapeError("got %d labels for %d rows" % (labels.shape[0], n))
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise UsageError("label out of range [0, %d)" % c)
    z = flat.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    probs = np.exp(log_probs)
    rows = np.arange(n)
    loss = float(-log_probs[rows, labels].mean())
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype).reshape(logits.shape), probs.astype(logits.dtype)
