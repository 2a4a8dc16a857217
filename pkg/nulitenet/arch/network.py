# -*- coding: utf-8 -*-

"""
按NetGraph执行前向与反向的网络对象
"""

__all__ = ["Network"]

import logging
from collections import OrderedDict
from typing import Dict, List, Optional, Tuple

import numpy as np

from nulitenet.arch.graph import NetGraph
from nulitenet.core import layers as L
from nulitenet.core.tensor import DTYPE, Rng, check_finite, check_tensor
from nulitenet.errors import ShapeError

logger = logging.getLogger(__name__)


class Network(object):

    def __init__(self, graph: NetGraph, rng: Optional[Rng] = None):
        """
        @desc 为图中每个带参数的层分配参数记录, 并按层顺序依次消耗rng初始化
        :param graph: NetGraph
        :param rng: 初始化用的Rng, 默认种子0
        for example:
        net = Network(build_nu_litenet("A", 50), Rng(7))
        probs = net.predict(x)
        """
        self.graph = graph
        rng = rng or Rng(0)
        self.records = OrderedDict()
        for spec in graph.layers:
            if spec.kind == "conv":
                self.records[spec.id] = L.ConvParams.create(
                    spec.in_channels, spec.channels, spec.kernel, spec.stride, spec.pad, spec.bias, rng)
            elif spec.kind == "batchnorm":
                self.records[spec.id] = L.BatchNormParams(spec.in_channels)
            elif spec.kind == "linear":
                self.records[spec.id] = L.LinearParams.create(spec.in_channels, spec.channels, rng)
        self._tape = None

    @property
    def arch_id(self) -> str:
        return self.graph.name

    @property
    def num_classes(self) -> int:
        return self.graph.num_classes

    # ------------------------------------------------------------ 张量清单

    def named_tensors(self) -> List[Tuple[str, np.ndarray]]:
        """
        @desc 全部张量(可学习参数 + BN滑动统计量), 顺序固定, 用于序列化
        :return: [(name, array)], 数组是参数记录本身而非拷贝
        """
        tensors = []
        for layer_id, rec in self.records.items():
            if isinstance(rec, L.ConvParams):
                tensors.append((layer_id + ".weight", rec.weight))
                if rec.bias is not None:
                    tensors.append((layer_id + ".bias", rec.bias))
            elif isinstance(rec, L.BatchNormParams):
                tensors += [(layer_id + ".gamma", rec.gamma), (layer_id + ".beta", rec.beta),
                            (layer_id + ".running_mean", rec.running_mean),
                            (layer_id + ".running_var", rec.running_var)]
            else:
                tensors += [(layer_id + ".weight", rec.weight), (layer_id + ".bias", rec.bias)]
        return tensors

    def parameters(self) -> "OrderedDict[str, np.ndarray]":
        """可学习参数, 不含滑动统计量"""
        return OrderedDict((name, t) for name, t in self.named_tensors() if ".running_" not in name)

    def decay_names(self) -> set:
        """施加权重衰减的参数: 只有conv与linear的权重"""
        return {name for name in self.parameters() if name.endswith(".weight")}

    def load_tensors(self, tensors: Dict[str, np.ndarray]):
        """把同名张量的数据原地拷入参数记录"""
        for name, t in self.named_tensors():
            t[...] = tensors[name]

    # ------------------------------------------------------------ 前向与反向

    def forward(self, x: np.ndarray, mode: str = L.EVAL) -> np.ndarray:
        """
        @desc 前向传播到softmax之前
        train模式下记录反向需要的中间结果, BN使用批统计量并更新滑动统计量
        :param x: (N, 3, H, W)
        :param mode: "train" | "eval"
        :return: logits, (N, num_classes)
        """
        check_tensor(x, "network input")
        c = self.graph.input_dims[0]
        if x.shape[1] != c:
            raise ShapeError("network expects %d input channels, got %d" % (c, x.shape[1]), "input")
        values = {}
        aux = {}
        for spec in self.graph.layers:
            ins = [values[src] for src in spec.inputs]
            kind = spec.kind
            if kind == "input":
                out = x
            elif kind == "conv":
                out = L.conv2d_forward(ins[0], self.records[spec.id])
            elif kind == "batchnorm":
                out = L.batchnorm_forward(ins[0], self.records[spec.id], mode)
            elif kind == "relu":
                out = L.relu_forward(ins[0])
            elif kind == "maxpool":
                out, aux[spec.id] = L.maxpool_forward(ins[0], spec.kernel, spec.stride)
            elif kind == "global_avgpool":
                out = L.global_avgpool_forward(ins[0])
            elif kind == "concat":
                out = L.concat_channels(ins)
            elif kind == "linear":
                out = L.linear_forward(ins[0], self.records[spec.id])
            else:
                out = ins[0].reshape(ins[0].shape[0], -1)
            values[spec.id] = out
        self._tape = (values, aux) if mode == L.TRAIN else None
        return values[self.graph.sink.id]

    def backward(self, grad_logits: np.ndarray) -> "OrderedDict[str, np.ndarray]":
        """
        @desc 沿逆拓扑序反向传播, 多个下游的梯度相加
        必须紧跟一次train模式的forward
        :param grad_logits: (N, num_classes)
        :return: OrderedDict, 参数名 -> 梯度, 顺序同parameters()
        """
        if self._tape is None:
            raise RuntimeError("backward() needs a preceding forward(x, 'train')")
        values, aux = self._tape
        grads = {self.graph.sink.id: grad_logits}
        param_grads = {}

        def push(src, g):
            if src in grads:
                grads[src] = grads[src] + g
            else:
                grads[src] = g

        for spec in reversed(self.graph.layers):
            if spec.kind == "input" or spec.id not in grads:
                continue
            g = grads.pop(spec.id)
            x = values[spec.inputs[0]]
            kind = spec.kind
            if kind == "conv":
                rec = self.records[spec.id]
                gx, gw, gb = L.conv2d_backward(x, rec, g)
                param_grads[spec.id + ".weight"] = gw
                if gb is not None:
                    param_grads[spec.id + ".bias"] = gb
                push(spec.inputs[0], gx)
            elif kind == "batchnorm":
                gx, gg, gbeta = L.batchnorm_backward(x, self.records[spec.id], g)
                param_grads[spec.id + ".gamma"] = gg
                param_grads[spec.id + ".beta"] = gbeta
                push(spec.inputs[0], gx)
            elif kind == "relu":
                push(spec.inputs[0], L.relu_backward(x, g))
            elif kind == "maxpool":
                push(spec.inputs[0], L.maxpool_backward(aux[spec.id], g, x.shape))
            elif kind == "global_avgpool":
                push(spec.inputs[0], L.global_avgpool_backward(g, x.shape))
            elif kind == "concat":
                sizes = [values[src].shape[1] for src in spec.inputs]
                for src, part in zip(spec.inputs, L.split_channels(g, sizes)):
                    push(src, part)
            elif kind == "linear":
                gx, gw, gb = L.linear_backward(x, self.records[spec.id], g)
                param_grads[spec.id + ".weight"] = gw
                param_grads[spec.id + ".bias"] = gb
                push(spec.inputs[0], gx)
            elif kind == "softmax":
                push(spec.inputs[0], g.reshape(x.shape))
        self._tape = None
        return OrderedDict((name, param_grads[name]) for name in self.parameters())

    def predict(self, x: np.ndarray) -> np.ndarray:
        """eval模式下的类别概率"""
        logits = self.forward(np.asarray(x, dtype=DTYPE), L.EVAL)
        check_finite(logits, "logits")
        return L.softmax(logits)
