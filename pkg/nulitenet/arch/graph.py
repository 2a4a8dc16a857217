# -*- coding: utf-8 -*-

"""
声明式网络图: 层规格、拓扑校验与形状传播
"""

__all__ = ["LayerSpec", "NetGraph", "Fragment", "LAYER_KINDS", "propagate_shapes"]

from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from nulitenet.core.layers import conv2d_out_size, pool_out_size
from nulitenet.errors import ShapeError, UsageError

LAYER_KINDS = ("input", "conv", "batchnorm", "relu", "maxpool", "global_avgpool",
               "concat", "linear", "softmax")

Dims = Tuple[int, int, int]


@dataclass(frozen=True)
class LayerSpec(object):
    """
    @desc 一个图节点
    :param id: 唯一名称
    :param kind: LAYER_KINDS之一
    :param inputs: 上游节点id
    :param in_channels: conv/batchnorm的输入通道, linear的输入特征数
    :param channels: conv的输出通道, linear的输出特征数
    :param kernel/stride/pad: conv与maxpool的窗口参数
    :param bias: conv是否带偏置(linear总是带)
    :param group: 所属的表格行, 例如"Convolution 1"
    """
    id: str
    kind: str
    inputs: Tuple[str, ...] = ()
    in_channels: int = 0
    channels: int = 0
    kernel: int = 0
    stride: int = 1
    pad: int = 0
    bias: bool = False
    group: str = ""

    def config_text(self) -> str:
        """单个节点的简短配置描述"""
        if self.kind == "conv":
            text = "%dx%d,%d,s%d" % (self.kernel, self.kernel, self.channels, self.stride)
            if self.pad:
                text += ",p%d" % self.pad
            return text + (",bias" if self.bias else "")
        if self.kind == "maxpool":
            return "max %dx%d,s%d" % (self.kernel, self.kernel, self.stride)
        if self.kind == "global_avgpool":
            return "average"
        if self.kind == "batchnorm":
            return "bn %d" % self.in_channels
        if self.kind == "linear":
            return "%d->%d" % (self.in_channels, self.channels)
        if self.kind == "concat":
            return "concat x%d" % len(self.inputs)
        return self.kind


@dataclass(frozen=True)
class Fragment(object):
    """构建器产出的子图片段"""
    layers: Tuple[LayerSpec, ...]
    output: str
    out_channels: int


@dataclass(frozen=True)
class NetGraph(object):
    """
    @desc 按拓扑序排列的层列表, 是形状、参数与执行的唯一来源
    恰有一个input节点和一个softmax汇点
    """
    name: str
    layers: Tuple[LayerSpec, ...]
    input_dims: Dims
    num_classes: int
    groups: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        seen = {}
        for spec in self.layers:
            if spec.kind not in LAYER_KINDS:
                raise UsageError("layer %r has unknown kind %r" % (spec.id, spec.kind))
            if spec.id in seen:
                raise UsageError("duplicate layer id %r" % spec.id)
            for src in spec.inputs:
                if src not in seen:
                    raise UsageError("layer %r reads %r, which is not an earlier layer" % (spec.id, src))
            if spec.kind == "input":
                if spec.inputs:
                    raise UsageError("input layer %r cannot have inputs" % spec.id)
            elif spec.kind == "concat":
                if len(spec.inputs) < 2:
                    raise UsageError("concat layer %r needs >= 2 inputs" % spec.id)
            elif len(spec.inputs) != 1:
                raise UsageError("layer %r needs exactly one input" % spec.id)
            seen[spec.id] = spec
        kinds = [spec.kind for spec in self.layers]
        if kinds.count("input") != 1:
            raise UsageError("graph %r needs exactly one input layer" % self.name)
        if kinds.count("softmax") != 1 or kinds[-1] != "softmax":
            raise UsageError("graph %r needs exactly one softmax sink as its last layer" % self.name)
        consumed = {src for spec in self.layers for src in spec.inputs}
        dangling = [spec.id for spec in self.layers[:-1] if spec.id not in consumed]
        if dangling:
            raise UsageError("graph %r has unused layers: %s" % (self.name, ", ".join(dangling)))
        if self.num_classes < 2:
            raise UsageError("num_classes must be >= 2, got %r" % self.num_classes)

    def layer(self, layer_id: str) -> LayerSpec:
        for spec in self.layers:
            if spec.id == layer_id:
                return spec
        raise KeyError(layer_id)

    @property
    def sink(self) -> LayerSpec:
        return self.layers[-1]

    def group_layers(self) -> "OrderedDict[str, list]":
        """按表格行分组, 保持首次出现的顺序"""
        grouped = OrderedDict()
        for spec in self.layers:
            grouped.setdefault(spec.group or spec.id, []).append(spec)
        return grouped


def _propagate_one(spec: LayerSpec, ins, num_classes: int) -> Dims:
    if spec.kind == "concat":
        hw = {(d[1], d[2]) for d in ins}
        if len(hw) != 1:
            parts = ", ".join("%s=%dx%dx%d" % ((src,) + d) for src, d in zip(spec.inputs, ins))
            raise ShapeError("concat inputs disagree on spatial size: %s" % parts, spec.id)
        return sum(d[0] for d in ins), ins[0][1], ins[0][2]
    c, h, w = ins[0]
    if spec.kind == "conv":
        if c != spec.in_channels:
            raise ShapeError("expects %d input channels, got %d" % (spec.in_channels, c), spec.id)
        return spec.channels, conv2d_out_size(h, spec.kernel, spec.stride, spec.pad), \
            conv2d_out_size(w, spec.kernel, spec.stride, spec.pad)
    if spec.kind == "maxpool":
        return c, pool_out_size(h, spec.kernel, spec.stride), pool_out_size(w, spec.kernel, spec.stride)
    if spec.kind == "global_avgpool":
        return c, 1, 1
    if spec.kind == "batchnorm":
        if c != spec.in_channels:
            raise ShapeError("expects %d channels, got %d" % (spec.in_channels, c), spec.id)
        return c, h, w
    if spec.kind == "linear":
        if c * h * w != spec.in_channels:
            raise ShapeError("expects %d features, got %d" % (spec.in_channels, c * h * w), spec.id)
        return spec.channels, 1, 1
    if spec.kind == "softmax":
        if c * h * w != num_classes:
            raise ShapeError("softmax over %d values, graph has %d classes" % (c * h * w, num_classes),
                             spec.id)
        return c, h, w
    return c, h, w


def propagate_shapes(g: NetGraph, input_dims: Optional[Dims] = None) -> "OrderedDict[str, Dims]":
    """
    @desc 为每一层计算输出(C, H, W), 不一致时报出层id
    :param g: NetGraph
    :param input_dims: 覆盖图自带的输入尺寸, 例如按手机照片分辨率估算
    :return: OrderedDict, id -> (C, H, W)
    """
    dims = OrderedDict()  # type: Dict[str, Dims]
    for spec in g.layers:
        if spec.kind == "input":
            dims[spec.id] = tuple(input_dims or g.input_dims)
            continue
        ins = [dims[src] for src in spec.inputs]
        try:
            dims[spec.id] = tuple(_propagate_one(spec, ins, g.num_classes))
        except ShapeError as e:
            if e.layer_id is None:
                raise ShapeError(str(e), spec.id) from e
            raise
    return dims
