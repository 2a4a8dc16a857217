# -*- coding: utf-8 -*-

"""
参数量与乘加次数(MAC)统计
"""

__all__ = ["CostRow", "CostReport", "layer_params", "layer_running_stats",
           "count_params", "count_macs", "cost_report"]

from dataclasses import dataclass
from typing import List, Optional, Tuple

from nulitenet.arch.graph import LayerSpec, NetGraph, propagate_shapes


@dataclass(frozen=True)
class CostRow(object):
    id: str
    kind: str
    dims: Tuple[int, int, int]
    params: int
    macs: int


@dataclass(frozen=True)
class CostReport(object):
    rows: Tuple[CostRow, ...]

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_macs(self) -> int:
        return sum(r.macs for r in self.rows)

    def row(self, layer_id: str) -> CostRow:
        for r in self.rows:
            if r.id == layer_id:
                return r
        raise KeyError(layer_id)

    def to_csv_lines(self) -> List[str]:
        lines = ["id,kind,channels,height,width,params,macs"]
        for r in self.rows:
            lines.append("%s,%s,%d,%d,%d,%d,%d" % ((r.id, r.kind) + tuple(r.dims) + (r.params, r.macs)))
        lines.append("total,,,,,%d,%d" % (self.total_params, self.total_macs))
        return lines


def layer_params(spec: LayerSpec) -> int:
    """
    @desc 可学习参数个数
    conv: 权重(+偏置); batchnorm: gamma与beta; linear: 权重与偏置; 滑动统计量不计
    """
    if spec.kind == "conv":
        return spec.channels * spec.in_channels * spec.kernel ** 2 + (spec.channels if spec.bias else 0)
    if spec.kind == "batchnorm":
        return 2 * spec.in_channels
    if spec.kind == "linear":
        return spec.in_channels * spec.channels + spec.channels
    return 0


def layer_running_stats(spec: LayerSpec) -> int:
    return 2 * spec.in_channels if spec.kind == "batchnorm" else 0


def _layer_macs(spec: LayerSpec, out_dims) -> int:
    if spec.kind == "conv":
        c, h, w = out_dims
        return c * h * w * spec.in_channels * spec.kernel ** 2
    if spec.kind == "linear":
        return spec.in_channels * spec.channels
    return 0


def cost_report(g: NetGraph, input_dims: Optional[Tuple[int, int, int]] = None) -> CostReport:
    """逐层的输出尺寸、参数量与单张图片的MAC"""
    dims = propagate_shapes(g, input_dims)
    return CostReport(tuple(
        CostRow(spec.id, spec.kind, dims[spec.id], layer_params(spec), _layer_macs(spec, dims[spec.id]))
        for spec in g.layers))


def count_params(g: NetGraph) -> CostReport:
    return cost_report(g)


def count_macs(g: NetGraph, input_dims: Optional[Tuple[int, int, int]] = None) -> CostReport:
    """
    @desc 乘加次数: conv = 输出元素数 * 输入通道 * k^2, linear = in * out, 其余为0
    :param input_dims: (C, H, W), 默认为图自带的224x224输入
    """
    return cost_report(g, input_dims)
