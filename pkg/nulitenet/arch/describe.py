# -*- coding: utf-8 -*-

"""
网络结构的文本表格
"""

__all__ = ["describe_table", "describe_nodes", "format_millions"]

from typing import List

from nulitenet.arch.cost import cost_report
from nulitenet.arch.graph import NetGraph


def format_millions(count: int) -> str:
    return "%.2fM" % (count / 1e6)


def _size_text(kind: str, dims) -> str:
    c, h, w = dims
    if kind in ("linear", "softmax"):
        return "%d" % (c * h * w)
    return "%dx%d" % (h, w)


def describe_table(g: NetGraph) -> List[str]:
    """
    @desc 每个表格行一行: 层名 | 配置 | 输出尺寸 | 参数量, 末尾为合计
    for example:
    Convolution 1 | 5x5,64,s2,p3 | 113x113 | 4928
    """
    report = cost_report(g)
    configs = dict(g.groups)
    lines = ["%s: %d classes, input %dx%dx%d" % ((g.name, g.num_classes) + tuple(g.input_dims)),
             "layer | config | output size | params"]
    for label, specs in g.group_layers().items():
        last = report.row(specs[-1].id)
        params = sum(report.row(s.id).params for s in specs)
        lines.append("%s | %s | %s | %d" % (label, configs.get(label, ""),
                                             _size_text(last.kind, last.dims), params))
    total = report.total_params
    lines.append("Total params: %d (%s)" % (total, format_millions(total)))
    return lines


def describe_nodes(g: NetGraph) -> List[str]:
    """逐节点明细: id, 类型, 配置, 输出维度, 参数量, MAC"""
    report = cost_report(g)
    lines = ["id | kind | config | output | params | macs"]
    for spec in g.layers:
        row = report.row(spec.id)
        lines.append("%s | %s | %s | %dx%dx%d | %d | %d" % (
            (spec.id, spec.kind, spec.config_text()) + tuple(row.dims) + (row.params, row.macs)))
    lines.append("Total | | | | %d | %d" % (report.total_params, report.total_macs))
    return lines
