# -*- coding: utf-8 -*-

import pytest

from nulitenet.arch.builders import (NuLiteBlockSpec, build_fire_module, build_nu_lite_block,
                                     build_nu_litenet, build_squeezenet)
from nulitenet.arch.cost import count_macs, count_params, layer_params
from nulitenet.arch.network import Network


def _fragment_params(frag):
    return sum(layer_params(spec) for spec in frag.layers)


def test_block_a_params():
    # 压缩1024 + 分支43008 + BN 288
    assert _fragment_params(build_nu_lite_block(NuLiteBlockSpec("A", 64))) == 44320


def test_fire_module_params():
    frag = build_fire_module(96, 16, 64, 64)
    weights = sum(layer_params(s) for s in frag.layers if s.kind == "conv")
    assert weights == 16 * 96 + 64 * 16 + 9 * 64 * 16 == 11776
    assert _fragment_params(frag) == 11776 + 2 * (16 + 64 + 64)


@pytest.mark.parametrize("variant,classes,total,low,high", [
    ("A", 50, 280018, 0.275e6, 0.285e6),
    ("A", 12, 270252, 0.265e6, 0.275e6),
    ("B", 50, 940786, 0.935e6, 0.945e6),
    ("B", 12, 931020, 0.925e6, 0.935e6),
])
def test_nu_litenet_totals(variant, classes, total, low, high):
    report = count_params(build_nu_litenet(variant, classes))
    assert report.total_params == total
    assert low <= total <= high


def test_class_count_only_changes_fc():
    a50 = count_params(build_nu_litenet("A", 50)).total_params
    a12 = count_params(build_nu_litenet("A", 12)).total_params
    assert a50 - a12 == 38 * 256 + 38 == 9766


def test_conv1_row():
    report = count_params(build_nu_litenet("A", 50))
    assert report.row("conv1").params + report.row("conv1/bn").params == 4928


@pytest.mark.parametrize("classes,reported", [(50, 0.75e6), (12, 0.74e6)])
def test_squeezenet_totals(classes, reported):
    total = count_params(build_squeezenet(classes)).total_params
    assert abs(total - reported) <= 0.01e6


def test_params_match_network_tensors():
    for graph in (build_nu_litenet("A", 50), build_nu_litenet("B", 12), build_squeezenet(50, "1.0")):
        net = Network(graph)
        assert sum(t.size for t in net.parameters().values()) == count_params(graph).total_params


def test_macs():
    report = count_macs(build_nu_litenet("A", 50))
    assert report.row("conv2").macs == 64 * 64 * 56 * 56 == 12845056
    for row in report.rows:
        if row.kind in ("relu", "maxpool", "global_avgpool", "concat", "batchnorm", "softmax"):
            assert row.macs == 0
    assert report.row("fc").macs == 256 * 50


def test_macs_ordering_and_resolution():
    a = count_macs(build_nu_litenet("A", 50)).total_macs
    b = count_macs(build_nu_litenet("B", 50)).total_macs
    assert a < b
    big = count_macs(build_nu_litenet("A", 50), (3, 448, 448)).total_macs
    assert big > 3 * a


def test_csv_lines():
    lines = count_params(build_nu_litenet("A", 50)).to_csv_lines()
    assert lines[0] == "id,kind,channels,height,width,params,macs"
    assert lines[-1].startswith("total,,,,,280018,")
