# -*- coding: utf-8 -*-

"""
NU-Lite块、NU-LiteNet-A/B与SqueezeNet的图构建器
"""

__all__ = ["NuLiteBlockSpec", "build_nu_lite_block", "build_nu_litenet",
           "build_fire_module", "build_squeezenet", "build_architecture", "architecture_names",
           "ARCHITECTURES", "BRANCH_KERNELS"]

from dataclasses import dataclass
from functools import partial
from typing import List

from nulitenet.arch.graph import Fragment, LayerSpec, NetGraph
from nulitenet.config import CROP_SIZE
from nulitenet.errors import UsageError

# 扩展块四个分支的(卷积核, 填充), stride 1下空间尺寸不变
BRANCH_KERNELS = ((1, 0), (3, 1), (5, 2), (7, 3))


@dataclass(frozen=True)
class NuLiteBlockSpec(object):
    """
    @desc NU-Lite块: 1x1压缩 + 1/3/5/7四分支扩展
    A型压缩到N/4, B型保持N; 每个分支N/2个滤波器, 输出2N通道
    """
    variant: str
    in_depth: int

    def __post_init__(self):
        if self.variant not in ("A", "B"):
            raise UsageError("block variant must be 'A' or 'B', got %r" % (self.variant,))
        if self.in_depth < 2 or self.in_depth % 2:
            raise UsageError("block input depth must be a positive multiple of 2, got %r" % self.in_depth)
        if self.variant == "A" and self.in_depth % 4:
            raise UsageError("variant A needs input depth divisible by 4, got %r" % self.in_depth)

    @property
    def squeeze_width(self) -> int:
        return self.in_depth // 4 if self.variant == "A" else self.in_depth

    @property
    def expand_branch_width(self) -> int:
        return self.in_depth // 2

    @property
    def out_channels(self) -> int:
        return len(BRANCH_KERNELS) * self.expand_branch_width


class _GraphBuilder(object):

    def __init__(self, name: str, in_channels: int = 3, size: int = CROP_SIZE):
        self.name = name
        self.input_dims = (in_channels, size, size)
        self.layers = [LayerSpec("input", "input", group="Input")]
        self.groups = [("Input", "%d channels" % in_channels)]

    def group(self, label: str, config: str):
        self.groups.append((label, config))

    def add(self, spec: LayerSpec) -> str:
        self.layers.append(spec)
        return spec.id

    def extend(self, fragment: Fragment) -> str:
        self.layers.extend(fragment.layers)
        return fragment.output

    def build(self, num_classes: int) -> NetGraph:
        return NetGraph(self.name, tuple(self.layers), self.input_dims, num_classes, tuple(self.groups))


def _conv_bn_relu(layer_id, src, in_ch, out_ch, kernel, stride=1, pad=0, group=""):
    """卷积后接BN与ReLU, 卷积不带偏置"""
    return [
        LayerSpec(layer_id, "conv", (src,), in_ch, out_ch, kernel, stride, pad, False, group),
        LayerSpec(layer_id + "/bn", "batchnorm", (layer_id,), out_ch, out_ch, group=group),
        LayerSpec(layer_id + "/relu", "relu", (layer_id + "/bn",), group=group),
    ]


def build_nu_lite_block(spec: NuLiteBlockSpec, input_id: str = "input",
                        prefix: str = "block", group: str = "") -> Fragment:
    """
    @desc 构建一个NU-Lite块片段
    :param spec: NuLiteBlockSpec
    :param input_id: 上游节点id
    :param prefix: 本块节点id前缀
    :param group: 表格行名
    :return: Fragment, 输出为拼接节点
    for example:
    frag = build_nu_lite_block(NuLiteBlockSpec("A", 64), "pool2", "block1")
    frag.out_channels == 128
    """
    squeeze = prefix + "/squeeze"
    layers = _conv_bn_relu(squeeze, input_id, spec.in_depth, spec.squeeze_width, 1, group=group)
    branch_outputs = []
    for kernel, pad in BRANCH_KERNELS:
        branch = "%s/expand%dx%d" % (prefix, kernel, kernel)
        layers += _conv_bn_relu(branch, squeeze + "/relu", spec.squeeze_width,
                                spec.expand_branch_width, kernel, 1, pad, group)
        branch_outputs.append(branch + "/relu")
    concat = prefix + "/concat"
    layers.append(LayerSpec(concat, "concat", tuple(branch_outputs), group=group))
    return Fragment(tuple(layers), concat, spec.out_channels)


def _check_classes(num_classes):
    if not isinstance(num_classes, int) or num_classes < 2:
        raise UsageError("num_classes must be an integer >= 2, got %r" % (num_classes,))


def build_nu_litenet(variant: str, num_classes: int) -> NetGraph:
    """
    @desc NU-LiteNet完整层栈
    conv 5x5/64/s2/p3 -> maxpool -> conv 1x1/64 -> conv 3x3/64/p1 -> maxpool
    -> block(64) -> maxpool -> block(128) -> 全局平均池化 -> fc -> softmax
    conv2按输出尺寸56x56取stride 1
    """
    _check_classes(num_classes)
    variant = variant.upper()
    if variant not in ("A", "B"):
        raise UsageError("NU-LiteNet variant must be 'A' or 'B', got %r" % (variant,))
    b = _GraphBuilder("nu-lite-" + variant.lower())

    b.group("Convolution 1", "5x5,64,s2,p3")
    b.layers += _conv_bn_relu("conv1", "input", 3, 64, 5, 2, 3, "Convolution 1")
    b.group("Pooling 1", "max pool,3x3,s2")
    b.add(LayerSpec("pool1", "maxpool", ("conv1/relu",), kernel=3, stride=2, group="Pooling 1"))
    b.group("Convolution 2", "1x1,64,s1")
    b.layers += _conv_bn_relu("conv2", "pool1", 64, 64, 1, 1, 0, "Convolution 2")
    b.group("Convolution 3", "3x3,64,s1,p1")
    b.layers += _conv_bn_relu("conv3", "conv2/relu", 64, 64, 3, 1, 1, "Convolution 3")
    b.group("Pooling 2", "max pool,3x3,s2")
    src = b.add(LayerSpec("pool2", "maxpool", ("conv3/relu",), kernel=3, stride=2, group="Pooling 2"))

    depth = 64
    for i in (1, 2):
        block = NuLiteBlockSpec(variant, depth)
        label = "NU-Lite-Block %d" % i
        b.group(label, "[Block-%s],%d" % (variant, block.out_channels))
        src = b.extend(build_nu_lite_block(block, src, "block%d" % i, label))
        depth = block.out_channels
        if i == 1:
            b.group("Pooling 3", "max pool,3x3,s2")
            src = b.add(LayerSpec("pool3", "maxpool", (src,), kernel=3, stride=2, group="Pooling 3"))

    b.group("Pooling 4", "average pool")
    b.add(LayerSpec("pool4", "global_avgpool", (src,), group="Pooling 4"))
    b.group("Fully connected", "%d->%d,softmax" % (depth, num_classes))
    b.add(LayerSpec("fc", "linear", ("pool4",), depth, num_classes, bias=True, group="Fully connected"))
    b.add(LayerSpec("prob", "softmax", ("fc",), group="Fully connected"))
    return b.build(num_classes)


def build_fire_module(in_channels: int, squeeze: int, expand1x1: int, expand3x3: int,
                      input_id: str = "input", prefix: str = "fire", group: str = "") -> Fragment:
    """SqueezeNet的fire模块: 1x1压缩, 1x1与3x3并行扩展后拼接"""
    layers = _conv_bn_relu(prefix + "/squeeze", input_id, in_channels, squeeze, 1, group=group)
    src = prefix + "/squeeze/relu"
    layers += _conv_bn_relu(prefix + "/expand1x1", src, squeeze, expand1x1, 1, group=group)
    layers += _conv_bn_relu(prefix + "/expand3x3", src, squeeze, expand3x3, 3, 1, 1, group)
    concat = prefix + "/concat"
    layers.append(LayerSpec(concat, "concat", (prefix + "/expand1x1/relu", prefix + "/expand3x3/relu"),
                            group=group))
    return Fragment(tuple(layers), concat, expand1x1 + expand3x3)


# (squeeze, expand1x1, expand3x3), fire2 .. fire9
_FIRE_WIDTHS = ((16, 64, 64), (16, 64, 64), (32, 128, 128), (32, 128, 128),
                (48, 192, 192), (48, 192, 192), (64, 256, 256), (64, 256, 256))

# 每个版本: conv1(kernel, 滤波器数), 哪几个fire之后接最大池化
_SQUEEZENET_VERSIONS = {
    "1.0": ((7, 96), (4, 8)),
    "1.1": ((3, 64), (3, 5)),
}


def build_squeezenet(num_classes: int, version: str = "1.1") -> NetGraph:
    """
    @desc SqueezeNet基线, 8个fire模块
    每个卷积后接BN + ReLU; 最后的1x1分类卷积保留偏置、不接BN, ReLU后全局平均池化
    :param num_classes: 类别数
    :param version: "1.0" | "1.1"
    """
    _check_classes(num_classes)
    if version not in _SQUEEZENET_VERSIONS:
        raise UsageError("SqueezeNet version must be one of %s, got %r"
                         % (", ".join(sorted(_SQUEEZENET_VERSIONS)), version))
    (k1, c1), pool_after = _SQUEEZENET_VERSIONS[version]
    b = _GraphBuilder("squeezenet" if version == "1.1" else "squeezenet-" + version)

    b.group("Convolution 1", "%dx%d,%d,s2" % (k1, k1, c1))
    b.layers += _conv_bn_relu("conv1", "input", 3, c1, k1, 2, 0, "Convolution 1")
    b.group("Pooling 1", "max pool,3x3,s2")
    src = b.add(LayerSpec("pool1", "maxpool", ("conv1/relu",), kernel=3, stride=2, group="Pooling 1"))

    depth = c1
    pool_index = 1
    for fire, (s, e1, e3) in enumerate(_FIRE_WIDTHS, start=2):
        label = "Fire %d" % fire
        b.group(label, "s%d,e%d+%d" % (s, e1, e3))
        frag = build_fire_module(depth, s, e1, e3, src, "fire%d" % fire, label)
        src = b.extend(frag)
        depth = frag.out_channels
        if fire in pool_after:
            pool_index += 1
            label = "Pooling %d" % pool_index
            b.group(label, "max pool,3x3,s2")
            src = b.add(LayerSpec("pool%d" % pool_index, "maxpool", (src,), kernel=3, stride=2, group=label))

    b.group("Convolution 10", "1x1,%d,bias" % num_classes)
    b.add(LayerSpec("conv10", "conv", (src,), depth, num_classes, 1, 1, 0, True, "Convolution 10"))
    b.add(LayerSpec("conv10/relu", "relu", ("conv10",), group="Convolution 10"))
    b.group("Pooling %d" % (pool_index + 1), "average pool,softmax")
    b.add(LayerSpec("avgpool", "global_avgpool", ("conv10/relu",), group="Pooling %d" % (pool_index + 1)))
    b.add(LayerSpec("prob", "softmax", ("avgpool",), group="Pooling %d" % (pool_index + 1)))
    return b.build(num_classes)


ARCHITECTURES = {
    "nu-lite-a": partial(build_nu_litenet, "A"),
    "nu-lite-b": partial(build_nu_litenet, "B"),
    "squeezenet": partial(build_squeezenet, version="1.1"),
    "squeezenet-1.0": partial(build_squeezenet, version="1.0"),
}


def architecture_names() -> List[str]:
    return list(ARCHITECTURES)


def build_architecture(arch_id: str, num_classes: int) -> NetGraph:
    """按架构id构建网络图, 未知id列出可选项"""
    try:
        builder = ARCHITECTURES[arch_id]
    except KeyError:
        raise UsageError("unknown architecture %r; valid choices: %s"
                         % (arch_id, ", ".join(ARCHITECTURES))) from None
    return builder(num_classes)
