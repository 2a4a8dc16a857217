# -*- coding: utf-8 -*-

"""
模型checkpoint的逐位精确序列化

NULT(小端): magic "NULT" | version u32=1 | arch_id(u16长度 + UTF-8) | num_classes u32
| tensor_count u32 | 每个张量: name(u16长度 + UTF-8) | ndim u8 | dims u32*ndim | float32数据
"""

__all__ = ["Checkpoint", "save_checkpoint", "load_checkpoint", "read_checkpoint",
           "write_checkpoint", "checkpoint_meta", "checkpoint_size", "MAGIC", "VERSION"]

import logging
import math
import struct
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from nulitenet.arch.builders import build_architecture
from nulitenet.arch.network import Network
from nulitenet.core.tensor import DTYPE, check_finite
from nulitenet.errors import DataError, FormatError, InventoryError, UsageError
from nulitenet.store.atomic import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b"NULT"
VERSION = 1
_F32 = np.dtype("<f4")


@dataclass(frozen=True)
class Checkpoint(object):
    """
    @desc 内存中的checkpoint: 架构id、类别数、有序的命名张量(含BN滑动统计量)
    """
    arch_id: str
    num_classes: int
    tensors: Tuple[Tuple[str, np.ndarray], ...]

    @classmethod
    def from_network(cls, net: Network) -> "Checkpoint":
        """拷贝网络当前的全部张量"""
        return cls(net.arch_id, net.num_classes,
                   tuple((name, np.array(t, dtype=DTYPE)) for name, t in net.named_tensors()))

    def to_network(self) -> Network:
        """
        @desc 重建架构并校验张量清单, 多余、缺失或形状不符的张量按名字报错
        """
        try:
            graph = build_architecture(self.arch_id, self.num_classes)
        except UsageError as e:
            raise InventoryError("checkpoint describes no known model: %s" % e) from e
        net = Network(graph)
        expected = dict((name, t.shape) for name, t in net.named_tensors())
        got = dict(self.tensors)
        missing = [name for name in expected if name not in got]
        extra = [name for name in got if name not in expected]
        if missing:
            raise InventoryError("checkpoint is missing tensors: %s" % ", ".join(missing))
        if extra:
            raise InventoryError("checkpoint has unexpected tensors: %s" % ", ".join(extra))
        for name, shape in expected.items():
            if tuple(got[name].shape) != tuple(shape):
                raise InventoryError("tensor %s has dims %r, expected %r"
                                     % (name, tuple(got[name].shape), tuple(shape)))
        net.load_tensors(got)
        return net

    def to_bytes(self) -> bytes:
        parts = [MAGIC, struct.pack("<I", VERSION), _pack_str(self.arch_id),
                 struct.pack("<II", self.num_classes, len(self.tensors))]
        names = set()
        for name, t in self.tensors:
            if name in names:
                raise InventoryError("duplicate tensor name %s" % name)
            names.add(name)
            check_finite(t, "tensor %s" % name)
            parts.append(_pack_str(name))
            parts.append(struct.pack("<B%dI" % t.ndim, t.ndim, *t.shape))
            parts.append(np.ascontiguousarray(t, dtype=_F32).tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Checkpoint":
        reader = _Reader(buf)
        if reader.take(4) != MAGIC:
            raise FormatError("bad magic")
        (version,) = reader.unpack("<I")
        if version != VERSION:
            raise FormatError("unsupported NULT version %d" % version)
        arch_id = reader.string()
        num_classes, count = reader.unpack("<II")
        tensors = []
        for _ in range(count):
            name = reader.string()
            (ndim,) = reader.unpack("<B")
            dims = reader.unpack("<%dI" % ndim)
            size = math.prod(dims)
            if size * 4 > reader.remaining:
                raise FormatError("truncated file: tensor %s needs %d floats" % (name, size))
            data = np.frombuffer(reader.take(size * 4), dtype=_F32).astype(DTYPE).reshape(dims)
            tensors.append((name, data))
        if reader.remaining:
            raise FormatError("trailing bytes after %d tensors" % count)
        return cls(arch_id, num_classes, tuple(tensors))

    def meta(self) -> Dict:
        """头部元数据, 供--json-meta输出"""
        return {
            "format": MAGIC.decode("ascii"),
            "version": VERSION,
            "arch_id": self.arch_id,
            "num_classes": self.num_classes,
            "tensor_count": len(self.tensors),
            "float_count": int(sum(t.size for _, t in self.tensors)),
            "tensors": [{"name": name, "dims": list(t.shape)} for name, t in self.tensors],
        }


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise DataError("string too long for the checkpoint format")
    return struct.pack("<H", len(raw)) + raw


class _Reader(object):
    """带越界检查的顺序读取器"""

    def __init__(self, buf: bytes):
        self._buf = buf
        self._pos = 0

    @property
    def remaining(self) -> int:
        return len(self._buf) - self._pos

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._buf):
            raise FormatError("truncated file at byte %d" % len(self._buf))
        chunk = self._buf[self._pos:self._pos + n]
        self._pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (length,) = self.unpack("<H")
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError("string at byte %d is not valid UTF-8" % (self._pos - length)) from e


def write_checkpoint(ckpt: Checkpoint, path: str):
    with atomic_write(path) as f:
        f.write(ckpt.to_bytes())


def read_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, "rb") as f:
            buf = f.read()
    except OSError as e:
        raise DataError("cannot read checkpoint %s: %s" % (path, e)) from e
    return Checkpoint.from_bytes(buf)


def save_checkpoint(model: Network, path: str):
    """
    @desc 保存网络的全部张量
    :param model: Network
    :param path: 目标路径, 原子写入
    """
    write_checkpoint(Checkpoint.from_network(model), path)
    logger.info("saved %s checkpoint to %s", model.arch_id, path)


def load_checkpoint(path: str) -> Network:
    """读取checkpoint并按架构校验后返回Network"""
    return read_checkpoint(path).to_network()


def checkpoint_meta(path: str) -> Dict:
    return read_checkpoint(path).meta()


def checkpoint_size(net: Network) -> int:
    """序列化后的字节数"""
    return len(Checkpoint.from_network(net).to_bytes())

