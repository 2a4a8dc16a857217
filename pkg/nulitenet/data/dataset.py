# -*- coding: utf-8 -*-

"""
数据集与原生NULD文件格式

NULD(小端): magic "NULD" | version u32=1 | sample_count u32 | class_count u32
| 类名表(u16长度 + UTF-8) | 样本: label u16 + 256*256*3字节RGB(行主序, RGB交错)
"""

__all__ = ["Dataset", "load_native", "save_native", "read_native_header", "MAGIC", "VERSION"]

import logging
import os
import struct
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from nulitenet.config import IMAGE_SIZE
from nulitenet.errors import DataError, FormatError
from nulitenet.store.atomic import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b"NULD"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
_SAMPLE = np.dtype([("label", "<u2"), ("pixels", "u1", (IMAGE_SIZE, IMAGE_SIZE, 3))])


@dataclass(frozen=True)
class Dataset(object):
    """
    @desc 加载后不可变的图片集合
    :param images: (S, 256, 256, 3) uint8
    :param labels: (S,) 类别下标
    :param class_names: 类名, 下标即类别
    """
    images: np.ndarray
    labels: np.ndarray
    class_names: Tuple[str, ...]

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.uint8)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        names = tuple(str(n) for n in self.class_names)
        if images.ndim != 4 or images.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE, 3):
            raise DataError("images must be (S, %d, %d, 3), got %r" % (IMAGE_SIZE, IMAGE_SIZE, images.shape))
        if images.shape[0] != labels.shape[0]:
            raise DataError("%d images but %d labels" % (images.shape[0], labels.shape[0]))
        if labels.size and (labels.min() < 0 or labels.max() >= len(names)):
            raise DataError("label out of range [0, %d)" % len(names))
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[indices], self.labels[indices], self.class_names)


def save_native(ds: Dataset, path: str):
    """
    @desc 写出NULD文件, 先写临时文件再改名
    :param ds: Dataset
    :param path: 目标路径
    """
    head = [_HEADER.pack(MAGIC, VERSION, len(ds), ds.num_classes)]
    for name in ds.class_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise DataError("class name too long: %r" % name[:40])
        head.append(struct.pack("<H", len(raw)) + raw)
    body = np.empty(len(ds), dtype=_SAMPLE)
    body["label"] = ds.labels
    body["pixels"] = ds.images
    with atomic_write(path) as f:
        f.write(b"".join(head))
        f.write(body.tobytes())
    logger.info("wrote %d samples, %d classes to %s", len(ds), ds.num_classes, path)


def _parse_header(buf: bytes):
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError("bad magic")
    if len(buf) < _HEADER.size:
        raise FormatError("truncated file: header")
    _, version, count, classes = _HEADER.unpack_from(buf, 0)
    if version != VERSION:
        raise FormatError("unsupported NULD version %d" % version)
    offset = _HEADER.size
    names = []
    for _ in range(classes):
        if offset + 2 > len(buf):
            raise FormatError("truncated file: class table")
        (length,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        if offset + length > len(buf):
            raise FormatError("truncated file: class table")
        try:
            names.append(buf[offset:offset + length].decode("utf-8"))
        except UnicodeDecodeError as e:
            raise FormatError("class name %d is not valid UTF-8" % len(names)) from e
        offset += length
    return count, names, offset


def read_native_header(path: str) -> Tuple[int, int]:
    """只读取文件头: (sample_count, class_count)"""
    with open(path, "rb") as f:
        buf = f.read(_HEADER.size)
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError("bad magic")
    if len(buf) < _HEADER.size:
        raise FormatError("truncated file: header")
    _, version, count, classes = _HEADER.unpack(buf)
    if version != VERSION:
        raise FormatError("unsupported NULD version %d" % version)
    return count, classes


def load_native(path: str) -> Dataset:
    """
    @desc 读取NULD文件
    :return: Dataset
    """
    try:
        with open(path, "rb") as f:
            buf = f.read()
    except OSError as e:
        raise DataError("cannot read dataset %s: %s" % (path, e)) from e
    count, names, offset = _parse_header(buf)
    expected = offset + count * _SAMPLE.itemsize
    if len(buf) < expected:
        raise FormatError("truncated file: %d of %d bytes" % (len(buf), expected))
    if len(buf) > expected:
        raise FormatError("trailing bytes after %d samples" % count)
    body = np.frombuffer(buf, dtype=_SAMPLE, count=count, offset=offset)
    labels = body["label"].astype(np.int64)
    if labels.size and labels.max() >= len(names):
        raise DataError("label out of range [0, %d) in %s" % (len(names), os.path.basename(path)))
    logger.debug("loaded %d samples from %s", count, path)
    return Dataset(body["pixels"].copy(), labels, tuple(names))
