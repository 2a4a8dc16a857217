# -*- coding: utf-8 -*-

"""
图片目录导入

目录结构: root/<类名>/<图片>, 类别下标按子目录名排序, 文件按文件名排序
PPM(P6, 8位)原生读取; png/jpg等压缩格式经matplotlib.image.imread解码, 需安装plot依赖
"""

__all__ = ["read_ppm", "read_compressed", "write_ppm", "resize_bilinear", "load_image", "ingest_folder",
           "IMAGE_EXTENSIONS"]

import logging
import os
from typing import List

import numpy as np

from nulitenet.config import IMAGE_SIZE
from nulitenet.data.dataset import Dataset
from nulitenet.errors import DataError

logger = logging.getLogger(__name__)

PPM_EXTENSIONS = (".ppm",)
COMPRESSED_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")
IMAGE_EXTENSIONS = PPM_EXTENSIONS + COMPRESSED_EXTENSIONS


def _ppm_tokens(buf: bytes, count: int):
    """读取头部的count个空白分隔记号, 跳过#注释; 返回(记号, 数据起始偏移)"""
    tokens = []
    i = 2
    n = len(buf)
    while len(tokens) < count:
        while i < n and buf[i:i + 1].isspace():
            i += 1
        if i < n and buf[i:i + 1] == b"#":
            while i < n and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not buf[i:i + 1].isspace() and buf[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise DataError("truncated PPM header")
        tokens.append(buf[start:i])
    # 最大值之后恰好一个空白字符
    return tokens, i + 1


def read_ppm(path: str) -> np.ndarray:
    """
    @desc 读取P6 PPM
    :return: (H, W, 3) uint8; 最大值小于255时线性拉伸到0..255
    """
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:2] != b"P6":
        raise DataError("%s: not a binary PPM (P6) file" % path)
    try:
        tokens, offset = _ppm_tokens(buf, 3)
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise DataError("%s: bad PPM header" % path) from e
    if width < 1 or height < 1 or not 0 < maxval <= 255:
        raise DataError("%s: unsupported PPM geometry %dx%d maxval %d" % (path, width, height, maxval))
    size = width * height * 3
    if len(buf) < offset + size:
        raise DataError("%s: truncated PPM data" % path)
    image = np.frombuffer(buf, dtype=np.uint8, count=size, offset=offset).reshape(height, width, 3)
    if maxval != 255:
        image = np.round(image.astype(np.float64) * (255.0 / maxval)).astype(np.uint8)
    return image.copy()


def write_ppm(path: str, image: np.ndarray):
    """写出P6 PPM, image为(H, W, 3) uint8"""
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DataError("write_ppm expects (H, W, 3), got %r" % (image.shape,))
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (image.shape[1], image.shape[0]))
        f.write(image.tobytes())


def resize_bilinear(image: np.ndarray, height: int = IMAGE_SIZE, width: int = IMAGE_SIZE) -> np.ndarray:
    """
    @desc 双线性缩放(像素中心对齐), 不保持宽高比
    :param image: (H, W, 3) uint8
    :return: (height, width, 3) uint8
    """
    h, w = image.shape[:2]
    if (h, w) == (height, width):
        return image

    def coords(out_size, in_size):
        pos = (np.arange(out_size) + 0.5) * (in_size / out_size) - 0.5
        pos = np.clip(pos, 0, in_size - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, in_size - 1)
        return lo, hi, pos - lo

    y0, y1, fy = coords(height, h)
    x0, x1, fx = coords(width, w)
    src = image.astype(np.float64)
    top = src[y0][:, x0] * (1 - fx)[None, :, None] + src[y0][:, x1] * fx[None, :, None]
    bottom = src[y1][:, x0] * (1 - fx)[None, :, None] + src[y1][:, x1] * fx[None, :, None]
    out = top * (1 - fy)[:, None, None] + bottom * fy[:, None, None]
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def read_compressed(path: str) -> np.ndarray:
    """
    @desc 用matplotlib解码png/jpg等格式
    灰度图复制成三通道, alpha通道丢弃, 浮点结果按[0, 1]还原到0..255
    :return: (H, W, 3) uint8
    """
    try:
        import matplotlib.image as mpimg
    except ImportError as e:
        raise DataError("%s: decoding compressed images needs matplotlib (pip install nulitenet[plot]), "
                        "or convert to PPM P6" % path) from e
    try:
        image = np.asarray(mpimg.imread(path))
    except (OSError, ValueError, SyntaxError) as e:
        raise DataError("%s: cannot decode image: %s" % (path, e)) from e
    if image.ndim == 2:
        image = np.stack([image] * 3, axis=-1)
    if image.ndim != 3 or image.shape[2] < 3:
        raise DataError("%s: unsupported channel layout %r" % (path, image.shape))
    image = image[..., :3]
    if image.dtype != np.uint8:
        image = np.clip(np.round(image.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    return np.ascontiguousarray(image)


def load_image(path: str) -> np.ndarray:
    """读取并缩放到256x256"""
    lower = path.lower()
    if lower.endswith(PPM_EXTENSIONS):
        return resize_bilinear(read_ppm(path))
    if lower.endswith(COMPRESSED_EXTENSIONS):
        return resize_bilinear(read_compressed(path))
    raise DataError("%s: unsupported image format, expected one of %s" % (path, ", ".join(IMAGE_EXTENSIONS)))


def _list_files(directory: str) -> List[str]:
    return sorted(name for name in os.listdir(directory)
                  if os.path.isfile(os.path.join(directory, name)) and not name.startswith("."))


def ingest_folder(root_path: str, skip_bad: bool = False) -> Dataset:
    """
    @desc 导入按类分目录的图片
    :param root_path: 根目录, 每个子目录一个类
    :param skip_bad: 无法解码的文件是否跳过(记录warning), 默认报错
    :return: Dataset
    """
    if not os.path.isdir(root_path):
        raise DataError("not a directory: %s" % root_path)
    classes = sorted(name for name in os.listdir(root_path)
                     if os.path.isdir(os.path.join(root_path, name)) and not name.startswith("."))
    if not classes:
        raise DataError("no class directories under %s" % root_path)
    images, labels = [], []
    for label, name in enumerate(classes):
        directory = os.path.join(root_path, name)
        files = _list_files(directory)
        if not files:
            raise DataError("empty class directory: %s" % directory)
        loaded = 0
        for filename in files:
            path = os.path.join(directory, filename)
            try:
                images.append(load_image(path))
            except (DataError, OSError) as e:
                if not skip_bad:
                    raise DataError("cannot decode %s: %s" % (path, e)) from e
                logger.warning("skipping undecodable file %s: %s", path, e)
                continue
            labels.append(label)
            loaded += 1
        if not loaded:
            raise DataError("no decodable images in class directory: %s" % directory)
    logger.info("ingested %d images in %d classes from %s", len(images), len(classes), root_path)
    return Dataset(np.stack(images), np.asarray(labels, dtype=np.int64), tuple(classes))
