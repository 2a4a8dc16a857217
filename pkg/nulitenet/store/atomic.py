# -*- coding: utf-8 -*-

__all__ = ["atomic_write"]

import os
import tempfile
from contextlib import contextmanager


@contextmanager
def atomic_write(path: str):
    """
    @desc 原子写文件: 在同目录写临时文件, 成功后rename覆盖目标
    出错时删除临时文件, 目标文件保持原样
    :param path: 目标路径
    for example:
    with atomic_write("model.nult") as f:
        f.write(payload)
    """
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as f:
            yield f
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
