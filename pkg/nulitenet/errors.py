# -*- coding: utf-8 -*-

"""
nulitenet的异常层级, 每个异常携带命令行退出码
"""

__all__ = ["NuLiteError", "UsageError", "ShapeError", "DataError",
           "FormatError", "InventoryError", "NumericError"]


class NuLiteError(Exception):
    """所有库异常的基类"""
    exit_code = 1


class UsageError(NuLiteError, ValueError):
    """参数或配置不合法"""
    exit_code = 1


class ShapeError(UsageError):

    def __init__(self, message, layer_id=None):
        """
        @desc 形状不一致, 已知时带上出错的层id
        :param message: 描述
        :param layer_id: 层id
        """
        if layer_id is not None:
            message = "layer %r: %s" % (layer_id, message)
        super(ShapeError, self).__init__(message)
        self.layer_id = layer_id


class DataError(NuLiteError, ValueError):
    """数据集不可读或内容不合法"""
    exit_code = 2


class FormatError(DataError):
    """文件格式错误: bad magic, 版本, 截断"""


class InventoryError(DataError):
    """checkpoint的张量清单与架构不一致"""


class NumericError(NuLiteError, ArithmeticError):
    exit_code = 3
