"""
CATFL 异常定义
"""
from typing import Optional


class CatflError(Exception):
    """所有CATFL错误的基类"""


class CurveError(CatflError):
    """曲线参数无效（奇异曲线、生成元不在曲线上、阶不是素数等）"""


class ContextMismatchError(CatflError):
    """两个群元素不属于同一条曲线"""


class DecodeError(CatflError):
    """编码格式错误，或解码出的点不在曲线上"""


class RegistrationError(CatflError):
    """真实身份未在TRA名册中注册，TRA拒绝请求"""


class UnknownPseudonymError(CatflError):
    """KGC的签发列表中不存在该假名"""


class PskInvalidError(CatflError):
    """部分私钥校验失败，当前会话关闭"""


class TrainingError(CatflError):
    """本地训练发散（出现NaN/Inf）"""


class UpdateFormatError(CatflError):
    """模型更新的字节格式不正确"""


class AggregationError(CatflError):
    """聚合输入的维度、轮次或权重不合法"""


class ConfigError(CatflError):
    """配置文件或攻击场景无效"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"第{line}行: {message}"
        super().__init__(message)


class BuildError(CatflError):
    """仿真构建阶段的某个协议步骤失败"""

    def __init__(self, step: str, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"构建步骤 {step} 失败: {cause}")
