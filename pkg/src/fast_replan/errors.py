"""
异常体系模块

所有领域异常都继承自 ReplanError，并按语义同时继承对应的内置异常族
（ValueError / ArithmeticError / IndexError / OSError），调用方可以按任一族捕获。
"""

from typing import Any, Dict


class ReplanError(Exception):
    """ReplanError 领域异常基类"""

    def to_dict(self) -> Dict[str, Any]:
        """转换为机器可读的错误描述（CLI 输出到 stderr）"""
        return {"error": type(self).__name__, "message": str(self)}


# ======= 数值积分 =======

class NonFiniteState(ReplanError, ArithmeticError):
    """状态分量出现 NaN/Inf"""


class DegenerateVelocity(ReplanError, ArithmeticError):
    """速度低于动力学允许的下限"""


class ShapeMismatch(ReplanError, ValueError):
    """数组维度不一致"""


class IndexOutOfRange(ReplanError, IndexError):
    """节点下标越界"""


# ======= 优化 =======

class NonFiniteCost(ReplanError, ArithmeticError):
    """代价函数在起点不可计算"""


class LineSearchFailure(ReplanError):
    """回溯线搜索未找到下降步"""


class OptimizationFailed(ReplanError):
    """标称问题求解失败，流水线中止"""


# ======= 超微分灵敏度 =======

class NonFiniteEntry(ReplanError, ArithmeticError):
    """Hessian 或混合偏导矩阵出现非有限元素"""


class SingularHessian(ReplanError, ArithmeticError):
    """Hessian 条件数超过上限"""


# ======= 全局灵敏度 =======

class DimensionTooLarge(ReplanError, ValueError):
    """低差异序列维度超出方向数支持范围"""


class NonPositiveTrace(ReplanError, ValueError):
    """协方差迹非正"""


class EmptyImportantSet(ReplanError, ValueError):
    """筛选后没有重要参数"""


class TooManyFailedSamples(ReplanError):
    """QMC 样本失败比例过高"""


# ======= 近似与网格 =======

class OutOfGridBounds(ReplanError, ValueError):
    """查询点超出网格超立方体"""


class MissingCorner(ReplanError, ValueError):
    """插值单元存在未求解的角点"""


class NodeSolveFailure(ReplanError):
    """网格节点求解失败"""


class InvalidGrid(ReplanError, ValueError):
    """网格结构不合法"""


class FormatVersionMismatch(ReplanError, ValueError):
    """网格文件格式版本不匹配"""


class ChecksumMismatch(ReplanError, ValueError):
    """网格文件校验和不匹配（文件损坏或被截断）"""


class GridIoError(ReplanError, OSError):
    """网格文件读写失败"""


# ======= 配置 =======

class ConfigError(ReplanError, ValueError):
    """配置文件缺失或校验失败"""
