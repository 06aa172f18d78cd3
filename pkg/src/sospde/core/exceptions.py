"""
异常定义
所有可预期的失败都归入 SospdeError 体系，CLI 据此给出退出码 1
"""


class SospdeError(Exception):
    """基础异常"""


class PolyMatError(SospdeError, ValueError):
    """多项式矩阵运算错误：维度不匹配、未声明变量、非法基请求"""


class BilinearityError(PolyMatError):
    """两个都含决策变量的操作数相乘（会破坏 LMI 的线性结构）"""


class ModelError(SospdeError, ValueError):
    """模型文档 / PDE 系统校验失败"""


class CanonicalizationError(SospdeError):
    """无法把装配好的问题转换成标准 SDP 形式"""


class UnsupportedBoundaryError(SospdeError):
    """边界矩阵 D 无法化为满秩离散约束"""


class EigenSolverError(SospdeError):
    """特征值求解失败"""


class SolutionFormatError(SospdeError, ValueError):
    """外部求解器结果文件无法解析"""


class SimulationError(SospdeError):
    """时间推进中的线性求解失败"""


class ArgumentError(SospdeError, ValueError):
    """二分区间、容差、网格点数或时间步长不合法"""
