"""
模型文档相关的 Pydantic 模型
用于 PDE 模型文件（JSON）的读写与校验
"""
from enum import Enum
from typing import Dict, List, Optional, Union
from pydantic import BaseModel, Field, model_validator

# 系数：整数、十进制小数，或字符串（有理数 "7/2"，或参数表达式 "2*lambda"）
Coefficient = Union[int, float, str]


class BoundaryShorthand(str, Enum):
    """边界条件简写"""
    DIRICHLET = "dirichlet"        # u(a) = u(b) = 0
    NEUMANN = "neumann"            # u_x(a) = u_x(b) = 0
    MIXED_NA_DB = "mixed_na_db"    # a 端 Neumann，b 端 Dirichlet
    MIXED_DA_NB = "mixed_da_nb"    # a 端 Dirichlet，b 端 Neumann
    PERIODIC = "periodic"          # u(a) = u(b)，u_x(a) = u_x(b)


class ModelDocument(BaseModel):
    """
    PDE 模型文档 u_t = A(x)u_xx + B(x)u_x + C(x)u

    A/B/C 均为 n×n 数组，每个元素是按 x 升幂排列的系数数组；
    bc 为简写字符串或显式边界矩阵（列数 4n，行数不超过 4n）
    """
    name: Optional[str] = Field(None, description="模型名称")
    description: Optional[str] = Field(None, description="模型说明")
    n: int = Field(..., ge=1, description="状态维数")
    a: Coefficient = Field(..., description="区间左端点")
    b: Coefficient = Field(..., description="区间右端点")
    A: List[List[List[Coefficient]]] = Field(..., description="二阶项系数矩阵")
    B: List[List[List[Coefficient]]] = Field(..., description="一阶项系数矩阵")
    C: List[List[List[Coefficient]]] = Field(..., description="零阶项系数矩阵")
    bc: Union[BoundaryShorthand, List[List[Coefficient]]] = Field(..., description="边界条件")
    params: Dict[str, Coefficient] = Field(default_factory=dict, description="参数取值")

    @model_validator(mode="after")
    def check_shapes(self):
        """检查 A/B/C 为 n×n，边界矩阵列数为 4n"""
        for label in ("A", "B", "C"):
            matrix = getattr(self, label)
            if len(matrix) != self.n or any(len(row) != self.n for row in matrix):
                raise ValueError(f"{label} 必须是 {self.n}×{self.n} 矩阵")
            if any(len(entry) == 0 for row in matrix for entry in row):
                raise ValueError(f"{label} 的系数数组不能为空")
        if isinstance(self.bc, list):
            if len(self.bc) == 0 or len(self.bc) > 4 * self.n:
                raise ValueError(f"边界矩阵行数必须在 1..{4 * self.n} 之间")
            if any(len(row) != 4 * self.n for row in self.bc):
                raise ValueError(f"边界矩阵必须恰有 {4 * self.n} 列")
        return self

    def with_params(self, **overrides: Coefficient) -> "ModelDocument":
        """返回替换了参数取值的副本"""
        params = dict(self.params)
        params.update(overrides)
        return self.model_copy(update={"params": params})
