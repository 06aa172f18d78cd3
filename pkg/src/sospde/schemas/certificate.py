"""
证书与求解结果相关的 Pydantic 模型
"""
from enum import Enum
from typing import List, Optional
from pydantic import BaseModel, Field


class SolveStatus(str, Enum):
    """求解状态"""
    FEASIBLE = "feasible"        # 求解器给出解且通过校验
    INFEASIBLE = "infeasible"    # 求解器证明不可行
    UNKNOWN = "unknown"          # 迭代上限、数值问题或校验未通过


class StabilityVerdict(str, Enum):
    """稳定性判定"""
    CERTIFIED = "certified"
    NOT_CERTIFIED = "not_certified"
    UNKNOWN = "unknown"


class BlockDiagnostic(BaseModel):
    """单个半正定块的诊断"""
    name: str = Field(..., description="块名称")
    side: int = Field(..., description="块边长")
    min_eig: float = Field(..., description="最小特征值")


class ResidualOffender(BaseModel):
    """残差较大的等式约束"""
    row: int = Field(..., description="等式行号")
    label: str = Field("", description="约束来源")
    residual: float = Field(..., description="残差绝对值")


class VerifyReport(BaseModel):
    """证书校验报告"""
    passed: bool = Field(..., description="是否通过")
    tol_psd: float = Field(..., description="半正定容差")
    tol_eq: float = Field(..., description="等式容差")
    min_eig: float = Field(..., description="所有块中的最小特征值")
    max_residual: float = Field(..., description="最大等式残差")
    blocks: List[BlockDiagnostic] = Field(default_factory=list, description="逐块诊断")
    worst_rows: List[ResidualOffender] = Field(default_factory=list, description="残差最大的约束")


class CertificateMetadata(BaseModel):
    """证书对应的问题参数"""
    n: int = Field(..., description="状态维数")
    degree: int = Field(..., description="泛函次数 d")
    gamma: int = Field(..., description="系数最高次数 γ")
    eps1: float = Field(..., description="正定性参数 ε₁")
    eps2: float = Field(..., description="负定性参数 ε₂")
    model: Optional[str] = Field(None, description="模型名称")
    num_variables: int = Field(..., description="扁平化变量个数")
    num_equalities: int = Field(..., description="等式约束个数")


class CertificateDocument(BaseModel):
    """可持久化的证书"""
    metadata: CertificateMetadata
    status: SolveStatus
    solver: str = Field("", description="求解器名称")
    values: List[float] = Field(..., description="按标准顺序排列的变量取值")


class ProbeRecord(BaseModel):
    """二分搜索中的一次探测"""
    index: int = Field(..., description="探测序号")
    value: float = Field(..., description="参数取值")
    verdict: StabilityVerdict = Field(..., description="判定结果")


class MarginReport(BaseModel):
    """最大可证明参数的搜索结果"""
    degree: int
    lo: float
    hi: float
    tol: float
    value: Optional[float] = Field(None, description="最大可证明参数 λ*，lo 不可证明时为空")
    probes: List[ProbeRecord] = Field(default_factory=list)
    message: str = Field("", description="附加说明")
