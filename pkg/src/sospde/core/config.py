"""
应用配置模块
定义所有配置项，支持环境变量覆盖（前缀 SOSPDE_）
"""
import os
from pathlib import Path
from typing import Optional
from pydantic_settings import BaseSettings


def get_default_data_dir() -> Path:
    """获取默认数据目录（用户主目录下的 .sospde）"""
    # 优先使用环境变量
    if env_data_dir := os.environ.get("SOSPDE_DATA_DIR"):
        return Path(env_data_dir)
    return Path.home() / ".sospde"


def get_fixtures_dir() -> Optional[Path]:
    """从环境变量获取夹具目录（未设置时由 CLI 推断仓库内的 fixtures/）"""
    if env_fixtures_dir := os.environ.get("SOSPDE_FIXTURES_DIR"):
        return Path(env_fixtures_dir)
    return None


def get_debug() -> bool:
    """从环境变量获取是否启用调试模式"""
    return os.environ.get("SOSPDE_DEBUG", "false").lower() == "true"


def get_solver() -> str:
    """从环境变量获取 SDP 求解器名称（cvxpy 求解器标识）"""
    return os.environ.get("SOSPDE_SOLVER", "CLARABEL").upper()


def get_float(name: str, default: float) -> float:
    """从环境变量读取浮点数配置"""
    return float(os.environ.get(name, str(default)))


def get_int(name: str, default: int) -> int:
    """从环境变量读取整数配置"""
    return int(os.environ.get(name, str(default)))


class Settings(BaseSettings):
    """应用配置类"""

    # 应用基本信息
    APP_NAME: str = "sospde"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = get_debug()

    # Lyapunov 泛函参数（与结果表格一致，ε = 0.001）
    EPS_POSITIVE: float = get_float("SOSPDE_EPS_POSITIVE", 1e-3)
    EPS_NEGATIVE: float = get_float("SOSPDE_EPS_NEGATIVE", -1e-3)

    # 证书校验容差
    TOL_PSD: float = get_float("SOSPDE_TOL_PSD", 1e-7)
    TOL_EQ: float = get_float("SOSPDE_TOL_EQ", 1e-7)

    # 求解器配置
    SOLVER: str = get_solver()
    SOLVER_MAX_ITERS: int = get_int("SOSPDE_SOLVER_MAX_ITERS", 500)
    TRACE_WEIGHT: float = get_float("SOSPDE_TRACE_WEIGHT", 1e-6)  # 半正定块上的迹正则权重

    # 等式预处理：按连通分量做列主元 QR，删去线性相关行
    PRESOLVE_TOL: float = get_float("SOSPDE_PRESOLVE_TOL", 1e-9)  # 相对秩判定阈值
    PRESOLVE_MAX_ENTRIES: int = get_int("SOSPDE_PRESOLVE_MAX_ENTRIES", 40_000_000)  # 单个分量稠密化上限

    # 多项式系数剪枝阈值（仅对浮点系数生效，有理数精确为零才剪枝）
    PRUNE_TOL: float = get_float("SOSPDE_PRUNE_TOL", 1e-12)

    # 二分搜索与数值对照
    BISECTION_TOL: float = get_float("SOSPDE_BISECTION_TOL", 0.05)
    QUADRATURE_NODES: int = get_int("SOSPDE_QUADRATURE_NODES", 64)
    GRID_SIZE: int = get_int("SOSPDE_GRID_SIZE", 201)

    # 数据目录（导出的 SDPA 文件、证书等）
    DATA_DIR: Path = get_default_data_dir()
    FIXTURES_DIR: Optional[Path] = get_fixtures_dir()

    class Config:
        env_file = ".env"
        case_sensitive = True


# 创建全局配置实例
settings = Settings()


def ensure_directories():
    """确保必要的目录存在"""
    settings.DATA_DIR.mkdir(parents=True, exist_ok=True)
