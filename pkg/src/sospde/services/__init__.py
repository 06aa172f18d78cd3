"""
服务模块初始化
导出服务实例与主要入口
"""
from .sdp import sdp_solver_service
from .model import load_model, preset
from .search import check_stability, margin_bisection
from .simulator import numeric_threshold, simulate

__all__ = [
    'sdp_solver_service',
    'load_model',
    'preset',
    'check_stability',
    'margin_bisection',
    'numeric_threshold',
    'simulate'
]
