"""
核心模块初始化
"""
from .config import settings, ensure_directories

__all__ = ['settings', 'ensure_directories']
