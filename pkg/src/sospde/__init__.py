"""
sospde：耦合一维线性 PDE 的平方和稳定性证明
"""
__version__ = "1.0.0"
