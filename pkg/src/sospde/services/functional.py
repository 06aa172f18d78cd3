"""
Lyapunov 泛函参数化服务
构造 Σ₊ / Σ₋ 两族二次泛函

    V(w) = ∫ w(x)ᵀ M(x) w(x) dx + ∫∫ w(x)ᵀ N(x, y) w(y) dx dy

其中 M、N 由半正定决策矩阵 P、Q（带乘子 g(x) = (x-a)(b-x)）生成。
另外提供基于求积公式的数值求值，用于性质测试与轨迹上的衰减检查。
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from ..core.config import settings
from ..core.exceptions import PolyMatError
from ..core.polymat import (
    DecisionPool,
    Number,
    PolyMatrix,
    Polynomial,
    SymmetricBlock,
    exact,
    kron_identity,
    mono_basis,
)

logger = logging.getLogger(__name__)


def g_polynomial(a: Number, b: Number, var: str = "x") -> Polynomial:
    """乘子 g(var) = (var - a)(b - var)，在端点为零、区间内部为正"""
    a, b = exact(a), exact(b)
    return Polynomial.univariate([-a * b, a + b, -1], var)


def block_side(n: int, d: int) -> int:
    """P、Q 的边长 n(d+1) + n(d+1)(d+2)/2"""
    return n * (d + 1) + n * (d + 1) * (d + 2) // 2


@dataclass(frozen=True, eq=False)
class FunctionalTemplate:
    """
    符号 (M, N) 对以及生成它的决策块

    sign 为 +1 表示 Σ₊ 成员，-1 表示 Σ₋ 成员（即 (-M, -N) ∈ Σ₊）
    """
    n: int
    d: int
    eps: Number
    interval: Tuple[Number, Number]
    M: PolyMatrix
    N: PolyMatrix
    P: SymmetricBlock
    Q: Optional[SymmetricBlock]
    sign: int = 1

    @property
    def side(self) -> int:
        return self.P.side

    @property
    def psd_constraints(self) -> Tuple[SymmetricBlock, ...]:
        return (self.P,) if self.Q is None else (self.P, self.Q)

    def numeric(self, values) -> Tuple[PolyMatrix, PolyMatrix]:
        """代入决策变量取值，得到数值 (M, N)"""
        return self.M.instantiate(values), self.N.instantiate(values)


def _quadratic_parts(pool: DecisionPool, name: str, n: int, d: int,
                     a: Number, b: Number, multiplier: bool):
    side = block_side(n, d)
    s1 = n * (d + 1)
    P = pool.symmetric(f"{name}.P", side)
    Q = pool.symmetric(f"{name}.Q", side) if multiplier else None

    def weighted(r0, r1, c0, c1, var):
        """P_ij + g(var)·Q_ij，变量 var 上的常数块加乘子块"""
        block = P.sub(r0, r1, c0, c1, (var,))
        if Q is not None:
            block = block + Q.sub(r0, r1, c0, c1, (var,)) * g_polynomial(a, b, var)
        return block

    return P, Q, s1, side, weighted


def _leading_identity(n: int, k: int) -> PolyMatrix:
    """diag(I_k, 0)，n×n"""
    return PolyMatrix.from_numeric(np.diag([1] * k + [0] * (n - k)))


def build_sigma_plus(n: int, d: int, eps: Number, interval: Tuple[Number, Number],
                     pool: Optional[DecisionPool] = None, name: str = "sigma_plus",
                     multiplier: bool = True, eps_rows: Optional[int] = None) -> FunctionalTemplate:
    """
    Σ₊ 成员的符号参数化

    M(x)   = Z₁(x)ᵀ(P₁₁ + g(x)Q₁₁)Z₁(x) + εIₙ
    N(x,y) = Z₁(x)ᵀ(P₁₂ + g(x)Q₁₂)Z₂(x,y) + Z₂(y,x)ᵀ(P₂₁ + g(y)Q₂₁)Z₁(y)
             + ∫ Z₂(z,x)ᵀ(P₂₂ + g(z)Q₂₂)Z₂(z,y) dz

    Z₁ 是一元 d 次单项式基 ⊗ Iₙ，Z₂ 是二元总次数 ≤ d 的单项式基 ⊗ Iₙ；
    multiplier=False 时不引入 Q（无乘子形式）；
    eps_rows=k 时 εI 只加在前 k 个分量上（εdiag(I_k, 0)），缺省为全部 n 个分量
    """
    if n < 1 or d < 0:
        raise PolyMatError(f"需要 n ≥ 1、d ≥ 0，收到 n={n}, d={d}")
    if not eps > 0:
        raise PolyMatError(f"Σ₊ 需要 eps > 0，收到 {eps}")
    eps_rows = n if eps_rows is None else eps_rows
    if not 0 < eps_rows <= n:
        raise PolyMatError(f"eps_rows 必须在 1..{n} 之间，收到 {eps_rows}")
    a, b = interval
    pool = pool if pool is not None else DecisionPool()
    P, Q, s1, side, weighted = _quadratic_parts(pool, name, n, d, a, b, multiplier)

    uni = mono_basis(d, ("x",))
    bi = mono_basis(d, ("x", "y"))
    Z1x = kron_identity(uni, n)
    Z1y = kron_identity(uni, n, ("y",))
    Z2xy = kron_identity(bi, n, ("x", "y"))
    Z2yx = kron_identity(bi, n, ("y", "x"))
    Z2zx = kron_identity(bi, n, ("z", "x"))
    Z2zy = kron_identity(bi, n, ("z", "y"))

    M = Z1x.T @ weighted(0, s1, 0, s1, "x") @ Z1x + _leading_identity(n, eps_rows) * exact(eps)

    first = Z1x.T @ weighted(0, s1, s1, side, "x") @ Z2xy
    second = Z2yx.T @ weighted(s1, side, 0, s1, "y") @ Z1y
    inner = Z2zx.T @ weighted(s1, side, s1, side, "z") @ Z2zy
    N = (first + second + inner.integrate("z", a, b)).with_vars(("x", "y"))

    logger.debug(f"Σ₊ 参数化: n={n}, d={d}, 块边长={side}, 乘子={'是' if multiplier else '否'}")
    return FunctionalTemplate(n=n, d=d, eps=eps, interval=(a, b), M=M, N=N, P=P, Q=Q, sign=1)


def build_sigma_minus(n: int, d: int, eps: Number, interval: Tuple[Number, Number],
                      pool: Optional[DecisionPool] = None, name: str = "sigma_minus",
                      multiplier: bool = True, eps_rows: Optional[int] = None) -> FunctionalTemplate:
    """
    Σ₋ 成员：(-M, -N) ∈ Σ₊^{n,d,-eps}，eps 必须为负

    组装导数条件时取 eps_rows = 系统维数：ε 项只作用在 u 分量上，
    u_x、u_xx 对应的对角块不带 ε 项（dV/dt ≤ ε‖u‖²）
    """
    if not eps < 0:
        raise PolyMatError(f"Σ₋ 需要 eps < 0，收到 {eps}")
    plus = build_sigma_plus(n, d, -exact(eps), interval, pool, name, multiplier, eps_rows)
    return FunctionalTemplate(n=n, d=d, eps=eps, interval=plus.interval, M=-plus.M, N=-plus.N,
                              P=plus.P, Q=plus.Q, sign=-1)


# =============================================================================
# 数值求值
# =============================================================================

@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """一维求积公式（节点与权重）"""
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss_legendre(cls, a: Number, b: Number, count: Optional[int] = None) -> "QuadratureRule":
        """[a, b] 上的 Gauss–Legendre 公式，默认 settings.QUADRATURE_NODES 个节点"""
        count = count or settings.QUADRATURE_NODES
        ref_nodes, ref_weights = np.polynomial.legendre.leggauss(count)
        a, b = float(a), float(b)
        half = 0.5 * (b - a)
        return cls(nodes=half * ref_nodes + 0.5 * (a + b), weights=half * ref_weights)

    @classmethod
    def trapezoid(cls, grid) -> "QuadratureRule":
        """给定（升序）网格上的复合梯形公式"""
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise PolyMatError("梯形公式需要严格递增的一维网格")
        weights = np.zeros_like(grid)
        steps = np.diff(grid)
        weights[:-1] += 0.5 * steps
        weights[1:] += 0.5 * steps
        return cls(nodes=grid, weights=weights)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))


SampledFunction = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _sample(w: SampledFunction, rule: QuadratureRule, width: int) -> np.ndarray:
    values = w(rule.nodes) if callable(w) else w
    values = np.asarray(values, dtype=float)
    if values.ndim == 1 and width == 1:
        values = values[:, None]
    if values.shape != (rule.nodes.size, width):
        raise PolyMatError(f"采样函数形状应为 {(rule.nodes.size, width)}，实际 {values.shape}")
    return values


def l2_norm_sq(w: SampledFunction, rule: QuadratureRule, width: int) -> float:
    """‖w‖²_{L2} = ∫ wᵀw"""
    values = _sample(w, rule, width)
    return rule.integrate(np.sum(values * values, axis=1))


def evaluate_functional(M: PolyMatrix, N: PolyMatrix, w: SampledFunction,
                        rule: Optional[QuadratureRule] = None,
                        interval: Optional[Tuple[Number, Number]] = None) -> float:
    """
    数值计算 ∫ wᵀ M w + ∫∫ w(x)ᵀ N(x,y) w(y)

    w 为节点上的采样数组（形状 节点数×维数）或可向量化调用的函数；
    rule 缺省时在 interval 上使用 Gauss–Legendre 公式。
    同一函数也用于 (K, L) 与 (T, R) 这类 3n 维核的二次型。
    """
    if rule is None:
        if interval is None:
            raise PolyMatError("需要提供求积公式或积分区间")
        rule = QuadratureRule.gauss_legendre(*interval)
    if M.shape != N.shape or M.rows != M.cols:
        raise PolyMatError(f"M、N 必须是同阶方阵: {M.shape} vs {N.shape}")
    width = M.rows
    values = _sample(w, rule, width)
    nodes = rule.nodes

    M_grid = M.evaluate_grid(x=nodes)
    single = np.einsum("ki,kij,kj->k", values, M_grid, values)

    N_grid = N.evaluate_grid(x=nodes[:, None], y=nodes[None, :])
    pair = np.einsum("ki,klij,lj->kl", values, N_grid, values)
    return float(rule.weights @ single + rule.weights @ pair @ rule.weights)


def lyapunov_trace(M: PolyMatrix, N: PolyMatrix, grid, snapshots) -> np.ndarray:
    """
    沿模拟轨迹计算 V(u(t_k))

    Args:
        grid: 有限差分网格节点
        snapshots: 形状 (时间步数, 节点数, n) 的解快照

    Returns:
        np.ndarray: 每个快照上的泛函值（梯形公式）
    """
    rule = QuadratureRule.trapezoid(grid)
    snapshots = np.asarray(snapshots, dtype=float)
    return np.array([evaluate_functional(M, N, snap, rule) for snap in snapshots])
