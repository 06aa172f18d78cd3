"""
间隔算子（spacing operator）服务

在子空间 Λ = {W = (w, w', w'') : D·[w(a), w(b), w'(a), w'(b)] = 0} 上二次型恒为零的
四族核：

- 第一族：单积分核 T(x)，由 P₁..P₄ 对 x 的全导数得到
- 第二族：双积分核 R₁(x,y)，由 Q₁..Q₄ 的混合偏导得到
- 第三族：R₂(x,y)，只有第三块行，由 Q₅、Q₆ 对 y 求导得到
- 第四族：R₃(x,y)，只有第三块列，由 Q₇、Q₈ 对 x 求导得到

每一族都附带使边界项在 Λ 上消失的线性等式约束。
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import PolyMatError
from ..core.polymat import (
    DecisionPool,
    LinearConstraint,
    Number,
    PolyMatrix,
    equate,
    free_polymatrix,
)

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SpacingTemplate:
    """
    间隔算子模板 (T, R) 及其成员约束

    P 为 P₁..P₄（变量 x），Q 为 Q₁..Q₈（变量 x, y）；未构造的族对应位置为 None
    """
    n: int
    degree: int
    T: PolyMatrix
    R: PolyMatrix
    P: Tuple[Optional[PolyMatrix], ...] = (None,) * 4
    Q: Tuple[Optional[PolyMatrix], ...] = (None,) * 8
    constraints: List[LinearConstraint] = field(default_factory=list)

    def numeric(self, values) -> Tuple[PolyMatrix, PolyMatrix]:
        return self.T.instantiate(values), self.R.instantiate(values)


def _complement(D, n: int, var: str) -> PolyMatrix:
    """I₄ₙ - D，作为变量 var 上的常数矩阵"""
    D = np.asarray(D, dtype=object)
    size = 4 * n
    if D.shape != (size, size):
        raise PolyMatError(f"边界矩阵应为 {size}×{size}，实际 {D.shape}")
    eye = np.eye(size, dtype=int).astype(object)
    return PolyMatrix.from_numeric(eye - D, (var,))


def _zero(n: int, variables: Sequence[str]) -> PolyMatrix:
    return PolyMatrix.zeros(n, n, variables)


def _blocks3(blocks, n: int, variables: Sequence[str]) -> PolyMatrix:
    """3×3 块拼接，None 视为零块"""
    return PolyMatrix.bmat([[b.with_vars(variables) if b is not None else _zero(n, variables)
                             for b in row] for row in blocks]).with_vars(variables)


def _at(matrix: PolyMatrix, **point: Number) -> PolyMatrix:
    for var, value in point.items():
        matrix = matrix.substitute(var, value)
    return matrix


# =============================================================================
# 边界矩阵
# =============================================================================

def boundary_matrix_pi(P: Sequence[PolyMatrix], a: Number, b: Number) -> PolyMatrix:
    """
    第一族边界矩阵：∫ WᵀTW = Υᵀ Π Υ，Υ = (w(a), w(b), w'(a), w'(b))
    """
    P1, P2, P3, P4 = P
    n = P1.rows
    z = _zero(n, ("x",))
    return PolyMatrix.bmat([
        [-_at(P1, x=a), z, -_at(P2, x=a), z],
        [z, _at(P1, x=b), z, _at(P2, x=b)],
        [-_at(P3, x=a), z, -_at(P4, x=a), z],
        [z, _at(P3, x=b), z, _at(P4, x=b)],
    ])


def boundary_matrix_theta1(Q: Sequence[PolyMatrix], a: Number, b: Number) -> PolyMatrix:
    """第二族边界矩阵：∫∫ W(x)ᵀR₁W(y) = Υᵀ Θ₁ Υ"""
    Q1, Q2, Q3, Q4 = Q

    def ev(Qi, s, t):
        return _at(Qi, x=s, y=t)

    return PolyMatrix.bmat([
        [ev(Q1, a, a), -ev(Q1, a, b), ev(Q3, a, a), -ev(Q3, a, b)],
        [-ev(Q1, b, a), ev(Q1, b, b), -ev(Q3, b, a), ev(Q3, b, b)],
        [ev(Q2, a, a), -ev(Q2, a, b), ev(Q4, a, a), -ev(Q4, a, b)],
        [-ev(Q2, b, a), ev(Q2, b, b), -ev(Q4, b, a), ev(Q4, b, b)],
    ])


def boundary_matrix_theta2(Q5: PolyMatrix, Q6: PolyMatrix, a: Number, b: Number) -> PolyMatrix:
    """第三族：n×4n 矩阵 Θ₂(x) = [-Q₅(x,a), Q₅(x,b), -Q₆(x,a), Q₆(x,b)]"""
    return PolyMatrix.bmat([[-_at(Q5, y=a), _at(Q5, y=b), -_at(Q6, y=a), _at(Q6, y=b)]])


def boundary_matrix_theta3(Q7: PolyMatrix, Q8: PolyMatrix, a: Number, b: Number) -> PolyMatrix:
    """第四族：4n×n 矩阵 Θ₃(y) = [-Q₇(a,y); Q₇(b,y); -Q₈(a,y); Q₈(b,y)]"""
    return PolyMatrix.bmat([[-_at(Q7, x=a)], [_at(Q7, x=b)], [-_at(Q8, x=a)], [_at(Q8, x=b)]])


# =============================================================================
# 四族构造
# =============================================================================

def build_xi1(n: int, degree: int, D, interval: Tuple[Number, Number],
              pool: Optional[DecisionPool] = None, name: str = "xi1") -> SpacingTemplate:
    """
    第一族：T(x) 由 d/dx([w; w']ᵀ[[P₁, P₂], [P₃, P₄]][w; w']) 展开得到

    T = [[P₁', P₁+P₂', P₂], [P₁+P₃', P₂+P₃+P₄', P₄], [P₃, P₄, 0]]，
    约束 (I-D)ᵀ Π (I-D) = 0
    """
    a, b = interval
    pool = pool if pool is not None else DecisionPool()
    complement = _complement(D, n, "x")
    P1, P2, P3, P4 = (free_polymatrix(pool, f"{name}.P{k}", n, degree, ("x",)) for k in range(1, 5))
    dP1, dP2, dP3, dP4 = (P.differentiate("x") for P in (P1, P2, P3, P4))

    T = _blocks3([
        [dP1, P1 + dP2, P2],
        [P1 + dP3, P2 + P3 + dP4, P4],
        [P3, P4, None],
    ], n, ("x",))
    R = PolyMatrix.zeros(3 * n, 3 * n, ("x", "y"))

    Pi = boundary_matrix_pi((P1, P2, P3, P4), a, b)
    constraints = equate(complement.T @ Pi @ complement, PolyMatrix.zeros(4 * n, 4 * n), f"{name}.boundary")
    logger.debug(f"第一族间隔算子: 次数={degree}, 边界约束 {len(constraints)} 条")
    return SpacingTemplate(n=n, degree=degree, T=T, R=R, P=(P1, P2, P3, P4), constraints=constraints)


def build_xi2(n: int, degree: int, D, interval: Tuple[Number, Number],
              pool: Optional[DecisionPool] = None, name: str = "xi2") -> SpacingTemplate:
    """
    第二族：R₁(x,y) 由 ∂²/∂x∂y([w(x); w'(x)]ᵀ[[Q₁, Q₃], [Q₂, Q₄]][w(y); w'(y)]) 展开得到

    中心块为 Q₄,xy + Q₂,x + Q₃,y + Q₁；约束 (I-D)ᵀ Θ₁ (I-D) = 0
    """
    a, b = interval
    pool = pool if pool is not None else DecisionPool()
    complement = _complement(D, n, "x")
    variables = ("x", "y")
    Q1, Q2, Q3, Q4 = (free_polymatrix(pool, f"{name}.Q{k}", n, degree, variables) for k in range(1, 5))

    def dx(Q):
        return Q.differentiate("x")

    def dy(Q):
        return Q.differentiate("y")

    R = _blocks3([
        [dx(dy(Q1)), dx(dy(Q3)) + dx(Q1), dx(Q3)],
        [dx(dy(Q2)) + dy(Q1), dx(dy(Q4)) + dx(Q2) + dy(Q3) + Q1, dx(Q4) + Q3],
        [dy(Q2), dy(Q4) + Q2, Q4],
    ], n, variables)
    T = PolyMatrix.zeros(3 * n, 3 * n, ("x",))

    Theta = boundary_matrix_theta1((Q1, Q2, Q3, Q4), a, b)
    constraints = equate(complement.T @ Theta @ complement, PolyMatrix.zeros(4 * n, 4 * n), f"{name}.boundary")
    logger.debug(f"第二族间隔算子: 次数={degree}, 边界约束 {len(constraints)} 条")
    return SpacingTemplate(n=n, degree=degree, T=T, R=R, Q=(Q1, Q2, Q3, Q4) + (None,) * 4,
                           constraints=constraints)


def build_xi3(n: int, degree: int, D, interval: Tuple[Number, Number],
              pool: Optional[DecisionPool] = None, name: str = "xi3") -> SpacingTemplate:
    """
    第三族：R₂(x,y) 第三块行为 (Q₅,y, Q₆,y + Q₅, Q₆)

    约束 Θ₂(x)(I-D) ≡ 0，按 x 的系数逐项施加
    """
    a, b = interval
    pool = pool if pool is not None else DecisionPool()
    complement = _complement(D, n, "x")
    variables = ("x", "y")
    Q5, Q6 = (free_polymatrix(pool, f"{name}.Q{k}", n, degree, variables) for k in (5, 6))

    R = _blocks3([
        [None, None, None],
        [None, None, None],
        [Q5.differentiate("y"), Q6.differentiate("y") + Q5, Q6],
    ], n, variables)
    T = PolyMatrix.zeros(3 * n, 3 * n, ("x",))

    Theta = boundary_matrix_theta2(Q5, Q6, a, b)
    constraints = equate(Theta @ complement, PolyMatrix.zeros(n, 4 * n), f"{name}.boundary")
    logger.debug(f"第三族间隔算子: 次数={degree}, 边界约束 {len(constraints)} 条")
    return SpacingTemplate(n=n, degree=degree, T=T, R=R,
                           Q=(None,) * 4 + (Q5, Q6) + (None,) * 2, constraints=constraints)


def build_xi4(n: int, degree: int, D, interval: Tuple[Number, Number],
              pool: Optional[DecisionPool] = None, name: str = "xi4") -> SpacingTemplate:
    """
    第四族：R₃(x,y) 第三块列为 (Q₇,x; Q₈,x + Q₇; Q₈)

    约束 (I-D)ᵀ Θ₃(y) ≡ 0，按 y 的系数逐项施加
    """
    a, b = interval
    pool = pool if pool is not None else DecisionPool()
    complement = _complement(D, n, "y")
    variables = ("x", "y")
    Q7, Q8 = (free_polymatrix(pool, f"{name}.Q{k}", n, degree, variables) for k in (7, 8))

    R = _blocks3([
        [None, None, Q7.differentiate("x")],
        [None, None, Q8.differentiate("x") + Q7],
        [None, None, Q8],
    ], n, variables)
    T = PolyMatrix.zeros(3 * n, 3 * n, ("x",))

    Theta = boundary_matrix_theta3(Q7, Q8, a, b)
    constraints = equate(complement.T @ Theta, PolyMatrix.zeros(4 * n, n, ("y",)), f"{name}.boundary")
    logger.debug(f"第四族间隔算子: 次数={degree}, 边界约束 {len(constraints)} 条")
    return SpacingTemplate(n=n, degree=degree, T=T, R=R,
                           Q=(None,) * 6 + (Q7, Q8), constraints=constraints)


def build_sigma0(n: int, degree: int, D, interval: Tuple[Number, Number],
                 pool: Optional[DecisionPool] = None, name: str = "sigma0") -> SpacingTemplate:
    """四族合并：T 来自第一族，R = R₁ + R₂ + R₃，决策变量互不相交"""
    pool = pool if pool is not None else DecisionPool()
    parts = [
        build_xi1(n, degree, D, interval, pool, f"{name}.xi1"),
        build_xi2(n, degree, D, interval, pool, f"{name}.xi2"),
        build_xi3(n, degree, D, interval, pool, f"{name}.xi3"),
        build_xi4(n, degree, D, interval, pool, f"{name}.xi4"),
    ]
    first, second, third, fourth = parts
    R = second.R + third.R + fourth.R
    Q = second.Q[:4] + third.Q[4:6] + fourth.Q[6:]
    constraints = [c for part in parts for c in part.constraints]
    logger.info(f"Σ₀ 间隔算子: n={n}, 次数={degree}, 边界约束 {len(constraints)} 条")
    return SpacingTemplate(n=n, degree=degree, T=first.T, R=R, P=first.P, Q=Q, constraints=constraints)
