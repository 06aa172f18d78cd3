"""
Lyapunov 导数与可行性问题组装

沿 u_t = A u_xx + B u_x + C u 对 V(u) = ∫uᵀMu + ∫∫u(x)ᵀN(x,y)u(y) 求时间导数，
得到关于 U = (u, u_x, u_xx) 的核 K(x)、L(x,y)；然后要求

    K ≡ T + H,   L ≡ R + G

其中 (M, N) ∈ Σ₊、(T, R) ∈ Σ₀、(H, G) ∈ Σ₋，全部为决策变量的线性约束。
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..core.config import settings
from ..core.exceptions import PolyMatError
from ..core.polymat import (
    DecisionPool,
    LinearConstraint,
    Number,
    PolyMatrix,
    SymmetricBlock,
    equate,
)
from .functional import FunctionalTemplate, build_sigma_minus, build_sigma_plus
from .model import PDESystem
from .spacing import SpacingTemplate, build_sigma0

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DerivativeKernels:
    """导数核：K 为 x 的 3n×3n 矩阵，L 为 (x, y) 的 3n×3n 矩阵"""
    K: PolyMatrix
    L: PolyMatrix


def build_kernels(M: PolyMatrix, N: PolyMatrix, system: PDESystem) -> DerivativeKernels:
    """
    按块构造导数核（不做对称化）

    K = [[CᵀM + MC, MB, MA], [BᵀM, 0, 0], [AᵀM, 0, 0]]
    L = [[C(x)ᵀN + NC(y), NB(y), NA(y)], [B(x)ᵀN, 0, 0], [A(x)ᵀN, 0, 0]]
    """
    n = system.n
    if M.shape != (n, n) or N.shape != (n, n):
        raise PolyMatError(f"M、N 必须是 {n}×{n}，实际 {M.shape}、{N.shape}")
    A, B, C = system.A, system.B, system.C
    Ay, By, Cy = (X.rename({"x": "y"}) for X in (A, B, C))
    zx = PolyMatrix.zeros(n, n, ("x",))
    zxy = PolyMatrix.zeros(n, n, ("x", "y"))

    K = PolyMatrix.bmat([
        [C.T @ M + M @ C, M @ B, M @ A],
        [B.T @ M, zx, zx],
        [A.T @ M, zx, zx],
    ]).with_vars(("x",))
    L = PolyMatrix.bmat([
        [(C.T @ N + N @ Cy).with_vars(("x", "y")), (N @ By).with_vars(("x", "y")),
         (N @ Ay).with_vars(("x", "y"))],
        [(B.T @ N).with_vars(("x", "y")), zxy, zxy],
        [(A.T @ N).with_vars(("x", "y")), zxy, zxy],
    ]).with_vars(("x", "y"))
    return DerivativeKernels(K=K, L=L)


@dataclass(eq=False)
class AssembledProblem:
    """
    组装完成的可行性问题

    所有决策变量登记在 pool 中；pool.blocks 均为半正定块，
    pool.free_groups 为间隔算子多项式的自由系数
    """
    system: PDESystem
    degree: int
    gamma: int
    eps1: Number
    eps2: Number
    pool: DecisionPool
    positive: FunctionalTemplate
    spacing: SpacingTemplate
    negative: FunctionalTemplate
    kernels: DerivativeKernels
    constraints: List[LinearConstraint] = field(default_factory=list)

    @property
    def psd_blocks(self) -> List[SymmetricBlock]:
        return [block for block in self.pool.blocks if block.psd]

    @property
    def spacing_degree(self) -> int:
        return 2 * self.degree + 2 + self.gamma

    @property
    def metadata(self) -> Dict[str, object]:
        return {
            "n": self.system.n,
            "degree": self.degree,
            "gamma": self.gamma,
            "eps1": float(self.eps1),
            "eps2": float(self.eps2),
            "model": self.system.name,
        }


def assemble(system: PDESystem, degree: int, eps1: Optional[Number] = None,
             eps2: Optional[Number] = None, multiplier: bool = True) -> AssembledProblem:
    """
    组装可行性问题

    (M, N) ∈ Σ₊^{n, d, ε₁}，(T, R) ∈ Σ₀^{3n, 2d+2+γ}，(H, G) ∈ Σ₋^{3n, d+γ, ε₂}
    （H 中的 ε₂ 项只在 u 块上，即 ε₂·diag(Iₙ, 0, 0)），
    约束：间隔算子成员约束 + K ≡ T + H + L ≡ R + G 的逐系数匹配
    """
    eps1 = settings.EPS_POSITIVE if eps1 is None else eps1
    eps2 = settings.EPS_NEGATIVE if eps2 is None else eps2
    if degree < 0:
        raise PolyMatError(f"泛函次数必须非负: {degree}")
    started = time.perf_counter()
    n, gamma = system.n, system.gamma
    interval = system.interval
    pool = DecisionPool()

    positive = build_sigma_plus(n, degree, eps1, interval, pool, "sigma_plus", multiplier)
    spacing = build_sigma0(n, 2 * degree + 2 + gamma, system.D, interval, pool, "sigma0")
    negative = build_sigma_minus(3 * n, degree + gamma, eps2, interval, pool, "sigma_minus", multiplier,
                                 eps_rows=n)
    kernels = build_kernels(positive.M, positive.N, system)

    constraints = list(spacing.constraints)
    constraints += equate(kernels.K, spacing.T + negative.M, "K")
    constraints += equate(kernels.L, spacing.R + negative.N, "L")

    problem = AssembledProblem(
        system=system, degree=degree, gamma=gamma, eps1=eps1, eps2=eps2, pool=pool,
        positive=positive, spacing=spacing, negative=negative, kernels=kernels,
        constraints=constraints,
    )
    elapsed = time.perf_counter() - started
    sides = [block.side for block in problem.psd_blocks]
    logger.info(
        f"问题组装完成: 模型={system.name or '(未命名)'}, d={degree}, γ={gamma}, "
        f"半正定块={sides}, 变量 {pool.size} 个, 等式 {len(constraints)} 条, 用时 {elapsed:.2f}s"
    )
    return problem
