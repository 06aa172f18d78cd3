"""
有限差分数值对照（oracle）

把 u_t = A u_xx + B u_x + C u 在等距网格上离散：内部节点用二阶中心差分，
边界条件用二阶单侧差分写成 4n 个离散方程 E·U = 0 并精确消去：

- 当 E 关于边界节点 (u_0, u_{N-1}) 的子块满秩 2n 时，直接解出边界值（消元）
- 否则把全部节点（边界行用单侧差分）投影到 E 的零空间上（零空间投影）

提供谱横坐标、数值稳定阈值二分和 Crank–Nicolson 时间推进。
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import linalg

from ..core.config import settings
from ..core.exceptions import ArgumentError, EigenSolverError, SimulationError, UnsupportedBoundaryError
from .model import PDESystem

logger = logging.getLogger(__name__)

MIN_GRID = 16


@dataclass(eq=False)
class GridOperator:
    """
    离散算子

    matrix 作用在约化状态上；lift 把约化状态还原为全网格状态（形状 节点数·n × 约化维数），
    restrict 把全网格状态映射回约化状态
    """
    system: PDESystem
    grid: np.ndarray
    h: float
    matrix: np.ndarray
    lift: np.ndarray
    restrict: np.ndarray
    mode: str
    eliminated: int

    @property
    def grid_size(self) -> int:
        return self.grid.size

    @property
    def n(self) -> int:
        return self.system.n

    def to_grid(self, reduced: np.ndarray) -> np.ndarray:
        """约化状态 -> (节点数, n) 网格函数"""
        return (self.lift @ reduced).reshape(self.grid_size, self.n)

    def from_grid(self, values: np.ndarray) -> np.ndarray:
        return self.restrict @ np.asarray(values, dtype=float).reshape(-1)


def _boundary_selector(n: int, N: int, h: float) -> np.ndarray:
    """4n × nN 矩阵：把网格值映射到离散的 (u(a), u(b), u_x(a), u_x(b))"""
    S = np.zeros((4 * n, n * N))
    stencils = [
        {0: 1.0},
        {N - 1: 1.0},
        {0: -3.0 / (2 * h), 1: 4.0 / (2 * h), 2: -1.0 / (2 * h)},
        {N - 1: 3.0 / (2 * h), N - 2: -4.0 / (2 * h), N - 3: 1.0 / (2 * h)},
    ]
    for block, stencil in enumerate(stencils):
        for node, weight in stencil.items():
            for i in range(n):
                S[block * n + i, node * n + i] = weight
    return S


def _full_operator(A: np.ndarray, B: np.ndarray, C: np.ndarray, n: int, N: int, h: float) -> np.ndarray:
    """全部节点上的差分算子；边界节点用二阶单侧差分"""
    F = np.zeros((n * N, n * N))

    def put(k: int, wxx: dict, wx: dict):
        rows = slice(k * n, (k + 1) * n)
        for node in set(wxx) | set(wx):
            cols = slice(node * n, (node + 1) * n)
            F[rows, cols] += A[k] * wxx.get(node, 0.0) + B[k] * wx.get(node, 0.0)
        F[rows, k * n:(k + 1) * n] += C[k]

    h2 = h * h
    for k in range(1, N - 1):
        put(k, {k - 1: 1 / h2, k: -2 / h2, k + 1: 1 / h2}, {k - 1: -1 / (2 * h), k + 1: 1 / (2 * h)})
    put(0, {0: 2 / h2, 1: -5 / h2, 2: 4 / h2, 3: -1 / h2},
        {0: -3 / (2 * h), 1: 4 / (2 * h), 2: -1 / (2 * h)})
    last = N - 1
    put(last, {last: 2 / h2, last - 1: -5 / h2, last - 2: 4 / h2, last - 3: -1 / h2},
        {last: 3 / (2 * h), last - 1: -4 / (2 * h), last - 2: 1 / (2 * h)})
    return F


def discretize(system: PDESystem, grid_size: Optional[int] = None) -> GridOperator:
    """
    构造离散算子

    Raises:
        UnsupportedBoundaryError: 离散边界方程的秩超过 2n
    """
    N = grid_size or settings.GRID_SIZE
    if N < MIN_GRID:
        raise ArgumentError(f"网格点数至少为 {MIN_GRID}，收到 {N}")
    n = system.n
    a, b = float(system.a), float(system.b)
    grid = np.linspace(a, b, N)
    h = (b - a) / (N - 1)

    A = system.A.evaluate_grid(x=grid)
    B = system.B.evaluate_grid(x=grid)
    C = system.C.evaluate_grid(x=grid)
    F = _full_operator(A, B, C, n, N, h)

    E = system.D_array @ _boundary_selector(n, N, h)
    scale = max(1.0, np.abs(E).max()) if E.size else 1.0
    E = E[np.linalg.norm(E, axis=1) > 1e-12 * scale]
    rank = int(np.linalg.matrix_rank(E)) if E.size else 0
    if rank > 2 * n:
        raise UnsupportedBoundaryError(f"离散边界方程的秩 {rank} 超过 2n = {2 * n}，无法消去")

    boundary_cols = np.r_[np.arange(n), np.arange((N - 1) * n, N * n)]
    interior_cols = np.arange(n, (N - 1) * n)
    E_B = E[:, boundary_cols] if E.size else np.zeros((0, 2 * n))

    if rank == 2 * n and np.linalg.matrix_rank(E_B) == 2 * n:
        # 消元：u_B = -E_B⁺ E_I u_I
        gain = -np.linalg.lstsq(E_B, E[:, interior_cols], rcond=None)[0]
        lift = np.zeros((n * N, interior_cols.size))
        lift[interior_cols, np.arange(interior_cols.size)] = 1.0
        lift[boundary_cols, :] = gain
        restrict = np.zeros((interior_cols.size, n * N))
        restrict[np.arange(interior_cols.size), interior_cols] = 1.0
        matrix = F[interior_cols, :] @ lift
        mode = "elimination"
    else:
        basis = linalg.null_space(E) if E.size else np.eye(n * N)
        lift = basis
        restrict = basis.T
        matrix = basis.T @ F @ basis
        mode = "projection"

    logger.debug(f"离散化完成: N={N}, h={h:.4g}, 方式={mode}, 约化维数={matrix.shape[0]}")
    return GridOperator(system=system, grid=grid, h=h, matrix=matrix, lift=lift, restrict=restrict,
                        mode=mode, eliminated=n * N - matrix.shape[0])


def spectral_abscissa(op: Union[GridOperator, np.ndarray]) -> float:
    """稠密一般特征值求解，返回最大实部"""
    matrix = op.matrix if isinstance(op, GridOperator) else np.asarray(op, dtype=float)
    if matrix.size == 0:
        raise EigenSolverError("空矩阵没有特征值")
    try:
        eigs = linalg.eigvals(matrix)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"特征值求解失败: {e}") from e
    if not np.all(np.isfinite(eigs)):
        raise EigenSolverError("特征值求解得到非有限值")
    value = float(np.max(eigs.real))
    logger.debug(f"谱横坐标 = {value:.6g}（维数 {matrix.shape[0]}）")
    return value


def numeric_threshold(family: Callable[[float], PDESystem], lo: float, hi: float,
                      tol: float = 1e-3, grid_size: Optional[int] = None) -> float:
    """
    按谱横坐标符号二分，求数值稳定阈值 λ_num

    要求 abscissa(lo) < 0 < abscissa(hi)
    """
    def abscissa(value: float) -> float:
        return spectral_abscissa(discretize(family(value), grid_size))

    low, high = abscissa(lo), abscissa(hi)
    if not (low < 0 < high):
        raise ArgumentError(f"端点谱横坐标同号或顺序不对: abscissa({lo})={low:.4g}, abscissa({hi})={high:.4g}")
    good, bad = lo, hi
    while bad - good > tol:
        mid = 0.5 * (good + bad)
        if abscissa(mid) < 0:
            good = mid
        else:
            bad = mid
    value = 0.5 * (good + bad)
    logger.info(f"数值阈值 λ_num ≈ {value:.6g}（区间 [{good:.6g}, {bad:.6g}]）")
    return value


@dataclass(eq=False)
class Trajectory:
    """模拟轨迹：快照形状 (时刻数, 节点数, n)"""
    times: np.ndarray
    grid: np.ndarray
    snapshots: np.ndarray
    norms: np.ndarray


def l2_norms(grid: np.ndarray, snapshots: np.ndarray) -> np.ndarray:
    """梯形公式计算每个快照的 L2 范数"""
    weights = np.full(grid.size, grid[1] - grid[0])
    weights[[0, -1]] *= 0.5
    energy = np.einsum("k,tki->t", weights, snapshots * snapshots)
    return np.sqrt(energy)


def simulate(system: PDESystem, u0: Union[np.ndarray, Callable[[np.ndarray], np.ndarray]],
             T: float, dt: float, grid_size: Optional[int] = None, every: int = 1) -> Trajectory:
    """
    Crank–Nicolson（隐式梯形）时间推进

    Args:
        u0: 网格上的初值（形状 (节点数, n)，n=1 时可为一维）或可在网格上求值的函数
        every: 每隔多少步保存一次快照
    """
    if dt <= 0 or T < 0:
        raise ArgumentError(f"需要 dt > 0、T ≥ 0，收到 dt={dt}, T={T}")
    op = discretize(system, grid_size)
    values = u0(op.grid) if callable(u0) else u0
    values = np.asarray(values, dtype=float).reshape(op.grid_size, op.n)
    state = op.from_grid(values)

    steps = int(round(T / dt))
    identity = np.eye(op.matrix.shape[0])
    lhs = identity - 0.5 * dt * op.matrix
    rhs = identity + 0.5 * dt * op.matrix
    try:
        factor = linalg.lu_factor(lhs, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise SimulationError(f"隐式步矩阵分解失败: {e}") from e

    times, snapshots = [0.0], [op.to_grid(state)]
    for step in range(1, steps + 1):
        state = linalg.lu_solve(factor, rhs @ state)
        if not np.all(np.isfinite(state)):
            raise SimulationError(f"第 {step} 步出现非有限值")
        if step % every == 0 or step == steps:
            times.append(step * dt)
            snapshots.append(op.to_grid(state))

    snapshots_arr = np.array(snapshots)
    norms = l2_norms(op.grid, snapshots_arr)
    logger.info(f"模拟完成: {steps} 步, dt={dt:g}, 末态范数 {norms[-1]:.6g}")
    return Trajectory(times=np.array(times), grid=op.grid, snapshots=snapshots_arr, norms=norms)
