"""
半定规划服务
把组装好的问题转换为块对角标准形式、调用 cvxpy 求解，并对证书做事后校验。

标准形式约定：
- 扁平变量向量先按构造顺序排列各半正定块的上三角元素（行优先，i ≤ j），
  存放的是矩阵元素 X_ij 本身，非对角元不乘 √2 或 2；随后是全部自由变量
- 等式约束为稀疏矩阵 A·v = b
"""
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph

from ..core.config import settings
from ..core.exceptions import CanonicalizationError, SolutionFormatError
from ..core.polymat import DecisionPool, LinExpr, LinearConstraint, linear_system
from ..schemas.certificate import (
    BlockDiagnostic,
    CertificateDocument,
    CertificateMetadata,
    ResidualOffender,
    SolveStatus,
    VerifyReport,
)

logger = logging.getLogger(__name__)

# 尝试导入 cvxpy
try:
    import cvxpy as cp
    CVXPY_AVAILABLE = True
except ImportError:
    CVXPY_AVAILABLE = False
    logger.warning("cvxpy未安装，内置求解路径不可用，只能导出 SDPA 文件交给外部求解器")

# 能处理半正定锥的 cvxpy 求解器，按优先级排列
SDP_SOLVERS = ("CLARABEL", "SCS", "MOSEK", "CVXOPT", "COPT", "SDPA")

# 求解器迭代上限参数名
_ITER_OPTION = {"CLARABEL": "max_iter", "SCS": "max_iters", "CVXOPT": "maxiters", "SDPA": "maxIteration"}

_WORST_ROWS = 5


@dataclass(frozen=True)
class BlockSlice:
    """半正定块在扁平向量中的位置"""
    name: str
    side: int
    start: int

    @property
    def stop(self) -> int:
        return self.start + self.side * (self.side + 1) // 2


@dataclass(eq=False)
class SDPProblem:
    """块对角标准形式的可行性问题"""
    blocks: List[BlockSlice]
    free_start: int
    num_free: int
    A: sparse.csr_matrix
    b: np.ndarray
    labels: List[str] = field(default_factory=list)
    columns: Optional[np.ndarray] = None  # 标准序号 -> 决策变量编号
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def num_vars(self) -> int:
        return self.free_start + self.num_free

    @property
    def num_equalities(self) -> int:
        return self.A.shape[0]

    def trivially_infeasible_rows(self) -> List[int]:
        """系数全零但右端非零的等式行"""
        counts = np.diff(self.A.indptr)
        return [int(r) for r in np.flatnonzero((counts == 0) & (self.b != 0))]

    def block_matrix(self, values: np.ndarray, index: int) -> np.ndarray:
        """由上三角取值还原第 index 个块的对称矩阵"""
        block = self.blocks[index]
        X = np.zeros((block.side, block.side))
        rows, cols = np.triu_indices(block.side)
        X[rows, cols] = values[block.start:block.stop]
        X[cols, rows] = values[block.start:block.stop]
        return X

    def free_values(self, values: np.ndarray) -> np.ndarray:
        return values[self.free_start:self.num_vars]

    def scatter(self, values: np.ndarray) -> np.ndarray:
        """标准顺序的取值重排成按决策变量编号索引的数组"""
        if self.columns is None:
            return np.asarray(values, dtype=float)
        out = np.zeros(int(self.columns.max()) + 1 if self.columns.size else 0)
        out[self.columns] = values
        return out


@dataclass(eq=False)
class Certificate:
    """数值解及其诊断信息"""
    values: np.ndarray
    status: SolveStatus = SolveStatus.UNKNOWN
    solver: str = ""
    report: Optional[VerifyReport] = None
    metadata: Dict[str, object] = field(default_factory=dict)


@dataclass(eq=False)
class SolveOutcome:
    """求解结果：feasible 时必带通过校验的证书"""
    status: SolveStatus
    certificate: Optional[Certificate] = None
    reason: str = ""
    solver: str = ""
    solve_time: float = 0.0


# =============================================================================
# 标准化
# =============================================================================

def canonicalize_pool(pool: DecisionPool, constraints: Sequence[LinearConstraint],
                      metadata: Optional[Dict[str, object]] = None) -> SDPProblem:
    """按决策变量池与线性约束生成标准形式；非半正定的对称块按自由变量处理"""
    columns: List[int] = []
    blocks: List[BlockSlice] = []
    for block in pool.blocks:
        if not block.psd:
            continue
        blocks.append(BlockSlice(block.name, block.side, len(columns)))
        columns.extend(block.upper_ids())
    free_start = len(columns)
    for block in pool.blocks:
        if not block.psd:
            columns.extend(block.upper_ids())
    for group in pool.free_groups:
        columns.extend(group.ids)
    if sorted(columns) != list(range(pool.size)):
        raise CanonicalizationError("决策变量编号不连续，无法标准化")

    for constraint in constraints:
        if not isinstance(constraint, LinearConstraint) or not isinstance(constraint.expr, LinExpr):
            raise CanonicalizationError(f"遇到非线性约束: {constraint!r}")

    columns_arr = np.asarray(columns, dtype=int)
    position = np.empty(pool.size, dtype=int)
    position[columns_arr] = np.arange(pool.size)

    A_pool, b = linear_system(constraints, pool.size)
    A = A_pool.tocoo()
    A = sparse.csr_matrix((A.data, (A.row, position[A.col])), shape=A.shape)
    A.sum_duplicates()
    A.sort_indices()

    problem = SDPProblem(
        blocks=blocks,
        free_start=free_start,
        num_free=pool.size - free_start,
        A=A,
        b=b,
        labels=[c.label for c in constraints],
        columns=columns_arr,
        metadata=dict(metadata or {}),
    )
    problem.metadata.update(num_variables=problem.num_vars, num_equalities=problem.num_equalities)
    logger.info(
        f"标准化完成: 半正定块 {len(blocks)} 个 {[blk.side for blk in blocks]}, "
        f"自由变量 {problem.num_free} 个, 等式 {problem.num_equalities} 条"
    )
    return problem


def canonicalize(assembled) -> SDPProblem:
    """把 AssembledProblem 转为 SDPProblem，变量顺序确定"""
    return canonicalize_pool(assembled.pool, assembled.constraints, assembled.metadata)


# =============================================================================
# 等式预处理
# =============================================================================

@dataclass(frozen=True)
class RowReduction:
    """
    等式行约简结果

    keep 为保留的线性无关行（升序）；inconsistent 不为 None 时，
    该行是其余行的线性组合但右端不符，整个等式组无解
    """
    keep: np.ndarray
    dropped: int
    inconsistent: Optional[int] = None
    mismatch: float = 0.0


def reduce_rows(A: sparse.spmatrix, b: np.ndarray, tol: Optional[float] = None,
                tol_eq: Optional[float] = None, max_entries: Optional[int] = None) -> RowReduction:
    """
    删去线性相关的等式行并检查相容性

    按行-变量二部图的连通分量拆分，对每个分量的 Aᵀ 做列主元 QR：
    |R_kk| ≤ tol·|R_00| 的主元视为相关行。相关行的右端必须等于独立行右端的同一组合，
    偏差超过 tol_eq·(1 + max|b|) 即判为不相容。
    稠密化后元素数超过 max_entries 的分量保留全部行。
    """
    tol = settings.PRESOLVE_TOL if tol is None else tol
    tol_eq = settings.TOL_EQ if tol_eq is None else tol_eq
    max_entries = settings.PRESOLVE_MAX_ENTRIES if max_entries is None else max_entries
    A = sparse.csr_matrix(A)
    A.eliminate_zeros()
    b = np.asarray(b, dtype=float)
    m, nv = A.shape
    if m == 0:
        return RowReduction(keep=np.zeros(0, dtype=int), dropped=0)

    graph = sparse.bmat([[sparse.csr_matrix((m, m)), A], [A.T, sparse.csr_matrix((nv, nv))]])
    _, labels = csgraph.connected_components(graph, directed=False)
    row_labels = labels[:m]

    keep: List[np.ndarray] = []
    inconsistent, mismatch = None, 0.0
    for component in np.unique(row_labels):
        rows = np.flatnonzero(row_labels == component)
        sub = A[rows]
        if sub.nnz == 0:
            # 全零行只在右端非零时有意义（不成立的常数约束）
            keep.append(rows[b[rows] != 0])
            continue
        if rows.size == 1:
            keep.append(rows)
            continue
        cols = np.unique(sub.indices)
        if rows.size * cols.size > max_entries:
            logger.warning(f"等式分量过大（{rows.size}×{cols.size}），跳过相关行删除")
            keep.append(rows)
            continue

        _, R, piv = linalg.qr(sub[:, cols].toarray().T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.count_nonzero(diag > tol * diag[0]))
        independent, dependent = piv[:rank], piv[rank:]
        keep.append(rows[np.sort(independent)])
        if dependent.size == 0:
            continue
        combo = linalg.solve_triangular(R[:rank, :rank], R[:rank, rank:])
        gap = np.abs(b[rows[dependent]] - combo.T @ b[rows[independent]])
        worst = int(np.argmax(gap))
        scale = 1.0 + float(np.abs(b[rows]).max())
        if gap[worst] > tol_eq * scale and gap[worst] > mismatch:
            inconsistent, mismatch = int(rows[dependent[worst]]), float(gap[worst])

    kept = np.sort(np.concatenate(keep)) if keep else np.zeros(0, dtype=int)
    reduction = RowReduction(keep=kept, dropped=m - kept.size, inconsistent=inconsistent, mismatch=mismatch)
    logger.info(f"等式预处理: {m} 行中保留 {kept.size} 行，删除相关行 {reduction.dropped} 行")
    return reduction


# =============================================================================
# 校验
# =============================================================================

def verify(cert: Certificate, problem: SDPProblem, tol_psd: Optional[float] = None,
           tol_eq: Optional[float] = None) -> VerifyReport:
    """
    事后校验证书：对称特征值分解求每个块的最小特征值，稀疏乘法求等式残差

    通过条件：最小特征值 ≥ -tol_psd 且最大残差 ≤ tol_eq
    """
    tol_psd = settings.TOL_PSD if tol_psd is None else tol_psd
    tol_eq = settings.TOL_EQ if tol_eq is None else tol_eq
    values = np.asarray(cert.values, dtype=float).ravel()
    if values.size != problem.num_vars:
        raise SolutionFormatError(f"证书长度 {values.size} 与问题变量数 {problem.num_vars} 不符")

    diagnostics = []
    for index, block in enumerate(problem.blocks):
        eigs = linalg.eigvalsh(problem.block_matrix(values, index))
        diagnostics.append(BlockDiagnostic(name=block.name, side=block.side, min_eig=float(eigs[0])))
    min_eig = min((d.min_eig for d in diagnostics), default=float("inf"))

    residual = np.abs(problem.A @ values - problem.b) if problem.num_equalities else np.zeros(0)
    max_residual = float(residual.max()) if residual.size else 0.0
    offenders = []
    if residual.size:
        bad = np.flatnonzero(residual > tol_eq)
        for row in bad[np.argsort(-residual[bad], kind="stable")][:_WORST_ROWS]:
            label = problem.labels[row] if row < len(problem.labels) else ""
            offenders.append(ResidualOffender(row=int(row), label=label, residual=float(residual[row])))

    passed = bool(min_eig >= -tol_psd and max_residual <= tol_eq)
    report = VerifyReport(
        passed=passed, tol_psd=tol_psd, tol_eq=tol_eq, min_eig=min_eig,
        max_residual=max_residual, blocks=diagnostics, worst_rows=offenders,
    )
    if passed:
        logger.info(f"证书校验通过: 最小特征值={min_eig:.3e}, 最大残差={max_residual:.3e}")
    else:
        worst = ", ".join(f"#{o.row} {o.label} ({o.residual:.2e})" for o in offenders) or "无"
        logger.warning(
            f"证书校验未通过: 最小特征值={min_eig:.3e}, 最大残差={max_residual:.3e}, 最差约束: {worst}"
        )
    return report


# =============================================================================
# 求解
# =============================================================================

class SDPSolverService:
    """基于 cvxpy 的内置求解路径"""

    def __init__(self):
        """初始化求解服务"""
        self.solver = settings.SOLVER
        self.max_iters = settings.SOLVER_MAX_ITERS
        self.trace_weight = settings.TRACE_WEIGHT

    def is_available(self) -> bool:
        """检查是否有可用的 SDP 求解器"""
        return bool(self.available_solvers())

    def available_solvers(self) -> List[str]:
        if not CVXPY_AVAILABLE:
            return []
        installed = set(cp.installed_solvers())
        return [name for name in SDP_SOLVERS if name in installed]

    def pick_solver(self, requested: Optional[str] = None) -> Optional[str]:
        """优先使用指定求解器，不可用时退回任意已安装的 SDP 求解器"""
        available = self.available_solvers()
        requested = (requested or self.solver or "").upper()
        if requested in available:
            return requested
        if available:
            if requested:
                logger.warning(f"求解器 {requested} 不可用，改用 {available[0]}")
            return available[0]
        return None

    def solve(self, problem: SDPProblem, solver: Optional[str] = None, check: bool = True,
              tol_psd: Optional[float] = None, tol_eq: Optional[float] = None) -> SolveOutcome:
        """
        求解可行性问题：目标为半正定块迹的小权重正则（选取内点）

        Returns:
            SolveOutcome: feasible 仅在证书通过校验时给出；
            infeasible 仅在求解器判定不可行、存在不成立的常数约束或等式组不相容时给出；其余为 unknown。
            线性相关的等式行先删去再交给求解器，校验仍使用完整的等式组
        """
        bad_rows = problem.trivially_infeasible_rows()
        if bad_rows:
            label = problem.labels[bad_rows[0]] if bad_rows[0] < len(problem.labels) else ""
            return SolveOutcome(SolveStatus.INFEASIBLE, reason=f"常数等式不成立: #{bad_rows[0]} {label}")

        if problem.num_vars == 0:
            cert = Certificate(values=np.zeros(0), status=SolveStatus.FEASIBLE, metadata=dict(problem.metadata))
            cert.report = verify(cert, problem, tol_psd, tol_eq)
            return SolveOutcome(SolveStatus.FEASIBLE, certificate=cert)

        reduction = reduce_rows(problem.A, problem.b, tol_eq=tol_eq)
        if reduction.inconsistent is not None:
            row = reduction.inconsistent
            label = problem.labels[row] if row < len(problem.labels) else ""
            return SolveOutcome(SolveStatus.INFEASIBLE,
                                reason=f"等式约束不相容: #{row} {label} (偏差 {reduction.mismatch:.2e})")

        name = self.pick_solver(solver)
        if name is None:
            return SolveOutcome(SolveStatus.UNKNOWN, reason="没有可用的 SDP 求解器（请安装 cvxpy 与 clarabel）")

        matrices = [cp.Variable((blk.side, blk.side), symmetric=True, name=blk.name) for blk in problem.blocks]
        pieces = []
        for blk, X in zip(problem.blocks, matrices):
            rows, cols = np.triu_indices(blk.side)
            select = sparse.csr_matrix(
                (np.ones(rows.size), (np.arange(rows.size), cols * blk.side + rows)),
                shape=(rows.size, blk.side * blk.side),
            )
            pieces.append(cp.Constant(select) @ cp.vec(X, order="F"))
        free = cp.Variable(problem.num_free, name="free") if problem.num_free else None
        if free is not None:
            pieces.append(free)
        v = cp.hstack(pieces) if len(pieces) > 1 else pieces[0]

        constraints = [X >> 0 for X in matrices]
        if reduction.keep.size:
            A_eq = problem.A[reduction.keep]
            constraints.append(cp.Constant(A_eq) @ v == problem.b[reduction.keep])
        objective = cp.Minimize(self.trace_weight * sum(cp.trace(X) for X in matrices)) if matrices \
            else cp.Minimize(0)
        program = cp.Problem(objective, constraints)

        options = {}
        if name in _ITER_OPTION:
            options[_ITER_OPTION[name]] = self.max_iters
        started = time.perf_counter()
        try:
            program.solve(solver=name, **options)
        except cp.SolverError as e:
            elapsed = time.perf_counter() - started
            logger.warning(f"求解器 {name} 失败: {e}")
            return SolveOutcome(SolveStatus.UNKNOWN, reason=f"求解器错误: {e}", solver=name, solve_time=elapsed)
        elapsed = time.perf_counter() - started
        status = program.status
        logger.info(f"求解器 {name} 返回状态 {status}，用时 {elapsed:.2f}s")

        if status in (cp.INFEASIBLE,):
            return SolveOutcome(SolveStatus.INFEASIBLE, reason="求解器判定不可行", solver=name, solve_time=elapsed)
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return SolveOutcome(SolveStatus.UNKNOWN, reason=f"求解器状态 {status}", solver=name, solve_time=elapsed)

        values = np.empty(problem.num_vars)
        for blk, X in zip(problem.blocks, matrices):
            sym = 0.5 * (X.value + X.value.T)
            values[blk.start:blk.stop] = sym[np.triu_indices(blk.side)]
        if free is not None:
            values[problem.free_start:] = free.value
        cert = Certificate(values=values, solver=name, metadata=dict(problem.metadata))
        if not check:
            cert.status = SolveStatus.UNKNOWN
            return SolveOutcome(SolveStatus.UNKNOWN, certificate=cert, reason="未校验",
                                solver=name, solve_time=elapsed)

        cert.report = verify(cert, problem, tol_psd, tol_eq)
        if cert.report.passed:
            cert.status = SolveStatus.FEASIBLE
            return SolveOutcome(SolveStatus.FEASIBLE, certificate=cert, solver=name, solve_time=elapsed)
        return SolveOutcome(SolveStatus.UNKNOWN, certificate=cert, solver=name, solve_time=elapsed,
                            reason=f"求解器给出的解未通过校验 (最小特征值 {cert.report.min_eig:.2e}, "
                                   f"最大残差 {cert.report.max_residual:.2e})")


# 创建全局求解服务实例
sdp_solver_service = SDPSolverService()


# =============================================================================
# 证书持久化
# =============================================================================

def certificate_document(cert: Certificate, problem: SDPProblem) -> CertificateDocument:
    meta = {**problem.metadata, **cert.metadata}
    return CertificateDocument(
        metadata=CertificateMetadata(
            n=int(meta.get("n", 0)),
            degree=int(meta.get("degree", 0)),
            gamma=int(meta.get("gamma", 0)),
            eps1=float(meta.get("eps1", settings.EPS_POSITIVE)),
            eps2=float(meta.get("eps2", settings.EPS_NEGATIVE)),
            model=meta.get("model"),
            num_variables=problem.num_vars,
            num_equalities=problem.num_equalities,
        ),
        status=cert.status,
        solver=cert.solver,
        values=[float(v) for v in cert.values],
    )


def save_certificate(cert: Certificate, problem: SDPProblem, path: Path) -> Tuple[bool, str, Optional[str]]:
    """
    证书写成 JSON 文件

    Returns:
        Tuple[bool, str, Optional[str]]: (是否成功, 文件路径, 错误信息)
    """
    path = Path(path)
    try:
        doc = certificate_document(cert, problem)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
        logger.info(f"证书已保存: {path}")
        return True, str(path), None
    except OSError as e:
        logger.error(f"证书保存失败: {path}, 错误: {e}")
        return False, str(path), str(e)


def load_certificate(path: Path) -> Tuple[Certificate, CertificateMetadata]:
    """读取 JSON 证书"""
    path = Path(path)
    try:
        doc = CertificateDocument.model_validate_json(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise SolutionFormatError(f"证书文件无法解析: {path}: {e}") from e
    cert = Certificate(
        values=np.asarray(doc.values, dtype=float),
        status=doc.status,
        solver=doc.solver,
        metadata=doc.metadata.model_dump(),
    )
    return cert, doc.metadata
