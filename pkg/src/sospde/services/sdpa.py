"""
SDPA 稀疏格式（.dat-s）读写

导出时采用 SDPA 对偶形式：等式约束 Fᵢ • Y = cᵢ，Y ⪰ 0，目标矩阵 F₀ = 0。
- Y 的前若干块对应各半正定块；自由变量拆成 f = f⁺ - f⁻ 放入最后的对角（LP）块
- 标准形式存的是 X_ij 本身，而 Fᵢ • Y 对非对角元计两次，因此非对角元写入值的一半

导入时读取 SDPA 输出文件中的 yMat 段，或按标准变量顺序排列的纯数值向量。
"""
import logging
import re
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from ..core.exceptions import SolutionFormatError
from .sdp import Certificate, SDPProblem

logger = logging.getLogger(__name__)

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_TOKEN = re.compile(rf"\{{|\}}|{_NUMBER}")


def _fmt(value: float) -> str:
    """确定性的数值格式（最短的 17 位有效数字表示）"""
    value = float(value)
    if value == 0:
        return "0"
    return f"{value:.17g}"


def _locate(problem: SDPProblem):
    """标准序号 -> (块号, i, j)，自由变量 -> (LP 块号, k)"""
    lookup = {}
    for number, blk in enumerate(problem.blocks, start=1):
        rows, cols = np.triu_indices(blk.side)
        for offset, (i, j) in enumerate(zip(rows, cols)):
            lookup[blk.start + offset] = (number, int(i) + 1, int(j) + 1)
    return lookup


def format_sdpa(problem: SDPProblem, comment: Optional[str] = None) -> str:
    """
    生成 SDPA 稀疏格式文本

    行序：注释、约束数 m、块数、块结构、c 向量、矩阵元素（matno block i j value，按字典序）
    """
    m = problem.num_equalities
    struct = [str(blk.side) for blk in problem.blocks]
    lp_block = None
    if problem.num_free:
        struct.append(str(-2 * problem.num_free))
        lp_block = len(problem.blocks) + 1
    if not struct:
        raise SolutionFormatError("问题没有任何变量，无法导出 SDPA 文件")

    lookup = _locate(problem)
    entries = []
    A = problem.A.tocsr()
    for row in range(m):
        start, stop = A.indptr[row], A.indptr[row + 1]
        for col, coeff in zip(A.indices[start:stop], A.data[start:stop]):
            if coeff == 0:
                continue
            col = int(col)
            if col < problem.free_start:
                block, i, j = lookup[col]
                value = coeff if i == j else 0.5 * coeff
                entries.append((row + 1, block, i, j, value))
            else:
                k = col - problem.free_start + 1
                entries.append((row + 1, lp_block, k, k, coeff))
                entries.append((row + 1, lp_block, problem.num_free + k, problem.num_free + k, -coeff))
    entries.sort(key=lambda e: e[:4])

    comment = comment or (f"sospde feasibility problem: {m} equalities, "
                          f"{len(problem.blocks)} psd blocks, {problem.num_free} free variables")
    lines = [
        f"\"{comment}\"",
        str(m),
        str(len(struct)),
        " ".join(struct),
        " ".join(_fmt(v) for v in problem.b),
    ]
    lines += [f"{mat} {blk} {i} {j} {_fmt(v)}" for mat, blk, i, j, v in entries]
    return "\n".join(lines) + "\n"


def export_sdpa(problem: SDPProblem, destination: Union[str, Path],
                comment: Optional[str] = None) -> Tuple[bool, str, Optional[str]]:
    """
    导出 .dat-s 文件

    Returns:
        Tuple[bool, str, Optional[str]]: (是否成功, 文件路径, 错误信息)
    """
    path = Path(destination)
    try:
        text = format_sdpa(problem, comment)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="ascii", newline="\n")
        logger.info(f"SDPA 文件已导出: {path} ({problem.num_equalities} 条约束)")
        return True, str(path), None
    except (OSError, SolutionFormatError) as e:
        logger.error(f"SDPA 导出失败: {path}, 错误: {e}")
        return False, str(path), str(e)


# =============================================================================
# 结果导入
# =============================================================================

def _parse_nested(text: str) -> list:
    """解析 SDPA 输出中的花括号嵌套结构，返回嵌套列表"""
    tokens = _TOKEN.findall(text)
    if not tokens or tokens[0] != "{":
        raise SolutionFormatError("yMat 段缺少起始花括号")
    stack: List[list] = []
    root = None
    for token in tokens:
        if token == "{":
            node: list = []
            if stack:
                stack[-1].append(node)
            stack.append(node)
        elif token == "}":
            if not stack:
                raise SolutionFormatError("yMat 段花括号不匹配")
            root = stack.pop()
            if not stack:
                return root
        else:
            if not stack:
                raise SolutionFormatError("yMat 段结构错误")
            stack[-1].append(float(token))
    raise SolutionFormatError("yMat 段花括号不匹配")


def _values_from_ymat(blocks: list, problem: SDPProblem) -> np.ndarray:
    expected = len(problem.blocks) + (1 if problem.num_free else 0)
    if len(blocks) != expected:
        raise SolutionFormatError(f"yMat 含 {len(blocks)} 个块，问题需要 {expected} 个")
    values = np.empty(problem.num_vars)
    for index, blk in enumerate(problem.blocks):
        try:
            Y = np.asarray(blocks[index], dtype=float)
        except ValueError as e:
            raise SolutionFormatError(f"第 {index + 1} 个块不是矩阵") from e
        if Y.shape != (blk.side, blk.side):
            raise SolutionFormatError(f"第 {index + 1} 个块形状 {Y.shape} 与边长 {blk.side} 不符")
        sym = 0.5 * (Y + Y.T)
        values[blk.start:blk.stop] = sym[np.triu_indices(blk.side)]
    if problem.num_free:
        diag = np.asarray(blocks[-1], dtype=float)
        if diag.ndim == 2:
            diag = np.diag(diag)
        if diag.shape != (2 * problem.num_free,):
            raise SolutionFormatError(f"LP 块长度 {diag.size} 与自由变量数 {problem.num_free} 不符")
        values[problem.free_start:] = diag[:problem.num_free] - diag[problem.num_free:]
    return values


def import_solution(text: str, problem: SDPProblem) -> Certificate:
    """
    读取外部求解结果

    支持两种输入：SDPA 输出文件（取 yMat 段），或按标准变量顺序排列的纯数值向量
    （空白分隔）。返回的证书状态为 unknown，需要再经 verify 校验。
    """
    marker = re.search(r"yMat\s*=", text)
    if marker:
        values = _values_from_ymat(_parse_nested(text[marker.end():]), problem)
        source = "sdpa"
    else:
        try:
            values = np.array([float(tok) for tok in text.split()], dtype=float)
        except ValueError as e:
            raise SolutionFormatError(f"结果向量含非数值内容: {e}") from e
        if values.size != problem.num_vars:
            raise SolutionFormatError(f"结果向量长度 {values.size} 与问题变量数 {problem.num_vars} 不符")
        source = "vector"
    logger.info(f"已导入外部解 ({source}): {values.size} 个变量")
    return Certificate(values=values, solver=f"external:{source}", metadata=dict(problem.metadata))
