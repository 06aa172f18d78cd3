"""
夹具服务
重新生成仓库中的示例模型文档与 SDPA 基准文件，并维护数学对象到实现的对照表。
"""
import importlib
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..core.config import settings
from ..core.polymat import DecisionPool, LinExpr, LinearConstraint
from .derivative import assemble
from .model import dump_document, preset, preset_document, raw_acoustic_document
from .sdp import SDPProblem, canonicalize, canonicalize_pool
from .sdpa import format_sdpa

logger = logging.getLogger(__name__)

# 夹具模型：文件名 -> (内置模型名, 参数)
FIXTURE_MODELS: Dict[str, Tuple[str, Dict[str, object]]] = {
    "example1": ("example1", {"lambda": 5}),
    "example2": ("example2", {"lambda": 4}),
    "example3": ("example3", {"lambda": 1}),
    "example4": ("example4", {}),
    "schrodinger": ("schrodinger", {"hbar": 1, "mass": 1, "v0": 0}),
    "acoustic": ("acoustic", {"c": 1, "f1": "1/2", "f2": "1/2", "r0": "1/10", "R": 1, "degree": 6}),
}

# 数学对象 -> 实现（模块:属性路径）
MATH_OBJECTS: Dict[str, str] = {
    "PDE system u_t = A u_xx + B u_x + C u": "sospde.services.model:PDESystem",
    "boundary matrix D and its shorthands": "sospde.services.model:expand_bc",
    "gamma = max degree of A, B, C": "sospde.services.model:PDESystem.gamma",
    "example systems (Schrodinger, acoustic wave, examples 1-4)": "sospde.services.model:preset",
    "monomial vector Z_d": "sospde.core.polymat:mono_basis",
    "Kronecker product Z_d (x) I_n": "sospde.core.polymat:kron_identity",
    "coefficient-wise polynomial identity": "sospde.core.polymat:equate",
    "multiplier g(x) = (x-a)(b-x)": "sospde.services.functional:g_polynomial",
    "positive functional set Sigma+ (M, N from P, Q)": "sospde.services.functional:build_sigma_plus",
    "negative functional set Sigma-": "sospde.services.functional:build_sigma_minus",
    "quadratic functional V(w)": "sospde.services.functional:evaluate_functional",
    "first spacing family T(x)": "sospde.services.spacing:build_xi1",
    "boundary matrix Pi of the first family": "sospde.services.spacing:boundary_matrix_pi",
    "second spacing family R1(x, y)": "sospde.services.spacing:build_xi2",
    "boundary matrix Theta1": "sospde.services.spacing:boundary_matrix_theta1",
    "third spacing family R2(x, y)": "sospde.services.spacing:build_xi3",
    "boundary matrix Theta2(x)": "sospde.services.spacing:boundary_matrix_theta2",
    "fourth spacing family R3(x, y)": "sospde.services.spacing:build_xi4",
    "boundary matrix Theta3(y)": "sospde.services.spacing:boundary_matrix_theta3",
    "spacing set Sigma0": "sospde.services.spacing:build_sigma0",
    "derivative kernels K(x), L(x, y)": "sospde.services.derivative:build_kernels",
    "feasibility conditions K = T + H, L = R + G": "sospde.services.derivative:assemble",
    "stability verdict": "sospde.services.search:check_stability",
    "largest certifiable parameter": "sospde.services.search:margin_bisection",
    "numerical threshold lambda_num": "sospde.services.simulator:numeric_threshold",
}


def resolve(target: str):
    """按 "模块:属性.属性" 解析实现对象"""
    module_name, _, path = target.partition(":")
    obj = importlib.import_module(module_name)
    for part in path.split("."):
        obj = getattr(obj, part)
    return obj


def trivial_problem() -> SDPProblem:
    """单个 2×2 半正定块、约束 X₁₁ = 1 的最小问题"""
    pool = DecisionPool()
    X = pool.symmetric("X", 2)
    constraint = LinearConstraint(LinExpr.var(X.ids[0][0]) - 1, "X[0,0]")
    return canonicalize_pool(pool, [constraint])


def render_fixtures() -> Dict[str, str]:
    """生成全部夹具文本：相对路径 -> 内容"""
    files: Dict[str, str] = {}
    for filename, (name, params) in FIXTURE_MODELS.items():
        files[f"models/{filename}.json"] = dump_document(preset_document(name, params))
    files["models/acoustic_raw.json"] = dump_document(raw_acoustic_document())
    files["golden/trivial.dat-s"] = format_sdpa(trivial_problem())
    example1 = preset(*FIXTURE_MODELS["example1"])
    files["golden/example1_d1.dat-s"] = format_sdpa(canonicalize(assemble(example1, 1)))
    return files


def default_fixtures_dir() -> Path:
    """夹具目录：优先配置项，否则为仓库根目录下的 fixtures/"""
    if settings.FIXTURES_DIR is not None:
        return settings.FIXTURES_DIR
    return Path(__file__).resolve().parents[3] / "fixtures"


def regenerate_fixtures(directory: Optional[Path] = None) -> Tuple[bool, List[str], Optional[str]]:
    """
    重写全部夹具文件

    Returns:
        Tuple[bool, List[str], Optional[str]]: (是否成功, 写入的文件路径列表, 错误信息)
    """
    root = Path(directory) if directory is not None else default_fixtures_dir()
    written: List[str] = []
    try:
        for relative, text in render_fixtures().items():
            path = root / relative
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8", newline="\n")
            written.append(str(path))
        logger.info(f"夹具已重新生成: {len(written)} 个文件 -> {root}")
        return True, written, None
    except OSError as e:
        logger.error(f"夹具生成失败: {e}")
        return False, written, str(e)


def diff_fixtures(directory: Optional[Path] = None) -> List[str]:
    """与已提交的夹具比较，返回内容不同或缺失的相对路径"""
    root = Path(directory) if directory is not None else default_fixtures_dir()
    changed = []
    for relative, text in render_fixtures().items():
        path = root / relative
        if not path.exists() or path.read_text(encoding="utf-8") != text:
            changed.append(relative)
    return changed
