"""
PDE 模型服务
系统类 u_t = A(x)u_xx + B(x)u_x + C(x)u，齐次边界条件 D·[u(a), u(b), u_x(a), u_x(b)] = 0。

负责模型文档的解析 / 序列化、边界简写展开，以及内置示例系统（presets）。
"""
import json
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp
from pydantic import ValidationError

from ..core.exceptions import ModelError
from ..core.polymat import Number, PolyMatrix, Polynomial, exact
from ..schemas.model import BoundaryShorthand, Coefficient, ModelDocument

logger = logging.getLogger(__name__)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


@dataclass(frozen=True)
class PDESystem:
    """
    耦合线性 PDE 系统

    A、B、C 为 x 的 n×n 多项式矩阵；D 以 4n×4n 方阵存储（行数不足时补零行）
    """
    n: int
    a: Number
    b: Number
    A: PolyMatrix
    B: PolyMatrix
    C: PolyMatrix
    D: Tuple[Tuple[Number, ...], ...]
    name: Optional[str] = None
    document: Optional[ModelDocument] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ModelError(f"状态维数必须为正: {self.n}")
        if not self.a < self.b:
            raise ModelError(f"区间端点必须满足 a < b，收到 a={self.a}, b={self.b}")
        for label in ("A", "B", "C"):
            matrix: PolyMatrix = getattr(self, label)
            if matrix.shape != (self.n, self.n):
                raise ModelError(f"{label} 必须是 {self.n}×{self.n} 矩阵，实际 {matrix.shape}")
            if matrix.vars != ("x",):
                raise ModelError(f"{label} 只能依赖 x，实际变量 {matrix.vars}")
            if matrix.has_decisions:
                raise ModelError(f"{label} 不能含决策变量")
        size = 4 * self.n
        if len(self.D) != size or any(len(row) != size for row in self.D):
            raise ModelError(f"边界矩阵必须是 {size}×{size}")

    @property
    def interval(self) -> Tuple[Number, Number]:
        return self.a, self.b

    @property
    def gamma(self) -> int:
        """γ = max(deg A, deg B, deg C)"""
        return max(0, self.A.degree, self.B.degree, self.C.degree)

    @property
    def D_array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.D], dtype=float)

    def D_matrix(self) -> PolyMatrix:
        """D 作为常数多项式矩阵（精确系数）"""
        return PolyMatrix.from_numeric(np.array(self.D, dtype=object))


# =============================================================================
# 系数解析
# =============================================================================

def _decimal(value: float) -> Fraction:
    """十进制字面量按精确值读取（0.1 -> 1/10）"""
    try:
        return Fraction(repr(float(value)))
    except (ValueError, OverflowError) as e:
        raise ModelError(f"非法数值: {value}") from e


def _to_sympy(value: Number) -> sp.Expr:
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    return sp.Float(value)


def parse_coefficient(value: Coefficient, params: Optional[Mapping[str, Number]] = None) -> Number:
    """
    解析单个系数

    整数 / 小数按精确有理数读取；字符串可以是有理数（"7/2"），也可以是
    已声明参数的表达式（"2*lambda"）。表达式中出现未声明符号视为非多项式系数。
    """
    params = params or {}
    if isinstance(value, bool):
        raise ModelError(f"系数不能是布尔值: {value}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return _decimal(value)
    if not isinstance(value, str):
        raise ModelError(f"不支持的系数类型: {type(value).__name__}")

    # 参数名替换成安全符号（参数名可能是 Python 关键字，例如 lambda）
    aliases: Dict[str, str] = {}

    def rename(match: re.Match) -> str:
        name = match.group(0)
        if name in params:
            aliases.setdefault(name, f"_p{len(aliases)}")
            return aliases[name]
        return name

    safe = _IDENT.sub(rename, value.strip())
    symbols = {alias: sp.Symbol(alias) for alias in aliases.values()}
    try:
        expr = sp.sympify(safe, locals=symbols, rational=True)
    except (sp.SympifyError, SyntaxError, TypeError) as e:
        raise ModelError(f"无法解析系数表达式 '{value}': {e}") from e
    expr = expr.subs({symbols[alias]: _to_sympy(params[name]) for name, alias in aliases.items()})
    if expr.free_symbols:
        names = sorted(str(s) for s in expr.free_symbols)
        raise ModelError(f"系数 '{value}' 含未声明的符号 {names}（缺少参数或非多项式系数）")
    if expr.is_Rational:
        return Fraction(int(expr.p), int(expr.q))
    if expr.is_number and expr.is_real:
        return float(expr)
    raise ModelError(f"系数 '{value}' 不是实数")


def _to_json_number(value: Number) -> Coefficient:
    value = exact(value)
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return float(value)


# =============================================================================
# 边界条件
# =============================================================================

def expand_bc(shorthand: Union[BoundaryShorthand, str, Sequence[Sequence[Coefficient]], np.ndarray],
              n: int, params: Optional[Mapping[str, Number]] = None) -> np.ndarray:
    """
    边界条件展开为 4n×4n 精确矩阵（object 数组，元素为 Fraction / float）

    列块顺序为 u(a), u(b), u_x(a), u_x(b)；显式矩阵（m×4n，m ≤ 4n）补零行成方阵
    """
    if n < 1:
        raise ModelError(f"状态维数必须为正: {n}")
    size = 4 * n
    D = np.full((size, size), Fraction(0), dtype=object)
    eye = np.array([[Fraction(int(i == j)) for j in range(n)] for i in range(n)], dtype=object)

    def put(row_block: int, col_block: int, value: np.ndarray):
        D[row_block * n:(row_block + 1) * n, col_block * n:(col_block + 1) * n] = value

    if isinstance(shorthand, str) and not isinstance(shorthand, BoundaryShorthand):
        try:
            shorthand = BoundaryShorthand(shorthand)
        except ValueError:
            raise ModelError(f"未知的边界条件简写: {shorthand}") from None

    if shorthand == BoundaryShorthand.DIRICHLET:
        put(0, 0, eye)
        put(1, 1, eye)
    elif shorthand == BoundaryShorthand.NEUMANN:
        put(2, 2, eye)
        put(3, 3, eye)
    elif shorthand == BoundaryShorthand.MIXED_NA_DB:
        put(1, 1, eye)
        put(2, 2, eye)
    elif shorthand == BoundaryShorthand.MIXED_DA_NB:
        put(0, 0, eye)
        put(3, 3, eye)
    elif shorthand == BoundaryShorthand.PERIODIC:
        put(0, 0, eye)
        put(0, 1, -eye)
        put(1, 2, eye)
        put(1, 3, -eye)
    else:
        rows = [list(row) for row in shorthand]
        if not rows or len(rows) > size or any(len(row) != size for row in rows):
            raise ModelError(f"显式边界矩阵必须是 m×{size}（1 ≤ m ≤ {size}）")
        for i, row in enumerate(rows):
            for j, value in enumerate(row):
                D[i, j] = value if isinstance(value, (Fraction, float)) and not isinstance(value, bool) \
                    else parse_coefficient(value, params)
    return D


# =============================================================================
# 文档 <-> 系统
# =============================================================================

def _poly_matrix(entries: List[List[List[Coefficient]]], params: Mapping[str, Number]) -> PolyMatrix:
    return PolyMatrix([[Polynomial.univariate([parse_coefficient(c, params) for c in coeffs])
                        for coeffs in row] for row in entries], ("x",))


def build_system(doc: ModelDocument) -> PDESystem:
    """由已校验的模型文档构造 PDESystem"""
    params = {name: parse_coefficient(value) for name, value in doc.params.items()}
    a = parse_coefficient(doc.a, params)
    b = parse_coefficient(doc.b, params)
    if not a < b:
        raise ModelError(f"区间端点必须满足 a < b，收到 a={a}, b={b}")
    D = expand_bc(doc.bc, doc.n, params)
    return PDESystem(
        n=doc.n,
        a=a,
        b=b,
        A=_poly_matrix(doc.A, params),
        B=_poly_matrix(doc.B, params),
        C=_poly_matrix(doc.C, params),
        D=tuple(tuple(row) for row in D),
        name=doc.name,
        document=doc,
    )


def load_document(text: str) -> ModelDocument:
    """解析并校验模型文档文本（JSON），不代入参数"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"模型文档不是合法 JSON: {e}") from e
    try:
        doc = ModelDocument.model_validate(data)
    except ValidationError as e:
        raise ModelError(f"模型文档不符合规范: {e}") from e
    return doc


def load_model(text: str) -> PDESystem:
    """解析模型文档文本（JSON）并构造系统"""
    system = build_system(load_document(text))
    logger.debug(f"已加载模型 {system.name or '(未命名)'}: n={system.n}, 区间=[{system.a}, {system.b}]")
    return system


def document_from_system(system: PDESystem) -> ModelDocument:
    """由系统反推模型文档（系数写成精确数字）"""
    def encode(matrix: PolyMatrix) -> List[List[List[Coefficient]]]:
        out = []
        for row in matrix.entries:
            line = []
            for poly in row:
                degree = max(poly.degree, 0)
                line.append([_to_json_number(poly.coeffs[(k,)].constant) if (k,) in poly.coeffs else 0
                             for k in range(degree + 1)])
            out.append(line)
        return out

    return ModelDocument(
        name=system.name,
        n=system.n,
        a=_to_json_number(system.a),
        b=_to_json_number(system.b),
        A=encode(system.A),
        B=encode(system.B),
        C=encode(system.C),
        bc=[[_to_json_number(v) for v in row] for row in system.D],
    )


def dump_document(doc: ModelDocument) -> str:
    """模型文档序列化为稳定的 JSON 文本"""
    data = doc.model_dump(mode="json", exclude_none=True)
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def save_model(system: PDESystem) -> str:
    """序列化系统；由文档加载的系统原样写回其文档"""
    doc = system.document if system.document is not None else document_from_system(system)
    return dump_document(doc)


def parameter_family(doc: ModelDocument, param: str) -> Callable[[float], PDESystem]:
    """把模型文档的某个参数变成 λ ↦ PDESystem 的族"""
    if param not in doc.params:
        raise ModelError(f"模型文档没有参数 '{param}'，可用参数: {sorted(doc.params)}")

    def family(value: float) -> PDESystem:
        return build_system(doc.with_params(**{param: value}))

    return family


# =============================================================================
# 内置示例
# =============================================================================

def _diag2(first: List[Coefficient], second: List[Coefficient]) -> List[List[List[Coefficient]]]:
    return [[first, [0]], [[0], second]]


def _zeros2() -> List[List[List[Coefficient]]]:
    return [[[0], [0]], [[0], [0]]]


def _example1(params: Dict[str, Coefficient]) -> ModelDocument:
    return ModelDocument(
        name="example1",
        description="decoupled heat pair, Dirichlet on [0, 1]",
        n=2, a=0, b=1,
        A=_diag2([1], [1]), B=_zeros2(), C=_diag2(["lambda"], ["lambda"]),
        bc=BoundaryShorthand.DIRICHLET, params=params,
    )


def _example2(params: Dict[str, Coefficient]) -> ModelDocument:
    return ModelDocument(
        name="example2",
        description="coupled pair with C = [[lambda, 1], [1, lambda]], Dirichlet on [0, 1]",
        n=2, a=0, b=1,
        A=_diag2([1], [1]), B=_zeros2(), C=[[["lambda"], [1]], [[1], ["lambda"]]],
        bc=BoundaryShorthand.DIRICHLET, params=params,
    )


def _example3(params: Dict[str, Coefficient]) -> ModelDocument:
    return ModelDocument(
        name="example3",
        description="coupled pair with C = lambda*ones, Neumann at 0 and Dirichlet at 1",
        n=2, a=0, b=1,
        A=_diag2([1], [1]), B=_zeros2(), C=[[["lambda"], ["lambda"]], [["lambda"], ["lambda"]]],
        bc=BoundaryShorthand.MIXED_NA_DB, params=params,
    )


def _example4(params: Dict[str, Coefficient]) -> ModelDocument:
    return ModelDocument(
        name="example4",
        description="spatially varying coefficients, Dirichlet on [0, 1]",
        n=2, a=0, b=1,
        A=[[[4, 0, 5], [0]], [[0, 7, 2], [6, 0, 7]]],
        B=[[[1], [0, -4]], [[0, 0, "-7/2"], [0]]],
        C=[[[0, 0, -1], [-3]], [[0, -2], [0, 0, -3]]],
        bc=BoundaryShorthand.DIRICHLET, params=params,
    )


def _schrodinger(params: Dict[str, Coefficient]) -> ModelDocument:
    a = params.pop("a", 0)
    b = params.pop("b", 1)
    params.setdefault("v1", 0)
    params.setdefault("v2", 0)
    return ModelDocument(
        name="schrodinger",
        description="real/imaginary split of i*hbar*psi_t = -(hbar^2/m)*psi_xx + V(x)*psi, "
                    "V(x) = v0 + v1*x + v2*x^2",
        n=2, a=a, b=b,
        A=[[[0], ["-hbar/mass"]], [["hbar/mass"], [0]]],
        B=_zeros2(),
        C=[[[0], ["v0/hbar", "v1/hbar", "v2/hbar"]], [["-v0/hbar", "-v1/hbar", "-v2/hbar"], [0]]],
        bc=BoundaryShorthand.DIRICHLET, params=params,
    )


def _amplifying_rows(f1: Coefficient, f2: Coefficient) -> List[List[Coefficient]]:
    # 状态顺序 (q, p)；列顺序 q(a), p(a), q(b), p(b), q_r(a), p_r(a), q_r(b), p_r(b)
    return [
        [0, 1, 0, _negate(f1), 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 1, 0, _negate(f2)],
    ]


def _negate(value: Coefficient) -> Coefficient:
    if isinstance(value, str):
        return f"-({value})"
    return -value


def _acoustic(params: Dict[str, Coefficient]) -> ModelDocument:
    """
    一维声波模型，1/r 用 [r0, R] 上的 Chebyshev 插值多项式代替

    r0 必须大于 0；degree 为插值次数
    """
    values = {name: parse_coefficient(v) for name, v in params.items()}
    r0, R = float(values["r0"]), float(values["R"])
    if r0 <= 0 or r0 >= R:
        raise ModelError(f"声波模型要求 0 < r0 < R，收到 r0={r0}, R={R}")
    degree = int(values.get("degree", 6))
    c2 = float(values["c"]) ** 2
    approx = np.polynomial.Chebyshev.interpolate(lambda r: 1.0 / r, degree, domain=[r0, R])
    inverse_r = approx.convert(kind=np.polynomial.Polynomial).coef
    return ModelDocument(
        name="acoustic",
        description="acoustic wave (q, p) on [r0, R]; 1/r replaced by a Chebyshev interpolant "
                    f"of degree {degree}",
        n=2, a=params["r0"], b=params["R"],
        A=[[[0], ["c**2"]], [[0], [0]]],
        B=[[[0], [float(2.0 * c2 * v) for v in inverse_r]], [[0], [0]]],
        C=[[[0], [0]], [[1], [0]]],
        bc=_amplifying_rows("f1", "f2"), params=params,
    )


def raw_acoustic_document(c: Coefficient = 1, f1: Coefficient = 1, f2: Coefficient = 1,
                          r0: Coefficient = "1/10", R: Coefficient = 1) -> ModelDocument:
    """声波模型的原始符号形式（B 含 2c²/r），load_model 会拒绝它"""
    return ModelDocument(
        name="acoustic_raw",
        description="acoustic wave with the raw 2*c**2/r coefficient (not polynomial)",
        n=2, a=r0, b=R,
        A=[[[0], ["c**2"]], [[0], [0]]],
        B=[[[0], ["2*c**2/r"]], [[0], [0]]],
        C=[[[0], [0]], [[1], [0]]],
        bc=_amplifying_rows("f1", "f2"), params={"c": c, "f1": f1, "f2": f2},
    )


# 名称 -> (文档构造函数, 必需参数, 可选参数)
PRESETS: Dict[str, Tuple[Callable[[Dict[str, Coefficient]], ModelDocument], Tuple[str, ...], Tuple[str, ...]]] = {
    "schrodinger": (_schrodinger, ("hbar", "mass", "v0"), ("v1", "v2", "a", "b")),
    "example1": (_example1, ("lambda",), ()),
    "example2": (_example2, ("lambda",), ()),
    "example3": (_example3, ("lambda",), ()),
    "example4": (_example4, (), ()),
    "acoustic": (_acoustic, ("c", "f1", "f2", "r0", "R"), ("degree",)),
}


def preset_document(name: str, params: Optional[Mapping[str, Coefficient]] = None) -> ModelDocument:
    """内置示例的模型文档"""
    if name not in PRESETS:
        raise ModelError(f"未知的内置模型 '{name}'，可选: {sorted(PRESETS)}")
    builder, required, optional = PRESETS[name]
    params = dict(params or {})
    missing = [p for p in required if p not in params]
    if missing:
        raise ModelError(f"内置模型 '{name}' 缺少参数: {missing}")
    unknown = sorted(set(params) - set(required) - set(optional))
    if unknown:
        raise ModelError(f"内置模型 '{name}' 不接受参数: {unknown}")
    return builder(params)


def preset(name: str, params: Optional[Mapping[str, Coefficient]] = None) -> PDESystem:
    """构造内置示例系统，参数值代入后返回"""
    return build_system(preset_document(name, params))
