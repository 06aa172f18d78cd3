"""
多项式矩阵代数
最多三个标量变量（x, y, z），系数是决策变量的仿射表达式（LinExpr）。

提供微分、定积分、变量交换、代入以及按系数匹配生成线性等式约束。
所有值构造后不可变，运算都是纯函数，可以在线程间共享。

系数算术：输入为整数 / Fraction 时保持精确有理数；出现浮点数时退化为
双精度，绝对值不超过 settings.PRUNE_TOL（默认 1e-12）的系数视为零。
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from .config import settings
from .exceptions import BilinearityError, PolyMatError

logger = logging.getLogger(__name__)

VARIABLES: Tuple[str, ...] = ("x", "y", "z")

Number = Union[int, Fraction, float]
Exponent = Tuple[int, ...]

_PRUNE_TOL = settings.PRUNE_TOL


def exact(value: Number) -> Number:
    """整数 / 有理数转为 Fraction，浮点数保持不变"""
    if isinstance(value, bool):
        raise PolyMatError("布尔值不能作为系数")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, np.integer):
        return Fraction(int(value))
    raise PolyMatError(f"不支持的系数类型: {type(value).__name__}")


def _is_zero(value: Number) -> bool:
    if isinstance(value, float):
        return abs(value) <= _PRUNE_TOL
    return value == 0


def canonical_vars(names: Iterable[str]) -> Tuple[str, ...]:
    """按 x, y, z 的固定顺序整理变量集合"""
    names = set(names)
    unknown = names.difference(VARIABLES)
    if unknown:
        raise PolyMatError(f"未知变量: {sorted(unknown)}")
    return tuple(v for v in VARIABLES if v in names)


def grlex_key(exp: Exponent) -> Tuple:
    """分级字典序：先按总次数，再按 x > y > z 的字典序"""
    return (sum(exp), tuple(-e for e in exp))


# =============================================================================
# 仿射表达式
# =============================================================================

class LinExpr:
    """
    决策变量的仿射表达式 constant + Σ coeff·v

    terms 为 {变量编号: 系数}，零系数项被剪掉；terms 为空时就是数值常数
    """

    __slots__ = ("constant", "terms")

    def __init__(self, constant: Number = 0, terms: Optional[Mapping[int, Number]] = None):
        constant = exact(constant)
        self.constant: Number = 0 if _is_zero(constant) else constant
        cleaned: Dict[int, Number] = {}
        if terms:
            for key, coeff in terms.items():
                coeff = exact(coeff)
                if not _is_zero(coeff):
                    cleaned[int(key)] = coeff
        self.terms: Dict[int, Number] = cleaned

    @classmethod
    def var(cls, var_id: int, coeff: Number = 1) -> "LinExpr":
        return cls(0, {var_id: coeff})

    @property
    def is_constant(self) -> bool:
        return not self.terms

    @property
    def is_zero(self) -> bool:
        return not self.terms and self.constant == 0

    def __add__(self, other) -> "LinExpr":
        if not isinstance(other, LinExpr):
            other = LinExpr(other)
        terms = dict(self.terms)
        for key, coeff in other.terms.items():
            terms[key] = terms.get(key, 0) + coeff
        return LinExpr(self.constant + other.constant, terms)

    __radd__ = __add__

    def __neg__(self) -> "LinExpr":
        return self.scale(-1)

    def __sub__(self, other) -> "LinExpr":
        if not isinstance(other, LinExpr):
            other = LinExpr(other)
        return self + (-other)

    def __rsub__(self, other) -> "LinExpr":
        return (-self) + other

    def scale(self, factor: Number) -> "LinExpr":
        factor = exact(factor)
        if _is_zero(factor):
            return LinExpr()
        return LinExpr(self.constant * factor, {k: c * factor for k, c in self.terms.items()})

    def __mul__(self, other) -> "LinExpr":
        if isinstance(other, LinExpr):
            if self.terms and other.terms:
                raise BilinearityError("两个含决策变量的表达式相乘")
            if not self.terms:
                return other.scale(self.constant)
            return self.scale(other.constant)
        return self.scale(other)

    __rmul__ = __mul__

    def evaluate(self, values) -> float:
        """代入决策变量数值（values 支持按编号索引的映射或数组）"""
        total = float(self.constant)
        for key, coeff in self.terms.items():
            total += float(coeff) * float(values[key])
        return total

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinExpr):
            other = LinExpr(other)
        return self.constant == other.constant and self.terms == other.terms

    def __hash__(self):
        return hash((self.constant, tuple(sorted(self.terms.items()))))

    def __repr__(self) -> str:
        parts = [str(self.constant)] if self.constant or not self.terms else []
        parts += [f"{c}*v{k}" for k, c in sorted(self.terms.items())]
        return " + ".join(parts)


def _as_expr(value) -> LinExpr:
    return value if isinstance(value, LinExpr) else LinExpr(value)


class _Accumulator:
    """可变累加器：exp -> [常数, {变量: 系数}]，最后冻结为 Polynomial"""

    __slots__ = ("data",)

    def __init__(self):
        self.data: Dict[Exponent, list] = {}

    def add(self, exp: Exponent, expr: LinExpr, factor: Number = 1):
        slot = self.data.get(exp)
        if slot is None:
            slot = self.data[exp] = [0, {}]
        if expr.constant:
            slot[0] = slot[0] + expr.constant * factor
        terms = slot[1]
        for key, coeff in expr.terms.items():
            terms[key] = terms.get(key, 0) + coeff * factor

    def freeze(self, variables: Tuple[str, ...]) -> "Polynomial":
        return Polynomial(variables, {exp: LinExpr(c, t) for exp, (c, t) in self.data.items()})


# =============================================================================
# 多项式
# =============================================================================

class Polynomial:
    """
    多元多项式，系数为 LinExpr

    vars 是 {x, y, z} 的有序子集；coeffs 的键是指数元组（每个变量一项）
    """

    __slots__ = ("vars", "coeffs")

    def __init__(self, variables: Sequence[str], coeffs: Optional[Mapping[Exponent, object]] = None):
        self.vars: Tuple[str, ...] = canonical_vars(variables)
        if tuple(variables) != self.vars:
            raise PolyMatError(f"变量必须按 x, y, z 顺序声明: {tuple(variables)}")
        cleaned: Dict[Exponent, LinExpr] = {}
        if coeffs:
            width = len(self.vars)
            for exp, coeff in coeffs.items():
                exp = tuple(int(e) for e in exp)
                if len(exp) != width or any(e < 0 for e in exp):
                    raise PolyMatError(f"指数 {exp} 与变量 {self.vars} 不匹配")
                coeff = _as_expr(coeff)
                if not coeff.is_zero:
                    cleaned[exp] = coeff
        self.coeffs: Dict[Exponent, LinExpr] = cleaned

    # ---- 构造 ----

    @classmethod
    def constant(cls, value, variables: Sequence[str] = ("x",)) -> "Polynomial":
        variables = canonical_vars(variables)
        return cls(variables, {(0,) * len(variables): value})

    @classmethod
    def monomial(cls, exp: Mapping[str, int], variables: Sequence[str], coeff=1) -> "Polynomial":
        variables = canonical_vars(variables)
        for name in exp:
            if name not in variables:
                raise PolyMatError(f"变量 {name} 未声明")
        return cls(variables, {tuple(exp.get(v, 0) for v in variables): coeff})

    @classmethod
    def variable(cls, name: str, variables: Optional[Sequence[str]] = None) -> "Polynomial":
        return cls.monomial({name: 1}, variables or (name,))

    @classmethod
    def univariate(cls, coefficients: Sequence, var: str = "x") -> "Polynomial":
        """按升幂系数构造一元多项式"""
        return cls((var,), {(k,): c for k, c in enumerate(coefficients)})

    # ---- 属性 ----

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def has_decisions(self) -> bool:
        return any(c.terms for c in self.coeffs.values())

    @property
    def degree(self) -> int:
        """总次数（零多项式返回 -1）"""
        return max((sum(e) for e in self.coeffs), default=-1)

    def degree_in(self, var: str) -> int:
        idx = self._index(var)
        return max((e[idx] for e in self.coeffs), default=-1)

    def decision_ids(self) -> set:
        ids = set()
        for coeff in self.coeffs.values():
            ids.update(coeff.terms)
        return ids

    def monomials(self) -> List[Exponent]:
        return sorted(self.coeffs, key=grlex_key)

    def _index(self, var: str) -> int:
        try:
            return self.vars.index(var)
        except ValueError:
            raise PolyMatError(f"变量 {var} 未在 {self.vars} 中声明") from None

    def with_vars(self, variables: Sequence[str]) -> "Polynomial":
        """扩展到更大的变量集合"""
        target = canonical_vars(set(variables) | set(self.vars))
        if target == self.vars:
            return self
        positions = [target.index(v) for v in self.vars]
        coeffs = {}
        for exp, coeff in self.coeffs.items():
            new = [0] * len(target)
            for pos, e in zip(positions, exp):
                new[pos] = e
            coeffs[tuple(new)] = coeff
        return Polynomial(target, coeffs)

    # ---- 算术 ----

    def _align(self, other: "Polynomial") -> Tuple["Polynomial", "Polynomial"]:
        if self.vars == other.vars:
            return self, other
        union = set(self.vars) | set(other.vars)
        return self.with_vars(union), other.with_vars(union)

    def __add__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self.vars)
        lhs, rhs = self._align(other)
        acc = _Accumulator()
        for exp, coeff in lhs.coeffs.items():
            acc.add(exp, coeff)
        for exp, coeff in rhs.coeffs.items():
            acc.add(exp, coeff)
        return acc.freeze(lhs.vars)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.vars, {e: c.scale(-1) for e, c in self.coeffs.items()})

    def __sub__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self.vars)
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            if isinstance(other, LinExpr):
                other = Polynomial.constant(other, self.vars)
            else:
                return Polynomial(self.vars, {e: c.scale(other) for e, c in self.coeffs.items()})
        if self.has_decisions and other.has_decisions:
            raise BilinearityError("两个含决策变量的多项式相乘")
        lhs, rhs = self._align(other)
        acc = _Accumulator()
        for e1, c1 in lhs.coeffs.items():
            for e2, c2 in rhs.coeffs.items():
                exp = tuple(a + b for a, b in zip(e1, e2))
                if c1.terms:
                    acc.add(exp, c1, c2.constant)
                else:
                    acc.add(exp, c2, c1.constant)
        return acc.freeze(lhs.vars)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self.vars)
        return (self - other).is_zero

    def __hash__(self):
        # 只按实际出现的变量取键，与 __eq__ 的变量对齐一致
        return hash(frozenset(
            (tuple(sorted((v, e) for v, e in zip(self.vars, exp) if e)), coeff)
            for exp, coeff in self.coeffs.items()
        ))

    # ---- 微积分与变量操作 ----

    def differentiate(self, var: str) -> "Polynomial":
        idx = self._index(var)
        coeffs = {}
        for exp, coeff in self.coeffs.items():
            if exp[idx] == 0:
                continue
            new = list(exp)
            new[idx] -= 1
            coeffs[tuple(new)] = coeff.scale(exp[idx])
        return Polynomial(self.vars, coeffs)

    def integrate(self, var: str, a: Number, b: Number) -> "Polynomial":
        """对 var 在 [a, b] 上做定积分，结果不再依赖 var"""
        idx = self._index(var)
        a, b = exact(a), exact(b)
        remaining = tuple(v for v in self.vars if v != var)
        acc = _Accumulator()
        for exp, coeff in self.coeffs.items():
            k = exp[idx]
            weight = (b ** (k + 1) - a ** (k + 1)) / (k + 1)
            acc.add(exp[:idx] + exp[idx + 1:], coeff, weight)
        if not remaining:
            # 一元多项式积分得到常数，保留占位变量 x 便于统一处理
            total = acc.data.get((), [0, {}])
            return Polynomial(("x",), {(0,): LinExpr(total[0], total[1])})
        return acc.freeze(remaining)

    def substitute(self, var: str, value: Number) -> "Polynomial":
        """把 var 固定为数值，结果不再含 var"""
        idx = self._index(var)
        value = exact(value)
        remaining = tuple(v for v in self.vars if v != var)
        acc = _Accumulator()
        for exp, coeff in self.coeffs.items():
            acc.add(exp[:idx] + exp[idx + 1:], coeff, value ** exp[idx])
        if not remaining:
            total = acc.data.get((), [0, {}])
            return Polynomial(("x",), {(0,): LinExpr(total[0], total[1])})
        return acc.freeze(remaining)

    def rename(self, mapping: Mapping[str, str]) -> "Polynomial":
        """
        变量改名（同时进行），目标变量重合时指数相加，例如 Q(x, y) -> Q(x, x)
        """
        for src in mapping:
            self._index(src)
        targets = [mapping.get(v, v) for v in self.vars]
        new_vars = canonical_vars(targets)
        positions = [new_vars.index(t) for t in targets]
        acc = _Accumulator()
        for exp, coeff in self.coeffs.items():
            new = [0] * len(new_vars)
            for pos, e in zip(positions, exp):
                new[pos] += e
            acc.add(tuple(new), coeff)
        return acc.freeze(new_vars)

    def swap(self, u: str, v: str) -> "Polynomial":
        """交换两个变量的指数"""
        self._index(u)
        self._index(v)
        return self.rename({u: v, v: u})

    # ---- 数值化 ----

    def instantiate(self, values) -> "Polynomial":
        """代入决策变量数值，得到纯数值多项式（浮点系数）"""
        return Polynomial(self.vars, {e: c.evaluate(values) for e, c in self.coeffs.items()})

    def evaluate(self, point: Mapping[str, Number]) -> LinExpr:
        """在一点求值，返回 LinExpr（数值多项式即常数）"""
        total = LinExpr()
        for exp, coeff in self.coeffs.items():
            weight = Fraction(1)
            for name, e in zip(self.vars, exp):
                if e:
                    weight = weight * exact(point[name]) ** e
            total = total + coeff.scale(weight)
        return total

    def evaluate_grid(self, **arrays) -> np.ndarray:
        """
        数值多项式的向量化求值；关键字参数为各变量的数组（可广播）
        """
        if self.has_decisions:
            raise PolyMatError("含决策变量的多项式不能直接数值求值")
        arrays = {k: np.asarray(v, dtype=float) for k, v in arrays.items()}
        for name in self.vars:
            if name not in arrays and any(e[self.vars.index(name)] for e in self.coeffs):
                raise PolyMatError(f"缺少变量 {name} 的取值")
        shape = np.broadcast_shapes(*(a.shape for a in arrays.values())) if arrays else ()
        result = np.zeros(shape, dtype=float)
        for exp, coeff in self.coeffs.items():
            term = np.full(shape, float(coeff.constant))
            for name, e in zip(self.vars, exp):
                if e:
                    term = term * arrays[name] ** e
            result = result + term
        return result

    def __repr__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for exp in self.monomials():
            mono = "*".join(f"{v}^{e}" if e > 1 else v for v, e in zip(self.vars, exp) if e)
            parts.append(f"({self.coeffs[exp]})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


# =============================================================================
# 多项式矩阵
# =============================================================================

class PolyMatrix:
    """多项式矩阵，所有元素共享同一变量集合"""

    __slots__ = ("rows", "cols", "vars", "entries")

    def __init__(self, entries: Sequence[Sequence[object]], variables: Optional[Sequence[str]] = None):
        rows = len(entries)
        if rows == 0 or len(entries[0]) == 0:
            raise PolyMatError("矩阵维度必须为正")
        cols = len(entries[0])
        if any(len(row) != cols for row in entries):
            raise PolyMatError("矩阵各行长度不一致")
        declared = set(variables or ())
        for row in entries:
            for item in row:
                if isinstance(item, Polynomial):
                    declared.update(item.vars)
        union = canonical_vars(declared or ("x",))
        grid = []
        for row in entries:
            line = []
            for item in row:
                poly = item if isinstance(item, Polynomial) else Polynomial.constant(item, union)
                line.append(poly.with_vars(union))
            grid.append(tuple(line))
        self.rows = rows
        self.cols = cols
        self.vars = union
        self.entries: Tuple[Tuple[Polynomial, ...], ...] = tuple(grid)

    # ---- 构造 ----

    @classmethod
    def zeros(cls, rows: int, cols: int, variables: Sequence[str] = ("x",)) -> "PolyMatrix":
        zero = Polynomial(canonical_vars(variables))
        return cls([[zero] * cols for _ in range(rows)], variables)

    @classmethod
    def identity(cls, n: int, variables: Sequence[str] = ("x",)) -> "PolyMatrix":
        return cls.from_numeric(np.eye(n, dtype=int), variables)

    @classmethod
    def from_numeric(cls, array, variables: Sequence[str] = ("x",)) -> "PolyMatrix":
        array = np.atleast_2d(np.asarray(array, dtype=object))
        return cls([[exact(v) if not isinstance(v, (LinExpr, Polynomial)) else v for v in row]
                    for row in array], variables)

    @staticmethod
    def bmat(blocks: Sequence[Sequence["PolyMatrix"]]) -> "PolyMatrix":
        """按块拼接"""
        rows = []
        for block_row in blocks:
            height = block_row[0].rows
            if any(b.rows != height for b in block_row):
                raise PolyMatError("块行高度不一致")
            for i in range(height):
                line = []
                for block in block_row:
                    line.extend(block.entries[i])
                rows.append(line)
        return PolyMatrix(rows)

    # ---- 访问 ----

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, index) -> Polynomial:
        i, j = index
        return self.entries[i][j]

    def block(self, r0: int, r1: int, c0: int, c1: int) -> "PolyMatrix":
        return PolyMatrix([row[c0:c1] for row in self.entries[r0:r1]], self.vars)

    def iter_entries(self):
        for i, row in enumerate(self.entries):
            for j, poly in enumerate(row):
                yield i, j, poly

    @property
    def has_decisions(self) -> bool:
        return any(p.has_decisions for _, _, p in self.iter_entries())

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for _, _, p in self.iter_entries())

    @property
    def degree(self) -> int:
        return max(p.degree for _, _, p in self.iter_entries())

    def degree_in(self, var: str) -> int:
        return max(p.degree_in(var) for _, _, p in self.iter_entries())

    def decision_ids(self) -> set:
        ids = set()
        for _, _, poly in self.iter_entries():
            ids.update(poly.decision_ids())
        return ids

    # ---- 运算 ----

    def _map(self, func) -> "PolyMatrix":
        return PolyMatrix([[func(p) for p in row] for row in self.entries])

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix([list(col) for col in zip(*self.entries)], self.vars)

    @property
    def T(self) -> "PolyMatrix":
        return self.transpose()

    def _check_same_shape(self, other: "PolyMatrix"):
        if self.shape != other.shape:
            raise PolyMatError(f"维度不匹配: {self.shape} vs {other.shape}")

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        self._check_same_shape(other)
        return PolyMatrix([[a + b for a, b in zip(r1, r2)]
                           for r1, r2 in zip(self.entries, other.entries)])

    def __sub__(self, other: "PolyMatrix") -> "PolyMatrix":
        self._check_same_shape(other)
        return PolyMatrix([[a - b for a, b in zip(r1, r2)]
                           for r1, r2 in zip(self.entries, other.entries)])

    def __neg__(self) -> "PolyMatrix":
        return self._map(lambda p: -p)

    def __mul__(self, factor) -> "PolyMatrix":
        """数乘或逐元素乘以一个标量多项式"""
        if isinstance(factor, PolyMatrix):
            raise PolyMatError("矩阵乘法请使用 @")
        return self._map(lambda p: p * factor)

    __rmul__ = __mul__

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        return matmul(self, other)

    def differentiate(self, var: str) -> "PolyMatrix":
        return differentiate(self, var)

    def integrate(self, var: str, a: Number, b: Number) -> "PolyMatrix":
        return integrate_definite(self, var, a, b)

    def substitute(self, var: str, value: Number) -> "PolyMatrix":
        self._require(var)
        return self._map(lambda p: p.substitute(var, value))

    def rename(self, mapping: Mapping[str, str]) -> "PolyMatrix":
        for var in mapping:
            self._require(var)
        return self._map(lambda p: p.rename(mapping))

    def swap(self, u: str, v: str) -> "PolyMatrix":
        return swap_vars(self, u, v)

    def with_vars(self, variables: Sequence[str]) -> "PolyMatrix":
        return PolyMatrix(self.entries, set(variables) | set(self.vars))

    def instantiate(self, values) -> "PolyMatrix":
        return self._map(lambda p: p.instantiate(values))

    def evaluate_grid(self, **arrays) -> np.ndarray:
        """数值矩阵的向量化求值，返回形状 (..., rows, cols)"""
        values = [[p.evaluate_grid(**arrays) for p in row] for row in self.entries]
        stacked = np.array(values, dtype=float)
        return np.moveaxis(stacked, (0, 1), (-2, -1))

    def to_numpy(self) -> np.ndarray:
        """常数矩阵转 numpy 数组"""
        if self.degree > 0 or self.has_decisions:
            raise PolyMatError("只有不含决策变量的常数矩阵才能转为数组")
        origin = (0,) * len(self.vars)
        return np.array([[float(p.coeffs[origin].constant) if origin in p.coeffs else 0.0
                          for p in row] for row in self.entries], dtype=float)

    def _require(self, var: str):
        if var not in self.vars:
            raise PolyMatError(f"变量 {var} 未在 {self.vars} 中声明")

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyMatrix) or self.shape != other.shape:
            return False
        return all(a == b for r1, r2 in zip(self.entries, other.entries) for a, b in zip(r1, r2))

    def __hash__(self):
        return hash((self.shape, self.entries))

    def __repr__(self) -> str:
        return f"PolyMatrix({self.rows}x{self.cols}, vars={self.vars})"


# =============================================================================
# 单项式向量
# =============================================================================

@dataclass(frozen=True)
class MonomialVector:
    """次数不超过 d 的单项式向量（分级字典序）"""

    vars: Tuple[str, ...]
    degree: int
    entries: Tuple[Exponent, ...]

    def __len__(self) -> int:
        return len(self.entries)


def mono_basis(d: int, variables: Sequence[str]) -> MonomialVector:
    """
    单项式基 Z_d

    一元：1, x, ..., x^d（长度 d+1）；二元：总次数 ≤ d 的全部单项式，
    长度 (d+1)(d+2)/2
    """
    variables = tuple(variables)
    if not 1 <= len(variables) <= 2:
        raise PolyMatError(f"单项式基只支持一个或两个变量，收到 {variables}")
    if len(set(variables)) != len(variables):
        raise PolyMatError(f"变量重复: {variables}")
    canonical_vars(variables)
    if d < 0:
        raise PolyMatError(f"次数必须非负: {d}")
    exps = [e for e in itertools.product(range(d + 1), repeat=len(variables)) if sum(e) <= d]
    exps.sort(key=grlex_key)
    return MonomialVector(variables, d, tuple(exps))


def kron_identity(Z: MonomialVector, n: int, args: Optional[Sequence[str]] = None) -> PolyMatrix:
    """
    Z ⊗ I_n，形状 (len(Z)·n) × n，第 α·n+i 行第 i 列为第 α 个单项式

    args 把基的变量按位置替换成实参，例如 Z_d(z, x) 用 args=("z", "x")
    """
    if n < 1:
        raise PolyMatError(f"n 必须为正: {n}")
    args = tuple(args) if args is not None else Z.vars
    if len(args) != len(Z.vars):
        raise PolyMatError(f"实参个数 {len(args)} 与基变量 {Z.vars} 不符")
    target = canonical_vars(args)
    zero = Polynomial(target)
    rows = []
    for exp in Z.entries:
        powers: Dict[str, int] = {}
        for name, e in zip(args, exp):
            powers[name] = powers.get(name, 0) + e
        mono = Polynomial.monomial(powers, target)
        for i in range(n):
            rows.append([mono if j == i else zero for j in range(n)])
    return PolyMatrix(rows, target)


# =============================================================================
# 矩阵运算（模块级函数）
# =============================================================================

def matmul(lhs: PolyMatrix, rhs: PolyMatrix) -> PolyMatrix:
    """精确矩阵乘积；两个操作数都含决策变量时拒绝（保持约束线性）"""
    if lhs.cols != rhs.rows:
        raise PolyMatError(f"内维不匹配: {lhs.shape} @ {rhs.shape}")
    if lhs.has_decisions and rhs.has_decisions:
        raise BilinearityError("两个含决策变量的矩阵相乘")
    union = canonical_vars(set(lhs.vars) | set(rhs.vars))
    width = len(union)
    left = [[p.with_vars(union) for p in row] for row in lhs.entries]
    right = [[p.with_vars(union) for p in row] for row in rhs.entries]
    out = []
    for i in range(lhs.rows):
        line = []
        for j in range(rhs.cols):
            acc = _Accumulator()
            for k in range(lhs.cols):
                a = left[i][k]
                if a.is_zero:
                    continue
                b = right[k][j]
                if b.is_zero:
                    continue
                for e1, c1 in a.coeffs.items():
                    for e2, c2 in b.coeffs.items():
                        exp = tuple(e1[t] + e2[t] for t in range(width))
                        if c1.terms:
                            acc.add(exp, c1, c2.constant)
                        else:
                            acc.add(exp, c2, c1.constant)
            line.append(acc.freeze(union))
        out.append(line)
    return PolyMatrix(out, union)


def differentiate(p: PolyMatrix, var: str) -> PolyMatrix:
    """逐元素偏导"""
    p._require(var)
    return p._map(lambda q: q.differentiate(var))


def integrate_definite(p: PolyMatrix, var: str, a: Number, b: Number) -> PolyMatrix:
    """逐元素定积分 ∫_a^b · d(var)"""
    p._require(var)
    return p._map(lambda q: q.integrate(var, a, b))


def swap_vars(p: PolyMatrix, u: str, v: str) -> PolyMatrix:
    """交换变量 u、v 的指数"""
    p._require(u)
    p._require(v)
    return p._map(lambda q: q.swap(u, v))


@dataclass(frozen=True)
class LinearConstraint:
    """线性等式约束 expr == 0"""

    expr: LinExpr
    label: str = ""

    @property
    def is_trivially_infeasible(self) -> bool:
        return self.expr.is_constant and self.expr.constant != 0


def equate(lhs: PolyMatrix, rhs: PolyMatrix, label: str = "") -> List[LinearConstraint]:
    """
    lhs ≡ rhs 按 (元素, 单项式) 展开为线性等式；差为零多项式时返回空列表
    """
    if lhs.shape != rhs.shape:
        raise PolyMatError(f"维度不匹配: {lhs.shape} vs {rhs.shape}")
    diff = lhs - rhs
    constraints = []
    for i, j, poly in diff.iter_entries():
        for exp in poly.monomials():
            mono = "*".join(f"{v}^{e}" for v, e in zip(poly.vars, exp) if e) or "1"
            constraints.append(LinearConstraint(poly.coeffs[exp], f"{label}[{i},{j}]{{{mono}}}"))
    return constraints


# =============================================================================
# 决策变量池
# =============================================================================

@dataclass
class SymmetricBlock:
    """对称决策矩阵块，ids[i][j] == ids[j][i]"""

    name: str
    side: int
    ids: List[List[int]]
    psd: bool = True

    def as_matrix(self, variables: Sequence[str] = ("x",)) -> PolyMatrix:
        return PolyMatrix([[LinExpr.var(v) for v in row] for row in self.ids], variables)

    def sub(self, r0: int, r1: int, c0: int, c1: int, variables: Sequence[str] = ("x",)) -> PolyMatrix:
        return PolyMatrix([[LinExpr.var(v) for v in row[c0:c1]] for row in self.ids[r0:r1]], variables)

    def upper_ids(self) -> List[int]:
        """按行优先的上三角顺序列出变量编号"""
        return [self.ids[i][j] for i in range(self.side) for j in range(i, self.side)]

    def fill(self, values: np.ndarray, matrix) -> None:
        """把对称数值矩阵写入按变量编号索引的取值数组"""
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (self.side, self.side):
            raise PolyMatError(f"块 {self.name} 需要 {self.side}×{self.side} 矩阵，收到 {matrix.shape}")
        for i in range(self.side):
            for j in range(i, self.side):
                values[self.ids[i][j]] = matrix[i, j]


@dataclass
class FreeGroup:
    """一组自由（无锥约束）决策变量"""

    name: str
    ids: List[int]

    def fill(self, values: np.ndarray, vector) -> None:
        vector = np.asarray(vector, dtype=float).ravel()
        if vector.size != len(self.ids):
            raise PolyMatError(f"自由变量组 {self.name} 需要 {len(self.ids)} 个取值，收到 {vector.size}")
        values[self.ids] = vector


@dataclass
class DecisionPool:
    """
    决策变量登记处

    变量按构造顺序编号；对称块只为上三角分配编号，下三角复用
    """

    blocks: List[SymmetricBlock] = field(default_factory=list)
    free_groups: List[FreeGroup] = field(default_factory=list)
    labels: Dict[int, str] = field(default_factory=dict)
    _next: int = 0

    def _new(self, label: str) -> int:
        vid = self._next
        self._next += 1
        self.labels[vid] = label
        return vid

    @property
    def size(self) -> int:
        return self._next

    def symmetric(self, name: str, side: int, psd: bool = True) -> SymmetricBlock:
        if side < 1:
            raise PolyMatError(f"块边长必须为正: {side}")
        ids = [[-1] * side for _ in range(side)]
        for i in range(side):
            for j in range(i, side):
                ids[i][j] = ids[j][i] = self._new(f"{name}[{i},{j}]")
        block = SymmetricBlock(name, side, ids, psd)
        self.blocks.append(block)
        return block

    def free(self, name: str, count: int) -> FreeGroup:
        group = FreeGroup(name, [self._new(f"{name}[{k}]") for k in range(count)])
        self.free_groups.append(group)
        return group


def free_polynomial(pool: DecisionPool, name: str, degree: int, variables: Sequence[str]) -> Polynomial:
    """每个单项式（总次数 ≤ degree）配一个自由决策变量的多项式"""
    variables = canonical_vars(variables)
    basis = mono_basis(degree, variables)
    group = pool.free(name, len(basis))
    return Polynomial(variables, {exp: LinExpr.var(vid) for exp, vid in zip(basis.entries, group.ids)})


def free_polymatrix(pool: DecisionPool, name: str, n: int, degree: int,
                    variables: Sequence[str]) -> PolyMatrix:
    """n×n 自由多项式矩阵，每个元素独立"""
    return PolyMatrix([[free_polynomial(pool, f"{name}[{i},{j}]", degree, variables)
                        for j in range(n)] for i in range(n)], variables)


def linear_system(constraints: Sequence[LinearConstraint], size: int):
    """
    线性约束组转为稀疏矩阵形式 A v = rhs（按决策变量编号排列列）

    Returns:
        Tuple[scipy.sparse.csr_matrix, np.ndarray]
    """
    rows, cols, data = [], [], []
    rhs = np.zeros(len(constraints), dtype=float)
    for r, constraint in enumerate(constraints):
        expr = constraint.expr
        rhs[r] = -float(expr.constant)
        for vid, coeff in expr.terms.items():
            if not 0 <= vid < size:
                raise PolyMatError(f"约束 {constraint.label} 引用了未登记的变量 {vid}")
            rows.append(r)
            cols.append(vid)
            data.append(float(coeff))
    matrix = sparse.csr_matrix(
        (np.asarray(data, dtype=float), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(len(constraints), size),
    )
    return matrix, rhs
