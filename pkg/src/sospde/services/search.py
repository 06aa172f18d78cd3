"""
稳定性判定与参数裕度搜索

check_stability：给定系统与泛函次数，组装、求解并校验；
margin_bisection：对单参数族二分，求最大可证明参数 λ*（unknown 按不可证明处理）。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from ..core.config import settings
from ..core.exceptions import ArgumentError
from ..core.polymat import Number
from ..schemas.certificate import MarginReport, ProbeRecord, SolveStatus, StabilityVerdict
from .derivative import AssembledProblem, assemble
from .model import PDESystem
from .sdp import Certificate, SDPProblem, SolveOutcome, canonicalize, sdp_solver_service

logger = logging.getLogger(__name__)

Checker = Callable[[float], StabilityVerdict]

_VERDICTS = {
    SolveStatus.FEASIBLE: StabilityVerdict.CERTIFIED,
    SolveStatus.INFEASIBLE: StabilityVerdict.NOT_CERTIFIED,
    SolveStatus.UNKNOWN: StabilityVerdict.UNKNOWN,
}


@dataclass(eq=False)
class StabilityResult:
    """一次稳定性判定的完整结果"""
    verdict: StabilityVerdict
    outcome: SolveOutcome
    assembled: AssembledProblem
    problem: SDPProblem

    @property
    def certificate(self) -> Optional[Certificate]:
        return self.outcome.certificate if self.verdict == StabilityVerdict.CERTIFIED else None


def check_stability(system: PDESystem, degree: int, eps1: Optional[Number] = None,
                    eps2: Optional[Number] = None, solver: Optional[str] = None) -> StabilityResult:
    """
    判定系统在次数 degree 下是否可证明稳定

    只有证书通过校验才返回 certified；求解器判定不可行为 not_certified；其余为 unknown
    """
    assembled = assemble(system, degree, eps1, eps2)
    problem = canonicalize(assembled)
    outcome = sdp_solver_service.solve(problem, solver)
    verdict = _VERDICTS[outcome.status]
    if verdict == StabilityVerdict.CERTIFIED and (outcome.certificate is None
                                                  or outcome.certificate.report is None
                                                  or not outcome.certificate.report.passed):
        verdict = StabilityVerdict.UNKNOWN
    logger.info(
        f"稳定性判定: 模型={system.name or '(未命名)'}, d={degree}, 结果={verdict.value}"
        + (f" ({outcome.reason})" if outcome.reason else "")
    )
    return StabilityResult(verdict=verdict, outcome=outcome, assembled=assembled, problem=problem)


def family_checker(family: Callable[[float], PDESystem], degree: int, eps1: Optional[Number] = None,
                   eps2: Optional[Number] = None, solver: Optional[str] = None) -> Checker:
    """参数族 -> 单参数判定函数"""
    def checker(value: float) -> StabilityVerdict:
        return check_stability(family(value), degree, eps1, eps2, solver).verdict

    return checker


def margin_bisection(family: Optional[Callable[[float], PDESystem]], degree: int, lo: float, hi: float,
                     tol: Optional[float] = None, eps1: Optional[Number] = None,
                     eps2: Optional[Number] = None, solver: Optional[str] = None,
                     workers: int = 1, checker: Optional[Checker] = None) -> MarginReport:
    """
    二分搜索最大可证明参数

    返回的 λ* 在 λ* 处可证明、在不超过 λ* + tol 的某点不可证明；lo 不可证明时不做二分。
    workers > 1 时每一步并发探测中点及其两个可能的后继中点，但只沿顺序路径记录探测，
    因此 λ* 与探测日志都与顺序执行一致。

    Args:
        family: λ ↦ PDESystem；提供 checker 时可为 None
        checker: 自定义判定函数（测试中注入）
    """
    tol = settings.BISECTION_TOL if tol is None else tol
    if not hi > lo:
        raise ArgumentError(f"需要 hi > lo，收到 lo={lo}, hi={hi}")
    if not tol > 0:
        raise ArgumentError(f"容差必须为正: {tol}")
    if checker is None:
        if family is None:
            raise ArgumentError("需要提供参数族或判定函数")
        checker = family_checker(family, degree, eps1, eps2, solver)

    cache: Dict[float, StabilityVerdict] = {}
    probes: List[ProbeRecord] = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def prefetch(values: List[float]):
        pending = [v for v in values if v not in cache]
        if pool is None or len(pending) < 2:
            return
        for value, verdict in zip(pending, pool.map(checker, pending)):
            cache[value] = verdict

    def probe(value: float) -> bool:
        if value not in cache:
            cache[value] = checker(value)
        verdict = cache[value]
        probes.append(ProbeRecord(index=len(probes), value=value, verdict=verdict))
        logger.info(f"探测 #{len(probes) - 1}: λ={value:.6g}, 结果={verdict.value}")
        return verdict == StabilityVerdict.CERTIFIED

    def report(value: Optional[float], message: str) -> MarginReport:
        return MarginReport(degree=degree, lo=lo, hi=hi, tol=tol, value=value, probes=probes, message=message)

    try:
        prefetch([lo, hi])
        if not probe(lo):
            logger.warning(f"下界 λ={lo} 不可证明，不进行二分")
            return report(None, f"lower bound {lo} is not certifiable")
        if probe(hi):
            logger.warning(f"上界 λ={hi} 仍可证明，最大可证明参数可能更大")
            return report(hi, f"upper bound {hi} is certifiable; margin may be larger")

        good, bad = lo, hi
        while bad - good > tol:
            mid = 0.5 * (good + bad)
            prefetch([mid, 0.5 * (good + mid), 0.5 * (mid + bad)])
            if probe(mid):
                good = mid
            else:
                bad = mid
        logger.info(f"裕度搜索完成: d={degree}, λ*={good:.6g} (不可证明点 {bad:.6g})")
        return report(good, "")
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
