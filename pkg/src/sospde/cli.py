#!/usr/bin/env python3
"""
sospde CLI入口
稳定性证明、裕度搜索、SDPA 导出、证书校验与有限差分对照
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, Optional

import numpy as np

logger = logging.getLogger(__name__)

# 退出码
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CERTIFIED = 2
EXIT_UNKNOWN = 3


def _coefficient(text: str):
    """命令行参数值：整数、小数或原样字符串（如 "1/2"）"""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_sets(items) -> Dict[str, object]:
    params = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise ValueError(f"参数格式应为 NAME=VALUE，收到 '{item}'")
        params[name.strip()] = _coefficient(value.strip())
    return params


def _add_model_args(parser: argparse.ArgumentParser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--model", type=Path, help="模型文档（JSON）路径")
    source.add_argument("--preset", type=str, help="内置模型名称")
    parser.add_argument("--set", action="append", metavar="NAME=VALUE", default=[],
                        help="设置模型参数，可重复（如 --set lambda=5）")


def _add_eps_args(parser: argparse.ArgumentParser):
    parser.add_argument("--eps", type=float, default=None, help="正定性参数 ε₁（默认: 1e-3）")
    parser.add_argument("--eps2", type=float, default=None, help="负定性参数 ε₂（默认: -1e-3）")


def _document(args):
    from sospde.services.model import load_document, preset_document

    params = _parse_sets(args.set)
    if args.model is not None:
        doc = load_document(args.model.read_text(encoding="utf-8"))
        return doc.with_params(**params) if params else doc
    return preset_document(args.preset, params)


def _system(args):
    from sospde.services.model import build_system

    return build_system(_document(args))


def _family(args, param: str, placeholder: float):
    """参数族：预置模型的参数必须先给占位值才能构造文档"""
    from sospde.services.model import parameter_family, preset_document

    if args.model is None:
        params = _parse_sets(args.set)
        params.setdefault(param, placeholder)
        doc = preset_document(args.preset, params)
    else:
        doc = _document(args)
    return parameter_family(doc, param)


# =============================================================================
# 子命令
# =============================================================================

def cmd_check(args) -> int:
    from sospde.schemas.certificate import StabilityVerdict
    from sospde.services.sdp import save_certificate
    from sospde.services.search import check_stability

    system = _system(args)
    result = check_stability(system, args.degree, args.eps, args.eps2, args.solver)
    print(f"模型: {system.name or args.model}  次数: {args.degree}  结果: {result.verdict.value}")
    if result.outcome.reason:
        print(f"说明: {result.outcome.reason}")
    cert = result.outcome.certificate
    if cert is not None and cert.report is not None:
        print(f"最小特征值: {cert.report.min_eig:.3e}  最大残差: {cert.report.max_residual:.3e}")
    if args.save_cert and result.certificate is not None:
        ok, path, error = save_certificate(result.certificate, result.problem, args.save_cert)
        if not ok:
            print(f"错误: 证书保存失败: {error}", file=sys.stderr)
            return EXIT_ERROR
        print(f"证书已保存: {path}")
    return {
        StabilityVerdict.CERTIFIED: EXIT_OK,
        StabilityVerdict.NOT_CERTIFIED: EXIT_NOT_CERTIFIED,
        StabilityVerdict.UNKNOWN: EXIT_UNKNOWN,
    }[result.verdict]


def cmd_margin(args) -> int:
    from sospde.services.search import margin_bisection

    family = _family(args, args.param, args.lo)
    report = margin_bisection(family, args.degree, args.lo, args.hi, args.tol, args.eps, args.eps2,
                              args.solver, workers=args.workers)
    for probe in report.probes:
        print(f"probe {probe.index}: {args.param}={probe.value:.17g} {probe.verdict.value}")
    if args.log:
        args.log.parent.mkdir(parents=True, exist_ok=True)
        args.log.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    if report.value is None:
        print(f"下界 {args.param}={args.lo} 不可证明: {report.message}")
        return EXIT_NOT_CERTIFIED
    print(f"最大可证明 {args.param} ≈ {report.value:.6g}（次数 {args.degree}，容差 {report.tol}）")
    if report.message:
        print(f"说明: {report.message}")
    return EXIT_OK


def cmd_export_sdp(args) -> int:
    from sospde.services.derivative import assemble
    from sospde.services.sdp import canonicalize
    from sospde.core.config import ensure_directories, settings
    from sospde.services.sdpa import export_sdpa

    system = _system(args)
    problem = canonicalize(assemble(system, args.degree, args.eps, args.eps2))
    out = args.out
    if out is None:
        ensure_directories()
        out = settings.DATA_DIR / f"{system.name or 'model'}_d{args.degree}.dat-s"
    ok, path, error = export_sdpa(problem, out)
    if not ok:
        print(f"错误: 导出失败: {error}", file=sys.stderr)
        return EXIT_ERROR
    print(f"已导出: {path}（{problem.num_equalities} 条约束，{problem.num_vars} 个变量）")
    return EXIT_OK


def cmd_verify_cert(args) -> int:
    from sospde.services.derivative import assemble
    from sospde.services.sdp import canonicalize, load_certificate, verify
    from sospde.services.sdpa import import_solution

    system = _system(args)
    if args.cert is not None:
        cert, meta = load_certificate(args.cert)
        eps1 = args.eps if args.eps is not None else meta.eps1
        eps2 = args.eps2 if args.eps2 is not None else meta.eps2
        problem = canonicalize(assemble(system, args.degree, eps1, eps2))
    else:
        problem = canonicalize(assemble(system, args.degree, args.eps, args.eps2))
        cert = import_solution(args.solution.read_text(encoding="utf-8"), problem)
    report = verify(cert, problem, args.tol_psd, args.tol_eq)
    print(f"校验{'通过' if report.passed else '未通过'}: 最小特征值 {report.min_eig:.3e}，"
          f"最大残差 {report.max_residual:.3e}")
    for offender in report.worst_rows:
        print(f"  约束 #{offender.row} {offender.label}: 残差 {offender.residual:.3e}")
    return EXIT_OK if report.passed else EXIT_NOT_CERTIFIED


def _initial_condition(kind: str, seed: int, n: int, a: float, b: float):
    def sine(x):
        profile = np.sin(np.pi * (x - a) / (b - a))
        return np.repeat(profile[:, None], n, axis=1)

    def random(x):
        rng = np.random.default_rng(seed)
        return rng.standard_normal((x.size, n)) * np.sin(np.pi * (x - a) / (b - a))[:, None]

    return {"sine": sine, "random": random}[kind]


def cmd_simulate(args) -> int:
    from sospde.services.simulator import simulate

    system = _system(args)
    u0 = _initial_condition(args.init, args.seed, system.n, float(system.a), float(system.b))
    trajectory = simulate(system, u0, args.T, args.dt, args.grid, args.every)
    rows = np.column_stack([trajectory.times, trajectory.norms])
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(args.out, rows, delimiter=",", header="t,l2_norm", comments="", fmt="%.17g")
    else:
        print("t,l2_norm")
        for t, norm in rows:
            print(f"{t:.17g},{norm:.17g}")
    if args.snapshots:
        grid = trajectory.grid
        blocks = [np.column_stack([np.full(grid.size, t), grid, snap])
                  for t, snap in zip(trajectory.times, trajectory.snapshots)]
        header = "t,x," + ",".join(f"u{i}" for i in range(system.n))
        args.snapshots.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(args.snapshots, np.vstack(blocks), delimiter=",", header=header, comments="", fmt="%.17g")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from sospde.services.simulator import numeric_threshold

    family = _family(args, args.param, args.lo)
    value = numeric_threshold(family, args.lo, args.hi, args.tol, args.grid)
    print(f"数值阈值 {args.param}_num ≈ {value:.6g}（网格 {args.grid or '默认'}）")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    from sospde.services.fixtures import diff_fixtures, regenerate_fixtures

    if args.check:
        changed = diff_fixtures(args.dir)
        for relative in changed:
            print(f"不一致或缺失: {relative}")
        return EXIT_NOT_CERTIFIED if changed else EXIT_OK
    ok, paths, error = regenerate_fixtures(args.dir)
    for path in paths:
        print(f"已写入: {path}")
    if not ok:
        print(f"错误: {error}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_presets(args) -> int:
    from sospde.services.model import PRESETS, dump_document, preset_document

    if not args.name:
        for name, (_, required, optional) in PRESETS.items():
            print(f"{name:12s} 必需参数: {', '.join(required) or '-'}  可选参数: {', '.join(optional) or '-'}")
        return EXIT_OK
    sys.stdout.write(dump_document(preset_document(args.name, _parse_sets(args.set))))
    return EXIT_OK


# =============================================================================
# 入口
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sospde",
        description="sospde - 耦合一维线性 PDE 的平方和（SOS）稳定性证明工具",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  sospde check --preset example1 --set lambda=5 --degree 1      # 判定稳定性
  sospde margin --preset example1 --param lambda --lo 1 --hi 12 --degree 2
  sospde export-sdp --model fixtures/models/example1.json --degree 1 --out ex1.dat-s
  sospde verify-cert --cert cert.json --model fixtures/models/example1.json --degree 1
  sospde oracle --preset example2 --param lambda --lo 5 --hi 12   # 有限差分数值阈值
  sospde simulate --preset example1 --set lambda=12 --T 0.1 --dt 1e-3

退出码: 0 已证明/完成，2 未证明，3 未知，1 输入或运行错误
        """
    )
    parser.add_argument("--debug", action="store_true", help="启用调试日志")
    parser.add_argument("--solver", type=str, default=None, help="cvxpy 求解器名称（默认: CLARABEL）")
    parser.add_argument("-v", "--version", action="version", version="%(prog)s 1.0.0")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="判定给定次数下是否可证明稳定")
    _add_model_args(p)
    p.add_argument("--degree", "-d", type=int, required=True, help="泛函次数 d")
    _add_eps_args(p)
    p.add_argument("--save-cert", type=Path, default=None, help="证明成功时把证书保存到该文件")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("margin", help="二分搜索最大可证明参数")
    _add_model_args(p)
    p.add_argument("--param", required=True, help="搜索的参数名")
    p.add_argument("--lo", type=float, required=True, help="搜索下界（应可证明）")
    p.add_argument("--hi", type=float, required=True, help="搜索上界")
    p.add_argument("--degree", "-d", type=int, required=True, help="泛函次数 d")
    p.add_argument("--tol", type=float, default=None, help="二分容差（默认: 0.05）")
    p.add_argument("--workers", type=int, default=1, help="并发探测线程数（结果与顺序执行一致）")
    p.add_argument("--log", type=Path, default=None, help="探测日志（JSON）输出路径")
    _add_eps_args(p)
    p.set_defaults(func=cmd_margin)

    p = sub.add_parser("export-sdp", help="导出 SDPA 稀疏格式文件")
    _add_model_args(p)
    p.add_argument("--degree", "-d", type=int, required=True, help="泛函次数 d")
    p.add_argument("--out", type=Path, default=None, help="输出 .dat-s 文件（默认: 数据目录下 <模型名>_d<次数>.dat-s）")
    _add_eps_args(p)
    p.set_defaults(func=cmd_export_sdp)

    p = sub.add_parser("verify-cert", help="重新组装问题并校验证书或外部解")
    _add_model_args(p)
    given = p.add_mutually_exclusive_group(required=True)
    given.add_argument("--cert", type=Path, help="JSON 证书文件")
    given.add_argument("--solution", type=Path, help="SDPA 输出文件或纯数值向量文件")
    p.add_argument("--degree", "-d", type=int, required=True, help="泛函次数 d")
    p.add_argument("--tol-psd", type=float, default=None, help="半正定容差（默认: 1e-7）")
    p.add_argument("--tol-eq", type=float, default=None, help="等式容差（默认: 1e-7）")
    _add_eps_args(p)
    p.set_defaults(func=cmd_verify_cert)

    p = sub.add_parser("simulate", help="有限差分时间推进，输出 (t, ‖u‖) CSV")
    _add_model_args(p)
    p.add_argument("--T", type=float, required=True, help="终止时刻")
    p.add_argument("--dt", type=float, required=True, help="时间步长")
    p.add_argument("--grid", type=int, default=None, help="网格点数（默认: 201）")
    p.add_argument("--init", choices=["sine", "random"], default="sine", help="初值类型")
    p.add_argument("--seed", type=int, default=0, help="随机初值种子")
    p.add_argument("--every", type=int, default=1, help="快照间隔步数")
    p.add_argument("--out", type=Path, default=None, help="范数时间序列 CSV（默认输出到终端）")
    p.add_argument("--snapshots", type=Path, default=None, help="全场快照 CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="按谱横坐标二分数值稳定阈值")
    _add_model_args(p)
    p.add_argument("--param", required=True, help="参数名")
    p.add_argument("--lo", type=float, required=True, help="稳定端")
    p.add_argument("--hi", type=float, required=True, help="不稳定端")
    p.add_argument("--tol", type=float, default=1e-3, help="二分容差（默认: 1e-3）")
    p.add_argument("--grid", type=int, default=None, help="网格点数（默认: 201）")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("fixtures", help="重新生成（或检查）夹具文件")
    p.add_argument("--dir", type=Path, default=None, help="夹具目录（默认: 仓库 fixtures/）")
    p.add_argument("--check", action="store_true", help="只比较，不写入")
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("presets", help="列出内置模型或输出其模型文档")
    p.add_argument("name", nargs="?", help="内置模型名称")
    p.add_argument("--set", action="append", metavar="NAME=VALUE", default=[], help="模型参数")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: Optional[list] = None) -> int:
    """CLI主入口"""
    parser = build_parser()
    args = parser.parse_args(argv)

    # 设置调试模式
    from sospde.core.config import settings
    if args.debug:
        os.environ["SOSPDE_DEBUG"] = "true"
        settings.DEBUG = True
    if args.solver:
        os.environ["SOSPDE_SOLVER"] = args.solver.upper()
        settings.SOLVER = args.solver.upper()

    logging.basicConfig(
        level=logging.DEBUG if settings.DEBUG else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    logger.debug(f"{settings.APP_NAME} v{settings.APP_VERSION}, 求解器 {settings.SOLVER}")

    from sospde.core.exceptions import SospdeError
    try:
        return args.func(args)
    except (SospdeError, ValueError, OSError) as e:
        print(f"错误: {e}", file=sys.stderr)
        return EXIT_ERROR


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
