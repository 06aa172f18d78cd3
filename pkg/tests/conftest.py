"""
pytest 公共配置
慢速测试（较大 SDP 求解、结果表格复现）默认跳过，使用 --runslow 或 SOSPDE_RUN_SLOW=1 运行
"""
import os
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行标记为 slow 的测试")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow") or os.environ.get("SOSPDE_RUN_SLOW", "") in ("1", "true"):
        return
    skip_slow = pytest.mark.skip(reason="慢速测试，使用 --runslow 运行")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    """固定种子的随机数生成器"""
    return np.random.default_rng(20240917)


@pytest.fixture
def fixtures_dir() -> Path:
    return REPO_ROOT / "fixtures"


@pytest.fixture
def docs_dir() -> Path:
    return REPO_ROOT / "docs"


@pytest.fixture
def requires_solver():
    """没有可用的 SDP 求解器时跳过"""
    from sospde.services.sdp import sdp_solver_service

    if not sdp_solver_service.is_available():
        pytest.skip("没有可用的 cvxpy SDP 求解器")
    return sdp_solver_service
