"""
稳定性判定与裕度二分测试
判定函数用桩函数代替时不需要求解器；结果表格复现标记为 slow
"""
import threading

import numpy as np
import pytest

from sospde.core.exceptions import ArgumentError, SospdeError
from sospde.schemas.certificate import StabilityVerdict
from sospde.services.model import preset
from sospde.services.search import check_stability, margin_bisection
from sospde.services.simulator import numeric_threshold

CERTIFIED = StabilityVerdict.CERTIFIED
NOT_CERTIFIED = StabilityVerdict.NOT_CERTIFIED
UNKNOWN = StabilityVerdict.UNKNOWN


def threshold_checker(limit, calls=None, lock=None):
    def checker(value):
        if calls is not None:
            with lock:
                calls.append(value)
        return CERTIFIED if value <= limit else NOT_CERTIFIED

    return checker


class TestMarginBisection:
    def test_sequential_probe_log(self):
        report = margin_bisection(None, 1, 1.0, 5.0, tol=0.05, checker=threshold_checker(3.3))
        assert [p.value for p in report.probes] == [1.0, 5.0, 3.0, 4.0, 3.5, 3.25, 3.375, 3.3125, 3.28125]
        assert [p.index for p in report.probes] == list(range(9))
        assert report.value == 3.28125
        assert report.message == ""

    def test_margin_bracket(self):
        for limit in (1.7, 2.01, 4.99):
            report = margin_bisection(None, 2, 1.0, 5.0, tol=0.01, checker=threshold_checker(limit))
            assert limit - 0.01 <= report.value <= limit

    def test_lower_bound_not_certifiable(self):
        report = margin_bisection(None, 1, 1.0, 5.0, checker=threshold_checker(0.5))
        assert report.value is None
        assert report.message.startswith("lower bound")
        assert len(report.probes) == 1

    def test_upper_bound_certifiable(self):
        report = margin_bisection(None, 1, 1.0, 5.0, checker=threshold_checker(10))
        assert report.value == 5.0
        assert "upper bound" in report.message

    def test_unknown_counts_as_not_certified(self):
        def checker(value):
            return CERTIFIED if value <= 2 else UNKNOWN

        report = margin_bisection(None, 1, 1.0, 3.0, tol=0.1, checker=checker)
        assert 1.9 <= report.value <= 2.0

    def test_no_value_probed_twice(self):
        calls, lock = [], threading.Lock()
        margin_bisection(None, 1, 0.0, 10.0, tol=0.05, checker=threshold_checker(6.1, calls, lock))
        assert len(calls) == len(set(calls))

    @pytest.mark.parametrize("workers", [2, 4])
    def test_concurrent_matches_sequential(self, workers):
        sequential = margin_bisection(None, 1, 0.0, 10.0, tol=0.01, checker=threshold_checker(7.77))
        concurrent = margin_bisection(None, 1, 0.0, 10.0, tol=0.01, workers=workers,
                                      checker=threshold_checker(7.77))
        assert concurrent.value == sequential.value
        assert concurrent.probes == sequential.probes

    def test_repeated_runs_identical(self):
        first = margin_bisection(None, 1, 0.0, 10.0, checker=threshold_checker(np.pi))
        second = margin_bisection(None, 1, 0.0, 10.0, checker=threshold_checker(np.pi))
        assert first.model_dump() == second.model_dump()

    def test_argument_validation(self):
        checker = threshold_checker(1)
        with pytest.raises(ArgumentError):
            margin_bisection(None, 1, 2.0, 1.0, checker=checker)
        with pytest.raises(ArgumentError):
            margin_bisection(None, 1, 1.0, 2.0, tol=0, checker=checker)
        with pytest.raises(ArgumentError):
            margin_bisection(None, 1, 1.0, 2.0)
        assert issubclass(ArgumentError, SospdeError)


def example_family(name):
    return lambda value: preset(name, {"lambda": value})


class TestSmallInstances:
    """小规模端到端判定（d ≤ 1）"""

    def test_heat_pair_certified(self, requires_solver):
        result = check_stability(preset("example1", {"lambda": 1}), 1)
        assert result.verdict == CERTIFIED
        assert result.certificate.report.passed
        assert result.certificate.report.min_eig >= -1e-7

    def test_strongly_unstable_not_certified(self, requires_solver):
        result = check_stability(preset("example1", {"lambda": 100}), 0)
        assert result.verdict == NOT_CERTIFIED
        assert result.certificate is None


@pytest.mark.slow
class TestCertification:
    """端到端：组装、求解、校验"""

    def test_example1_certified_below_margin(self, requires_solver):
        result = check_stability(preset("example1", {"lambda": 1}), 1)
        assert result.verdict == CERTIFIED
        assert result.certificate.report.passed
        assert result.certificate.report.tol_eq == pytest.approx(1e-7)

    def test_example1_not_certified_when_unstable(self, requires_solver):
        result = check_stability(preset("example1", {"lambda": 12}), 1)
        assert result.verdict != CERTIFIED

    def test_example4_certified(self, requires_solver):
        result = check_stability(preset("example4"), 4)
        assert result.verdict == CERTIFIED

    @pytest.mark.parametrize("name, degree, expected", [
        ("example1", 1, 5.0),
        ("example1", 2, 5.8),
        ("example1", 4, 8.1),
        ("example2", 2, 5.8),
        ("example2", 4, 7.2),
    ])
    def test_margin_table(self, requires_solver, name, degree, expected):
        report = margin_bisection(example_family(name), degree, 0.5, 12.0, tol=0.05)
        assert report.value == pytest.approx(expected, abs=0.2)
        oracle = numeric_threshold(example_family(name), 0.5, 12.0)
        assert report.value <= oracle

    def test_example3_sound_against_oracle(self, requires_solver):
        oracle = numeric_threshold(example_family("example3"), 0.1, 3.0)
        assert oracle == pytest.approx(np.pi ** 2 / 8, rel=1e-2)
        report = margin_bisection(example_family("example3"), 2, 0.1, 3.0, tol=0.05)
        assert report.value is None or report.value <= oracle

    def test_margin_runs_identical(self, requires_solver):
        first = margin_bisection(example_family("example1"), 1, 1.0, 8.0, tol=0.2)
        second = margin_bisection(example_family("example1"), 1, 1.0, 8.0, tol=0.2)
        assert first.probes == second.probes
        assert first.value == second.value
