"""
Σ₊ / Σ₋ 参数化与数值求值测试
"""
from fractions import Fraction

import numpy as np
import pytest

from sospde.core.exceptions import PolyMatError
from sospde.core.polymat import DecisionPool, PolyMatrix, Polynomial
from sospde.services.functional import (
    QuadratureRule,
    block_side,
    build_sigma_minus,
    build_sigma_plus,
    evaluate_functional,
    g_polynomial,
    l2_norm_sq,
    lyapunov_trace,
)

INTERVAL = (0, 1)


def random_psd(rng, side):
    G = rng.standard_normal((side, side))
    return G @ G.T / side


def random_instance(template, rng, scale=1.0):
    """按随机半正定 P、Q 给模板赋值"""
    size = max(max(max(row) for row in block.ids) for block in template.psd_constraints) + 1
    values = np.zeros(size)
    for block in template.psd_constraints:
        block.fill(values, scale * random_psd(rng, block.side))
    return template.numeric(values)


def random_samples(rng, rule, width):
    """节点上的随机函数值：光滑部分加噪声"""
    x = rule.nodes[:, None]
    freqs = rng.uniform(0.5, 4.0, size=width)
    smooth = np.sin(np.pi * freqs * x + rng.uniform(0, np.pi, size=width))
    return smooth + 0.3 * rng.standard_normal((rule.nodes.size, width))


class TestBasics:
    def test_block_side(self):
        assert block_side(1, 1) == 5
        assert block_side(2, 2) == 18
        assert block_side(6, 1) == 30

    def test_multiplier(self):
        g = g_polynomial(0, 1)
        assert g.evaluate({"x": Fraction(1, 2)}).constant == Fraction(1, 4)
        assert g.evaluate({"x": 0}).is_zero
        assert g.evaluate({"x": 1}).is_zero

    def test_template_shapes(self):
        template = build_sigma_plus(2, 1, Fraction(1, 1000), INTERVAL)
        assert template.M.shape == (2, 2)
        assert template.N.shape == (2, 2)
        assert template.M.vars == ("x",)
        assert template.N.vars == ("x", "y")
        assert [b.side for b in template.psd_constraints] == [10, 10]

    def test_without_multiplier(self):
        pool = DecisionPool()
        template = build_sigma_plus(1, 2, 0.01, INTERVAL, pool, multiplier=False)
        assert template.Q is None
        assert len(pool.blocks) == 1

    def test_eps_sign_checked(self):
        with pytest.raises(PolyMatError):
            build_sigma_plus(1, 1, 0, INTERVAL)
        with pytest.raises(PolyMatError):
            build_sigma_minus(1, 1, 0.1, INTERVAL)

    def test_zero_decisions_give_eps_identity(self):
        template = build_sigma_plus(2, 1, Fraction(1, 10), INTERVAL)
        M, N = template.numeric(np.zeros(200))
        np.testing.assert_allclose(M.to_numpy(), 0.1 * np.eye(2))
        assert N.is_zero

    def test_eps_rows_limits_identity(self):
        template = build_sigma_plus(3, 0, Fraction(1, 10), INTERVAL, eps_rows=1)
        M, _ = template.numeric(np.zeros(200))
        np.testing.assert_allclose(M.to_numpy(), np.diag([0.1, 0.0, 0.0]))
        minus = build_sigma_minus(3, 0, Fraction(-1, 10), INTERVAL, eps_rows=2)
        M, _ = minus.numeric(np.zeros(200))
        np.testing.assert_allclose(M.to_numpy(), np.diag([-0.1, -0.1, 0.0]))

    def test_eps_rows_range_checked(self):
        with pytest.raises(PolyMatError):
            build_sigma_plus(2, 1, 0.1, INTERVAL, eps_rows=3)
        with pytest.raises(PolyMatError):
            build_sigma_plus(2, 1, 0.1, INTERVAL, eps_rows=0)

    @pytest.mark.parametrize("n, d", [(1, 1), (2, 1), (1, 2)])
    def test_kernel_symmetry(self, n, d):
        template = build_sigma_plus(n, d, 0.1, INTERVAL)
        assert (template.N.T - template.N.swap("x", "y")).is_zero


class TestQuadrature:
    def test_gauss_legendre_exact_for_polynomials(self):
        rule = QuadratureRule.gauss_legendre(0, 2, 8)
        assert rule.integrate(rule.nodes ** 5) == pytest.approx(2 ** 6 / 6)

    def test_trapezoid(self):
        grid = np.linspace(0, 1, 11)
        rule = QuadratureRule.trapezoid(grid)
        assert rule.weights.sum() == pytest.approx(1.0)
        assert rule.integrate(grid) == pytest.approx(0.5)

    def test_trapezoid_rejects_unsorted(self):
        with pytest.raises(PolyMatError):
            QuadratureRule.trapezoid([0.0, 0.5, 0.2])

    def test_l2_norm(self):
        rule = QuadratureRule.gauss_legendre(0, 1)
        value = l2_norm_sq(lambda x: np.sin(np.pi * x), rule, 1)
        assert value == pytest.approx(0.5)

    def test_sample_shape_checked(self):
        rule = QuadratureRule.gauss_legendre(0, 1, 10)
        with pytest.raises(PolyMatError):
            l2_norm_sq(np.zeros((9, 1)), rule, 1)


class TestEvaluateFunctional:
    def test_constant_kernels(self):
        M = PolyMatrix.from_numeric([[2]])
        N = PolyMatrix([[Polynomial(("x", "y"), {(0, 0): 3})]])
        rule = QuadratureRule.gauss_legendre(0, 1)
        # 2∫1 + 3(∫1)² = 5
        assert evaluate_functional(M, N, np.ones(rule.nodes.size), rule) == pytest.approx(5.0)

    def test_separable_kernel(self):
        M = PolyMatrix.zeros(1, 1)
        N = PolyMatrix([[Polynomial(("x", "y"), {(1, 1): 1})]])
        # ∫∫ xy·w(x)w(y) with w = 1 on [0, 1] = 1/4
        value = evaluate_functional(M, N, lambda x: np.ones_like(x), interval=(0, 1))
        assert value == pytest.approx(0.25)

    def test_requires_rule_or_interval(self):
        M = PolyMatrix.zeros(1, 1)
        with pytest.raises(PolyMatError):
            evaluate_functional(M, M.with_vars(("x", "y")), np.ones(3))


class TestPositivity:
    """V(w) ≥ ε‖w‖² 对任意半正定 P、Q 成立"""

    @pytest.mark.parametrize("n, d", [(1, 1), (1, 3), (2, 1), (2, 2)])
    def test_sigma_plus_lower_bound(self, rng, n, d):
        eps = 1e-3
        template = build_sigma_plus(n, d, eps, INTERVAL)
        rule = QuadratureRule.gauss_legendre(*INTERVAL)
        for _ in range(10):
            M, N = random_instance(template, rng)
            for _ in range(5):
                w = random_samples(rng, rule, n)
                value = evaluate_functional(M, N, w, rule)
                assert value >= eps * l2_norm_sq(w, rule, n) - 1e-8

    @pytest.mark.slow
    @pytest.mark.parametrize("n, d", [(1, 3), (2, 3)])
    def test_sigma_plus_lower_bound_full(self, rng, n, d):
        eps = 1e-3
        template = build_sigma_plus(n, d, eps, INTERVAL)
        rule = QuadratureRule.gauss_legendre(*INTERVAL)
        for _ in range(200):
            M, N = random_instance(template, rng)
            for _ in range(20):
                w = random_samples(rng, rule, n)
                assert evaluate_functional(M, N, w, rule) >= eps * l2_norm_sq(w, rule, n) - 1e-8

    def test_sigma_minus_upper_bound(self, rng):
        eps = -1e-3
        template = build_sigma_minus(2, 1, eps, (-1, 2))
        rule = QuadratureRule.gauss_legendre(-1, 2)
        for _ in range(10):
            M, N = random_instance(template, rng)
            w = random_samples(rng, rule, 2)
            assert evaluate_functional(M, N, w, rule) <= eps * l2_norm_sq(w, rule, 2) + 1e-8

    def test_without_multiplier_still_positive(self, rng):
        template = build_sigma_plus(1, 2, 0.01, INTERVAL, multiplier=False)
        rule = QuadratureRule.gauss_legendre(*INTERVAL)
        for _ in range(10):
            M, N = random_instance(template, rng)
            w = random_samples(rng, rule, 1)
            assert evaluate_functional(M, N, w, rule) >= 0.01 * l2_norm_sq(w, rule, 1) - 1e-8


def test_lyapunov_trace_matches_evaluate():
    M = PolyMatrix.from_numeric([[1]])
    N = PolyMatrix.zeros(1, 1, ("x", "y"))
    grid = np.linspace(0, 1, 21)
    snapshots = np.stack([np.ones((21, 1)), 2 * np.ones((21, 1))])
    values = lyapunov_trace(M, N, grid, snapshots)
    np.testing.assert_allclose(values, [1.0, 4.0])
