"""
有限差分数值对照测试
"""
import json

import numpy as np
import pytest

from sospde.core.exceptions import ArgumentError, SimulationError, UnsupportedBoundaryError
from sospde.services.functional import lyapunov_trace
from sospde.services.model import load_model, preset
from sospde.services.search import check_stability
from sospde.services.simulator import discretize, l2_norms, numeric_threshold, simulate, spectral_abscissa


def scalar_model(bc="dirichlet", c=0):
    """单状态 u_t = u_xx + c·u"""
    return load_model(json.dumps({
        "name": "heat", "n": 1, "a": 0, "b": 1,
        "A": [[[1]]], "B": [[[0]]], "C": [[[c]]], "bc": bc,
    }))


class TestDiscretize:
    def test_dirichlet_uses_elimination(self):
        op = discretize(scalar_model(), 41)
        assert op.mode == "elimination"
        assert op.matrix.shape == (39, 39)
        assert op.eliminated == 2

    def test_heat_abscissa(self):
        assert spectral_abscissa(discretize(scalar_model(), 201)) == pytest.approx(-np.pi ** 2, rel=1e-3)

    def test_neumann_keeps_constant_mode(self):
        assert spectral_abscissa(discretize(scalar_model("neumann"), 101)) == pytest.approx(0.0, abs=1e-6)

    def test_second_order_convergence(self):
        coarse = abs(spectral_abscissa(discretize(scalar_model(), 51)) + np.pi ** 2)
        fine = abs(spectral_abscissa(discretize(scalar_model(), 101)) + np.pi ** 2)
        assert 3.5 < coarse / fine < 4.5

    def test_underdetermined_boundary_uses_projection(self):
        op = discretize(scalar_model([[1, 0, 0, 0]]), 41)
        assert op.mode == "projection"
        assert op.matrix.shape == (40, 40)
        assert np.isfinite(spectral_abscissa(op))

    def test_overdetermined_boundary_rejected(self):
        bc = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]]
        with pytest.raises(UnsupportedBoundaryError):
            discretize(scalar_model(bc), 41)

    def test_grid_too_small(self):
        with pytest.raises(ArgumentError):
            discretize(scalar_model(), 10)

    def test_grid_roundtrip(self):
        op = discretize(preset("example1", {"lambda": 1}), 41)
        values = np.column_stack([np.sin(np.pi * op.grid), np.sin(2 * np.pi * op.grid)])
        np.testing.assert_allclose(op.to_grid(op.from_grid(values)), values, atol=1e-12)


class TestNumericThreshold:
    @pytest.mark.parametrize("name, lo, hi, expected", [
        ("example1", 1.0, 15.0, np.pi ** 2),
        ("example2", 1.0, 15.0, np.pi ** 2 - 1),
        ("example3", 0.5, 3.0, np.pi ** 2 / 8),
    ])
    def test_known_thresholds(self, name, lo, hi, expected):
        value = numeric_threshold(lambda v: preset(name, {"lambda": v}), lo, hi, grid_size=201)
        assert value == pytest.approx(expected, abs=5e-3)

    def test_bracket_checked(self):
        with pytest.raises(ArgumentError):
            numeric_threshold(lambda v: preset("example1", {"lambda": v}), 1.0, 2.0, grid_size=41)


class TestSimulate:
    def test_heat_decay_rate(self):
        trajectory = simulate(scalar_model(), lambda x: np.sin(np.pi * x), T=0.1, dt=1e-3, grid_size=201)
        ratio = trajectory.norms[-1] / trajectory.norms[0]
        assert ratio == pytest.approx(np.exp(-np.pi ** 2 * 0.1), rel=1e-2)
        assert trajectory.times[-1] == pytest.approx(0.1)

    def test_zero_initial_condition(self):
        op_grid = np.linspace(0, 1, 41)
        trajectory = simulate(preset("example2", {"lambda": 4}), np.zeros((op_grid.size, 2)), T=0.05, dt=0.01,
                              grid_size=41)
        np.testing.assert_array_equal(trajectory.norms, np.zeros(6))

    def test_unstable_grows(self):
        trajectory = simulate(preset("example1", {"lambda": 12}),
                              lambda x: np.column_stack([np.sin(np.pi * x)] * 2), T=0.5, dt=0.01, grid_size=81)
        assert trajectory.norms[-1] > 2 * trajectory.norms[0]

    def test_snapshot_stride(self):
        trajectory = simulate(scalar_model(), lambda x: np.sin(np.pi * x), T=0.1, dt=0.01, grid_size=41, every=3)
        np.testing.assert_allclose(trajectory.times, [0.0, 0.03, 0.06, 0.09, 0.1])
        assert trajectory.snapshots.shape == (5, 41, 1)

    def test_invalid_step(self):
        with pytest.raises(ArgumentError):
            simulate(scalar_model(), np.zeros(41), T=1.0, dt=0.0, grid_size=41)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            simulate(scalar_model(), np.zeros(40), T=0.1, dt=0.01, grid_size=41)

    def test_l2_norms_trapezoid(self):
        grid = np.linspace(0, 1, 3)
        snapshots = np.ones((1, 3, 1))
        np.testing.assert_allclose(l2_norms(grid, snapshots), [1.0])

    def test_simulation_error_is_sospde_error(self):
        from sospde.core.exceptions import SospdeError

        assert issubclass(SimulationError, SospdeError)


@pytest.mark.slow
def test_lyapunov_functional_non_increasing(requires_solver):
    system = preset("example1", {"lambda": 1})
    result = check_stability(system, 1)
    assert result.certificate is not None
    values = result.problem.scatter(result.certificate.values)
    M, N = result.assembled.positive.numeric(values)
    trajectory = simulate(system, lambda x: np.column_stack([np.sin(np.pi * x), x * (1 - x)]),
                          T=0.2, dt=1e-3, grid_size=201, every=10)
    trace = lyapunov_trace(M, N, trajectory.grid, trajectory.snapshots)
    assert np.all(trace > 0)
    assert np.all(np.diff(trace) <= 1e-6 * trace[0])
