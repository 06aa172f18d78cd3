"""
PDE 模型解析与内置示例测试
"""
import json
from fractions import Fraction

import numpy as np
import pytest

from sospde.core.exceptions import ModelError
from sospde.schemas.model import BoundaryShorthand, ModelDocument
from sospde.services.model import (
    PRESETS,
    build_system,
    document_from_system,
    dump_document,
    expand_bc,
    load_document,
    load_model,
    parameter_family,
    parse_coefficient,
    preset,
    preset_document,
    save_model,
)


def heat_document(**overrides):
    data = {
        "name": "heat",
        "n": 1,
        "a": 0,
        "b": 1,
        "A": [[[1]]],
        "B": [[[0]]],
        "C": [[[0]]],
        "bc": "dirichlet",
    }
    data.update(overrides)
    return json.dumps(data)


class TestParseCoefficient:
    @pytest.mark.parametrize("value, expected", [
        (3, Fraction(3)),
        (0.1, Fraction(1, 10)),
        ("7/2", Fraction(7, 2)),
        ("-3/4", Fraction(-3, 4)),
    ])
    def test_exact_numbers(self, value, expected):
        assert parse_coefficient(value) == expected

    def test_parameter_expression(self):
        assert parse_coefficient("2*lambda + 1", {"lambda": Fraction(3)}) == Fraction(7)

    def test_undeclared_symbol(self):
        with pytest.raises(ModelError):
            parse_coefficient("2*c**2/r", {"c": Fraction(1)})

    def test_boolean_rejected(self):
        with pytest.raises(ModelError):
            parse_coefficient(True)


class TestBoundaryShorthands:
    def test_dirichlet(self):
        D = expand_bc("dirichlet", 1)
        assert D.shape == (4, 4)
        assert D[0, 0] == 1 and D[1, 1] == 1
        assert D[2, 2] == 0 and D[3, 3] == 0

    def test_neumann_blocks(self):
        D = expand_bc(BoundaryShorthand.NEUMANN, 2)
        expected = np.zeros((8, 8))
        expected[4:, 4:] = np.eye(4)
        np.testing.assert_array_equal(D.astype(float), expected)

    def test_mixed(self):
        D = expand_bc("mixed_na_db", 1).astype(float)
        # b 端取值与 a 端导数
        assert D[1, 1] == 1 and D[2, 2] == 1
        assert D.sum() == 2

    def test_periodic(self):
        D = expand_bc("periodic", 1).astype(float)
        np.testing.assert_array_equal(D[0], [1, -1, 0, 0])
        np.testing.assert_array_equal(D[1], [0, 0, 1, -1])

    def test_custom_matrix_padded(self):
        D = expand_bc([[1, 0, "1/2", 0]], 1)
        assert D.shape == (4, 4)
        assert D[0, 2] == Fraction(1, 2)
        assert all(v == 0 for v in D[1:].ravel())

    def test_unknown_shorthand(self):
        with pytest.raises(ModelError):
            expand_bc("robin", 1)

    def test_custom_wrong_width(self):
        with pytest.raises(ModelError):
            expand_bc([[1, 0, 0]], 1)


class TestLoadModel:
    def test_heat(self):
        system = load_model(heat_document())
        assert system.n == 1
        assert system.interval == (0, 1)
        assert system.gamma == 0
        assert system.A.to_numpy().tolist() == [[1.0]]

    def test_fixture_matches_preset(self, fixtures_dir):
        text = (fixtures_dir / "models" / "example1.json").read_text(encoding="utf-8")
        assert load_model(text) == preset("example1", {"lambda": 5})

    def test_fixture_text_equals_dump(self, fixtures_dir):
        for name, params in [("example2", {"lambda": 4}), ("example4", {})]:
            text = (fixtures_dir / "models" / f"{name}.json").read_text(encoding="utf-8")
            assert dump_document(preset_document(name, params)) == text

    def test_raw_acoustic_rejected(self, fixtures_dir):
        text = (fixtures_dir / "models" / "acoustic_raw.json").read_text(encoding="utf-8")
        with pytest.raises(ModelError, match="r"):
            load_model(text)

    def test_invalid_json(self):
        with pytest.raises(ModelError):
            load_model("{not json")

    def test_shape_validation(self):
        with pytest.raises(ModelError):
            load_model(heat_document(A=[[[1], [0]]]))

    def test_interval_order(self):
        with pytest.raises(ModelError):
            load_model(heat_document(a=1, b=0))

    def test_missing_parameter(self):
        with pytest.raises(ModelError):
            load_model(heat_document(C=[[["lambda"]]]))

    def test_parameters_substituted(self):
        system = load_model(heat_document(C=[[["2*k", "k"]]], params={"k": "1/3"}))
        assert system.C[0, 0].coeffs[(0,)].constant == Fraction(2, 3)
        assert system.C[0, 0].coeffs[(1,)].constant == Fraction(1, 3)
        assert system.gamma == 1

    def test_save_roundtrip(self):
        system = preset("example4")
        assert load_model(save_model(system)) == system

    def test_document_from_system(self):
        system = preset("example2", {"lambda": "9/2"})
        rebuilt = build_system(document_from_system(system))
        assert rebuilt == system

    def test_load_document_keeps_params(self):
        doc = load_document(heat_document(C=[[["lambda"]]], params={"lambda": 2}))
        assert isinstance(doc, ModelDocument)
        assert doc.with_params(**{"lambda": 3}).params == {"lambda": 3}


class TestPresets:
    def test_catalogue(self):
        assert {"example1", "example2", "example3", "example4", "schrodinger", "acoustic"} <= set(PRESETS)

    def test_example2_coupling(self):
        system = preset("example2", {"lambda": 4})
        np.testing.assert_array_equal(system.C.to_numpy(), [[4.0, 1.0], [1.0, 4.0]])

    def test_example3_boundary(self):
        system = preset("example3", {"lambda": 1})
        np.testing.assert_array_equal(system.D_array, expand_bc("mixed_na_db", 2).astype(float))

    def test_example4_degree(self):
        system = preset("example4")
        assert system.gamma == 2
        assert system.B[1, 0].coeffs[(2,)].constant == Fraction(-7, 2)

    def test_schrodinger(self):
        system = preset("schrodinger", {"hbar": 2, "mass": 4, "v0": 1, "v2": 3})
        assert system.A[0, 1] == system.A[1, 0] * -1
        assert system.A[1, 0].coeffs[(0,)].constant == Fraction(1, 2)
        assert system.C[0, 1].coeffs[(2,)].constant == Fraction(3, 2)
        assert system.gamma == 2

    def test_acoustic(self):
        system = preset("acoustic", {"c": 1, "f1": "1/2", "f2": "1/2", "r0": "1/10", "R": 1, "degree": 6})
        assert system.interval == (Fraction(1, 10), Fraction(1))
        assert system.B.degree == 6
        # 近似 2c²/r：在区间中点误差应很小
        midpoint = 0.55
        value = system.B[0, 1].evaluate_grid(x=np.array([midpoint]))[0]
        assert value == pytest.approx(2.0 / midpoint, rel=1e-2)
        assert system.D_array[0, 3] == -0.5

    def test_acoustic_requires_positive_radius(self):
        with pytest.raises(ModelError):
            preset("acoustic", {"c": 1, "f1": 1, "f2": 1, "r0": 0, "R": 1})

    def test_unknown_preset(self):
        with pytest.raises(ModelError):
            preset("example9")

    def test_missing_and_unknown_parameters(self):
        with pytest.raises(ModelError):
            preset("example1")
        with pytest.raises(ModelError):
            preset("example4", {"lambda": 1})

    def test_parameter_family(self):
        family = parameter_family(preset_document("example1", {"lambda": 0}), "lambda")
        assert family(2.5).C.to_numpy()[0, 0] == 2.5
        with pytest.raises(ModelError):
            parameter_family(preset_document("example4"), "lambda")
