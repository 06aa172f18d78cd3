"""
命令行入口测试
"""
import json

import numpy as np
import pytest

from sospde.cli import EXIT_ERROR, EXIT_NOT_CERTIFIED, EXIT_OK, _coefficient, _parse_sets, build_parser, main
from sospde.services.derivative import assemble
from sospde.services.model import preset
from sospde.services.sdp import canonicalize


class TestArguments:
    def test_coefficient_parsing(self):
        assert _coefficient("5") == 5
        assert _coefficient("0.25") == 0.25
        assert _coefficient("1/2") == "1/2"

    def test_parse_sets(self):
        assert _parse_sets(["lambda=5", " mass = 2.5 "]) == {"lambda": 5, "mass": 2.5}
        with pytest.raises(ValueError):
            _parse_sets(["lambda"])

    def test_model_source_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["check", "--degree", "1"])

    def test_model_sources_exclusive(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["check", "--degree", "1", "--preset", "example4", "--model", "x.json"])


class TestPresets:
    def test_list(self, capsys):
        assert main(["presets"]) == EXIT_OK
        out = capsys.readouterr().out
        for name in ("schrodinger", "acoustic", "example1", "example4"):
            assert name in out

    def test_dump_matches_fixture(self, capsys, fixtures_dir):
        assert main(["presets", "example1", "--set", "lambda=5"]) == EXIT_OK
        expected = (fixtures_dir / "models" / "example1.json").read_text(encoding="utf-8")
        assert capsys.readouterr().out == expected

    def test_unknown_preset(self, capsys):
        assert main(["presets", "no_such_model"]) == EXIT_ERROR
        assert "错误" in capsys.readouterr().err


class TestErrors:
    def test_missing_parameter(self, capsys):
        assert main(["check", "--preset", "example1", "--degree", "1"]) == EXIT_ERROR
        assert "lambda" in capsys.readouterr().err

    def test_missing_model_file(self, tmp_path):
        assert main(["check", "--model", str(tmp_path / "absent.json"), "--degree", "1"]) == EXIT_ERROR

    def test_raw_acoustic_rejected(self, fixtures_dir):
        path = fixtures_dir / "models" / "acoustic_raw.json"
        assert main(["export-sdp", "--model", str(path), "--degree", "0", "--out", "unused.dat-s"]) == EXIT_ERROR


def test_export_sdp(tmp_path, capsys):
    out = tmp_path / "example1.dat-s"
    code = main(["export-sdp", "--preset", "example1", "--set", "lambda=5", "--degree", "0", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text(encoding="ascii").splitlines()
    assert lines[0].startswith('"')
    problem = canonicalize(assemble(preset("example1", {"lambda": 5}), 0))
    assert int(lines[1]) == problem.num_equalities
    assert "已导出" in capsys.readouterr().out


def test_export_from_model_file_with_override(tmp_path, fixtures_dir):
    out = tmp_path / "ex1.dat-s"
    model = fixtures_dir / "models" / "example1.json"
    assert main(["export-sdp", "--model", str(model), "--set", "lambda=2", "--degree", "0",
                 "--out", str(out)]) == EXIT_OK
    assert out.exists()


def test_verify_cert_zero_vector(tmp_path, capsys):
    problem = canonicalize(assemble(preset("example1", {"lambda": 5}), 0))
    solution = tmp_path / "zeros.txt"
    solution.write_text("\n".join("0" for _ in range(problem.num_vars)) + "\n")
    code = main(["verify-cert", "--preset", "example1", "--set", "lambda=5", "--degree", "0",
                 "--solution", str(solution)])
    assert code == EXIT_NOT_CERTIFIED
    assert "未通过" in capsys.readouterr().out


def test_oracle(capsys):
    code = main(["oracle", "--preset", "example1", "--param", "lambda", "--lo", "1", "--hi", "15", "--grid", "41"])
    assert code == EXIT_OK
    assert "lambda_num" in capsys.readouterr().out


def test_simulate_csv(tmp_path):
    out = tmp_path / "norms.csv"
    code = main(["simulate", "--preset", "example1", "--set", "lambda=1", "--T", "0.01", "--dt", "0.001",
                 "--grid", "41", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "t,l2_norm"
    assert len(lines) == 12
    norms = np.array([float(line.split(",")[1]) for line in lines[1:]])
    assert np.all(np.diff(norms) < 0)


def test_simulate_snapshots(tmp_path):
    snapshots = tmp_path / "field.csv"
    code = main(["simulate", "--preset", "example1", "--set", "lambda=1", "--T", "0.002", "--dt", "0.001",
                 "--grid", "21", "--snapshots", str(snapshots), "--init", "random", "--seed", "3"])
    assert code == EXIT_OK
    lines = snapshots.read_text().splitlines()
    assert lines[0] == "t,x,u0,u1"
    assert len(lines) == 1 + 3 * 21


def test_fixtures_check(fixtures_dir, capsys):
    assert main(["fixtures", "--check", "--dir", str(fixtures_dir)]) == EXIT_OK
    assert capsys.readouterr().out == ""


@pytest.mark.slow
def test_check_and_saved_certificate(tmp_path, requires_solver, capsys):
    cert = tmp_path / "cert.json"
    code = main(["check", "--preset", "example1", "--set", "lambda=1", "--degree", "1", "--save-cert", str(cert)])
    assert code == EXIT_OK
    assert json.loads(cert.read_text())["metadata"]["degree"] == 1
    assert main(["verify-cert", "--preset", "example1", "--set", "lambda=1", "--degree", "1",
                 "--cert", str(cert)]) == EXIT_OK


@pytest.mark.slow
def test_margin_log(tmp_path, requires_solver):
    log = tmp_path / "probes.json"
    code = main(["margin", "--preset", "example1", "--param", "lambda", "--lo", "1", "--hi", "8", "--degree", "1",
                 "--tol", "0.5", "--log", str(log)])
    assert code == EXIT_OK
    report = json.loads(log.read_text())
    assert report["probes"][0]["value"] == 1.0
    assert report["value"] is not None


def test_export_sdp_default_destination(tmp_path, monkeypatch):
    from sospde.core.config import settings

    monkeypatch.setattr(settings, "DATA_DIR", tmp_path / "data")
    assert main(["export-sdp", "--preset", "example4", "--degree", "0"]) == EXIT_OK
    assert (tmp_path / "data" / "example4_d0.dat-s").exists()
