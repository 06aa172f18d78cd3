"""
夹具与数学对象对照表测试
"""
import pytest

from sospde.core.exceptions import ModelError
from sospde.services.fixtures import (
    MATH_OBJECTS,
    diff_fixtures,
    regenerate_fixtures,
    render_fixtures,
    resolve,
)
from sospde.services.model import load_model


def test_committed_fixtures_up_to_date(fixtures_dir):
    assert diff_fixtures(fixtures_dir) == []


def test_render_is_deterministic():
    assert render_fixtures() == render_fixtures()


def test_regenerate_into_empty_directory(tmp_path):
    ok, written, error = regenerate_fixtures(tmp_path)
    assert ok and error is None
    assert len(written) == len(render_fixtures())
    assert (tmp_path / "golden" / "trivial.dat-s").exists()
    assert diff_fixtures(tmp_path) == []


def test_diff_reports_changed_file(tmp_path):
    regenerate_fixtures(tmp_path)
    (tmp_path / "models" / "example1.json").write_text("{}", encoding="utf-8")
    assert diff_fixtures(tmp_path) == ["models/example1.json"]


def test_diff_reports_missing_file(tmp_path):
    regenerate_fixtures(tmp_path)
    (tmp_path / "golden" / "example1_d1.dat-s").unlink()
    assert diff_fixtures(tmp_path) == ["golden/example1_d1.dat-s"]


def test_committed_goldens_present(fixtures_dir):
    for relative in render_fixtures():
        assert (fixtures_dir / relative).is_file(), relative


def test_regenerate_failure_reported(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    ok, _, error = regenerate_fixtures(blocker)
    assert not ok
    assert error


@pytest.mark.parametrize("key", sorted(MATH_OBJECTS))
def test_math_object_resolves(key):
    assert resolve(MATH_OBJECTS[key]) is not None


def test_math_map_document_lists_every_object(docs_dir):
    text = (docs_dir / "math_map.md").read_text(encoding="utf-8")
    for key, target in MATH_OBJECTS.items():
        assert key in text
        assert target in text


def test_fixture_models_load(fixtures_dir):
    paths = sorted((fixtures_dir / "models").glob("*.json"))
    assert paths
    for path in paths:
        text = path.read_text(encoding="utf-8")
        if path.stem == "acoustic_raw":
            with pytest.raises(ModelError):
                load_model(text)
        else:
            assert load_model(text).n >= 1
