import json
import math
from pathlib import Path

import pytest

from errors import StorageError
from models import SweepRow
from storage import GOLDEN_BOUND, GOLDEN_SWEEP, SWEEP_COLUMNS, ResultStorageService, format_number, json_value


GOLDEN_DIR = Path(__file__).resolve().parents[1] / "golden"


@pytest.fixture
def storage(tmp_path):
    return ResultStorageService(str(tmp_path))


def make_row(**overrides):
    values = dict(eta=0.4, nbar_b=0.15000000000000002, n_modes=2, mean_ns=0.7310585786300049,
                  var_ns=0.7310585786300049, x0=-0.0, y0=-1.12, cq_star=1.0 / 3.0, mse_lower=3.0)
    values.update(overrides)
    return SweepRow(**values)


@pytest.mark.parametrize(
    "value, text",
    [
        (1.0 / 3.0, "0.333333333333"),
        (-0.0, "0"),
        (math.inf, "inf"),
        (-math.inf, "-inf"),
        (2, "2"),
        (True, "true"),
        (1e-20, "1e-20"),
        ("dominance", "dominance"),
    ],
)
def test_format_number(value, text):
    assert format_number(value) == text


def test_json_value_rounds_nested_floats():
    payload = json_value({"a": [1.0 / 3.0, math.inf], "b": {"c": -0.0}, "d": True, "e": 3})
    assert payload == {"a": [0.333333333333, "inf"], "b": {"c": 0.0}, "d": True, "e": 3}


def test_render_json_is_stable(storage):
    text = storage.render_json({"cq_star": 16.0 / 13.0, "mse_lower": math.inf})
    assert text.endswith("\n")
    assert json.loads(text) == {"cq_star": 1.23076923077, "mse_lower": "inf"}
    assert storage.render_json({"cq_star": 16.0 / 13.0, "mse_lower": math.inf}) == text


def test_render_csv(storage):
    lines = storage.render_csv([make_row()]).splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert lines[1] == "0.4,0.15,2,0.73105857863,0.73105857863,0,-1.12,0.333333333333,3"


def test_render_table(storage):
    text = storage.render_table(["name", "passed"], [{"name": "lossless", "passed": True}])
    assert text == "name,passed\nlossless,true\n"


def test_write_text_to_file(storage, tmp_path):
    target = tmp_path / "nested" / "out.csv"
    assert storage.write_text("a,b\n", str(target)) == str(target)
    assert target.read_text() == "a,b\n"


def test_write_text_to_stdout(storage, capsys):
    assert storage.write_text("hello\n") is None
    assert capsys.readouterr().out == "hello\n"


def test_write_text_failure_is_a_storage_error(storage, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(StorageError):
        storage.write_text("x", str(blocker / "child.txt"))


def test_golden_regeneration_needs_confirmation(storage, tmp_path):
    with pytest.raises(StorageError):
        storage.save_golden(GOLDEN_BOUND, "{}\n")
    assert not (tmp_path / GOLDEN_BOUND).exists()

    storage.save_golden(GOLDEN_BOUND, "{}\n", confirmed=True)
    assert storage.load_golden_json(GOLDEN_BOUND) == {}


def test_missing_golden_file(storage):
    with pytest.raises(StorageError):
        storage.load_golden_text("absent.csv")


def test_invalid_golden_json(storage, tmp_path):
    (tmp_path / "broken.json").write_text("{")
    with pytest.raises(StorageError):
        storage.load_golden_json("broken.json")


def test_shipped_golden_sweep():
    rows = ResultStorageService(str(GOLDEN_DIR)).load_golden_csv(GOLDEN_SWEEP)
    assert len(rows) == 303
    assert list(rows[0]) == SWEEP_COLUMNS
