import json
import logging
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from oran_offload.errors import IoFailure
from oran_offload.experiments import run_experiment
from oran_offload.output import emit_outputs, fmt, line_chart, moving_average, write_csv
from conftest import small_scenario


@pytest.fixture(scope="module")
def results():
    sc = small_scenario()
    return sc, run_experiment("all", sc, [0, 1], workers=1)


def test_all_files_written(results, tmp_path):
    sc, res = results
    files = emit_outputs(res, tmp_path, sc, [0, 1], "all")
    names = {f.name for f in files}
    for stem in ("route_delay", "reward", "placement", "fronthaul"):
        assert f"{stem}.csv" in names and f"{stem}.svg" in names
    assert {"summary.csv", "manifest.json"} <= names
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["seeds"] == [0, 1] and m["experiment"] == "all"
    assert m["scenario"] == sc.to_dict()
    assert m["version"].startswith("0.1.0")


def test_svgs_are_valid_standalone_xml(results, tmp_path):
    sc, res = results
    emit_outputs(res, tmp_path, sc, [0, 1], "all")
    for svg in tmp_path.glob("*.svg"):
        root = ET.parse(svg).getroot()
        assert root.tag.endswith("svg")
        text = svg.read_text()
        assert "href" not in text and "<script" not in text


def test_csv_shapes(results, tmp_path):
    sc, res = results
    emit_outputs(res, tmp_path, sc, [0, 1], "all")
    reward = (tmp_path / "reward.csv").read_text().splitlines()
    assert reward[0] == "variant,seed,episode,total_reward,epsilon,td_loss_mean"
    assert len(reward) - 1 == 2 * 2 * sc.rl["episodes"]
    place = (tmp_path / "placement.csv").read_text().splitlines()
    assert len(place) - 1 == 4 * 2 * sc.eval_episodes


def test_rerun_is_byte_identical(results, tmp_path):
    sc, res = results
    emit_outputs(res, tmp_path / "a", sc, [0, 1], "all")
    again = run_experiment("all", sc, [0, 1], workers=1)
    emit_outputs(again, tmp_path / "b", sc, [0, 1], "all")
    for f in (tmp_path / "a").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_empty_results_write_manifest_only(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        files = emit_outputs([], tmp_path)
    assert [f.name for f in files] == ["manifest.json"]
    assert any("no results" in r.message for r in caplog.records)


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoFailure):
        emit_outputs([], blocker / "sub")
    with pytest.raises(IoFailure):
        write_csv(tmp_path / "missing" / "x.csv", ("a",), [(1,)])


def test_helpers():
    assert fmt(3) == "3" and fmt(np.int64(4)) == "4"
    assert fmt(float("nan")) == "nan" and fmt(0.1) == "0.1"
    np.testing.assert_allclose(moving_average([1, 2, 3, 4], 2), [1.5, 2.5, 3.5])
    svg = line_chart({"a & b": ([0, 1], [1, np.nan])}, "t<1>", "x", "y")
    ET.fromstring(svg)
