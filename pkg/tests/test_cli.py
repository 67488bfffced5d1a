import json

import pytest
import yaml

from oran_offload.cli import load_config, main, parse_seeds
from oran_offload.errors import ConfigError
from oran_offload.scenario import default_scenario, seed_stream
from oran_offload.topology import build_topology
from conftest import small_scenario


@pytest.fixture
def config(tmp_path):
    sc = small_scenario()
    path = tmp_path / "small.yaml"
    d = sc.to_dict()
    d["seeds"] = [0]
    path.write_text(yaml.safe_dump(d))
    return path


def test_parse_seeds():
    assert parse_seeds("0,1,2") == [0, 1, 2]
    assert parse_seeds("0-2") == [0, 1, 2]
    assert parse_seeds("1, 4-5") == [1, 4, 5]
    for bad in ("", "a", "-1", "3,x"):
        with pytest.raises(ConfigError):
            parse_seeds(bad)


def test_emit_default_scenario(tmp_path, capsys):
    assert main(["scenario", "--emit-default"]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["n_devices"] == 65
    assert main(["scenario", "--emit-default", "--out", str(tmp_path / "d.yaml")]) == 0
    sc, run = load_config(tmp_path / "d.yaml")
    assert sc == default_scenario() and run == {}


def test_emit_cube(tmp_path):
    out = tmp_path / "cube.yaml"
    assert main(["topology", "--emit-cube", "--out", str(out)]) == 0
    g = build_topology(yaml.safe_load(out.read_text()))
    assert len(g.links) == 12
    assert all(6000 <= c <= 6500 for c in g.capacities.values())


def test_run_then_rerun_from_manifest(config, tmp_path, capsys):
    out = tmp_path / "r1"
    assert main(["run", "--experiment", "placement_delays", "--config", str(config), "--out", str(out),
                 "--workers", "1"]) == 0
    printed = capsys.readouterr().out.split()
    assert str(out / "placement.csv") in printed
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == [0]
    out2 = tmp_path / "r2"
    assert main(["run", "--config", str(out / "manifest.json"), "--experiment", "placement_delays",
                 "--seeds", "0", "--out", str(out2), "--workers", "1"]) == 0
    assert (out / "placement.csv").read_bytes() == (out2 / "placement.csv").read_bytes()


def test_config_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("n_devices: 3\nwarp: 9\n")
    assert main(["run", "--config", str(bad)]) == 1
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 1
    bad.write_text("n_devices: [unclosed\n")
    assert main(["run", "--config", str(bad)]) == 1
    assert main(["run", "--experiment", "fig99", "--seeds", "0"]) == 1
    assert main(["run", "--seeds", "x"]) == 1
    assert main(["scenario"]) == 1
    assert "config error" in capsys.readouterr().err


def test_runtime_errors_exit_2(config, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--experiment", "sp_vs_sr", "--config", str(config), "--out", str(blocker),
                 "--workers", "1"]) == 2
