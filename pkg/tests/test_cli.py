import json

import pytest

from qdouble.cli import ExperimentConfig, main, parse_lattice
from qdouble.errors import ConfigError


def run(tmp_path, cfg, *extra):
    path = tmp_path / "cfg.json"
    out = tmp_path / "out.json"
    path.write_text(json.dumps(cfg))
    code = main(["run", str(path), "--output", str(out), *extra])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_gsd_reports(tmp_path):
    for name, expected in (("S3", 8), ("D4", 22)):
        code, rep = run(tmp_path, {"group": name, "experiments": ["gsd"]})
        assert code == 0
        vals = rep["experiments"][0]["values"]
        assert vals["count_torus_gsd"] == expected == vals["brute_force_gsd"]
        assert rep["schema_version"] == 1


def test_trivial_group_extremal(tmp_path):
    code, rep = run(tmp_path, {"group": "Z1", "experiments": ["extremal", "symmetry-audit", "anomaly"]})
    assert code == 0
    assert rep["experiments"][0]["values"]["n_extremal"] == 1
    assert all(e["ok"] for e in rep["experiments"])


def test_reports_are_reproducible(tmp_path):
    cfg = {"group": "Z2", "lattice": "2x2", "experiments": ["smatrix", "fusion", "swssb", {"name": "decohere", "channel": "x"}]}
    _, a = run(tmp_path, cfg)
    _, b = run(tmp_path, cfg)
    a.pop("timestamp")
    b.pop("timestamp")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_config_errors(tmp_path, capsys):
    code, _ = run(tmp_path, {"group": "S3", "experiments": ["nope"]})
    assert code == 1
    code, _ = run(tmp_path, {"group": "D2", "experiments": ["gsd"]})
    assert code == 1
    assert main(["run", str(tmp_path / "missing.json")]) == 1
    with pytest.raises(ConfigError):
        parse_lattice("3by3")


def test_capacity_error_exit_code(tmp_path):
    code, rep = run(tmp_path, {"group": "Z2", "lattice": [12, 12], "experiments": ["extremal"]})
    assert code == 2
    assert rep["experiments"][0]["error"]["type"] == "capacity"


def test_config_wins_over_flags(tmp_path, caplog):
    code, rep = run(tmp_path, {"group": "Z3", "experiments": ["gsd"]}, "--group", "Z2")
    assert code == 0
    assert rep["experiments"][0]["values"]["count_torus_gsd"] == 9
    assert "overrides" in caplog.text


def test_quick_commands(tmp_path):
    out = tmp_path / "a.json"
    assert main(["smatrix", "--group", "Z2", "--output", str(out)]) == 0
    assert json.loads(out.read_text())["experiments"][0]["values"]["labels"][0] == "(0|1)"
    assert main(["audit", "--group", "S3", "--channel", "z", "--output", str(out)]) == 0
    verdicts = json.loads(out.read_text())["experiments"][0]["values"]["verdicts"]
    assert {v["verdict"] for v in verdicts} == {"strong", "weak"}


def test_experiment_config_round_trip():
    cfg = ExperimentConfig.from_json({"group": "S3", "lattice": [3, 2], "experiments": [{"name": "cmi-profile", "widths": [1]}]})
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again.lattice == (3, 2)
    assert again.experiments[0].params == {"widths": [1]}
