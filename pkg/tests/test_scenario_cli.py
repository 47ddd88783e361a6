import numpy as np
import pytest
import yaml

from emff.cli import csv_header, main, read_series
from emff.scenario import (
    BUNDLED, ScenarioError, bundled_path, dump_scenario, load_bundled, load_scenario,
    scenario_from_dict, scenario_to_dict,
)


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_round_trip(name):
    sc = load_bundled(name)
    again = scenario_from_dict(yaml.safe_load(dump_scenario(sc)))
    assert scenario_to_dict(again) == scenario_to_dict(sc)


def test_example1_values():
    sc = load_bundled("example1")
    assert sc.n == 3 and sc.params.mass == 15.0 and sc.env.kind == "deep_space"
    assert np.array_equal(sc.r0[1], [2.5, 7.5, 9.0])
    assert sc.controller["gamma"] == 1e40 and sc.controller["wz_pos"] == 1e6
    assert sc.params.coil_area == pytest.approx(0.25**2 * np.pi)


def _write(tmp_path, doc):
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


def test_missing_field_is_named(tmp_path, capsys):
    doc = yaml.safe_load(bundled_path("two_sat_deep").read_text())
    del doc["constraints"]["r_min_m"]
    path = _write(tmp_path, doc)
    with pytest.raises(ScenarioError) as exc:
        load_scenario(path)
    assert exc.value.field == "constraints.r_min_m"
    code = main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "constraints.r_min" in capsys.readouterr().err


@pytest.mark.parametrize("path,value,field", [
    (("satellites", "n"), 2.5, "satellites.n"),
    (("environment", "kind"), "mars", "environment.kind"),
    (("sim", "mode"), "fast", "sim.mode"),
    (("controller", "rho"), -1.0, "controller.rho"),
    (("initial", "r_i"), [[0, 0, 0]], "initial.r_i"),
    (("formation", "frame"), "body", "formation.frame"),
])
def test_bad_values_are_named(tmp_path, path, value, field):
    doc = yaml.safe_load(bundled_path("two_sat_deep").read_text())
    doc[path[0]][path[1]] = value
    with pytest.raises(ScenarioError) as exc:
        load_scenario(_write(tmp_path, doc))
    assert exc.value.field == field


def test_yaml_syntax_error_reports_line(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("satellites:\n  n: 2\n  mass_kg: [1,\n")
    with pytest.raises(ScenarioError) as exc:
        load_scenario(path)
    assert exc.value.field.startswith("line ")


def test_run_writes_schema_and_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["run", "--scenario", "example1", "--horizon", "2", "--out", str(out), "--seed", "5"]) == 0
        outs.append((out / "trajectory.csv").read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert lines[0].startswith("#") and "seed=5" in lines[0]
    assert lines[1].split(",") == csv_header(3)
    assert len(lines) == 2 + 21
    header = lines[1].split(",")
    assert header[:4] == ["t", "r1x", "r1y", "r1z"] and "lambda" in header and header[-1] == "p_3_2_z"
    report = (tmp_path / "run0" / "report.txt").read_text()
    assert "status ok" in report and "seed=5" in report


def test_full_mode_two_satellite_leo(tmp_path):
    out = tmp_path / "leo"
    assert main(["run", "--scenario", "example3", "--mode", "full", "--horizon", "5", "--out", str(out)]) == 0
    header, data = read_series(out / "trajectory.csv")
    assert data.shape == (51, len(header))


def test_plotdata(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["run", "--scenario", "example1", "--horizon", "3", "--out", str(out)]) == 0
    csv_path = str(out / "trajectory.csv")
    for quantity in ("h", "dist_1_2", "q_3"):
        target = tmp_path / f"{quantity}.txt"
        assert main(["plotdata", "--csv", csv_path, "--quantity", quantity, "--out", str(target)]) == 0
        data = np.loadtxt(target)
        assert data.shape[1] == 2 and np.all(np.diff(data[:, 0]) > 0) and np.all(np.isfinite(data))
        if quantity == "dist_1_2":
            assert data[:, 1].min() >= 1.0
        if quantity == "q_3":
            assert data[:, 1].max() <= 1e4
    capsys.readouterr()
    assert main(["plotdata", "--csv", csv_path, "--quantity", "nope"]) == 2
    err = capsys.readouterr().err
    assert "valid names" in err and "dist_1_2" in err


def test_verify_exit_codes(capsys):
    assert main(["verify", "care"]) == 0
    assert main(["verify", "allocation", "--cases", "400", "--seed", "1"]) == 0
    assert "allocation: PASS" in capsys.readouterr().out


def test_unknown_scenario_file(tmp_path):
    assert main(["run", "--scenario", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 2
