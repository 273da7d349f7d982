import copy
import json

import pytest

from conftest import CONFIGS
from holelab.cli import main
from holelab.harness import ConfigError, load_config, run
from holelab.harness.config import CRITERIA, parse_config
from holelab.harness.studies import COLUMNS, eventually_decreasing, strictly_decreasing


@pytest.fixture
def minimal():
    return {
        "name": "minimal",
        "dimension": 2,
        "C": 0.25,
        "families": [{"region": {"type": "box", "lo": [0, 0], "hi": [1, 1]}, "count": 1, "mu": 4.0,
                      "pattern": [[0.5, 0.5]]}],
        "eps": [0.25, 0.125],
        "geometry": {"eps": [0.25, 0.125],
                     "probe_regions": [{"name": "disk", "region": {"type": "ball", "center": [0, 0], "radius": 1}}]},
        "test_functions": [{"kind": "bump", "name": "b", "center": [0.5, 0.5], "radius": 0.3}],
        "criteria": ["lemma7_exactness"],
        "seed": 1,
    }


def write(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


# --- configuration ------------------------------------------------------------


def test_minimal_config_loads(minimal):
    cfg = parse_config(minimal)
    assert cfg.dim == 2 and cfg.eps == [0.25, 0.125]
    assert cfg.radius(0, 0.25) == pytest.approx(0.0183156388887342, rel=1e-12)


@pytest.mark.parametrize("name", ["lattice_3d", "tiles_2d", "planar_pde"])
def test_shipped_configs_load(name):
    assert load_config(CONFIGS / f"{name}.json").name == name


def test_cell_capacity_violation_named(minimal):
    minimal["C"] = 0.6
    with pytest.raises(ConfigError) as info:
        parse_config(minimal)
    assert any("cell capacity condition" in p for p in info.value.problems)


def test_increasing_eps_rejected(minimal):
    minimal["eps"] = [0.125, 0.25]
    with pytest.raises(ConfigError) as info:
        parse_config(minimal)
    assert any(p.startswith("eps:") and "decreasing" in p for p in info.value.problems)


def test_all_problems_reported_together(minimal):
    minimal["eps"] = [0.125, 0.25]
    minimal["criteria"] = ["no_such_criterion"]
    minimal["test_functions"][0]["radius"] = 0.9
    with pytest.raises(ConfigError) as info:
        parse_config(minimal)
    assert len(info.value.problems) >= 3


def test_infeasible_radius_rejected(minimal):
    minimal["families"][0]["mu"] = 200.0
    with pytest.raises(ConfigError) as info:
        parse_config(minimal)
    assert any("C*eps" in p for p in info.value.problems)


def test_overlapping_families_rejected(minimal):
    minimal["families"].append(copy.deepcopy(minimal["families"][0]))
    with pytest.raises(ConfigError) as info:
        parse_config(minimal)
    assert any("overlap" in p for p in info.value.problems)


def test_json_error_has_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "dimension": 2,\n  "C": ,\n}')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert "line 3, column 8" in info.value.problems[0]


def test_grid_spacing_must_divide_omega(minimal):
    minimal["pde"] = {"h": 0.3}
    with pytest.raises(ConfigError) as info:
        parse_config(minimal)
    assert any(p.startswith("pde:") for p in info.value.problems)


# --- verdict helpers ----------------------------------------------------------


def test_trend_helpers():
    assert strictly_decreasing([3, 2, 1])
    assert not strictly_decreasing([3, 3, 1])
    assert eventually_decreasing([1, 5, 4, 3])
    assert not eventually_decreasing([5, 4, 5])


# --- runs and reports ---------------------------------------------------------


def test_summary_lists_every_criterion(tmp_path, minimal):
    summary = run(parse_config(minimal), ["geometry"], tmp_path)
    assert sorted(summary["criteria"]) == sorted(CRITERIA)
    assert summary["criteria"]["lemma7_exactness"] == {
        "status": "pass", "asserted": True, "detail": {"cases": 4},
    }
    assert summary["criteria"]["pairing_limit"]["status"] == "not_run"
    assert summary["exit_code"] == 0


def test_csv_layout(tmp_path, minimal):
    run(parse_config(minimal), ["geometry"], tmp_path)
    lines = (tmp_path / "geometry.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# holelab geometry v1"
    assert lines[1].split(",") == list(COLUMNS["geometry"])
    assert len(lines) == 2 + 4


def test_reports_byte_identical(tmp_path):
    cfg = CONFIGS / "tiles_2d.json"
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["all", "--config", str(cfg), "--out", str(out), "--plots", "--quiet"]) == 0
    names = sorted(p.name for p in outs[0].iterdir())
    assert {"summary.json", "geometry.csv", "corrector.csv", "pairing.csv", "pde.csv"} <= set(names)
    assert any(n.endswith(".svg") for n in names)
    assert names == sorted(p.name for p in outs[1].iterdir())
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes(), n


# --- CLI exit codes -----------------------------------------------------------


def test_cli_check_config(capsys):
    assert main(["check-config", "--config", str(CONFIGS / "lattice_3d.json")]) == 0
    assert capsys.readouterr().out.strip()


def test_cli_config_error(tmp_path, minimal, capsys):
    minimal["C"] = 0.6
    assert main(["geometry", "--config", str(write(tmp_path, minimal)), "--out", str(tmp_path / "o")]) == 2
    assert "cell capacity condition" in capsys.readouterr().err


def test_cli_pass(tmp_path, minimal):
    assert main(["geometry", "--config", str(write(tmp_path, minimal)), "--out", str(tmp_path / "o"), "--quiet"]) == 0


def test_cli_asserted_failure(tmp_path, minimal):
    minimal["criteria"] = ["tile_approximation"]
    minimal["tolerances"] = {"tile_gap_rel": 1e-6}
    out = tmp_path / "o"
    assert main(["geometry", "--config", str(write(tmp_path, minimal)), "--out", str(out), "--quiet"]) == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["criteria"]["tile_approximation"]["status"] == "fail"


def test_cli_unasserted_failure_still_passes(tmp_path, minimal):
    minimal["tolerances"] = {"tile_gap_rel": 1e-6}
    assert main(["geometry", "--config", str(write(tmp_path, minimal)), "--out", str(tmp_path / "o"), "--quiet"]) == 0


def test_cli_asserted_skip_fails(tmp_path, minimal):
    minimal["criteria"] = ["indicator_weak_star"]  # no cube battery configured
    assert main(["geometry", "--config", str(write(tmp_path, minimal)), "--out", str(tmp_path / "o"), "--quiet"]) == 1


def test_cli_numerical_failure_keeps_partial_results(tmp_path, minimal):
    minimal["pde"] = {"h": 0.0625, "eps": [0.25], "rho_min": 1000}
    out = tmp_path / "o"
    code = main(["all", "--config", str(write(tmp_path, minimal)), "--out", str(out), "--quiet"])
    assert code == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["studies"]["pde"]["error"]
    assert summary["criteria"]["lemma7_exactness"]["status"] == "pass"
    assert (out / "geometry.csv").exists()


def test_cli_seed_override(tmp_path, minimal):
    out = tmp_path / "o"
    main(["geometry", "--config", str(write(tmp_path, minimal)), "--out", str(out), "--seed", "42", "--quiet"])
    assert json.loads((out / "summary.json").read_text())["seed"] == 42
