"""Acceptance suite: one line per criterion, judged on the config that asserts it."""

import json
import time

import pytest

from conftest import ACCEPTANCE_LINES, CONFIGS
from holelab.harness import load_config, run
from holelab.harness.config import CRITERIA, STUDIES, parse_config
from holelab.harness.studies import RUNNERS

CONFIG_NAMES = ("tiles_2d", "lattice_3d", "planar_pde")


@pytest.fixture(scope="module")
def summaries(tmp_path_factory):
    out = {}
    for name in CONFIG_NAMES:
        t0 = time.perf_counter()
        summary = run(load_config(CONFIGS / f"{name}.json"), STUDIES, tmp_path_factory.mktemp(name))
        out[name] = (summary, time.perf_counter() - t0)
    return out


def report(line):
    print(line)
    ACCEPTANCE_LINES.append(line)


def owner(summaries, key):
    """First config that asserts ``key``."""
    for name in CONFIG_NAMES:
        if summaries[name][0]["criteria"][key]["asserted"]:
            return name
    return None


def test_every_criterion_is_asserted_somewhere(summaries):
    assert all(owner(summaries, key) for key in CRITERIA)


@pytest.mark.parametrize("key", CRITERIA)
def test_criterion(summaries, key):
    name = owner(summaries, key)
    summary, seconds = summaries[name]
    entry = summary["criteria"][key]
    detail = json.dumps(entry["detail"], sort_keys=True, default=str)
    if len(detail) > 300:
        detail = detail[:297] + "..."
    report(f"{entry['status'].upper():4s} {key} [{name}, run {seconds:.1f}s] {detail}")
    assert entry["status"] == "pass"


@pytest.mark.parametrize("name", CONFIG_NAMES)
def test_config_exit_code(summaries, name):
    summary, _ = summaries[name]
    assert summary["exit_code"] == 0, summary["studies"]


def test_tile_count_battery_is_fast():
    raw = json.loads((CONFIGS / "tiles_2d.json").read_text())
    raw["geometry"].pop("cubes")
    raw["criteria"] = ["lemma7_exactness"]
    cfg = parse_config(raw)
    t0 = time.perf_counter()
    res = RUNNERS["geometry"](cfg)
    seconds = time.perf_counter() - t0
    entry = res.criteria["lemma7_exactness"]
    ok = entry["status"] == "pass" and seconds < 1.0
    report(f"{'PASS' if ok else 'FAIL'} tile-count battery in {seconds:.3f}s (budget 1s)")
    assert ok
