"""Deterministic CSV / JSON / SVG report writers."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .config import CRITERIA, STUDY_CRITERIA, ExperimentConfig
from .studies import COLUMNS, StudyResult

CSV_VERSION = 1
SUMMARY_SCHEMA = "holelab-summary v1"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(result: StudyResult, out: Path) -> Path:
    """``<study>.csv``: a version comment row, the header, then one row per record."""
    cols = COLUMNS[result.study]
    path = out / f"{result.study}.csv"
    lines = [f"# holelab {result.study} v{CSV_VERSION}", ",".join(cols)]
    lines += [",".join(_cell(row.get(c)) for c in cols) for row in result.rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _clean(obj):
    """Replace non-finite floats so the JSON stays standard."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def summarize(cfg: ExperimentConfig, results: list[StudyResult], failures: dict[str, str]) -> dict:
    """Summary document; every criterion key is always present."""
    criteria = {}
    for key in CRITERIA:
        criteria[key] = {"status": "not_run", "asserted": key in cfg.criteria, "detail": {}}
    for res in results:
        for key in STUDY_CRITERIA[res.study]:
            entry = res.criteria.get(key)
            if res.error is not None:
                entry = {"status": "error", "detail": {"error": res.error}}
            if entry is not None:
                criteria[key] = {"status": entry["status"], "asserted": key in cfg.criteria, "detail": entry["detail"]}
    studies = {
        res.study: {"csv": f"{res.study}.csv", "rows": len(res.rows), "skipped": res.skipped, "error": res.error}
        for res in results
    }
    exit_code = exit_code_for(criteria, failures)
    return _clean({
        "schema": SUMMARY_SCHEMA,
        "config": cfg.name,
        "seed": cfg.seed,
        "studies": studies,
        "criteria": criteria,
        "exit_code": exit_code,
    })


def exit_code_for(criteria: dict, failures: dict) -> int:
    if failures:
        return 3
    if any(c["asserted"] and c["status"] in ("fail", "skipped") for c in criteria.values()):
        return 1
    return 0


def write_summary(summary: dict, out: Path) -> Path:
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    return path


PLOTS = {
    "geometry": ("epsilon", ("gap_minus", "gap_plus", "abs_gap")),
    "corrector": ("epsilon", ("slope_rel_gap", "deficit_l2")),
    "pairing": ("epsilon", ("rel_gap", "identity_gap")),
    "pde": ("epsilon", ("l2_hom", "l2_plain")),
}


def write_plot(result: StudyResult, out: Path) -> Path | None:
    """Log-log line plot of the convergence columns (SVG, reproducible bytes)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xkey, ykeys = PLOTS[result.study]
    series = {}
    for row in result.rows:
        x = row.get(xkey)
        for key in ykeys:
            y = row.get(key)
            if isinstance(x, float) and isinstance(y, float) and x > 0 and y > 0:
                label = f"{key} {row.get('name') or row.get('case') or ''} {row.get('kind') or ''}".strip()
                series.setdefault(label, []).append((x, y))
    if result.study == "pde":
        for row in result.rows:
            if row.get("kind") == "manufactured":
                series.setdefault(f"l2_error manufactured {row['operator']} (x = h)", []).append((row["h"], row["l2_error"]))
    if not series:
        return None
    matplotlib.rcParams["svg.hashsalt"] = "holelab"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in sorted(series):
        pts = sorted(series[label])
        ax.loglog([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    ax.set_xlabel(xkey)
    ax.set_title(f"{result.study} convergence")
    ax.legend(fontsize=6)
    path = out / f"{result.study}.svg"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
