"""Run studies, preserve partial results and write the reports."""

from __future__ import annotations

import traceback
from pathlib import Path

from ..geometry import HolePlacementError, QuadratureBudgetError, UnsupportedRegionError
from ..solver import CGConvergenceError, UnderResolvedHoleError
from ..weaklimit import PairingQuadratureError
from .config import ExperimentConfig
from .report import summarize, write_csv, write_plot, write_summary
from .studies import RUNNERS, StudyResult

# failures expected from the numerics; anything else is also reported, with a traceback
NUMERICAL_ERRORS = (
    CGConvergenceError,
    UnderResolvedHoleError,
    PairingQuadratureError,
    QuadratureBudgetError,
    UnsupportedRegionError,
    HolePlacementError,
    FloatingPointError,
)


def run(cfg: ExperimentConfig, studies, out, *, jobs: int = 1, plots: bool = False, log=None) -> dict:
    """Run ``studies`` in order, writing ``<study>.csv`` and ``summary.json`` under ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    results: list[StudyResult] = []
    failures: dict[str, str] = {}
    for name in studies:
        if log:
            log(f"running {name} study")
        try:
            res = RUNNERS[name](cfg, jobs)
        except Exception as exc:  # noqa: BLE001 - any study failure keeps the other reports
            res = StudyResult(name)
            res.error = f"{type(exc).__name__}: {exc}"
            failures[name] = res.error
            if log and not isinstance(exc, NUMERICAL_ERRORS):
                log(traceback.format_exc().rstrip())
        results.append(res)
        write_csv(res, out)
        if plots:
            write_plot(res, out)
    summary = summarize(cfg, results, failures)
    write_summary(summary, out)
    return summary
