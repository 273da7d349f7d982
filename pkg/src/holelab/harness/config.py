"""Experiment configuration: JSON loading and whole-file validation."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import (
    Box,
    FeasibilityWarning,
    HoleFamily,
    HolePlacementError,
    Region,
    TilingSpec,
    ball_volume,
    check_pattern,
    critical_radius,
    region_from_dict,
    region_measure,
)
from ..solver import Grid, RHS_KINDS
from ..weaklimit import CubeIndicator, support_inside, test_function_from_dict

CRITERIA = (
    "lemma7_exactness",
    "tile_approximation",
    "indicator_weak_star",
    "corrector_closed_forms",
    "pairing_identity",
    "pairing_limit",
    "h2_h3_surrogates",
    "solver_verification",
    "homogenized_limit",
)

STUDY_CRITERIA = {
    "geometry": ("lemma7_exactness", "tile_approximation", "indicator_weak_star"),
    "corrector": ("corrector_closed_forms", "h2_h3_surrogates"),
    "pairing": ("pairing_identity", "pairing_limit"),
    "pde": ("solver_verification", "homogenized_limit"),
}

STUDIES = tuple(STUDY_CRITERIA)

DEFAULT_TOLERANCES = {
    "energy_rel": 1e-8,
    "derivative_rel": 1e-6,
    "boundary_abs": 1e-12,
    "harmonic_rel": 1e-4,
    "identity_rel": 1e-6,
    "limit_rel": 0.10,
    "tile_gap_rel": 0.02,
    "indicator_rel": 0.05,
    "rate_target": 2.0,
    "rate_band": 0.2,
    "symmetry_rel": 1e-12,
    "cg_rel": 1e-10,
    "pairing_rtol": 1e-8,
    "measure_tol": 1e-9,
    "min_radius_2d": 1e-4,
}


class ConfigError(ValueError):
    """The configuration is unreadable or violates one or more invariants."""

    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = list(problems)


@dataclass
class CubeCase:
    family: int
    cube: Box
    name: str


@dataclass
class ExperimentConfig:
    """A validated experiment description."""

    name: str
    dim: int
    tiling: TilingSpec
    omega: Region
    C: float
    families: list
    eps: list
    test_functions: list
    geometry: dict
    cube_eps: list
    cubes: list
    pairing: dict
    pde: dict
    tolerances: dict
    criteria: tuple
    seed: int
    source: dict = field(repr=False, default_factory=dict)
    notes: list = field(default_factory=list)

    def radius(self, k: int, eps: float) -> float:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FeasibilityWarning)
            return critical_radius(self.families[k].mu, eps, self.dim)


def _decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _num_list(raw, key, problems, positive=True):
    vals = raw.get(key)
    if vals is None:
        return []
    if not isinstance(vals, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
        problems.append(f"{key}: must be a list of numbers")
        return []
    if positive and any(not v > 0 for v in vals):
        problems.append(f"{key}: all values must be positive")
    if not _decreasing(vals):
        problems.append(f"{key}: values must be strictly decreasing")
    return [float(v) for v in vals]


def _region(spec, dim, where, problems):
    try:
        reg = region_from_dict(spec, dim)
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"{where}: invalid region ({exc})")
        return None
    if reg.dim != dim:
        problems.append(f"{where}: region has dimension {reg.dim}, expected {dim}")
        return None
    return reg


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a decoded JSON document, collecting every violation."""
    problems: list[str] = []
    notes: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])
    dim = raw.get("dimension")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 2:
        raise ConfigError([f"dimension: must be an integer >= 2, got {dim!r}"])
    lengths = raw.get("tiling", {}).get("lengths", [1.0] * dim)
    tiling = None
    try:
        if len(lengths) != dim:
            raise ValueError(f"needs {dim} cell lengths")
        tiling = TilingSpec(tuple(lengths))
    except (TypeError, ValueError) as exc:
        problems.append(f"tiling: {exc}")
    omega = _region(raw.get("omega", {"type": "box", "lo": [0.0] * dim, "hi": [1.0] * dim}), dim, "omega", problems)
    if omega is not None and omega.bounds() is None:
        problems.append("omega: must be bounded")
        omega = None
    C = raw.get("C")
    if not isinstance(C, (int, float)) or not C > 0:
        problems.append(f"C: must be a positive number, got {C!r}")
        C = None
    tol = dict(DEFAULT_TOLERANCES)
    for key, val in raw.get("tolerances", {}).items():
        if key not in tol:
            problems.append(f"tolerances: unknown key {key!r}")
        elif not isinstance(val, (int, float)) or not val > 0:
            problems.append(f"tolerances.{key}: must be positive")
        else:
            tol[key] = float(val)

    families = []
    for k, fam in enumerate(raw.get("families", [])):
        where = f"families[{k}]"
        reg = _region(fam.get("region"), dim, f"{where}.region", problems) if isinstance(fam.get("region"), dict) else None
        if reg is None and not isinstance(fam.get("region"), dict):
            problems.append(f"{where}.region: missing")
        try:
            hf = HoleFamily(reg, int(fam["count"]), float(fam["mu"]), np.asarray(fam["pattern"], dtype=float)) if reg is not None else None
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"{where}: {exc}")
            hf = None
        if hf is None:
            continue
        families.append(hf)
        if tiling is not None and C is not None:
            vol = ball_volume(dim, C)
            if not tiling.cell_measure > hf.count * vol:
                problems.append(
                    f"{where}: cell capacity condition violated: |A| = {tiling.cell_measure:g} must exceed "
                    f"N_k |B(0,C)| = {hf.count * vol:g}"
                )
            problems.extend(f"{where}: {msg}" for msg in check_pattern(hf, tiling, C))
    if not families:
        problems.append("families: at least one hole family is required")
    for i in range(len(families)):
        for j in range(i + 1, len(families)):
            inter = families[i].region & families[j].region
            b = inter.bounds()
            if b is not None and np.all(b[1] > b[0]) and region_measure(inter, 1e-9, window=Box(*b)) > 0:
                problems.append(f"families[{i}] and families[{j}]: regions overlap")

    eps = _num_list(raw, "eps", problems)
    if not eps:
        problems.append("eps: a non-empty, strictly decreasing list is required")
    geo = dict(raw.get("geometry", {}))
    geo_eps = _num_list(geo, "eps", problems)
    geo["eps"] = geo_eps
    probes = []
    for j, spec in enumerate(geo.get("probe_regions", [])):
        reg = _region(spec.get("region", spec), dim, f"geometry.probe_regions[{j}]", problems)
        if reg is not None and reg.bounds() is None:
            problems.append(f"geometry.probe_regions[{j}]: must be bounded")
            reg = None
        if reg is not None:
            probes.append({"name": spec.get("name", f"probe{j}"), "region": reg,
                           "check_convergence": bool(spec.get("check_convergence", True))})
    geo["probe_regions"] = probes
    cube_raw = geo.get("cubes", {})
    cube_eps = _num_list(cube_raw, "eps", problems) if cube_raw else []
    cubes = []
    for j, c in enumerate(cube_raw.get("cases", []) if cube_raw else []):
        try:
            fam = int(c.get("family", 0))
            if not 0 <= fam < len(families):
                raise ValueError(f"family index {fam} out of range")
            cube = Box.cube(c["corner"], float(c["side"]))
            if cube.dim != dim:
                raise ValueError("cube dimension mismatch")
            cubes.append(CubeCase(fam, cube, c.get("name", f"cube{j}")))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"geometry.cubes.cases[{j}]: {exc}")
    geo["monte_carlo_samples"] = int(cube_raw.get("monte_carlo_samples", 0)) if cube_raw else 0

    tests = []
    names = set()
    for j, spec in enumerate(raw.get("test_functions", [])):
        try:
            phi = test_function_from_dict(spec)
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"test_functions[{j}]: {exc}")
            continue
        if isinstance(phi, CubeIndicator):
            problems.append(f"test_functions[{j}]: cube indicators belong in geometry.cubes")
            continue
        if phi.dim != dim:
            problems.append(f"test_functions[{j}]: dimension {phi.dim}, expected {dim}")
            continue
        if phi.name in names:
            problems.append(f"test_functions[{j}]: duplicate name {phi.name!r}")
        names.add(phi.name)
        if omega is not None and not support_inside(phi, omega):
            problems.append(f"test_functions[{j}] ({phi.name}): support must lie strictly inside omega")
        tests.append(phi)

    pairing = {"avoiding_bumps": 2, "limit_cases": [t.name for t in tests]}
    pairing.update(raw.get("pairing", {}))
    for nm in pairing["limit_cases"]:
        if nm not in names:
            problems.append(f"pairing.limit_cases: unknown test function {nm!r}")

    pde = dict(raw.get("pde", {}))
    pde_eps = _num_list(pde, "eps", problems)
    pde["eps"] = pde_eps
    man_h = _num_list(pde, "manufactured_h", problems)
    pde["manufactured_h"] = man_h
    pde.setdefault("manufactured_c", 10.0)
    pde.setdefault("rhs", {"kind": "constant", "value": 1.0})
    pde.setdefault("rho_min", 3.0)
    pde.setdefault("symmetry_pairs", 10)
    rhs_kind = pde["rhs"].get("kind") if isinstance(pde["rhs"], dict) else pde["rhs"]
    if rhs_kind not in RHS_KINDS:
        problems.append(f"pde.rhs: unknown kind {rhs_kind!r}; choose from {list(RHS_KINDS)}")
    if omega is not None:
        lo, hi = omega.bounds()
        hs = ([pde["h"]] if "h" in pde else []) + man_h
        for h in hs:
            try:
                Grid(lo, hi, float(h))
            except (TypeError, ValueError) as exc:
                problems.append(f"pde: {exc}")
        if pde_eps and "h" not in pde:
            problems.append("pde.h: required when pde.eps is given")

    crit = raw.get("criteria", list(CRITERIA))
    bad = [c for c in crit if c not in CRITERIA]
    if bad:
        problems.append(f"criteria: unknown keys {bad}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        problems.append("seed: must be an integer")
        seed = 0

    # feasibility of every radius before any compute
    if C is not None:
        for k, fam in enumerate(families):
            for e in sorted(set(eps) | set(pde_eps) | set(cube_eps), reverse=True):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", FeasibilityWarning)
                    a = critical_radius(fam.mu, e, dim)
                if fam.mu > 0 and a >= C * e:
                    problems.append(f"families[{k}]: hole radius {a:.6g} >= C*eps = {C * e:.6g} at eps = {e:g}")
                elif fam.mu > 0 and dim == 2 and a < tol["min_radius_2d"] and e in eps:
                    notes.append(f"families[{k}]: eps = {e:g} gives radius {a:.3g} < {tol['min_radius_2d']:g}; pairing rows there are skipped")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        dim=dim,
        tiling=tiling,
        omega=omega,
        C=float(C),
        families=families,
        eps=eps,
        test_functions=tests,
        geometry=geo,
        cube_eps=cube_eps,
        cubes=cubes,
        pairing=pairing,
        pde=pde,
        tolerances=tol,
        criteria=tuple(crit),
        seed=int(seed),
        source=raw,
        notes=notes,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON configuration file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror})"]) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc
    return parse_config(raw)


def describe(cfg: ExperimentConfig) -> list[str]:
    """Human-readable summary lines for ``check-config``."""
    lines = [f"config {cfg.name}: d = {cfg.dim}, |A| = {cfg.tiling.cell_measure:g}, C = {cfg.C:g}"]
    for k, fam in enumerate(cfg.families):
        lines.append(f"  family {k}: N = {fam.count}, mu = {fam.mu:g}")
        for e in cfg.eps:
            a = cfg.radius(k, e)
            lines.append(f"    eps = {e:g}: a = {a:.6g}, C*eps = {cfg.C * e:.6g}, ratio = {a / (cfg.C * e) if e else math.nan:.3g}")
    lines.extend(f"  note: {n}" for n in cfg.notes)
    lines.append(f"  asserted criteria: {', '.join(cfg.criteria) if cfg.criteria else 'none'}")
    return lines


__all__ = [
    "CRITERIA",
    "STUDIES",
    "STUDY_CRITERIA",
    "ConfigError",
    "CubeCase",
    "ExperimentConfig",
    "HolePlacementError",
    "describe",
    "load_config",
    "parse_config",
]
