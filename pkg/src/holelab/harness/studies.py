"""The four studies: each returns CSV rows plus verdicts for its criteria."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ..corrector import (
    annulus_energy,
    boundary_slope_ratio,
    build_potential,
    constant_potential,
    limit_constant,
    q0_eval,
    q0_grad,
    sphere_area,
    w0_eval,
    w0_grad,
    w_eval,
)
from ..geometry import (
    FeasibilityWarning,
    instantiate_holes,
    lambda_minus,
    lambda_plus,
    region_measure,
    summed_tile_volumes,
    tile_union_measure,
)
from ..solver import (
    Grid,
    apply_operator,
    build_mask,
    error_norms,
    sines_solution,
    solve_homogenized,
    solve_perforated,
)
from ..weaklimit import (
    hole_avoiding_bumps,
    indicator_limit,
    indicator_pairing,
    indicator_pairing_mc,
    pairing_direct,
    pairing_inner_flux,
    pairing_lawep,
    pairing_limit,
    w_deficit_l2,
)
from .config import ExperimentConfig

GEOMETRY_COLUMNS = (
    "section", "name", "family", "epsilon", "count_minus", "count_plus", "measure_minus", "measure_plus",
    "summed_minus", "summed_plus", "exact_measure", "gap_minus", "gap_plus",
    "indicator", "indicator_limit", "abs_gap", "rel_gap", "mc_estimate",
)
CORRECTOR_COLUMNS = (
    "epsilon", "family", "a_eps", "R", "energy_closed", "energy_quadrature", "energy_rel_err",
    "w_derivative_rel_err", "q_derivative_rel_err", "boundary_err", "harmonic_rel_residual",
    "q_laplacian_err", "slope_ratio", "limit_constant", "slope_rel_gap", "hole_points", "w_max_on_holes",
    "deficit_l2", "status",
)
PAIRING_COLUMNS = (
    "case", "kind", "epsilon", "a_eps", "holes", "pairing_direct", "pairing_lawep", "inner_flux",
    "pairing_limit", "abs_gap", "rel_gap", "identity_gap", "identity_asserted", "status",
)
PDE_COLUMNS = (
    "kind", "operator", "epsilon", "h", "a_eps", "a_over_h", "holes", "l2_error", "h1_error", "rate",
    "l2_hom", "h1_hom", "l2_plain", "h1_plain", "iterations", "residual", "min_value",
)
COLUMNS = {"geometry": GEOMETRY_COLUMNS, "corrector": CORRECTOR_COLUMNS, "pairing": PAIRING_COLUMNS, "pde": PDE_COLUMNS}


@dataclass
class StudyResult:
    study: str
    rows: list = field(default_factory=list)
    criteria: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)
    error: str | None = None


def verdict(passed: bool | None, **detail) -> dict:
    """A criterion entry; ``passed=None`` means the config lacks the data to judge it."""
    status = "skipped" if passed is None else ("pass" if passed else "fail")
    return {"status": status, "detail": detail}


def pmap(fn, items, jobs: int):
    """Map in input order, in worker processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def decreasing_or_exact(gaps, scale: float) -> bool:
    """Each gap below the previous, except that exact (round-off) zeros may repeat."""
    floor = 1e-14 * max(scale, 1e-300)
    return all(b < a or (a <= floor and b <= floor) for a, b in zip(gaps, gaps[1:]))


def eventually_decreasing(values, tail: int = 3) -> bool:
    """The last ``min(tail, len)`` values decrease strictly."""
    if len(values) < 2:
        return False
    return strictly_decreasing(values[-min(tail, len(values)):])


def _domain(cfg: ExperimentConfig, eps: float):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FeasibilityWarning)
        return instantiate_holes(cfg.families, cfg.tiling, cfg.omega, eps, cfg.C)


# --- geometry ----------------------------------------------------------------


def _tile_count_ok(count: int, summed: float, union: float, cell: float) -> bool:
    if count == 0:
        return summed == 0.0 and union == 0.0
    return int(round(summed / cell)) == count and abs(union - summed) <= 64 * np.finfo(float).eps * count * cell


def _cube_rows(args):
    cfg, eps = args
    dom = _domain(cfg, eps)
    rows = []
    n_mc = cfg.geometry.get("monte_carlo_samples", 0)
    for j, case in enumerate(cfg.cubes):
        val = indicator_pairing(dom, case.family, case.cube)
        lim = indicator_limit(dom, case.family, case.cube, cfg.tolerances["measure_tol"])
        gap = abs(val - lim)
        mc = indicator_pairing_mc(dom, case.family, case.cube, n_mc, cfg.seed + j) if n_mc else None
        rows.append({
            "section": "cube", "name": case.name, "family": case.family, "epsilon": eps,
            "indicator": val, "indicator_limit": lim, "abs_gap": gap,
            "rel_gap": gap / lim if lim > 0 else gap, "mc_estimate": mc,
        })
    return rows


def run_geometry(cfg: ExperimentConfig, jobs: int = 1) -> StudyResult:
    res = StudyResult("geometry")
    d = cfg.dim
    tol = cfg.tolerances
    battery = list(cfg.geometry["probe_regions"])
    battery += [{"name": f"family{k}", "region": f.region, "check_convergence": False} for k, f in enumerate(cfg.families)]
    exact_ok = True
    conv = {}
    for probe in battery:
        E = probe["region"]
        measure = region_measure(E, tol["measure_tol"])
        seq = []
        for eps in cfg.geometry["eps"]:
            cell = eps**d * cfg.tiling.cell_measure
            lm = lambda_minus(E, cfg.tiling, eps)
            lp = lambda_plus(E, cfg.tiling, eps)
            um, up = tile_union_measure(lm, cfg.tiling, eps), tile_union_measure(lp, cfg.tiling, eps)
            sm, sp = summed_tile_volumes(lm, cfg.tiling, eps), summed_tile_volumes(lp, cfg.tiling, eps)
            exact_ok &= _tile_count_ok(len(lm), sm, um, cell) and _tile_count_ok(len(lp), sp, up, cell)
            row = {
                "section": "probe", "name": probe["name"], "epsilon": eps, "count_minus": len(lm),
                "count_plus": len(lp), "measure_minus": um, "measure_plus": up, "summed_minus": sm,
                "summed_plus": sp, "exact_measure": measure, "gap_minus": measure - um, "gap_plus": up - measure,
            }
            res.rows.append(row)
            seq.append(row)
        if probe["check_convergence"] and seq:
            gm = [r["gap_minus"] for r in seq]
            gp = [r["gap_plus"] for r in seq]
            conv[probe["name"]] = {
                "bracketing": all(a >= 0 for a in gm) and all(b >= 0 for b in gp),
                "monotone": strictly_decreasing(gm) and strictly_decreasing(gp),
                "final_gap_minus_rel": gm[-1] / measure,
                "final_gap_plus_rel": gp[-1] / measure,
            }
    n_checked = sum(1 for r in res.rows if r["section"] == "probe")
    res.criteria["lemma7_exactness"] = verdict(exact_ok if n_checked else None, cases=n_checked)
    if conv:
        ok = all(c["bracketing"] and c["monotone"] and max(c["final_gap_minus_rel"], c["final_gap_plus_rel"]) <= tol["tile_gap_rel"] for c in conv.values())
        res.criteria["tile_approximation"] = verdict(ok, tolerance=tol["tile_gap_rel"], regions=conv)
    else:
        res.criteria["tile_approximation"] = verdict(None, reason="no probe region with check_convergence")

    if cfg.cubes and cfg.cube_eps:
        for rows in pmap(_cube_rows, [(cfg, e) for e in cfg.cube_eps], jobs):
            res.rows.extend(rows)
        cases = {}
        for case in cfg.cubes:
            rows = [r for r in res.rows if r["section"] == "cube" and r["name"] == case.name]
            gaps = [r["abs_gap"] for r in rows]
            lim = rows[-1]["indicator_limit"]
            cases[case.name] = {
                "decreasing": decreasing_or_exact(gaps, lim),
                "final_rel_gap": rows[-1]["rel_gap"],
            }
        ok = all(c["decreasing"] and c["final_rel_gap"] <= tol["indicator_rel"] for c in cases.values())
        res.criteria["indicator_weak_star"] = verdict(ok, tolerance=tol["indicator_rel"], cubes=cases)
    else:
        res.criteria["indicator_weak_star"] = verdict(None, reason="no cube battery")
    return res


# --- corrector ---------------------------------------------------------------


def energy_quadrature(a: float, R: float, d: int, N: int = 1) -> float:
    """``N S_d ∫_a^R |∂_r w0|^2 r^(d-1) dr`` by adaptive quadrature in log r."""
    # (r ∂_r w0)^2 r^(d-2) stays finite even for radii near underflow
    f = lambda s: (math.exp(s) * float(w0_grad(math.exp(s), a, R, d))) ** 2 * math.exp((d - 2) * s)
    val, _ = integrate.quad(f, math.log(a), math.log(R), epsabs=0.0, epsrel=1e-13, limit=200)
    return N * sphere_area(d) * val


def corrector_checks(a: float, R: float, d: int, n: int = 100) -> dict:
    """Finite-difference and boundary checks of the closed forms on one annulus."""
    r = np.geomspace(a * (1 + 1e-2), R * (1 - 1e-2), n)
    step = 1e-6 * r
    fd = (w0_eval(r + step, a, R, d) - w0_eval(r - step, a, R, d)) / (2 * step)
    exact = w0_grad(r, a, R, d)
    w_rel = float(np.max(np.abs(fd - exact) / np.abs(exact)))
    rq = np.linspace(R / n, R * (1 - 1e-2), n)
    sq = 1e-6 * R
    fdq = (q0_eval(rq + sq, R) - q0_eval(rq - sq, R)) / (2 * sq)
    q_rel = float(np.max(np.abs(fdq - q0_grad(rq, R)) / np.abs(q0_grad(rq, R))))
    # second differences need a coarser step; scaling by r^2 keeps tiny radii finite
    k = 1e-3
    r2wpp = (w0_eval(r * (1 + k), a, R, d) - 2 * w0_eval(r, a, R, d) + w0_eval(r * (1 - k), a, R, d)) / k**2
    r2lap = r2wpp + (d - 1) * r * exact
    harm = float(np.max(np.abs(r2lap) / np.abs(r2wpp)))
    s2q = 1e-3 * R
    qpp = (q0_eval(rq + s2q, R) - 2 * q0_eval(rq, R) + q0_eval(rq - s2q, R)) / s2q**2
    qlap = float(np.max(np.abs(qpp + (d - 1) * q0_grad(rq, R) / rq - d)) / d)
    boundary = max(
        abs(float(w0_eval(a, a, R, d))), abs(float(w0_eval(R, a, R, d)) - 1.0),
        abs(float(q0_eval(R, R))), abs(float(q0_grad(R, R)) - R) / R,
    )
    return {"w_derivative_rel_err": w_rel, "q_derivative_rel_err": q_rel, "boundary_err": boundary,
            "harmonic_rel_residual": harm, "q_laplacian_err": qlap}


def _corrector_rows(args):
    cfg, eps = args
    d = cfg.dim
    R = cfg.C * eps
    dom = _domain(cfg, eps)
    resolvable = dom.n_holes == 0 or bool(np.all(dom.radii > 0))
    deficit = w_deficit_l2(dom) if resolvable else None
    rows = []
    rng = np.random.default_rng(cfg.seed)
    for k, fam in enumerate(cfg.families):
        a = cfg.radius(k, eps)
        row = {"epsilon": eps, "family": k, "a_eps": a, "R": R, "deficit_l2": deficit}
        if fam.mu == 0:
            row["status"] = "no holes"
        elif a <= 0:
            row["status"] = "radius underflow"
        else:
            ec = annulus_energy(a, R, d, fam.count)
            eq = energy_quadrature(a, R, d, fam.count)
            row.update(energy_closed=ec, energy_quadrature=eq, energy_rel_err=abs(ec - eq) / eq)
            row.update(corrector_checks(a, R, d))
            sr = boundary_slope_ratio(a, R, d)
            lc = limit_constant(fam.mu, cfg.C, d)
            row.update(slope_ratio=sr, limit_constant=lc, slope_rel_gap=abs(sr - lc) / lc)
            sel = np.flatnonzero(dom.family == k)
            if sel.size:
                # 100 points per closed hole, including its center and a boundary-adjacent point
                u = rng.random((sel.size, 100))
                u[:, 0] = 0.0
                u[:, 1] = 1.0 - 1e-9
                dirs = rng.normal(size=(sel.size, 100, d))
                dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
                rad = dom.radii[sel][:, None] * u ** (1.0 / d)
                pts = dom.centers[sel][:, None, :] + rad[..., None] * dirs
                # rounding can push a point just off a tiny hole; pull those inward
                for _ in range(60):
                    off = ~dom.in_holes(pts)
                    if not off.any():
                        break
                    rad = np.where(off, 0.5 * rad, rad)
                    pts = dom.centers[sel][:, None, :] + rad[..., None] * dirs
                vals = w_eval(pts, dom)
                row.update(hole_points=int(vals.size), w_max_on_holes=float(np.max(np.abs(vals))))
            row["status"] = "ok"
        rows.append(row)
    return rows


def run_corrector(cfg: ExperimentConfig, jobs: int = 1) -> StudyResult:
    res = StudyResult("corrector")
    tol = cfg.tolerances
    for rows in pmap(_corrector_rows, [(cfg, e) for e in cfg.eps], jobs):
        res.rows.extend(rows)
    ok_rows = [r for r in res.rows if r["status"] == "ok"]
    res.skipped = [f"eps={r['epsilon']!r} family {r['family']}: {r['status']}" for r in res.rows if r["status"] != "ok"]
    if ok_rows:
        worst = {
            "energy_rel_err": max(r["energy_rel_err"] for r in ok_rows),
            "derivative_rel_err": max(max(r["w_derivative_rel_err"], r["q_derivative_rel_err"]) for r in ok_rows),
            "boundary_err": max(r["boundary_err"] for r in ok_rows),
            "harmonic_rel_residual": max(max(r["harmonic_rel_residual"], r["q_laplacian_err"]) for r in ok_rows),
        }
        ok = (worst["energy_rel_err"] <= tol["energy_rel"] and worst["derivative_rel_err"] <= tol["derivative_rel"]
              and worst["boundary_err"] <= tol["boundary_abs"] and worst["harmonic_rel_residual"] <= tol["harmonic_rel"])
        res.criteria["corrector_closed_forms"] = verdict(ok, rows=len(ok_rows), **worst)
    else:
        res.criteria["corrector_closed_forms"] = verdict(None, reason="no resolvable radius")
    by_eps = {}
    for r in ok_rows:
        by_eps.setdefault(r["epsilon"], r["deficit_l2"])
    zero_ok = all(r.get("w_max_on_holes", 0.0) == 0.0 for r in ok_rows)
    deficits = [by_eps[e] for e in cfg.eps if e in by_eps and by_eps[e] is not None]
    if len(deficits) >= 2:
        res.criteria["h2_h3_surrogates"] = verdict(
            zero_ok and strictly_decreasing(deficits), zero_on_holes=zero_ok,
            points=sum(r.get("hole_points", 0) for r in ok_rows), deficits=deficits,
            deficit_decreasing=strictly_decreasing(deficits),
        )
    else:
        res.criteria["h2_h3_surrogates"] = verdict(None, reason="fewer than two resolvable eps values")
    return res


# --- pairing -----------------------------------------------------------------


def _pairing_rows(args):
    cfg, eps = args
    dom = _domain(cfg, eps)
    V = build_potential(cfg.families, cfg.tiling)
    rtol = cfg.tolerances["pairing_rtol"]
    active = [a for a, f in zip(dom.family_radius, cfg.families) if f.mu > 0]
    a_eps = min(active) if active else 0.0
    base = {"epsilon": eps, "a_eps": a_eps}
    limit_floor = cfg.tolerances["min_radius_2d"] if cfg.dim == 2 else 0.0
    if active and a_eps <= limit_floor:
        return [dict(base, case="*", kind="*", status=f"skipped: radius {a_eps:.3g} below {limit_floor:g}")]
    rows = []
    limit_tol = cfg.tolerances["measure_tol"]
    for phi in cfg.test_functions:
        lim = pairing_limit(V, phi, limit_tol)
        dc = pairing_direct(dom, phi, with_corrector=True, rtol=rtol)
        lc = pairing_lawep(dom, phi, with_corrector=True, rtol=rtol)
        gap = abs(dc.value - lim)
        rows.append(dict(base, case=phi.name, kind="phi_w", holes=int(dc.holes.size), pairing_direct=dc.value,
                         pairing_lawep=lc.value, pairing_limit=lim, abs_gap=gap,
                         rel_gap=gap / abs(lim) if lim else gap,
                         identity_gap=abs(dc.value - lc.value), identity_asserted=True, status="ok"))
        dp = pairing_direct(dom, phi, rtol=rtol)
        lp = pairing_lawep(dom, phi, rtol=rtol)
        flux = pairing_inner_flux(dom, phi)
        rows.append(dict(base, case=phi.name, kind="phi", holes=int(dp.holes.size), pairing_direct=dp.value,
                         pairing_lawep=lp.value, inner_flux=flux, pairing_limit=lim,
                         abs_gap=abs(dp.value - lim), rel_gap=abs(dp.value - lim) / abs(lim) if lim else None,
                         identity_gap=abs(dp.value + flux - lp.value), identity_asserted=flux == 0.0, status="ok"))
    for bump in hole_avoiding_bumps(dom, int(cfg.pairing.get("avoiding_bumps", 2))):
        dp = pairing_direct(dom, bump, rtol=rtol)
        lp = pairing_lawep(dom, bump, rtol=rtol)
        lim = pairing_limit(V, bump, limit_tol)
        rows.append(dict(base, case=bump.name, kind="avoiding", holes=int(dp.holes.size), pairing_direct=dp.value,
                         pairing_lawep=lp.value, inner_flux=pairing_inner_flux(dom, bump), pairing_limit=lim,
                         identity_gap=abs(dp.value - lp.value), identity_asserted=True, status="ok"))
    return rows


def run_pairing(cfg: ExperimentConfig, jobs: int = 1) -> StudyResult:
    res = StudyResult("pairing")
    tol = cfg.tolerances
    for rows in pmap(_pairing_rows, [(cfg, e) for e in cfg.eps], jobs):
        res.rows.extend(rows)
    res.skipped = [f"eps={r['epsilon']!r}: {r['status']}" for r in res.rows if r["status"] != "ok"]
    ident = [r for r in res.rows if r["status"] == "ok" and r.get("identity_asserted")]
    fails = [r for r in ident if not (r["pairing_direct"] != 0 and r["identity_gap"] <= tol["identity_rel"] * abs(r["pairing_direct"]))]
    worst = max((r["identity_gap"] / abs(r["pairing_direct"]) if r["pairing_direct"] else math.inf for r in ident), default=None)
    if ident:
        res.criteria["pairing_identity"] = verdict(
            not fails and len(ident) >= 15, cases=len(ident), required_cases=15, failures=len(fails),
            worst_rel_gap=worst, tolerance=tol["identity_rel"],
        )
    else:
        res.criteria["pairing_identity"] = verdict(None, reason="no pairing cases")
    limits = {}
    for name in cfg.pairing["limit_cases"]:
        rows = [r for r in res.rows if r["status"] == "ok" and r["case"] == name and r["kind"] == "phi_w"]
        gaps = [r["rel_gap"] for r in rows]
        limits[name] = {"eps": [r["epsilon"] for r in rows], "rel_gaps": gaps,
                        "eventually_decreasing": eventually_decreasing(gaps),
                        "final_rel_gap": gaps[-1] if gaps else None}
    usable = {k: v for k, v in limits.items() if len(v["rel_gaps"]) >= 3}
    if usable:
        ok = all(v["eventually_decreasing"] and v["final_rel_gap"] <= tol["limit_rel"] for v in usable.values())
        res.criteria["pairing_limit"] = verdict(ok and len(usable) == len(limits), tolerance=tol["limit_rel"], cases=limits)
    else:
        res.criteria["pairing_limit"] = verdict(None, reason="fewer than three resolvable eps values", cases=limits)
    return res


# --- pde ---------------------------------------------------------------------


def _manufactured(cfg: ExperimentConfig):
    rows = []
    c = float(cfg.pde["manufactured_c"])
    rel_tol = cfg.tolerances["cg_rel"]
    for operator, V in (("plain", None), ("potential", constant_potential(c, cfg.omega))):
        prev = None
        for h in cfg.pde["manufactured_h"]:
            u = solve_homogenized(cfg.omega, V, {"kind": "sines"}, h, rel_tol)
            e = u.values - sines_solution(u.grid)
            l2 = float(np.sqrt(h**cfg.dim * np.sum(e * e)))
            rate = math.log2(prev[0] / l2) / math.log2(prev[1] / h) if prev else None
            rows.append({"kind": "manufactured", "operator": operator, "h": h, "l2_error": l2, "rate": rate,
                         "iterations": u.info["iterations"], "residual": u.info["residual"],
                         "min_value": float(u.values.min())})
            prev = (l2, h)
    return rows


def _perforated_row(args):
    cfg, eps, uh, u0 = args
    dom = _domain(cfg, eps)
    h = float(cfg.pde["h"])
    u = solve_perforated(dom, cfg.pde["rhs"], h, cfg.tolerances["cg_rel"], rho_min=float(cfg.pde["rho_min"]))
    a = float(dom.radii.min()) if dom.n_holes else 0.0
    l2h, h1h = error_norms(u, uh)
    l2p, h1p = error_norms(u, u0)
    return {"kind": "perforated", "operator": "plain", "epsilon": eps, "h": h, "a_eps": a, "a_over_h": a / h,
            "holes": dom.n_holes, "l2_hom": l2h, "h1_hom": h1h, "l2_plain": l2p, "h1_plain": h1p,
            "iterations": u.info["iterations"], "residual": u.info["residual"], "min_value": float(u.values.min())}


def operator_checks(cfg: ExperimentConfig, pairs: int) -> dict:
    """Symmetry and positivity of the discrete operator on random fields."""
    h = float(cfg.pde.get("h", cfg.pde["manufactured_h"][-1] if cfg.pde["manufactured_h"] else 1 / 64))
    grid = Grid.for_region(cfg.omega, h)
    if cfg.pde.get("eps"):
        mask = build_mask(grid, _domain(cfg, cfg.pde["eps"][-1]), float(cfg.pde["rho_min"]))
    else:
        mask = build_mask(grid, cfg.omega)
    V = build_potential(cfg.families, cfg.tiling)
    rng = np.random.default_rng(cfg.seed)
    worst_sym, min_energy = 0.0, math.inf
    for _ in range(pairs):
        u = np.where(mask.free, rng.standard_normal(grid.shape), 0.0)
        v = np.where(mask.free, rng.standard_normal(grid.shape), 0.0)
        for pot in (None, V):
            Au, Av = apply_operator(u, mask, grid, pot), apply_operator(v, mask, grid, pot)
            left, right = float(np.sum(Au * v)), float(np.sum(u * Av))
            scale = max(float(np.sum(np.abs(Au * v))), 1e-300)
            worst_sym = max(worst_sym, abs(left - right) / scale)
            min_energy = min(min_energy, float(np.sum(Au * u)))
    return {"symmetry_rel": worst_sym, "min_energy": min_energy, "pairs": pairs}


def run_pde(cfg: ExperimentConfig, jobs: int = 1) -> StudyResult:
    res = StudyResult("pde")
    tol = cfg.tolerances
    mins = []
    if len(cfg.pde["manufactured_h"]) >= 2:
        man = _manufactured(cfg)
        res.rows.extend(man)
        mins += [r["min_value"] for r in man]
        band = (tol["rate_target"] - tol["rate_band"], tol["rate_target"] + tol["rate_band"])
        rates = {op: [r["rate"] for r in man if r["operator"] == op and r["rate"] is not None] for op in ("plain", "potential")}
        rate_ok = all(band[0] <= x <= band[1] for xs in rates.values() for x in xs)
    else:
        rates, rate_ok = {}, None

    # homogenized and naive limits on the perforated grid
    pert = []
    same_path = None
    if cfg.pde["eps"]:
        h = float(cfg.pde["h"])
        V = build_potential(cfg.families, cfg.tiling)
        uh = solve_homogenized(cfg.omega, V, cfg.pde["rhs"], h, tol["cg_rel"])
        u0 = solve_homogenized(cfg.omega, None, cfg.pde["rhs"], h, tol["cg_rel"])
        zero_V = constant_potential(0.0, cfg.omega)
        same_path = bool(np.array_equal(u0.values, solve_homogenized(cfg.omega, zero_V, cfg.pde["rhs"], h, tol["cg_rel"]).values))
        for u, name in ((uh, "homogenized"), (u0, "plain")):
            res.rows.append({"kind": name, "operator": "potential" if name == "homogenized" else "plain", "h": h,
                             "iterations": u.info["iterations"], "residual": u.info["residual"],
                             "min_value": float(u.values.min())})
            mins.append(float(u.values.min()))
        pert = pmap(_perforated_row, [(cfg, e, uh, u0) for e in cfg.pde["eps"]], jobs)
        res.rows.extend(pert)
        mins += [r["min_value"] for r in pert]

    rhs_kind = cfg.pde["rhs"].get("kind") if isinstance(cfg.pde["rhs"], dict) else cfg.pde["rhs"]
    rhs_nonneg = rhs_kind in ("gaussian", "sines") or (rhs_kind == "constant" and float(cfg.pde["rhs"].get("value", 1.0)) >= 0)
    max_principle = all(m >= 0.0 for m in mins) if rhs_nonneg else None
    if rate_ok is not None or pert:
        ops = operator_checks(cfg, int(cfg.pde["symmetry_pairs"]))
        sym_ok = ops["symmetry_rel"] <= tol["symmetry_rel"] and ops["min_energy"] > 0
    if rate_ok is None:
        res.criteria["solver_verification"] = verdict(None, reason="needs at least two manufactured_h values")
    else:
        ok = rate_ok and sym_ok and max_principle is not False and same_path is not False
        res.criteria["solver_verification"] = verdict(
            ok, rates=rates, rate_band=[tol["rate_target"] - tol["rate_band"], tol["rate_target"] + tol["rate_band"]],
            max_principle=max_principle, min_value=min(mins) if mins else None, zero_potential_same_path=same_path,
            **ops,
        )
    if pert:
        beats = [r["l2_hom"] < r["l2_plain"] for r in pert]
        shrinks = pert[-1]["l2_hom"] < pert[0]["l2_hom"]
        res.criteria["homogenized_limit"] = verdict(
            all(beats) and shrinks, strange_term_wins=beats, l2_hom=[r["l2_hom"] for r in pert],
            l2_plain=[r["l2_plain"] for r in pert], final_below_first=shrinks,
        )
    else:
        res.criteria["homogenized_limit"] = verdict(None, reason="no pde.eps list")
    return res


RUNNERS = {"geometry": run_geometry, "corrector": run_corrector, "pairing": run_pairing, "pde": run_pde}
