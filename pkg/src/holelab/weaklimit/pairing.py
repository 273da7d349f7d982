"""Weak-limit checks: indicator pairings, corrector deficit and the -Δw pairings.

The pairings of ``-Δw^eps`` with a test function ``v`` are computed hole by
hole with tensor-product rules in polar/spherical coordinates centred at the
hole.  Two test sequences are supported:

* ``v = phi``: a bump.  This lies in H^1_0(Omega_eps) only if its support
  avoids every hole.
* ``v = phi * w^eps``: vanishes on the holes for any bump and converges to
  ``phi`` weakly in H^1, so it is the natural sequence for the limit pairing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from ..corrector import (
    PotentialV,
    boundary_slope_ratio,
    indicator_limit_density,
    sphere_area,
    w0_flux,
)
from ..geometry import (
    IN,
    Ball,
    Box,
    PerforatedDomain,
    ball_box_measure,
    ball_volume,
    classify_boxes,
    integrate_over_region,
    lattice_points_in,
    region_measure,
)
from .testfunctions import Bump, support_inside

# (radial nodes, polar nodes, azimuthal nodes) per refinement level
LEVELS = ((8, 8, 8), (12, 12, 8), (16, 16, 12), (24, 24, 16), (32, 32, 24), (48, 48, 32), (64, 64, 48), (96, 96, 64))


class PairingQuadratureError(RuntimeError):
    """Some holes did not converge at the finest quadrature level."""

    def __init__(self, message, holes):
        super().__init__(message)
        self.holes = holes


@dataclass
class HoleSum:
    """A sum of per-hole integrals."""

    value: float
    per_hole: np.ndarray = field(repr=False)
    holes: np.ndarray = field(repr=False)
    level: int = 0


def sphere_rule(d: int, n: int):
    """Directions and weights integrating over the unit sphere (weights sum to S_d)."""
    if d == 2:
        m = 2 * n
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(m, 2 * np.pi / m)
    if d == 3:
        mu, wmu = np.polynomial.legendre.leggauss(n)
        m = 2 * n
        ph = 2 * np.pi * (np.arange(m) + 0.5) / m
        st = np.sqrt(1 - mu**2)
        dirs = np.stack(
            [np.outer(st, np.cos(ph)).ravel(), np.outer(st, np.sin(ph)).ravel(), np.repeat(mu, m)],
            axis=1,
        )
        return dirs, np.repeat(wmu, m) * (2 * np.pi / m)
    raise NotImplementedError("pairing quadrature is implemented for d = 2 and d = 3")


def _frames(centers, target):
    """Orthonormal frames whose first axis points from each center to ``target``."""
    diff = target - centers
    D = np.linalg.norm(diff, axis=1)
    d = centers.shape[1]
    e = np.zeros_like(diff)
    far = D > 0
    e[far] = diff[far] / D[far, None]
    e[~far, 0] = 1.0
    if d == 2:
        return D, np.stack([e, np.stack([-e[:, 1], e[:, 0]], axis=1)], axis=1)
    # the coordinate axis least aligned with e seeds the second vector
    seed = np.eye(3)[np.argmin(np.abs(e), axis=1)]
    u = seed - np.sum(seed * e, axis=1)[:, None] * e
    u /= np.linalg.norm(u, axis=1)[:, None]
    return D, np.stack([e, u, np.cross(e, u)], axis=1)


def _gauss(lo, hi, n):
    """Gauss-Legendre nodes/weights on [lo, hi] broadcast over the leading shape."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)[..., None]
    return half * (x + 1) + lo[..., None], half * w


def _caps(D, frame, rho, r, nt, npsi):
    """Unit directions and angular weights over the part of each sphere |y| = r inside supp phi.

    The polar angle is measured from the axis pointing at the support
    center, so the support boundary is the exact limit of each polar
    integral and the integrands stay smooth.  Shapes: r (nh, nr) ->
    directions (nh, nr, M, d), weights (nh, nr, M).
    """
    nh, nr = r.shape
    d = frame.shape[-1]
    safeD = np.where(D > 0, D, 1.0)[:, None]
    t_lo = np.where(D[:, None] > 0, (r * r + D[:, None] ** 2 - rho * rho) / (2 * r * safeD), -1.0)
    t_lo = np.clip(t_lo, -1.0, 1.0)
    e = frame[:, None, None, 0, :]
    if d == 2:
        top = np.arccos(t_lo)
        th, wt = _gauss(-top, top, nt)
        dirs = np.cos(th)[..., None] * e + np.sin(th)[..., None] * frame[:, None, None, 1, :]
        return dirs, wt
    t, wt = _gauss(t_lo, np.ones_like(t_lo), nt)
    psi = 2 * np.pi * (np.arange(npsi) + 0.5) / npsi
    st = np.sqrt(np.maximum(1 - t * t, 0.0))[..., None, None]
    side = np.cos(psi)[:, None] * frame[:, None, None, 1, :] + np.sin(psi)[:, None] * frame[:, None, None, 2, :]
    dirs = t[..., None, None] * e[:, :, :, None, :] + st * side[:, :, None]
    w = wt[..., None] * np.full(npsi, 2 * np.pi / npsi)
    return dirs.reshape(nh, nr, nt * npsi, 3), w.reshape(nh, nr, nt * npsi)


def _shell_rule(domain, holes, phi, lo, level, log_scale):
    """Points, unit directions, radii and weights over ``{lo <= r <= R} ∩ supp phi``.

    The weights omit the Jacobian ``r^(d-1)``; integrands include it, which
    lets them cancel it against the corrector slope analytically.
    """
    nr, nt, npsi = level
    R = domain.guard_radius
    rho = phi.radius
    D, frame = _frames(domain.centers[holes], phi.center)
    r_lo = np.maximum(lo, D - rho)
    r_hi = np.minimum(R, D + rho)
    empty = r_hi <= r_lo
    r_hi = np.where(empty, r_lo, r_hi)
    if log_scale:
        s_lo = np.log(np.maximum(r_lo, 1e-300))
        s_hi = np.log(np.maximum(r_hi, 1e-300))
        # graded panels in log r: widths 1, 1, 2, 4, ... going inward from r_hi
        n_pan = max(1, int(np.ceil(np.log2(max(float(np.max(s_hi - s_lo)), 1.0)))) + 1)
        cuts = np.concatenate([[0.0], 2.0 ** np.arange(n_pan - 1), [np.inf]])
        parts_s, parts_w = [], []
        for k in range(n_pan):
            a_k = np.maximum(s_hi - cuts[k + 1], s_lo)
            b_k = np.maximum(s_hi - cuts[k], s_lo)
            sk, wk = _gauss(a_k, b_k, nr)
            parts_s.append(sk)
            parts_w.append(wk)
        s = np.concatenate(parts_s, axis=1)
        r = np.exp(s)
        wr = np.concatenate(parts_w, axis=1) * r
    else:
        r, wr = _gauss(r_lo, r_hi, nr)
    wr[empty] = 0.0
    dirs, wang = _caps(D, frame, rho, np.maximum(r, 1e-300), nt, npsi)
    x = domain.centers[holes][:, None, None, :] + r[:, :, None, None] * dirs
    return x, dirs, r, wr[:, :, None] * wang


def _hole_sum(domain, holes, phi, integrand, *, inner, log_scale, rtol, max_points=500_000):
    """Adaptive per-hole integral of ``integrand`` over shells around the holes.

    ``integrand(h, r, dirs, x)`` gets hole indices (nh,), radii (nh, nr),
    unit directions and points (nh, nr, M, d) and returns (nh, nr, M) values
    already multiplied by ``r^(d-1)``.
    A hole is done once two successive levels agree to ``rtol`` times the
    larger of its own L1 mass and its share of the total L1 mass.
    """
    holes = np.asarray(holes, dtype=np.int64)
    result = np.zeros(holes.size)
    if holes.size == 0:
        return HoleSum(0.0, result, holes)
    prev = None
    floor = None
    todo = np.arange(holes.size)
    level_used = 0
    for lev, level in enumerate(LEVELS):
        per_hole = level[0] * level[1] * (level[2] if domain.dim == 3 else 1)
        chunk = max(1, max_points // per_hole)
        cur = np.zeros(todo.size)
        l1 = np.zeros(todo.size)
        for s in range(0, todo.size, chunk):
            h = holes[todo[s : s + chunk]]
            x, dirs, r, w = _shell_rule(domain, h, phi, inner(h), level, log_scale)
            f = integrand(h, r, dirs, x)
            cur[s : s + chunk] = np.sum(f * w, axis=(1, 2))
            l1[s : s + chunk] = np.sum(np.abs(f) * w, axis=(1, 2))
        if floor is None:
            floor = np.sum(l1) / holes.size
        if prev is not None:
            ok = np.abs(cur - prev) <= rtol * np.maximum(l1, floor) + 1e-300
            result[todo[ok]] = cur[ok]
            todo, cur = todo[~ok], cur[~ok]
        prev = cur
        level_used = lev
        if todo.size == 0:
            break
    if todo.size:
        raise PairingQuadratureError(
            f"{todo.size} hole integrals did not converge to rtol={rtol:g}", holes[todo]
        )
    # fixed (hole index) order keeps the sum bit-stable
    return HoleSum(float(np.sum(result)), result, holes, level_used)


def _touching_holes(domain: PerforatedDomain, phi: Bump):
    if domain.n_holes == 0:
        return np.zeros(0, dtype=np.int64)
    dist = np.linalg.norm(domain.centers - phi.center, axis=1)
    return np.flatnonzero(dist < phi.radius + domain.guard_radius)


def _family_flux(domain):
    R = domain.guard_radius
    return np.array([w0_flux(a, R, domain.dim) if a > 0 else 0.0 for a in domain.family_radius])


def _w0_local(domain, h, r):
    a = domain.radii[h][:, None]
    R = domain.guard_radius
    if domain.dim == 2:
        return np.log(r / a) / np.log(R / a)
    p = 2 - domain.dim
    return (a**p - r**p) / (a**p - R**p)


def _resolvable(domain, holes):
    bad = holes[domain.radii[holes] <= 0]
    if bad.size:
        raise ValueError(f"{bad.size} holes have zero (underflowed) radius; the corrector is undefined there")


def _radial_part(phi, x, dirs):
    return np.einsum("hrmd,hrmd->hrm", phi.grad(x), dirs)


def pairing_direct(domain: PerforatedDomain, phi: Bump, *, with_corrector: bool = False, rtol: float = 1e-8) -> HoleSum:
    """``∫ ∇w^eps · ∇v`` over the annuli, with ``v = phi`` or ``v = phi w^eps``."""
    holes = _touching_holes(domain, phi)
    _resolvable(domain, holes)
    flux = _family_flux(domain)
    d = domain.dim

    def integrand(h, r, dirs, x):
        # r^(d-1) ∂_r w0 is the constant flux
        fl = flux[domain.family[h]][:, None, None]
        radial = _radial_part(phi, x, dirs)
        if not with_corrector:
            return fl * radial
        w = _w0_local(domain, h, r)[:, :, None]
        dw = fl / (r ** (d - 1))[:, :, None]
        return fl * (w * radial + phi.value(x) * dw)

    return _hole_sum(domain, holes, phi, integrand, inner=lambda h: domain.radii[h], log_scale=True, rtol=rtol)


def _ball_terms(domain, phi, with_corrector, rtol):
    """Per hole: ``∫_B ∇q·∇v + d ∫_B v`` over the guard ball."""
    holes = _touching_holes(domain, phi)
    d = domain.dim
    if with_corrector:
        _resolvable(domain, holes)
        flux = _family_flux(domain)

        def integrand(h, r, dirs, x):
            fl = flux[domain.family[h]][:, None, None]
            w = _w0_local(domain, h, r)[:, :, None]
            val = phi.value(x)
            rd = (r ** (d - 1))[:, :, None]
            return r[:, :, None] * (rd * w * _radial_part(phi, x, dirs) + val * fl) + d * val * w * rd

        return _hole_sum(domain, holes, phi, integrand, inner=lambda h: domain.radii[h], log_scale=True, rtol=rtol)

    def integrand(h, r, dirs, x):
        rd = (r ** (d - 1))[:, :, None]
        return rd * (r[:, :, None] * _radial_part(phi, x, dirs) + d * phi.value(x))

    return _hole_sum(domain, holes, phi, integrand, inner=lambda h: np.zeros(h.size), log_scale=False, rtol=rtol)


def pairing_lawep(domain: PerforatedDomain, phi: Bump, *, with_corrector: bool = False, rtol: float = 1e-8) -> HoleSum:
    """Right-hand side of the decomposition of ``<-Δw^eps, v>`` through q^eps.

    Per family: ``(∂_r w0(R) / R) * (∫_B ∇q·∇v + d ∫_B v)`` summed over its
    guard balls.
    """
    terms = _ball_terms(domain, phi, with_corrector, rtol)
    if terms.holes.size == 0:
        return terms
    _resolvable(domain, terms.holes)
    R = domain.guard_radius
    ratio = np.array([boundary_slope_ratio(a, R, domain.dim) for a in domain.family_radius])
    per = terms.per_hole * ratio[domain.family[terms.holes]]
    return HoleSum(float(np.sum(per)), per, terms.holes, terms.level)


def pairing_inner_flux(domain: PerforatedDomain, phi: Bump, *, rtol: float = 1e-10) -> float:
    """``Σ ∂_r w0(a) ∫_{|x - x_ij| = a} phi dS``: what ``v = phi`` misses by not vanishing on holes.

    ``pairing_direct + pairing_inner_flux == pairing_lawep`` for any smooth phi.
    """
    holes = _touching_holes(domain, phi)
    holes = holes[np.linalg.norm(domain.centers[holes] - phi.center, axis=1) < phi.radius + domain.radii[holes]]
    if holes.size == 0:
        return 0.0
    _resolvable(domain, holes)
    flux = _family_flux(domain)[domain.family[holes]]
    a = domain.radii[holes]
    D, frame = _frames(domain.centers[holes], phi.center)
    prev = None
    for _, nt, npsi in LEVELS:
        dirs, wang = _caps(D, frame, phi.radius, a[:, None], nt, npsi)
        pts = domain.centers[holes][:, None, None, :] + a[:, None, None, None] * dirs
        cur = flux * np.sum(phi.value(pts) * wang, axis=(1, 2))
        if prev is not None and np.all(np.abs(cur - prev) <= rtol * np.maximum(np.abs(cur), 1e-300)):
            return float(np.sum(cur))
        prev = cur
    raise PairingQuadratureError("inner-sphere integrals did not converge", holes)


def _full_integral(phi: Bump, tol: float) -> float:
    """∫ phi over its support ball by spherical tensor quadrature."""
    d = phi.dim
    prev = None
    for nr, nang, _ in LEVELS[2:]:
        dirs, wang = sphere_rule(d, nang)
        x, w = np.polynomial.legendre.leggauss(2 * nr)
        r = 0.5 * phi.radius * (x + 1)
        wr = 0.5 * phi.radius * w * r ** (d - 1)
        pts = phi.center + r[:, None, None] * dirs[None]
        cur = float(wr @ phi.value(pts) @ wang)
        if prev is not None and abs(cur - prev) <= tol:
            return cur
        prev = cur
    return cur


def _ball_integral(phi: Bump, ball: Ball, tol: float) -> float:
    """∫ phi over a ball, in polar coordinates about the ball center.

    Each sphere is cut to the support cap exactly; the radial range is split
    where the cap turns into the full sphere, so every panel is smooth.
    """
    d = phi.dim
    c = ball.center[None]
    D, frame = _frames(c, phi.center)
    lo, hi = max(0.0, D[0] - phi.radius), min(ball.radius, D[0] + phi.radius)
    if hi <= lo:
        return 0.0
    knots = np.unique(np.clip([lo, abs(phi.radius - D[0]), hi], lo, hi))
    prev = None
    for nr, nt, npsi in LEVELS[1:]:
        cur = 0.0
        for a, b in zip(knots[:-1], knots[1:]):
            r, wr = _gauss(np.array([a]), np.array([b]), nr)
            dirs, wang = _caps(D, frame, phi.radius, r, nt, npsi)
            pts = c[:, None, None, :] + r[:, :, None, None] * dirs
            cur += float(np.sum(phi.value(pts) * (wr * r ** (d - 1))[:, :, None] * wang))
        if prev is not None and abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise PairingQuadratureError(f"ball integral did not converge to {tol:g}", np.zeros(0, dtype=np.int64))


def integrate_test_function(phi: Bump, region, tol: float = 1e-9) -> float:
    """∫_F phi for a region F (the whole support when it lies inside F)."""
    box = phi.support_box()
    state = classify_boxes(region, box.lo[None], box.hi[None], strict=False)[0]
    if state == IN:
        return _full_integral(phi, tol)
    if isinstance(region, Ball) and phi.dim in (2, 3):
        return _ball_integral(phi, region, tol)
    value, _ = integrate_over_region(phi.value, region, tol, window=box)
    return value


def pairing_limit(V: PotentialV, phi: Bump, tol: float = 1e-9) -> float:
    """``<V, phi> = Σ_k v_k ∫_{F_k} phi``."""
    total = 0.0
    for F, v in zip(V.regions, V.coefficients):
        if v:
            total += v * integrate_test_function(phi, F, tol)
    return total


def indicator_pairing(domain: PerforatedDomain, k: int, cube: Box) -> float:
    """|B_{eps,k} ∩ E|: the guard balls of family k measured inside the cube."""
    sel = np.flatnonzero(domain.family == k)
    if sel.size == 0:
        return 0.0
    R = domain.guard_radius
    c = domain.centers[sel]
    parts = ball_box_measure(c, np.full(sel.size, R), np.broadcast_to(cube.lo, c.shape), np.broadcast_to(cube.hi, c.shape))
    return float(np.sum(parts))


def indicator_limit(domain: PerforatedDomain, k: int, cube: Box, tol: float = 1e-10) -> float:
    """``(N_k |B(0,C)| / |A|) |E ∩ F_k|``."""
    fam = domain.families[k]
    dens = indicator_limit_density(fam.count, domain.C, domain.dim, domain.tiling.cell_measure)
    meas = region_measure(cube & fam.region, tol)
    return dens * meas


def indicator_pairing_mc(domain: PerforatedDomain, k: int, cube: Box, n: int, seed: int) -> float:
    """Monte-Carlo estimate of |B_{eps,k} ∩ E| (cross-check only)."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(cube.lo, cube.hi, size=(n, domain.dim))
    hole, _ = domain.locate_guard(pts)
    hit = (hole >= 0) & (domain.family[np.maximum(hole, 0)] == k) if domain.n_holes else np.zeros(n, bool)
    return float(hit.mean() * cube.volume)


def _deficit_radial(a: float, R: float, d: int) -> float:
    """S_d ∫_a^R (1 - w0)^2 r^(d-1) dr, by quadrature in log r."""
    S = sphere_area(d)
    la, lR = math.log(a), math.log(R)
    if d == 2:
        f = lambda s: ((lR - s) / (lR - la)) ** 2 * math.exp(2 * s)
    else:
        p = 2 - d
        den = a**p - R**p
        f = lambda s: ((math.exp(p * s) - R**p) / den) ** 2 * math.exp(d * s)
    val, _ = integrate.quad(f, la, lR, epsabs=0.0, epsrel=1e-12, limit=200)
    return S * val


def w_deficit_l2(domain: PerforatedDomain) -> float:
    """``||w^eps - 1||_{L^2(Omega)}`` from per-hole radial integrals.

    Holes whose centers lie outside Omega are skipped; guard balls are assumed
    to lie in Omega (true whenever the family regions sit inside Omega).
    """
    if domain.n_holes == 0:
        return 0.0
    d = domain.dim
    R = domain.guard_radius
    inside = domain.omega.contains(domain.centers)
    total = 0.0
    for k, a in enumerate(domain.family_radius):
        n = int(np.sum(inside & (domain.family == k)))
        if n == 0 or a <= 0:
            continue
        total += n * (ball_volume(d, a) + _deficit_radial(a, R, d))
    return math.sqrt(total)


def hole_avoiding_bumps(domain: PerforatedDomain, count: int = 2, *, theta: float = 0.5, subdivisions: int = 4) -> list[Bump]:
    """Bumps whose supports cross guard balls but avoid every hole.

    Candidate centers lie on the lattice refined ``subdivisions`` times per
    axis, within a few tiles of the most central hole; each candidate gets
    the radius leaving a margin of ``theta (R - a)`` outside every hole, so
    the support reaches into the nearest annulus.  Candidates whose support
    would not fit in Omega are dropped.  Bumps entering the most guard balls
    win, ties broken by larger radius; mirror images of a bump already
    taken are used only when nothing else is left.
    """
    if domain.n_holes == 0:
        return []
    # search a few tiles around the hole nearest to the centroid of all holes
    mid = domain.centers[np.argmin(np.linalg.norm(domain.centers - domain.centers.mean(axis=0), axis=1))]
    span = 1.5 * domain.eps * domain.tiling.L
    win = Box(mid - span, mid + span)
    fine = type(domain.tiling)(tuple(domain.tiling.L / subdivisions))
    cand = lattice_points_in(fine, domain.eps, win)
    cand = cand[domain.omega.contains(cand)]
    tree = cKDTree(domain.centers)
    R = domain.guard_radius
    k_near = min(8 * max(f.count for f in domain.families), domain.n_holes)
    dist, idx = tree.query(cand, k=k_near)
    dist = np.atleast_2d(dist).reshape(len(cand), -1)
    idx = np.atleast_2d(idx).reshape(len(cand), -1)
    a = domain.radii[idx]
    margin = dist - a - theta * (R - a)
    rho = margin.min(axis=1)
    to_edge = domain.omega.boundary_distance_lb(cand)
    # the nearest hole, not the boundary of Omega, must set the radius so the
    # support reaches a fraction theta into that hole's annulus
    ok = (rho > 0) & (rho < 0.999 * to_edge)
    # guard balls entered at least halfway to the margin depth
    crossed = np.sum(margin <= rho[:, None] + 0.5 * theta * (R - a), axis=1)
    order = np.lexsort((np.linalg.norm(cand - 0.5 * (win.lo + win.hi), axis=1), -rho, -crossed))
    out: list[Bump] = []
    seen: set = set()
    # first pass skips lattice-symmetric twins of a bump already taken
    for distinct in (True, False):
        for i in order:
            key = (int(crossed[i]), round(float(rho[i]), 12))
            if not ok[i] or (distinct and key in seen) or len(out) == count:
                continue
            c = cand[i]
            if any(np.linalg.norm(c - bmp.center) < 1e-12 for bmp in out):
                continue
            bmp = Bump(c, float(rho[i]), name=f"avoid{len(out)}")
            if not support_inside(bmp, domain.omega):
                continue
            out.append(bmp)
            seen.add(key)
    return out
