"""Measures of balls intersected with boxes, and of general regions.

``ball_box_measure`` is exact in the plane (closed form) and, for d >= 3,
integrates exact (d-1)-dimensional slices along the last axis.  The slice
measure is only non-smooth where the slice radius equals the distance from the
projected center to a face of the box; integration is split at those heights
and each piece is mapped by ``z = z0 + (z1 - z0) sin^2(pi t / 2)`` which turns
the half-integer endpoint singularities into analytic ones, so fixed-order
Gauss-Legendre is accurate to rounding.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .regions import IN, MIXED, UNKNOWN, Box, Region, _split, resolve_boxes


class QuadratureBudgetError(RuntimeError):
    """Cell subdivision ran out of budget before reaching the tolerance."""


def ball_volume(d: int, r: float = 1.0) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d


def _interval_len(c, r, lo, hi):
    return np.maximum(0.0, np.minimum(c + r, hi) - np.maximum(c - r, lo))


def _disk_quadrant(x, y, r):
    """Area of the disk |p| < r below-left of (x, y), i.e. {p_x < x, p_y < y}."""
    safe_r = np.where(r > 0, r, 1.0)

    def prim(t):
        s = np.sqrt(np.maximum(r * r - t * t, 0.0))
        return 0.5 * (t * s + r * r * np.arcsin(np.clip(t / safe_r, -1.0, 1.0)))

    def seg(a, b):
        return np.where(b > a, prim(b) - prim(a), 0.0)

    xc = np.clip(x, -r, r)
    base = seg(-r, xc)
    ts = np.sqrt(np.maximum(r * r - y * y, 0.0))
    sgn = np.sign(y)
    chord = sgn * (seg(-r, np.minimum(xc, -ts)) + seg(ts, xc)) + y * np.maximum(0.0, np.minimum(xc, ts) + ts)
    second = np.where(np.abs(y) >= r, sgn * base, chord)
    return np.where(r > 0, base + second, 0.0)


def _disk_rect(c, r, lo, hi):
    x0, y0 = lo[..., 0] - c[..., 0], lo[..., 1] - c[..., 1]
    x1, y1 = hi[..., 0] - c[..., 0], hi[..., 1] - c[..., 1]
    area = _disk_quadrant(x1, y1, r) - _disk_quadrant(x0, y1, r) - _disk_quadrant(x1, y0, r) + _disk_quadrant(x0, y0, r)
    empty = np.any(hi <= lo, axis=-1)
    return np.where(empty, 0.0, np.maximum(area, 0.0))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _sliced(c, r, lo, hi):
    # c, lo, hi: (n, d); r: (n,)
    d = c.shape[-1]
    cz, lz, hz = c[:, -1], lo[:, -1], hi[:, -1]
    z0 = np.maximum(lz, cz - r)
    z1 = np.minimum(hz, cz + r)
    # radii at which the inner slice measure is non-smooth
    inner = []
    for choice in itertools.product((None, 0, 1), repeat=d - 1):
        sq = np.zeros_like(r)
        for j, ch in enumerate(choice):
            if ch is not None:
                b = lo[:, j] if ch == 0 else hi[:, j]
                sq = sq + (b - c[:, j]) ** 2
        inner.append(sq)
    brk = [z0, z1]
    for sq in inner:
        h = np.sqrt(np.maximum(r * r - sq, 0.0))
        brk.append(np.clip(cz - h, z0, z1))
        brk.append(np.clip(cz + h, z0, z1))
    zs = np.sort(np.stack(brk, axis=1), axis=1)
    a, b = zs[:, :-1], zs[:, 1:]  # (n, p)
    t = 0.5 * (_GL_NODES + 1.0)
    s = np.sin(0.5 * np.pi * t) ** 2
    ds = 0.5 * np.pi * np.sin(np.pi * t) * 0.5  # d s / d(node)
    z = a[..., None] + (b - a)[..., None] * s  # (n, p, q)
    jac = (b - a)[..., None] * ds * _GL_WEIGHTS
    rho = np.sqrt(np.maximum(r[:, None, None] ** 2 - (z - cz[:, None, None]) ** 2, 0.0))
    n, p, q = z.shape
    rep = lambda arr: np.broadcast_to(arr[:, None, None, :-1], (n, p, q, d - 1)).reshape(-1, d - 1)
    sl = ball_box_measure(rep(c), rho.reshape(-1), rep(lo), rep(hi)).reshape(n, p, q)
    total = np.sum(sl * jac, axis=(1, 2))
    return np.where(z1 > z0, total, 0.0)


def ball_box_measure(center, radius, lo, hi) -> np.ndarray:
    """Measure of ``B(center, radius) ∩ [lo, hi)``, vectorised over rows.

    >>> float(ball_box_measure([[0.0, 0.0]], [1.0], [[0.0, 0.0]], [[2.0, 2.0]])[0]) * 4 - math.pi < 1e-15
    True
    """
    c = np.atleast_2d(np.asarray(center, dtype=float))
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    r = np.atleast_1d(np.asarray(radius, dtype=float))
    n = max(len(c), len(lo), len(r))
    c, lo, hi = (np.broadcast_to(v, (n, v.shape[-1])) for v in (c, lo, hi))
    r = np.broadcast_to(r, (n,))
    d = c.shape[-1]
    if d == 1:
        return _interval_len(c[:, 0], r, lo[:, 0], hi[:, 0])
    if d == 2:
        return _disk_rect(c, r, lo, hi)
    out = np.zeros(n)
    # whole-ball and disjoint rows need no slicing
    near = np.clip(c, lo, hi) - c
    disjoint = np.sum(near * near, axis=-1) >= r * r
    far = np.maximum(np.abs(lo - c), np.abs(hi - c))
    whole = np.sum(far * far, axis=-1) <= r * r
    inside = np.all((c - r[:, None] >= lo) & (c + r[:, None] <= hi), axis=-1)
    out[whole] = np.prod(hi[whole] - lo[whole], axis=-1)
    out[inside & ~whole] = [ball_volume(d, rr) for rr in r[inside & ~whole]]
    rest = ~(disjoint | whole | inside)
    if rest.any():
        out[rest] = _sliced(c[rest], r[rest], lo[rest], hi[rest])
    return out


def _initial_cells(lo, hi, per_axis: int):
    d = lo.size
    ticks = [np.linspace(lo[j], hi[j], per_axis + 1) for j in range(d)]
    idx = np.array(list(itertools.product(range(per_axis), repeat=d)))
    clo = np.stack([ticks[j][idx[:, j]] for j in range(d)], axis=1)
    chi = np.stack([ticks[j][idx[:, j] + 1] for j in range(d)], axis=1)
    return clo, chi


def region_measure(region: Region, tol: float | None = None, *, window: Box | None = None, max_cells: int = 2_000_000) -> float:
    """|E| (restricted to ``window`` if given) with absolute error at most ``tol``.

    ``tol`` defaults to 1e-6 times the measure of the bounding box.  Cells
    straddled by a single primitive are measured exactly; only cells crossed
    by two or more boundaries are subdivided, and whatever volume remains
    unresolved is split evenly, so the returned value is within half the
    unresolved volume of the truth.
    """
    if window is not None:
        region = region & window
    b = region.bounds()
    if b is None:
        raise ValueError("region_measure needs a bounded region (or a window)")
    lo, hi = b
    if np.any(hi <= lo):
        return 0.0
    box_vol = float(np.prod(hi - lo))
    if tol is None:
        tol = 1e-6 * box_vol
    if tol <= 0:
        raise ValueError("tol must be positive")
    clo, chi = _initial_cells(lo, hi, 1)
    total = 0.0
    cells = 0
    while True:
        vol = np.prod(chi - clo, axis=-1)
        state, groups = resolve_boxes(region, clo, chi)
        total += float(np.sum(vol[state == IN]))
        for rows, dec in groups:
            if dec.state == MIXED:
                part = dec.leaf.measure_in_boxes(clo[rows], chi[rows])
                total += float(np.sum(part if dec.direct else vol[rows] - part))
        pending = state == UNKNOWN
        unresolved = float(np.sum(vol[pending]))
        if unresolved <= 2 * tol:
            return total + 0.5 * unresolved
        cells += int(pending.sum()) * 2 ** lo.size
        if cells > max_cells:
            raise QuadratureBudgetError(
                f"measure not resolved to {tol:g}: {unresolved:g} of volume still undecided after {cells} cells"
            )
        clo, chi = _split(clo[pending], chi[pending])


def _gauss_cells(func, clo, chi, order):
    d = clo.shape[1]
    x, w = np.polynomial.legendre.leggauss(order)
    grids = np.array(list(itertools.product(range(order), repeat=d)))
    unit = 0.5 * (x[grids] + 1.0)  # (m, d)
    wts = np.prod(w[grids], axis=1) * 0.5**d
    out = np.empty(len(clo))
    step = max(1, 2_000_000 // len(unit))  # bounded memory per batch
    for s in range(0, len(clo), step):
        lo, hi = clo[s : s + step], chi[s : s + step]
        pts = lo[:, None, :] + (hi - lo)[:, None, :] * unit[None]
        vals = func(pts.reshape(-1, d)).reshape(len(lo), -1)
        out[s : s + step] = np.prod(hi - lo, axis=1) * (vals @ wts)
    return out


def integrate_over_region(func, region: Region, tol: float, *, window: Box | None = None, order: int = 6, max_cells: int = 400_000) -> tuple[float, float]:
    """Integral of a smooth ``func`` over a region, with an error estimate.

    Cells inside the region get tensor Gauss-Legendre rules of orders
    ``order`` and ``2 * order``; cells whose two rules disagree by more than
    their share of ``tol`` are bisected, as are cells the region's boundary
    crosses.  Boundary cells still open when the remaining error bound
    (their volume times ``max |func|`` there) is below ``tol`` are charged the
    midpoint value times the exact intersected measure.

    Returns ``(value, error_estimate)``.
    """
    if window is not None:
        region = region & window
    b = region.bounds()
    if b is None:
        raise ValueError("integration needs a bounded region (or a window)")
    lo, hi = b
    if np.any(hi <= lo):
        return 0.0, 0.0
    d = lo.size
    clo, chi = _initial_cells(lo, hi, 2)
    total, err = 0.0, 0.0
    cells = len(clo)
    while len(clo):
        vol = np.prod(chi - clo, axis=-1)
        state, groups = resolve_boxes(region, clo, chi)
        refine = np.zeros(len(clo), dtype=bool)
        inside = np.flatnonzero(state == IN)
        if inside.size:
            coarse = _gauss_cells(func, clo[inside], chi[inside], order)
            fine = _gauss_cells(func, clo[inside], chi[inside], 2 * order)
            diff = np.abs(fine - coarse)
            share = tol * vol[inside] / np.prod(hi - lo)
            ok = diff <= share
            total += float(np.sum(fine[ok]))
            err += float(np.sum(diff[ok]))
            refine[inside[~ok]] = True
        edge = np.flatnonzero((state == MIXED) | (state == UNKNOWN))
        if edge.size:
            corners = np.array(list(itertools.product([0.0, 1.0], repeat=d)))
            samp = clo[edge][:, None, :] + (chi - clo)[edge][:, None, :] * corners[None]
            fs = func(samp.reshape(-1, d)).reshape(len(edge), -1)
            fmid = func(0.5 * (clo[edge] + chi[edge]))
            fs = np.concatenate([fs, fmid[:, None]], axis=1)
            osc = np.max(fs, axis=1) - np.min(fs, axis=1)
            fmax = np.max(np.abs(fs), axis=1)
            # exact measure where one primitive splits the cell, else unresolved
            meas = 0.5 * vol[edge]
            bound = vol[edge] * fmax
            pos = np.full(len(clo), -1)
            pos[edge] = np.arange(edge.size)
            for rows, dec in groups:
                if dec.state == MIXED:
                    part = dec.leaf.measure_in_boxes(clo[rows], chi[rows])
                    part = part if dec.direct else vol[rows] - part
                    meas[pos[rows]] = part
                    bound[pos[rows]] = part * osc[pos[rows]]
            if np.sum(bound) <= tol or cells >= max_cells:
                total += float(np.sum(fmid * meas))
                err += float(np.sum(bound))
                if np.sum(bound) > tol:
                    raise QuadratureBudgetError(f"integral not resolved to {tol:g} within {max_cells} cells")
            else:
                refine[edge] = True
        if not refine.any():
            break
        cells += int(refine.sum()) * 2**d
        if cells > max_cells:
            raise QuadratureBudgetError(f"integral not resolved to {tol:g} within {max_cells} cells")
        clo, chi = _split(clo[refine], chi[refine])
    return total, err
