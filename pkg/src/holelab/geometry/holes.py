"""Hole families, the critical radius schedule and instantiated perforated domains."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .measure import ball_volume
from .regions import Box, Region
from .tiling import TilingSpec, lambda_minus


class FeasibilityWarning(UserWarning):
    """A hole radius is not below its guard radius C*eps."""


class HolePlacementError(ValueError):
    """Hole families violate the placement assumptions."""


def critical_radius(mu: float, eps: float, d: int, C: float | None = None) -> float:
    """Hole radius for which ``eps^-d * cap(a)`` equals ``mu`` at this very eps.

    ``cap(a)`` is ``1 / (-log a)`` in the plane and ``a^(d-2)`` for d >= 3.
    A zero density gives radius 0 (the family then contributes no holes).
    In the plane the radius underflows to 0.0 once ``1 / (mu eps^2)`` exceeds
    about 745.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if mu < 0:
        raise ValueError(f"density must be >= 0, got {mu}")
    if mu == 0:
        return 0.0
    if d == 2:
        a = math.exp(-1.0 / (mu * eps * eps))
    else:
        a = (mu * eps**d) ** (1.0 / (d - 2))
    if C is not None and a >= C * eps:
        warnings.warn(
            f"critical radius {a:.6g} >= C*eps = {C * eps:.6g} (mu={mu}, eps={eps}, d={d}); holes would not fit their guard balls",
            FeasibilityWarning,
            stacklevel=2,
        )
    return a


def capacity_scaled(a: float, eps: float, d: int) -> float:
    """``eps^-d (-log a)^-1`` (d = 2) or ``eps^-d a^(d-2)``; inverse of critical_radius."""
    if d == 2:
        return eps ** (-d) / (-math.log(a))
    return eps ** (-d) * a ** (d - 2)


@dataclass(frozen=True)
class HoleFamily:
    """Holes concentrated on ``region``: ``count`` holes per tile at ``pattern``.

    ``pattern`` rows are tile-relative positions in the open unit cell; the
    actual center in tile ``n`` is ``eps * (n + p) * L``.
    """

    region: Region
    count: int
    mu: float
    pattern: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.pattern, dtype=float))
        if self.count < 1:
            raise HolePlacementError(f"hole count must be a positive integer, got {self.count}")
        if p.shape != (self.count, self.region.dim):
            raise HolePlacementError(f"pattern must have shape ({self.count}, {self.region.dim}), got {p.shape}")
        if np.any((p <= 0) | (p >= 1)):
            raise HolePlacementError("pattern points must lie in the open unit cell")
        if self.mu < 0:
            raise HolePlacementError(f"density must be >= 0, got {self.mu}")
        object.__setattr__(self, "pattern", p)
        object.__setattr__(self, "mu", float(self.mu))


def check_cell_capacity(families, tiling: TilingSpec, C: float) -> list[str]:
    """Messages for every family with ``N_k |B(0, C)| >= |A|``."""
    problems = []
    vol = ball_volume(tiling.dim, C)
    for k, fam in enumerate(families):
        if not tiling.cell_measure > fam.count * vol:
            problems.append(
                f"family {k}: |A| = {tiling.cell_measure:g} must exceed N_k |B(0,C)| = {fam.count * vol:g}"
            )
    return problems


def check_pattern(fam: HoleFamily, tiling: TilingSpec, C: float) -> list[str]:
    """Guard balls of radius C around ``p * L`` must be disjoint and inside the open cell."""
    problems = []
    pts = fam.pattern * tiling.L
    gap = np.minimum(pts, tiling.L - pts)
    for j in np.flatnonzero(np.any(gap <= C, axis=1)):
        problems.append(f"pattern point {fam.pattern[j].tolist()} has its guard ball outside the open cell")
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if np.linalg.norm(pts[i] - pts[j]) <= 2 * C:
                problems.append(f"guard balls of pattern points {i} and {j} overlap")
    return problems


@dataclass
class PerforatedDomain:
    """Omega minus the closed holes at one scale eps.

    Holes are stored family by family, tile by tile (lexicographic), slot by
    slot; holes of one tile are consecutive.
    """

    omega: Region
    tiling: TilingSpec
    families: list
    eps: float
    C: float
    centers: np.ndarray
    radii: np.ndarray
    family: np.ndarray
    tiles: np.ndarray
    family_radius: np.ndarray = field(repr=False)

    def __post_init__(self):
        self._build_lookup()

    @property
    def dim(self) -> int:
        return self.tiling.dim

    @property
    def guard_radius(self) -> float:
        return self.C * self.eps

    @property
    def n_holes(self) -> int:
        return len(self.radii)

    def _build_lookup(self):
        d = self.dim
        if self.n_holes == 0:
            self._offset = np.zeros(d, dtype=np.int64)
            self._first = np.full((1,) * d, -1, dtype=np.int64)
            return
        self._offset = self.tiles.min(axis=0)
        shape = tuple(self.tiles.max(axis=0) - self._offset + 1)
        first = np.full(shape, -1, dtype=np.int64)
        rel = self.tiles - self._offset
        # reversed assignment leaves the lowest hole index of each tile
        order = np.arange(self.n_holes)[::-1]
        first[tuple(rel[order].T)] = order
        self._first = first
        self._max_count = max(f.count for f in self.families)

    def locate_guard(self, x):
        """Hole index whose guard ball B(center, C eps) contains x (-1 if none), and the distance."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        pts = x.reshape(-1, self.dim)
        hole = np.full(len(pts), -1, dtype=np.int64)
        dist = np.full(len(pts), np.inf)
        if self.n_holes:
            rel = self.tiling.locate(pts, self.eps) - self._offset
            ok = np.all((rel >= 0) & (rel < np.array(self._first.shape)), axis=1)
            first = np.full(len(pts), -1, dtype=np.int64)
            first[ok] = self._first[tuple(rel[ok].T)]
            R = self.guard_radius
            for j in range(self._max_count):
                cand = first + j
                valid = first >= 0
                valid[valid] &= cand[valid] < self.n_holes
                valid[valid] &= np.all(self.tiles[cand[valid]] == rel[valid] + self._offset, axis=1)
                if not valid.any():
                    continue
                dj = np.linalg.norm(pts[valid] - self.centers[cand[valid]], axis=1)
                hit = dj < R
                rows = np.flatnonzero(valid)[hit]
                hole[rows] = cand[valid][hit]
                dist[rows] = dj[hit]
        return hole.reshape(shape), dist.reshape(shape)

    def in_holes(self, x) -> np.ndarray:
        """Membership in the closed holes T_eps."""
        hole, dist = self.locate_guard(x)
        safe = np.where(hole >= 0, hole, 0)
        return (hole >= 0) & (dist <= self.radii[safe] if self.n_holes else False)

    def contains(self, x) -> np.ndarray:
        """Membership in Omega_eps = Omega minus T_eps."""
        return self.omega.contains(x) & ~self.in_holes(x)

    def check_invariants(self) -> list[str]:
        """Exhaustive placement checks; returns the list of violations."""
        problems = []
        R = self.guard_radius
        if self.n_holes == 0:
            return problems
        if np.any(self.radii >= R):
            problems.append("some hole radius is not below C*eps")
        lo, hi = self.tiling.tile_bounds(self.tiles, self.eps)
        if np.any(self.centers - R <= lo) or np.any(self.centers + R >= hi):
            problems.append("some guard ball leaves its tile")
        for k, fam in enumerate(self.families):
            sel = self.family == k
            if sel.any():
                inside = lambda_minus(fam.region, self.tiling, self.eps, Box(lo[sel].min(0), hi[sel].max(0)))
                have = {tuple(t) for t in inside}
                if any(tuple(t) not in have for t in self.tiles[sel]):
                    problems.append(f"family {k} has holes in tiles not contained in its region")
        tree = cKDTree(self.centers)
        pairs = tree.query_pairs(2 * R * (1 - 1e-12))
        if pairs:
            problems.append(f"{len(pairs)} pairs of guard balls overlap")
        return problems


def instantiate_holes(families, tiling: TilingSpec, omega: Region, eps: float, C: float) -> PerforatedDomain:
    """Place every family's holes in the tiles of its region meeting Omega's bounding box."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    d = tiling.dim
    problems = check_cell_capacity(families, tiling, C)
    for fam in families:
        if fam.region.dim != d:
            problems.append("family region dimension differs from the tiling dimension")
        problems.extend(check_pattern(fam, tiling, C))
    radii_k = np.array([critical_radius(f.mu, eps, d) for f in families])
    for k, a in enumerate(radii_k):
        if families[k].mu > 0 and a >= C * eps:
            problems.append(f"family {k}: hole radius {a:.6g} is not below C*eps = {C * eps:.6g}")
    if problems:
        raise HolePlacementError("; ".join(problems))
    b = omega.bounds()
    if b is None:
        raise ValueError("Omega must be bounded")
    window = Box(*b)
    centers, radii, fam_idx, tiles = [], [], [], []
    seen: set = set()
    step = eps * tiling.L
    for k, fam in enumerate(families):
        if fam.mu == 0:
            continue
        idx = lambda_minus(fam.region, tiling, eps, window)
        keys = {tuple(t) for t in idx}
        if keys & seen:
            raise HolePlacementError(f"family {k} shares tiles with an earlier family; regions must have disjoint closures")
        seen |= keys
        lo = idx * step
        c = lo[:, None, :] + fam.pattern[None] * step
        centers.append(c.reshape(-1, d))
        radii.append(np.full(len(idx) * fam.count, radii_k[k]))
        fam_idx.append(np.full(len(idx) * fam.count, k))
        tiles.append(np.repeat(idx, fam.count, axis=0))
    if centers:
        centers_a = np.concatenate(centers)
        radii_a = np.concatenate(radii)
        fam_a = np.concatenate(fam_idx).astype(np.int64)
        tiles_a = np.concatenate(tiles).astype(np.int64)
    else:
        centers_a = np.zeros((0, d))
        radii_a = np.zeros(0)
        fam_a = np.zeros(0, dtype=np.int64)
        tiles_a = np.zeros((0, d), dtype=np.int64)
    return PerforatedDomain(omega, tiling, list(families), float(eps), float(C), centers_a, radii_a, fam_a, tiles_a, radii_k)
