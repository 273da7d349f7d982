"""Box tilings of R^d and their inner/outer approximations of regions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .regions import IN, MIXED, OUT, Box, Region, classify_boxes


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise ValueError(f"scale eps must be positive, got {eps}")


@dataclass(frozen=True)
class TilingSpec:
    """Cell ``A = [0, L_1) x ... x [0, L_d)`` with lattice ``{n * L : n in Z^d}``."""

    lengths: tuple[float, ...]

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.lengths)
        if len(lengths) < 2:
            raise ValueError("tilings need dimension d >= 2")
        if any(not v > 0 for v in lengths):
            raise ValueError(f"cell lengths must be positive, got {lengths}")
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def unit(cls, d: int) -> "TilingSpec":
        return cls((1.0,) * d)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def L(self) -> np.ndarray:
        return np.asarray(self.lengths)

    def tile_bounds(self, idx, eps: float) -> tuple[np.ndarray, np.ndarray]:
        """Corners of the tiles ``eps (A + n L)`` for integer rows ``idx``.

        Both corners come from the same expression ``n * (eps L)`` so adjacent
        tiles share bit-identical faces and the tiles partition space exactly.
        """
        _check_eps(eps)
        idx = np.atleast_2d(np.asarray(idx))
        step = eps * self.L
        return idx * step, (idx + 1) * step

    def locate(self, x, eps: float) -> np.ndarray:
        """Lattice index of the tile containing each point."""
        x = np.asarray(x, dtype=float)
        step = eps * self.L
        n = np.floor(x / step).astype(np.int64)
        # floor can land one off when x sits on a face that rounds differently
        n -= (n * step > x).astype(np.int64)
        n += ((n + 1) * step <= x).astype(np.int64)
        return n

    def window_indices(self, window: Box, eps: float) -> np.ndarray:
        """All tile indices whose tile meets ``window``, lexicographic order."""
        _check_eps(eps)
        step = eps * self.L
        first = self.locate(window.lo, eps)
        last = np.ceil(window.hi / step).astype(np.int64) - 1
        last += ((last + 1) * step < window.hi).astype(np.int64)
        last -= (last * step >= window.hi).astype(np.int64)
        ranges = [np.arange(a, b + 1) for a, b in zip(first, last)]
        if any(r.size == 0 for r in ranges):
            return np.zeros((0, self.dim), dtype=np.int64)
        grid = np.meshgrid(*ranges, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)


def _window_for(E: Region, window: Box | None) -> Box | None:
    if window is not None:
        return window
    b = E.bounds()
    if b is None:
        raise ValueError("region is unbounded; pass an explicit window")
    lo, hi = b
    if np.any(hi <= lo):
        return None
    return Box(lo, hi)


def tile_states(E: Region, tiling: TilingSpec, eps: float, window: Box | None = None):
    """Indices of the tiles meeting the window and their OUT/IN/MIXED state for E."""
    _check_eps(eps)
    win = _window_for(E, window)
    if win is None:
        return np.zeros((0, tiling.dim), dtype=np.int64), np.zeros(0, dtype=np.int8)
    idx = tiling.window_indices(win, eps)
    lo, hi = tiling.tile_bounds(idx, eps)
    return idx, classify_boxes(E, lo, hi)


def lambda_minus(E: Region, tiling: TilingSpec, eps: float, window: Box | None = None) -> np.ndarray:
    """Indices ``n`` (window-limited) with ``eps (A + n L)`` contained in E."""
    idx, state = tile_states(E, tiling, eps, window)
    return idx[state == IN]


def lambda_plus(E: Region, tiling: TilingSpec, eps: float, window: Box | None = None) -> np.ndarray:
    """Indices ``n`` (window-limited) with ``eps (A + n L)`` meeting E."""
    idx, state = tile_states(E, tiling, eps, window)
    return idx[(state == IN) | (state == MIXED)]


def tile_union_measure(indices, tiling: TilingSpec, eps: float) -> float:
    """|union of the indexed tiles| = count * eps^d * |A| (tiles are disjoint)."""
    _check_eps(eps)
    count = len(np.atleast_2d(indices)) if np.size(indices) else 0
    return count * eps**tiling.dim * tiling.cell_measure


def summed_tile_volumes(indices, tiling: TilingSpec, eps: float) -> float:
    """Sum of the individual tile volumes computed from their corners."""
    if not np.size(indices):
        return 0.0
    lo, hi = tiling.tile_bounds(indices, eps)
    return float(np.sum(np.prod(hi - lo, axis=1)))


def lattice_points_in(tiling: TilingSpec, eps: float, window: Box) -> np.ndarray:
    """Tile corners ``eps n L`` lying inside the window (closed)."""
    idx = tiling.window_indices(window, eps)
    extra = np.array(list(itertools.product((0, 1), repeat=tiling.dim)))
    pts = np.unique((idx[:, None, :] + extra[None]).reshape(-1, tiling.dim), axis=0) * (eps * tiling.L)
    keep = np.all((pts >= window.lo) & (pts <= window.hi), axis=1)
    return pts[keep]


__all__ = [
    "IN",
    "MIXED",
    "OUT",
    "TilingSpec",
    "lambda_minus",
    "lambda_plus",
    "lattice_points_in",
    "summed_tile_volumes",
    "tile_states",
    "tile_union_measure",
]
