"""Regions with null boundary: open balls and half-open boxes under finite set algebra.

Every primitive has a Lebesgue-null topological boundary, so every finite
union, intersection, difference or complement of primitives has one too.

Besides point membership, regions classify axis-aligned half-open boxes
``[lo, hi)`` as fully inside, fully outside or straddling.  Classification is
exact: primitives are decided in closed form, combinations by three-valued
logic, and the leftover cases by enumerating the truth assignments of the
straddled primitives (with box subdivision when two or more boundaries cross a
box).  A box that cannot be decided this way raises
:class:`UnsupportedRegionError` instead of being guessed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

OUT, IN, MIXED, UNKNOWN = 0, 1, 2, 3

_STATE_NAMES = {OUT: "out", IN: "in", MIXED: "mixed", UNKNOWN: "unknown"}


class UnsupportedRegionError(ValueError):
    """Containment or intersection cannot be decided exactly for this region."""


def _as_points(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


class Region:
    """Base class; combine regions with ``|``, ``&``, ``-`` and ``~``."""

    dim: int

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def closure_contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def interior_contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def boundary_distance_lb(self, x) -> np.ndarray:
        """Lower bound on the distance from ``x`` to the boundary."""
        pts = _as_points(x)
        out = np.full(pts.shape[:-1], np.inf)
        for leaf in self.leaves():
            out = np.minimum(out, leaf.boundary_distance_lb(pts))
        return out

    def bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Bounding box ``(lo, hi)``, or None when the region is unbounded."""
        raise NotImplementedError

    def leaves(self) -> list["Primitive"]:
        """Distinct primitives of the expression tree, in first-seen order."""
        seen: dict[int, Primitive] = {}
        self._collect(seen)
        return list(seen.values())

    def _collect(self, seen: dict) -> None:
        raise NotImplementedError

    def _kleene(self, states: dict[int, np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def _evaluate(self, values: dict[int, np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __or__(self, other: Region) -> Region:
        return Union((self, other))

    def __and__(self, other: Region) -> Region:
        return Intersection((self, other))

    def __sub__(self, other: Region) -> Region:
        return Difference(self, other)

    def __invert__(self) -> Region:
        return Complement(self)


class Primitive(Region):
    def _collect(self, seen: dict) -> None:
        seen.setdefault(id(self), self)

    def _kleene(self, states):
        return states[id(self)]

    def _evaluate(self, values):
        return values[id(self)]

    def classify_boxes(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """States (OUT/IN/MIXED) of the half-open boxes ``[lo, hi)``, row-wise."""
        raise NotImplementedError

    def measure_in_boxes(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Exact measure of the primitive intersected with each box."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Empty(Primitive):
    dim: int

    def contains(self, x):
        return np.zeros(_as_points(x).shape[:-1], dtype=bool)

    closure_contains = contains
    interior_contains = contains

    def boundary_distance_lb(self, x):
        return np.full(_as_points(x).shape[:-1], np.inf)

    def bounds(self):
        return np.zeros(self.dim), np.zeros(self.dim)

    def classify_boxes(self, lo, hi):
        return np.full(len(lo), OUT, dtype=np.int8)

    def measure_in_boxes(self, lo, hi):
        return np.zeros(len(lo))

    def to_dict(self):
        return {"type": "empty", "dim": self.dim}


@dataclass(frozen=True, eq=False)
class Ball(Primitive):
    """Open ball ``{x : |x - center| < radius}``."""

    center: np.ndarray
    radius: float
    dim: int = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("ball center must be a 1-D point")
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "dim", c.size)

    def _dist(self, x):
        return np.linalg.norm(_as_points(x) - self.center, axis=-1)

    def contains(self, x):
        return self._dist(x) < self.radius

    interior_contains = contains

    def closure_contains(self, x):
        return self._dist(x) <= self.radius

    def boundary_distance_lb(self, x):
        return np.abs(self._dist(x) - self.radius)

    def bounds(self):
        return self.center - self.radius, self.center + self.radius

    def classify_boxes(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        c = self.center
        r2 = self.radius**2
        near = np.clip(c, lo, hi) - c
        near2 = np.sum(near * near, axis=-1)
        dlo = np.abs(lo - c)
        dhi = np.abs(hi - c)
        far2 = np.sum(np.maximum(dlo, dhi) ** 2, axis=-1)
        # sup of |x - c| over [lo, hi) is attained only if every farthest
        # coordinate can be taken on the closed (lo) side
        unattained = np.any(dhi > dlo, axis=-1)
        inside = (far2 < r2) | ((far2 == r2) & unattained)
        state = np.full(len(lo), MIXED, dtype=np.int8)
        state[near2 >= r2] = OUT
        state[inside] = IN
        return state

    def measure_in_boxes(self, lo, hi):
        from .measure import ball_box_measure

        n = len(lo)
        return ball_box_measure(
            np.broadcast_to(self.center, (n, self.dim)),
            np.full(n, self.radius),
            lo,
            hi,
        )

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box(Primitive):
    """Half-open axis box ``[lo, hi)``."""

    lo: np.ndarray
    hi: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box corners must be 1-D points of equal length")
        if np.any(hi <= lo):
            raise ValueError(f"degenerate box [{lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "dim", lo.size)

    @classmethod
    def cube(cls, corner: Sequence[float], side: float) -> "Box":
        corner = np.asarray(corner, dtype=float)
        return cls(corner, corner + side)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, x):
        x = _as_points(x)
        return np.all((x >= self.lo) & (x < self.hi), axis=-1)

    def closure_contains(self, x):
        x = _as_points(x)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def interior_contains(self, x):
        x = _as_points(x)
        return np.all((x > self.lo) & (x < self.hi), axis=-1)

    def boundary_distance_lb(self, x):
        x = _as_points(x)
        # distance to the box surface, inside or outside
        outside = np.linalg.norm(np.maximum(np.maximum(self.lo - x, x - self.hi), 0.0), axis=-1)
        inside = np.min(np.minimum(x - self.lo, self.hi - x), axis=-1)
        return np.where(outside > 0, outside, np.maximum(inside, 0.0))

    def bounds(self):
        return self.lo.copy(), self.hi.copy()

    def classify_boxes(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        inside = np.all((lo >= self.lo) & (hi <= self.hi), axis=-1)
        meets = np.all((lo < self.hi) & (self.lo < hi), axis=-1)
        state = np.full(len(lo), MIXED, dtype=np.int8)
        state[~meets] = OUT
        state[inside] = IN
        return state

    def measure_in_boxes(self, lo, hi):
        ext = np.minimum(hi, self.hi) - np.maximum(lo, self.lo)
        return np.prod(np.maximum(ext, 0.0), axis=-1)

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


def _k_not(s):
    out = s.copy()
    out[s == IN] = OUT
    out[s == OUT] = IN
    return out


def _k_or(a, b):
    out = np.full_like(a, UNKNOWN)
    out[a == OUT] = b[a == OUT]
    out[b == OUT] = a[b == OUT]
    out[(a == IN) | (b == IN)] = IN
    return out


def _k_and(a, b):
    out = np.full_like(a, UNKNOWN)
    out[a == IN] = b[a == IN]
    out[b == IN] = a[b == IN]
    out[(a == OUT) | (b == OUT)] = OUT
    return out


@dataclass(frozen=True, eq=False)
class Complement(Region):
    of: Region

    @property
    def dim(self):
        return self.of.dim

    def contains(self, x):
        return ~self.of.contains(x)

    def closure_contains(self, x):
        return ~self.of.interior_contains(x)

    def interior_contains(self, x):
        return ~self.of.closure_contains(x)

    def bounds(self):
        return None

    def _collect(self, seen):
        self.of._collect(seen)

    def _kleene(self, states):
        return _k_not(self.of._kleene(states))

    def _evaluate(self, values):
        return np.logical_not(self.of._evaluate(values))

    def to_dict(self):
        return {"type": "complement", "of": self.of.to_dict()}


@dataclass(frozen=True, eq=False)
class Union(Region):
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("union of nothing")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self):
        return self.parts[0].dim

    def contains(self, x):
        return np.logical_or.reduce([p.contains(x) for p in self.parts])

    def closure_contains(self, x):
        return np.logical_or.reduce([p.closure_contains(x) for p in self.parts])

    def interior_contains(self, x):
        return np.logical_or.reduce([p.interior_contains(x) for p in self.parts])

    def bounds(self):
        bs = [p.bounds() for p in self.parts]
        if any(b is None for b in bs):
            return None
        return np.min([b[0] for b in bs], axis=0), np.max([b[1] for b in bs], axis=0)

    def _collect(self, seen):
        for p in self.parts:
            p._collect(seen)

    def _kleene(self, states):
        out = self.parts[0]._kleene(states)
        for p in self.parts[1:]:
            out = _k_or(out, p._kleene(states))
        return out

    def _evaluate(self, values):
        return np.logical_or.reduce([p._evaluate(values) for p in self.parts])

    def to_dict(self):
        return {"type": "union", "of": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class Intersection(Region):
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("intersection of nothing")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self):
        return self.parts[0].dim

    def contains(self, x):
        return np.logical_and.reduce([p.contains(x) for p in self.parts])

    def closure_contains(self, x):
        return np.logical_and.reduce([p.closure_contains(x) for p in self.parts])

    def interior_contains(self, x):
        return np.logical_and.reduce([p.interior_contains(x) for p in self.parts])

    def bounds(self):
        bs = [p.bounds() for p in self.parts if p.bounds() is not None]
        if not bs:
            return None
        lo = np.max([b[0] for b in bs], axis=0)
        hi = np.min([b[1] for b in bs], axis=0)
        return lo, np.maximum(hi, lo)

    def _collect(self, seen):
        for p in self.parts:
            p._collect(seen)

    def _kleene(self, states):
        out = self.parts[0]._kleene(states)
        for p in self.parts[1:]:
            out = _k_and(out, p._kleene(states))
        return out

    def _evaluate(self, values):
        return np.logical_and.reduce([p._evaluate(values) for p in self.parts])

    def to_dict(self):
        return {"type": "intersection", "of": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class Difference(Region):
    base: Region
    removed: Region

    @property
    def dim(self):
        return self.base.dim

    def contains(self, x):
        return self.base.contains(x) & ~self.removed.contains(x)

    def closure_contains(self, x):
        return self.base.closure_contains(x) & ~self.removed.interior_contains(x)

    def interior_contains(self, x):
        return self.base.interior_contains(x) & ~self.removed.closure_contains(x)

    def bounds(self):
        return self.base.bounds()

    def _collect(self, seen):
        self.base._collect(seen)
        self.removed._collect(seen)

    def _kleene(self, states):
        return _k_and(self.base._kleene(states), _k_not(self.removed._kleene(states)))

    def _evaluate(self, values):
        return np.logical_and(self.base._evaluate(values), np.logical_not(self.removed._evaluate(values)))

    def to_dict(self):
        return {"type": "difference", "of": [self.base.to_dict(), self.removed.to_dict()]}


def everything(dim: int) -> Region:
    """All of R^d."""
    return Complement(Empty(dim))


def region_from_dict(spec: dict, dim: int | None = None) -> Region:
    """Build a region from its JSON description."""
    kind = spec.get("type")
    if kind == "ball":
        return Ball(spec["center"], spec["radius"])
    if kind == "box":
        return Box(spec["lo"], spec["hi"])
    if kind == "cube":
        return Box.cube(spec["corner"], spec["side"])
    if kind == "empty":
        return Empty(int(spec.get("dim", dim)))
    if kind == "all":
        return everything(int(spec.get("dim", dim)))
    if kind == "complement":
        return Complement(region_from_dict(spec["of"], dim))
    if kind in ("union", "intersection"):
        parts = tuple(region_from_dict(p, dim) for p in spec["of"])
        return Union(parts) if kind == "union" else Intersection(parts)
    if kind == "difference":
        base, removed = spec["of"]
        return Difference(region_from_dict(base, dim), region_from_dict(removed, dim))
    raise ValueError(f"unknown region type {kind!r}")


# --- box classification ---------------------------------------------------


@dataclass
class _Decision:
    """How a region meets one box when its leaf states are fixed."""

    state: int
    leaf: Primitive | None = None  # the single straddled leaf, if any
    direct: bool = True  # region ∩ box == leaf ∩ box (else box \ leaf)


def _decide(region: Region, leaves: list[Primitive], states: Sequence[int]) -> _Decision:
    mixed = [lf for lf, s in zip(leaves, states) if s == MIXED]
    k = len(mixed)
    values = {}
    for lf, s in zip(leaves, states):
        if s != MIXED:
            values[id(lf)] = np.full(2**k, s == IN)
    table = np.array(list(itertools.product([False, True], repeat=k)), dtype=bool).reshape(2**k, k)
    for j, lf in enumerate(mixed):
        values[id(lf)] = table[:, j]
    res = np.asarray(region._evaluate(values))
    if res.all():
        return _Decision(IN)
    if not res.any():
        return _Decision(OUT)
    if k == 1:
        # res is (f(False), f(True)); non-constant means the leaf splits the box
        return _Decision(MIXED, mixed[0], bool(res[1]))
    return _Decision(UNKNOWN)


def _leaf_states(region: Region, lo, hi):
    leaves = region.leaves()
    per_leaf = np.stack([lf.classify_boxes(lo, hi) for lf in leaves], axis=1)
    return leaves, per_leaf


def resolve_boxes(region: Region, lo: np.ndarray, hi: np.ndarray):
    """Kleene states plus exact decisions for the rows Kleene logic leaves open.

    Returns ``(state, groups)``; ``groups`` is a list of ``(rows, decision)``
    pairs, one per distinct leaf-state signature among the open rows, so each
    truth table is built once.
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    leaves, per_leaf = _leaf_states(region, lo, hi)
    state = region._kleene({id(lf): per_leaf[:, j] for j, lf in enumerate(leaves)}).astype(np.int8)
    groups: list[tuple[np.ndarray, _Decision]] = []
    open_rows = np.flatnonzero((state == UNKNOWN) | (state == MIXED))
    if open_rows.size:
        sigs, inverse = np.unique(per_leaf[open_rows], axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        for g, sig in enumerate(sigs):
            dec = _decide(region, leaves, sig)
            rows = open_rows[inverse == g]
            state[rows] = dec.state
            groups.append((rows, dec))
    return state, groups


def _split(lo, hi):
    """Children of each box under one bisection per axis, row-major."""
    d = lo.shape[1]
    mid = 0.5 * (lo + hi)
    clo, chi = [], []
    for bits in itertools.product([0, 1], repeat=d):
        b = np.array(bits, dtype=bool)
        clo.append(np.where(b, mid, lo))
        chi.append(np.where(b, hi, mid))
    return np.stack(clo, axis=1).reshape(-1, d), np.stack(chi, axis=1).reshape(-1, d)


def classify_boxes(region: Region, lo, hi, *, max_depth: int = 12, strict: bool = True) -> np.ndarray:
    """Exact OUT/IN/MIXED state of each half-open box ``[lo, hi)``.

    Boxes that two or more primitive boundaries cross are bisected up to
    ``max_depth`` times.  If a box is still undecided then, it raises
    :class:`UnsupportedRegionError` (or reports UNKNOWN when ``strict`` is off).
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    state, _ = resolve_boxes(region, lo, hi)
    todo = np.flatnonzero(state == UNKNOWN)
    if todo.size and max_depth > 0:
        n_child = 2 ** lo.shape[1]
        clo, chi = _split(lo[todo], hi[todo])
        child = classify_boxes(region, clo, chi, max_depth=max_depth - 1, strict=False).reshape(-1, n_child)
        all_in = np.all(child == IN, axis=1)
        all_out = np.all(child == OUT, axis=1)
        has_in = np.any((child == IN) | (child == MIXED), axis=1)
        has_out = np.any((child == OUT) | (child == MIXED), axis=1)
        sub = np.full(todo.size, UNKNOWN, dtype=np.int8)
        sub[has_in & has_out] = MIXED
        sub[all_in] = IN
        sub[all_out] = OUT
        state[todo] = sub
    if strict and np.any(state == UNKNOWN):
        bad = np.flatnonzero(state == UNKNOWN)[0]
        raise UnsupportedRegionError(
            f"cannot decide how the region meets box [{lo[bad]}, {hi[bad]}) "
            "with the ball/box predicate algebra"
        )
    return state


def state_name(state: int) -> str:
    return _STATE_NAMES[int(state)]
