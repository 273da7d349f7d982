"""Finite-difference Poisson solves on perforated and homogenized domains.

Fields live on the full node array of a uniform grid over Omega's bounding
box; fixed (Dirichlet) nodes hold zero.  The operator is the matrix-free
2d+1-point Laplacian plus an optional potential, and systems are solved by
conjugate gradients with a diagonal preconditioner.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corrector import PotentialV
from .geometry import Box, PerforatedDomain, Region

FREE, BOUNDARY, HOLE, OUTSIDE = 0, 1, 2, 3
BINARY_MAGIC = b"HLGF"


class UnderResolvedHoleError(ValueError):
    """A hole radius spans fewer grid cells than the resolution guard allows."""

    def __init__(self, ratio: float, rho_min: float, radius: float, h: float):
        super().__init__(
            f"hole radius {radius:.6g} is only {ratio:.3f} grid cells (h = {h:.6g}); need at least {rho_min}"
        )
        self.ratio = ratio
        self.rho_min = rho_min
        self.radius = radius
        self.h = h


class CGConvergenceError(RuntimeError):
    """Conjugate gradients did not reach the tolerance."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class Grid:
    """Uniform nodes ``lo + i h`` covering an axis box (both ends included)."""

    lo: np.ndarray
    hi: np.ndarray
    h: float

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        cells = (hi - lo) / self.h
        if np.any(np.abs(np.round(cells) * self.h - (hi - lo)) > 1e-12 * (hi - lo)) or np.any(np.round(cells) < 2):
            raise ValueError(f"spacing {self.h} does not divide the box lengths {(hi - lo).tolist()}")

    @classmethod
    def for_region(cls, region: Region, h: float) -> "Grid":
        b = region.bounds()
        if b is None:
            raise ValueError("Omega must be bounded")
        return cls(b[0], b[1], h)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(v) + 1 for v in np.round((self.hi - self.lo) / self.h))

    def axes(self) -> list[np.ndarray]:
        return [self.lo[k] + self.h * np.arange(n) for k, n in enumerate(self.shape)]

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (d,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def same_as(self, other: "Grid") -> bool:
        return self.h == other.h and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)


@dataclass
class DirichletMask:
    """Per-node provenance: FREE, or fixed to zero on the BOUNDARY, in a HOLE or OUTSIDE Omega."""

    kind: np.ndarray
    min_hole_cells: float = np.inf

    @property
    def fixed(self) -> np.ndarray:
        return self.kind != FREE

    @property
    def free(self) -> np.ndarray:
        return self.kind == FREE

    def counts(self) -> dict[str, int]:
        names = ("free", "boundary", "hole", "outside")
        return {n: int(np.sum(self.kind == k)) for k, n in enumerate(names)}


@dataclass
class GridField:
    """Values on the free nodes of a masked grid (fixed nodes are zero)."""

    grid: Grid
    mask: DirichletMask
    values: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError("field shape does not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        self.values = np.where(self.mask.fixed, 0.0, self.values)


def build_mask(grid: Grid, domain: PerforatedDomain | Region, rho_min: float = 3.0) -> DirichletMask:
    """Fix the box boundary, nodes outside Omega and nodes in closed holes."""
    if isinstance(domain, PerforatedDomain):
        omega = domain.omega
    else:
        omega = domain
    kind = np.zeros(grid.shape, dtype=np.int8)
    pts = grid.points()
    kind[~omega.contains(pts)] = OUTSIDE
    edge = np.zeros(grid.shape, dtype=bool)
    for k in range(grid.dim):
        idx = [slice(None)] * grid.dim
        idx[k] = 0
        edge[tuple(idx)] = True
        idx[k] = -1
        edge[tuple(idx)] = True
    kind[edge] = BOUNDARY
    min_cells = np.inf
    if isinstance(domain, PerforatedDomain) and domain.n_holes:
        lo, hi = grid.lo, grid.hi
        R = domain.guard_radius
        near = np.all((domain.centers + R > lo) & (domain.centers - R < hi), axis=1)
        if near.any():
            a = float(domain.radii[near].min())
            min_cells = a / grid.h
            if min_cells < rho_min:
                raise UnderResolvedHoleError(min_cells, rho_min, a, grid.h)
        holes = domain.in_holes(pts)
        kind[holes & (kind == FREE)] = HOLE
    return DirichletMask(kind, float(min_cells))


def _potential_nodes(grid: Grid, V: PotentialV | None) -> np.ndarray | None:
    if V is None or V.is_zero:
        return None
    return V(grid.points())


def apply_operator(u: np.ndarray, mask: DirichletMask, grid: Grid, V: PotentialV | np.ndarray | None = None) -> np.ndarray:
    """``(-Δ_h + V) u`` on free nodes, zero on fixed ones (u is the full node array)."""
    vn = _potential_nodes(grid, V) if isinstance(V, PotentialV) else V
    u = np.where(mask.fixed, 0.0, u)
    d = grid.dim
    out = np.zeros_like(u)
    inner = (slice(1, -1),) * d
    acc = 2 * d * u[inner]
    for k in range(d):
        lo = [slice(1, -1)] * d
        hi = [slice(1, -1)] * d
        lo[k] = slice(0, -2)
        hi[k] = slice(2, None)
        acc = acc - u[tuple(lo)] - u[tuple(hi)]
    out[inner] = acc / grid.h**2
    if vn is not None:
        out = out + vn * u
    out[mask.fixed] = 0.0
    return out


@dataclass
class CGResult:
    u: np.ndarray
    iterations: int
    residual: float
    history: list[float]


def cg_solve(operator, rhs: np.ndarray, *, diag: np.ndarray | None = None, rel_tol: float = 1e-10,
             max_iter: int = 20000, free: np.ndarray | None = None) -> CGResult:
    """Preconditioned conjugate gradients for an SPD ``operator`` on the free nodes.

    Stops when ``||A u - rhs|| <= rel_tol ||rhs||`` for the recursively
    updated residual, then recomputes the true residual.  Reductions use
    numpy's fixed pairwise summation, so runs are bit-reproducible.
    """
    b = np.asarray(rhs, dtype=float)
    if free is not None:
        b = np.where(free, b, 0.0)
    bnorm = float(np.sqrt(np.sum(b * b)))
    u = np.zeros_like(b)
    if bnorm == 0.0:
        return CGResult(u, 0, 0.0, [0.0])
    inv = 1.0 / diag if diag is not None else np.ones_like(b)
    if free is not None:
        inv = np.where(free, inv, 0.0)
    r = b.copy()
    z = inv * r
    p = z.copy()
    rz = float(np.sum(r * z))
    history = [1.0]
    for it in range(1, max_iter + 1):
        Ap = operator(p)
        alpha = rz / float(np.sum(p * Ap))
        u += alpha * p
        r -= alpha * Ap
        rel = float(np.sqrt(np.sum(r * r))) / bnorm
        history.append(rel)
        if rel <= rel_tol:
            true = operator(u) - b
            return CGResult(u, it, float(np.sqrt(np.sum(true * true))) / bnorm, history)
        z = inv * r
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise CGConvergenceError(f"CG stopped after {max_iter} iterations at relative residual {history[-1]:.3e}", history)


RHS_KINDS = ("constant", "sines", "gaussian")


def rhs_values(spec: dict | str, grid: Grid, extra_potential: float = 0.0) -> np.ndarray:
    """Right-hand side from the built-in catalog, sampled at every node.

    * ``constant``: ``value`` (default 1).
    * ``sines``: ``(d π² + c) Π sin(π (x_k - lo_k) / L_k)`` scaled so that the
      product of sines solves ``(-Δ + c) u = f`` on a unit box; ``c`` is the
      constant potential (``extra_potential`` unless the spec sets ``c``).
    * ``gaussian``: ``amplitude exp(-|x - center|² / (2 width²))``.
    """
    spec = {"kind": spec} if isinstance(spec, str) else dict(spec)
    kind = spec.get("kind", "constant")
    pts = grid.points()
    if kind == "constant":
        return np.full(grid.shape, float(spec.get("value", 1.0)))
    if kind == "sines":
        L = grid.hi - grid.lo
        c = float(spec.get("c", extra_potential))
        prod = np.prod(np.sin(np.pi * (pts - grid.lo) / L), axis=-1)
        return (np.sum((np.pi / L) ** 2) + c) * prod
    if kind == "gaussian":
        center = np.asarray(spec.get("center", 0.5 * (grid.lo + grid.hi)), dtype=float)
        width = float(spec.get("width", 0.1))
        amp = float(spec.get("amplitude", 1.0))
        return amp * np.exp(-np.sum((pts - center) ** 2, axis=-1) / (2 * width * width))
    raise ValueError(f"unknown rhs kind {kind!r}; choose from {RHS_KINDS}")


def sines_solution(grid: Grid) -> np.ndarray:
    """The exact solution ``Π sin(π (x_k - lo_k) / L_k)`` of the ``sines`` problem."""
    L = grid.hi - grid.lo
    return np.prod(np.sin(np.pi * (grid.points() - grid.lo) / L), axis=-1)


def _solve(grid: Grid, mask: DirichletMask, vn: np.ndarray | None, f: np.ndarray, rel_tol: float, max_iter: int) -> GridField:
    d = grid.dim
    diag = np.full(grid.shape, 2 * d / grid.h**2)
    if vn is not None:
        diag = diag + vn
    free = mask.free
    res = cg_solve(lambda v: apply_operator(v, mask, grid, vn), np.where(free, f, 0.0), diag=diag,
                   rel_tol=rel_tol, max_iter=max_iter, free=free)
    return GridField(grid, mask, res.u, {"iterations": res.iterations, "residual": res.residual})


def solve_perforated(domain: PerforatedDomain, f, h: float, rel_tol: float = 1e-10, *, rho_min: float = 3.0,
                     max_iter: int = 50000) -> GridField:
    """``-Δ u = f`` in Omega_eps, ``u = 0`` on its boundary."""
    grid = Grid.for_region(domain.omega, h)
    mask = build_mask(grid, domain, rho_min)
    fv = rhs_values(f, grid) if not isinstance(f, np.ndarray) else f
    return _solve(grid, mask, None, fv, rel_tol, max_iter)


def solve_homogenized(omega: Region, V: PotentialV | None, f, h: float, rel_tol: float = 1e-10, *,
                      max_iter: int = 50000) -> GridField:
    """``(-Δ + V) u = f`` in Omega; ``V = None`` or zero gives the plain Poisson solve."""
    grid = Grid.for_region(omega, h)
    mask = build_mask(grid, omega)
    vn = _potential_nodes(grid, V)
    if isinstance(f, np.ndarray):
        fv = f
    else:
        c = V.coefficients[0] if V is not None and len(V.coefficients) == 1 else 0.0
        fv = rhs_values(f, grid, extra_potential=c)
    return _solve(grid, mask, vn, fv, rel_tol, max_iter)


def error_norms(u1: GridField, u2: GridField) -> tuple[float, float]:
    """Discrete L² distance and forward-difference H¹ seminorm distance.

    Both fields must share the grid; masks may differ since fixed nodes hold
    zero, which is the value of the H¹_0 extension by zero.
    """
    if not u1.grid.same_as(u2.grid):
        raise ValueError("error_norms needs both fields on the same grid")
    g = u1.grid
    e = u1.values - u2.values
    l2 = float(np.sqrt(g.h**g.dim * np.sum(e * e)))
    s = 0.0
    for k in range(g.dim):
        de = np.diff(e, axis=k) / g.h
        s += float(np.sum(de * de))
    return l2, float(np.sqrt(g.h**g.dim * s))


def export_binary(fld: GridField, path) -> None:
    """Write ``magic, d (int32), node counts (int64 x d), h (float64)`` then node values.

    Everything is little-endian; values are in C order (last axis fastest).
    """
    g = fld.grid
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<i", g.dim))
        fh.write(struct.pack(f"<{g.dim}q", *g.shape))
        fh.write(struct.pack("<d", g.h))
        fh.write(np.ascontiguousarray(fld.values, dtype="<f8").tobytes())


def read_binary(path) -> tuple[tuple[int, ...], float, np.ndarray]:
    """Inverse of :func:`export_binary`: node counts, spacing and the value array."""
    data = Path(path).read_bytes()
    if data[:4] != BINARY_MAGIC:
        raise ValueError("not a grid field file")
    (d,) = struct.unpack_from("<i", data, 4)
    shape = struct.unpack_from(f"<{d}q", data, 8)
    (h,) = struct.unpack_from("<d", data, 8 + 8 * d)
    vals = np.frombuffer(data, dtype="<f8", offset=16 + 8 * d).reshape(shape)
    return tuple(shape), h, vals.copy()


def export_csv(fld: GridField, path) -> None:
    """One row per node: coordinates then value (repr formatting)."""
    g = fld.grid
    pts = g.points().reshape(-1, g.dim)
    vals = fld.values.ravel()
    names = [f"x{k}" for k in range(g.dim)] + ["u"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for p, v in zip(pts, vals):
            fh.write(",".join(repr(float(c)) for c in p) + "," + repr(float(v)) + "\n")


def box_omega(d: int) -> Box:
    """The unit box (0, 1)^d used by the default batteries."""
    return Box(np.zeros(d), np.ones(d))
