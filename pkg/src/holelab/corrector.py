"""Closed-form radial correctors, the auxiliary quadratic, energies and the limit potential.

On each annulus ``a <= r <= R`` (``R = C eps``) the corrector is the radial
harmonic function rising from 0 on the hole to 1 on the guard sphere:

    d = 2:   w0(r) = (log a - log r) / (log a - log R)
    d >= 3:  w0(r) = (a^(2-d) - r^(2-d)) / (a^(2-d) - R^(2-d))

and ``q0(r) = (r^2 - R^2) / 2`` solves ``-Δq = -d`` with ``q0(R) = 0``.
All radial functions here accept numpy arrays (and complex arguments where
that is meaningful, which the complex-step oracles in the tests rely on).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PerforatedDomain, Region, TilingSpec, ball_volume


def sphere_area(d: int) -> float:
    """Surface area S_d of the unit sphere in R^d (S_2 = 2π, S_3 = 4π)."""
    if d == 2:
        return 2 * math.pi
    if d == 3:
        return 4 * math.pi
    return d * math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _check_radii(a, R):
    if not (0 < a < R):
        raise ValueError(f"need 0 < a < R, got a={a}, R={R}")


def w0_eval(r, a: float, R: float, d: int):
    """Radial corrector value on [a, R]; out-of-range radii are rejected."""
    _check_radii(a, R)
    r_arr = np.asarray(r)
    if np.any(np.real(r_arr) < a * (1 - 1e-14)) or np.any(np.real(r_arr) > R * (1 + 1e-14)):
        raise ValueError(f"radius outside the annulus [{a}, {R}]")
    if d == 2:
        return (math.log(a) - np.log(r_arr)) / (math.log(a) - math.log(R))
    p = 2 - d
    return (a**p - r_arr**p) / (a**p - R**p)


def w0_grad(r, a: float, R: float, d: int):
    """∂_r w0 on [a, R]."""
    _check_radii(a, R)
    r = np.asarray(r)
    if d == 2:
        return 1.0 / (r * (math.log(R) - math.log(a)))
    return (d - 2) * r ** (1 - d) / (a ** (2 - d) - R ** (2 - d))


def w0_flux(a: float, R: float, d: int) -> float:
    """The constant ``r^(d-1) ∂_r w0(r)`` (independent of r by harmonicity)."""
    _check_radii(a, R)
    if d == 2:
        return 1.0 / (math.log(R) - math.log(a))
    return (d - 2) / (a ** (2 - d) - R ** (2 - d))


def q0_eval(r, R: float):
    return (np.asarray(r) ** 2 - R * R) / 2


def q0_grad(r, R: float):
    return np.asarray(r, dtype=float) * 1.0


def annulus_energy(a: float, R: float, d: int, N: int = 1) -> float:
    """Squared gradient norm of the corrector over N annuli ``a < r < R``."""
    _check_radii(a, R)
    S = sphere_area(d)
    if d == 2:
        return N * S / (math.log(R) - math.log(a))
    return N * S * (d - 2) / (a ** (2 - d) - R ** (2 - d))


def boundary_slope_ratio(a: float, R: float, d: int) -> float:
    """∂_r w0(R) / R from the closed-form derivative."""
    return float(w0_grad(R, a, R, d)) / R


def limit_constant(mu: float, C: float, d: int) -> float:
    """Limit of the boundary slope ratio as eps -> 0 at the critical radius."""
    factor = 1.0 if d == 2 else float(d - 2)
    return mu * factor / C**d


def mu_d(d: int, cell_measure: float) -> float:
    factor = 1.0 if d == 2 else float(d - 2)
    return sphere_area(d) / cell_measure * factor


def w_eval(x, domain: PerforatedDomain) -> np.ndarray:
    """Global corrector: 0 on closed holes, w0 on annuli, 1 outside the guard balls."""
    hole, dist = domain.locate_guard(x)
    out = np.ones(hole.shape)
    hit = hole >= 0
    if hit.any():
        R = domain.guard_radius
        h = hole[hit]
        r = dist[hit]
        a = domain.radii[h]
        val = np.zeros(r.shape)
        ann = r > a
        d = domain.dim
        if d == 2:
            val[ann] = np.log(r[ann] / a[ann]) / np.log(R / a[ann])
        else:
            p = 2 - d
            val[ann] = (a[ann] ** p - r[ann] ** p) / (a[ann] ** p - R**p)
        out[hit] = val
    return out


def w_grad(x, domain: PerforatedDomain) -> np.ndarray:
    """Pointwise gradient of the global corrector (zero off the open annuli)."""
    x = np.asarray(x, dtype=float)
    hole, dist = domain.locate_guard(x)
    g = np.zeros(x.shape)
    if not domain.n_holes:
        return g
    hit = (hole >= 0) & (dist > domain.radii[np.maximum(hole, 0)])
    if hit.any():
        h = hole[hit]
        r = dist[hit]
        a = domain.radii[h]
        R = domain.guard_radius
        d = domain.dim
        if d == 2:
            slope = 1.0 / (r * np.log(R / a))
        else:
            slope = (d - 2) * r ** (1 - d) / (a ** (2 - d) - R ** (2 - d))
        g[hit] = slope[:, None] * (x[hit] - domain.centers[h]) / r[:, None]
    return g


def q_eval(x, domain: PerforatedDomain) -> np.ndarray:
    """Auxiliary function: q0(|x - x_ij|) on each guard ball, 0 elsewhere."""
    hole, dist = domain.locate_guard(x)
    R = domain.guard_radius
    return np.where(hole >= 0, (np.where(hole >= 0, dist, R) ** 2 - R * R) / 2, 0.0)


@dataclass(frozen=True)
class PotentialV:
    """Simple function ``V = sum_k v_k 1_{F_k}``."""

    regions: tuple
    coefficients: tuple
    dim: int

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for F, v in zip(self.regions, self.coefficients):
            if v:
                out = out + v * F.contains(x)
        return out

    @property
    def is_zero(self) -> bool:
        return all(v == 0 for v in self.coefficients)

    def values(self) -> list[float]:
        """Distinct values taken by V (finitely many)."""
        return sorted({0.0, *(float(v) for v in self.coefficients)})


def build_potential(families, tiling: TilingSpec) -> PotentialV:
    """Coefficients ``v_k = mu_d * mu_k * N_k``."""
    if not tiling.cell_measure > 0:
        raise ValueError("cell measure must be positive")
    d = tiling.dim
    md = mu_d(d, tiling.cell_measure)
    return PotentialV(
        tuple(f.region for f in families),
        tuple(md * f.mu * f.count for f in families),
        d,
    )


def constant_potential(value: float, region: Region) -> PotentialV:
    return PotentialV((region,), (float(value),), region.dim)


def indicator_limit_density(count: int, C: float, d: int, cell_measure: float) -> float:
    """Weak-star limit density ``N |B(0, C)| / |A|`` of the guard-ball indicator."""
    return count * ball_volume(d, C) / cell_measure
