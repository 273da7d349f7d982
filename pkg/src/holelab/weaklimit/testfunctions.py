"""Smooth compactly supported test functions and cube indicators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import Ball, Box, Region


@dataclass(frozen=True)
class Bump:
    """``exp(-1 / (1 - |x - c|^2 / rho^2))`` inside B(c, rho), zero outside."""

    center: np.ndarray
    radius: float
    name: str = "bump"
    kind: str = field(default="bump", init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.size

    def _s(self, x):
        diff = np.asarray(x, dtype=float) - self.center
        return diff, np.sum(diff * diff, axis=-1) / self.radius**2

    def value(self, x) -> np.ndarray:
        _, s = self._s(x)
        inside = s < 1
        out = np.zeros(s.shape)
        out[inside] = np.exp(-1.0 / (1.0 - s[inside]))
        return out

    def grad(self, x) -> np.ndarray:
        diff, s = self._s(x)
        inside = s < 1
        g = np.zeros(diff.shape)
        si = s[inside]
        phi = np.exp(-1.0 / (1.0 - si))
        g[inside] = (-2.0 * phi / (self.radius**2 * (1.0 - si) ** 2))[:, None] * diff[inside]
        return g

    def __call__(self, x):
        return self.value(x)

    @property
    def support(self) -> Ball:
        return Ball(self.center, self.radius)

    def support_box(self) -> Box:
        return Box(self.center - self.radius, self.center + self.radius)

    def sup_norm(self) -> float:
        return float(np.exp(-1.0))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "name": self.name, "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True)
class PolyBump(Bump):
    """Bump times the affine polynomial ``c0 + g . (x - center) / radius``."""

    c0: float = 1.0
    slope: tuple = ()
    kind: str = field(default="poly_bump", init=False)

    def __post_init__(self):
        super().__post_init__()
        g = np.zeros(self.dim) if len(self.slope) == 0 else np.asarray(self.slope, dtype=float)
        if g.shape != (self.dim,):
            raise ValueError("slope must have one entry per dimension")
        object.__setattr__(self, "slope", tuple(g.tolist()))

    def _poly(self, x):
        g = np.asarray(self.slope)
        return self.c0 + (np.asarray(x, dtype=float) - self.center) @ g / self.radius

    def value(self, x):
        return self._poly(x) * Bump.value(self, x)

    def grad(self, x):
        g = np.asarray(self.slope)
        b = Bump.value(self, x)
        return self._poly(x)[..., None] * Bump.grad(self, x) + b[..., None] * g / self.radius

    def sup_norm(self) -> float:
        return float(np.exp(-1.0) * (abs(self.c0) + np.linalg.norm(self.slope)))

    def to_dict(self):
        out = super().to_dict()
        out.update(c0=self.c0, slope=list(self.slope))
        return out


@dataclass(frozen=True)
class CubeIndicator:
    """Indicator of the half-open cube ``[corner, corner + side)``."""

    corner: np.ndarray
    side: float
    name: str = "cube"
    kind: str = field(default="cube", init=False)

    def __post_init__(self):
        object.__setattr__(self, "corner", np.asarray(self.corner, dtype=float))

    @property
    def box(self) -> Box:
        return Box.cube(self.corner, self.side)

    def value(self, x):
        return self.box.contains(x).astype(float)

    __call__ = value

    def to_dict(self):
        return {"kind": self.kind, "name": self.name, "corner": self.corner.tolist(), "side": self.side}


def test_function_from_dict(spec: dict):
    kind = spec.get("kind", "bump")
    name = spec.get("name", kind)
    if kind == "bump":
        return Bump(spec["center"], spec["radius"], name)
    if kind == "poly_bump":
        return PolyBump(spec["center"], spec["radius"], name, c0=spec.get("c0", 1.0), slope=tuple(spec.get("slope", ())))
    if kind == "cube":
        return CubeIndicator(spec["corner"], spec["side"], name)
    raise ValueError(f"unknown test function kind {kind!r}")


def support_inside(phi: Bump, omega: Region) -> bool:
    """Whether the closed support of ``phi`` sits strictly inside ``omega``."""
    from ..geometry import IN, classify_boxes

    box = phi.support_box()
    lo = box.lo - 1e-12 * phi.radius
    hi = box.hi + 1e-12 * phi.radius
    return bool(classify_boxes(omega, lo[None], hi[None], strict=False)[0] == IN)


# keep pytest from collecting the factory as a test
test_function_from_dict.__test__ = False
