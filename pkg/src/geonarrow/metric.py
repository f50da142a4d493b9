"""l-inf boxes as doubling metric spaces.

Points are 1-D float arrays. A :class:`Ball` is the closed l-inf ball around
``center`` intersected with its domain box, so every ball carries the domain
it lives in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


def as_point(x, d: int | None = None) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise ValueError(f"point must be a vector, got shape {p.shape}")
    if d is not None and p.shape[0] != d:
        raise ValueError(f"expected a point of dimension {d}, got {p.shape[0]}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite coordinates")
    return p


def distance(a, b) -> float:
    """l-inf distance ``max_i |a_i - b_i|``."""
    a = as_point(a)
    b = as_point(b, a.shape[0])
    return float(np.abs(a - b).max())


def round_pow2(z: float) -> float:
    """Smallest power of two >= z, i.e. ``2**ceil(log2 z)``."""
    if not z > 0:
        raise ValueError(f"round_pow2 needs z > 0, got {z}")
    m, e = math.frexp(z)  # z = m * 2**e, 0.5 <= m < 1
    if m == 0.5:
        e -= 1
    return math.ldexp(1.0, e)


def is_pow2_ratio(ratio: float) -> bool:
    if not ratio >= 1:
        return False
    m, _ = math.frexp(ratio)
    return m == 0.5


@dataclass(frozen=True, eq=False)
class MetricDomain:
    """Axis-aligned box ``[lower, upper]`` under the l-inf metric."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lower)
        hi = as_point(self.upper, lo.shape[0])
        if not np.all(hi > lo):
            raise ValueError("domain needs upper > lower on every axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, d: int) -> MetricDomain:
        return cls(np.zeros(d), np.ones(d))

    @classmethod
    def box(cls, lo: float, hi: float, d: int) -> MetricDomain:
        return cls(np.full(d, float(lo)), np.full(d, float(hi)))

    @property
    def d(self) -> int:
        return int(self.lower.shape[0])

    @property
    def diameter(self) -> float:
        return float((self.upper - self.lower).max())

    def contains(self, x, tol: float = 0.0) -> bool:
        x = as_point(x, self.d)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def to_json(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float
    domain: MetricDomain

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", as_point(self.center, self.domain.d))

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate interval of the ball after clipping to the domain."""
        lo = np.maximum(self.center - self.radius, self.domain.lower)
        hi = np.minimum(self.center + self.radius, self.domain.upper)
        return lo, hi

    def contains(self, x, tol: float = 1e-12) -> bool:
        lo, hi = self.box()
        x = as_point(x, self.domain.d)
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))


def set_diameter(s: Ball, s2: Ball) -> float:
    """sup of the distance between a point of ``s`` and a point of ``s2``."""
    if s.domain.d != s2.domain.d:
        raise ValueError("balls live in domains of different dimension")
    lo, hi = s.box()
    lo2, hi2 = s2.box()
    return float(np.maximum(np.abs(hi - lo2), np.abs(hi2 - lo)).max())


# -- array-level helpers used by the algorithms ------------------------------


def clipped_boxes(centers: np.ndarray, radius: float, domain: MetricDomain):
    lo = np.maximum(centers - radius, domain.lower)
    hi = np.minimum(centers + radius, domain.upper)
    return lo, hi


def diameters_to(centers: np.ndarray, radius: float, domain: MetricDomain, j: int) -> np.ndarray:
    """``set_diameter`` between every ball and ball ``j`` (all of one radius)."""
    lo, hi = clipped_boxes(centers, radius, domain)
    return kernels.box_diameters(
        np.ascontiguousarray(lo), np.ascontiguousarray(hi), lo[j].copy(), hi[j].copy()
    )


def _axis_centers(lo: float, hi: float, r: float) -> np.ndarray:
    side = hi - lo
    count = max(1, math.ceil(side / (2 * r) - 1e-12))
    if 2 * r >= side:
        return np.array([0.5 * (lo + hi)])
    c = lo + r + 2 * r * np.arange(count)
    return np.minimum(c, hi - r)


def cover_centers(domain: MetricDomain, r: float) -> np.ndarray:
    axes = [_axis_centers(lo, hi, r) for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def initial_cover(domain: MetricDomain, r: float) -> list[Ball]:
    """Regular grid of radius-``r`` balls covering the domain.

    Per axis there are ``ceil(side / 2r)`` cells; the last one is pulled back
    so its center stays at distance ``r`` from the upper face.
    """
    if not 0 < r <= domain.diameter:
        raise ValueError(f"cover radius must lie in (0, {domain.diameter}], got {r}")
    return [Ball(c, r, domain) for c in cover_centers(domain, r)]


def refine_centers(centers: np.ndarray, radius: float, r_child: float, domain: MetricDomain) -> np.ndarray:
    ratio = radius / r_child
    if not is_pow2_ratio(ratio):
        raise ValueError(f"radius ratio {ratio} is not a power of two >= 1")
    k = int(round(ratio))
    if k == 1:
        return centers.copy()
    d = domain.d
    lo, hi = clipped_boxes(centers, radius, domain)
    offs = (np.arange(k) + 0.5) / k  # midpoints of k equal slices of [0, 1]
    grid = np.stack(np.meshgrid(*([offs] * d), indexing="ij"), axis=-1).reshape(-1, d)
    width = hi - lo
    # children of ball i are contiguous, ordered like the grid
    out = lo[:, None, :] + grid[None, :, :] * width[:, None, :]
    return out.reshape(-1, d)


def refine_ball(ball: Ball, r_child: float, d: int | None = None) -> list[Ball]:
    """Split ``ball`` into ``(radius / r_child)**d`` children of radius ``r_child``.

    Children sit on a regular grid tiling the clipped box of ``ball``.
    """
    if d is not None and d != ball.domain.d:
        raise ValueError(f"d={d} does not match the domain dimension {ball.domain.d}")
    kids = refine_centers(ball.center[None, :], ball.radius, r_child, ball.domain)
    return [Ball(c, r_child, ball.domain) for c in kids]
