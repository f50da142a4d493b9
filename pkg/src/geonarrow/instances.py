"""Loss functions with a known unique minimizer and a power-law sandwich
``lam * dist(x, x*)**q <= f(x) - f(x*) <= big_l * dist(x, x*)**q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .metric import MetricDomain, as_point


@dataclass(frozen=True, eq=False)
class NondegenerateInstance:
    name: str
    domain: MetricDomain
    minimizer: np.ndarray
    lam: float
    big_l: float
    q: float
    func: Callable[[np.ndarray], np.ndarray]  # (n, d) -> (n,)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.big_l >= self.lam > 0):
            raise ValueError(f"need big_l >= lam > 0, got lam={self.lam}, big_l={self.big_l}")
        if not self.q >= 1:
            raise ValueError(f"need q >= 1, got {self.q}")
        x = as_point(self.minimizer, self.domain.d)
        if not self.domain.contains(x):
            raise ValueError("minimizer lies outside the domain")
        object.__setattr__(self, "minimizer", x)

    @property
    def d(self) -> int:
        return self.domain.d

    def eval(self, x) -> float:
        return float(self.func(as_point(x, self.d)[None, :])[0])

    def eval_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(-1, self.d)
        return np.asarray(self.func(xs), dtype=float)

    @property
    def f_star(self) -> float:
        return self.eval(self.minimizer)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "d": self.d,
            "minimizer": self.minimizer.tolist(),
            "lam": self.lam,
            "big_l": self.big_l,
            "q": self.q,
            **self.params,
        }


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian"
    std: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "none"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.std <= 1.0:
            raise ValueError("noise std must lie in [0, 1] (1-sub-Gaussian)")

    @property
    def effective_std(self) -> float:
        return 0.0 if self.kind == "none" else self.std


def make_power_instance(domain: MetricDomain, x_star, q: float, scale: float) -> NondegenerateInstance:
    """``f(x) = scale * ||x - x*||_inf**q``; here lam = big_l = scale."""
    x_star = as_point(x_star, domain.d)
    if not domain.contains(x_star):
        raise ValueError("x_star lies outside the domain")
    if not scale > 0:
        raise ValueError("scale must be positive")

    def f(xs):
        return scale * np.abs(xs - x_star).max(axis=1) ** q

    return NondegenerateInstance(
        name="power",
        domain=domain,
        minimizer=x_star,
        lam=scale,
        big_l=scale,
        q=q,
        func=f,
        params={"scale": scale},
    )


def _piecewise(xs):
    x = xs[:, 0]
    return np.where(x < -1.0, -x, np.where(x <= 1.0, x * x, x + 1.0))


def make_piecewise_interval_instance() -> NondegenerateInstance:
    """Discontinuous example on [-2, 2]: -x, then x**2, then x + 1.

    It is enveloped by x**2/2 and 2 x**2, hence (lam, big_l, q) = (1/2, 2, 2).
    """
    return NondegenerateInstance(
        name="piecewise",
        domain=MetricDomain(np.array([-2.0]), np.array([2.0])),
        minimizer=np.array([0.0]),
        lam=0.5,
        big_l=2.0,
        q=2.0,
        func=_piecewise,
    )


class AuditResult(NamedTuple):
    lambda_hat: float
    big_l_hat: float
    passed: bool


def audit_grid(domain: MetricDomain, grid_per_axis: int) -> tuple[np.ndarray, float]:
    axes = [np.linspace(lo, hi, grid_per_axis) for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    step = float(((domain.upper - domain.lower) / (grid_per_axis - 1)).max())
    return pts, step


def audit_nondegeneracy(inst: NondegenerateInstance, grid_per_axis: int) -> AuditResult:
    """Empirical (lam, big_l) from the ratio (f(x) - f*) / dist**q on a grid.

    Grid points within one grid step of the minimizer are skipped.
    """
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be >= 2")
    pts, step = audit_grid(inst.domain, grid_per_axis)
    dist = np.abs(pts - inst.minimizer).max(axis=1)
    keep = dist > step * (1 + 1e-9)
    if not keep.any():
        raise ValueError("audit grid has no point away from the minimizer")
    gaps = inst.eval_many(pts[keep]) - inst.f_star
    ratio = gaps / dist[keep] ** inst.q
    lam_hat = float(ratio.min())
    big_l_hat = float(ratio.max())
    tol = 1e-9 * max(1.0, big_l_hat)
    ok = inst.lam <= lam_hat + tol and big_l_hat <= inst.big_l + tol
    return AuditResult(lam_hat, big_l_hat, bool(ok))
