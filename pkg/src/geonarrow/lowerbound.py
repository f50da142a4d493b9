"""Adversarial "bitten apple" instance families on (R^d, l-inf) and grid
checkers for their structural properties.

Orthant ``k`` (1-based) is encoded by the bits of ``k - 1``: bit ``i`` set
means coordinate ``i`` is negative. So ``k = 1`` is the all-plus orthant and
``k = 2**d`` the all-minus one. A zero coordinate counts as positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import kernels
from .instances import NondegenerateInstance
from .metric import MetricDomain

SLACK = 1e-9
_SAMPLES_PER_REGION = 10_000


def sign_pattern(k: int, d: int) -> np.ndarray:
    if not 1 <= k <= 2**d:
        raise ValueError(f"orthant index k={k} outside [1, {2**d}]")
    bits = (k - 1) >> np.arange(d)
    return np.where(bits & 1, -1.0, 1.0)


def corner_point(k: int, eps: float, d: int) -> np.ndarray:
    """``(s_1 eps, ..., s_d eps)`` for the sign pattern of orthant ``k``."""
    return sign_pattern(k, d) * eps


def orthant_index(xs: np.ndarray) -> np.ndarray:
    xs = np.atleast_2d(xs)
    bits = (xs < 0).astype(np.int64)
    return 1 + (bits << np.arange(xs.shape[1])).sum(axis=1)


def in_ball(xs: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    return np.abs(np.atleast_2d(xs) - center).max(axis=1) <= radius


@dataclass(frozen=True, eq=False)
class BittenAppleRegion:
    """Closed outer ball minus the closed origin-centred exclusion ball."""

    center: np.ndarray
    radius: float
    inner: float

    def contains(self, xs) -> np.ndarray:
        xs = np.atleast_2d(xs)
        return in_ball(xs, self.center, self.radius) & (np.abs(xs).max(axis=1) > self.inner)


def in_u_region(xs, k: int, eps: float) -> np.ndarray:
    """Membership in U_k: orthant 1 plus the eps/2 ball for k = 1, else orthant k minus it."""
    xs = np.atleast_2d(xs)
    near = np.abs(xs).max(axis=1) <= eps / 2
    orth = orthant_index(xs) == k
    return (orth | near) if k == 1 else (orth & ~near)


# ---------------------------------------------------------------------------
# reference communication grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReferenceGrid:
    T: int
    M: int
    d: int
    q: float
    T_j: np.ndarray
    eps_pow_q: np.ndarray

    def eps(self, j: int) -> float:
        return float(self.eps_pow_q[j - 1] ** (1.0 / self.q))

    def product_constant(self) -> float:
        """Closed form of eps_j**q * T_j before flooring T_j."""
        return (
            math.sqrt(2) / 8 * math.sqrt(2**self.d - 1) / (2**self.q + 2) / self.M
            * self.T ** (0.5 / (1 - 2.0 ** (-self.M)))
        )


def reference_grid(T: int, M: int, d: int, q: float) -> ReferenceGrid:
    if not (T >= M >= 1 and d >= 1 and q >= 1):
        raise ValueError("need T >= M >= 1, d >= 1, q >= 1")
    denom = 1 - 2.0 ** (-M)
    tj = []
    epq = []
    base = 0.25 * (math.sqrt(2) / 2) * math.sqrt(2**d - 1) / (2**q + 2) / M
    for j in range(1, M + 1):
        if j == M:
            tj.append(int(T))
        else:
            v = float(T) ** ((1 - 2.0 ** (-j)) / denom)
            tj.append(int(math.floor(v * (1 + 1e-12))))
        epq.append(base * float(T) ** (-0.5 * (1 - 2.0 ** (1 - j)) / denom))
    return ReferenceGrid(int(T), M, d, float(q), np.array(tj, dtype=np.int64), np.array(epq))


def standard_epsilon(T: float, d: int, q: float) -> float:
    """eps with eps**q = sqrt(2 (2**d - 1)) / (2**q + 2) / sqrt(T)."""
    if not T >= 1:
        raise ValueError("T must be >= 1")
    epq = math.sqrt(2 * (2**d - 1)) / (2**q + 2) / math.sqrt(T)
    return epq ** (1.0 / q)


# ---------------------------------------------------------------------------
# piecewise functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BittenFunction:
    """``||x||^q`` with bites; the first matching bite wins."""

    q: float
    d: int
    centers: np.ndarray  # (k, d)
    radii: np.ndarray
    inner: np.ndarray
    label: str = ""
    indices: tuple = ()

    def __call__(self, xs) -> np.ndarray:
        xs = np.ascontiguousarray(np.atleast_2d(np.asarray(xs, dtype=float)))
        return kernels.bitten_eval(xs, float(self.q), self.centers, self.radii, self.inner)

    @property
    def regions(self) -> list[BittenAppleRegion]:
        return [BittenAppleRegion(c, r, i) for c, r, i in zip(self.centers, self.radii, self.inner)]

    @property
    def minimizer(self) -> np.ndarray:
        if len(self.radii) == 0:
            return np.zeros(self.d)
        norms = np.abs(self.centers).max(axis=1)
        return self.centers[int(np.argmax(norms))].copy()

    @property
    def min_value(self) -> float:
        return float(self(self.minimizer[None, :])[0])


def _bites(q, d, pieces, label, indices) -> BittenFunction:
    if pieces:
        c = np.array([p[0] for p in pieces], dtype=float).reshape(len(pieces), d)
        r = np.array([p[1] for p in pieces], dtype=float)
        i = np.array([p[2] for p in pieces], dtype=float)
    else:
        c, r, i = np.empty((0, d)), np.empty(0), np.empty(0)
    return BittenFunction(float(q), d, np.ascontiguousarray(c), r, i, label, tuple(indices))


def _apple(k, eps, d, scale=1.0):
    # bite around scale * x*_{k, eps} of radius scale * eps, excluding B(0, scale * eps / 2)
    return (scale * corner_point(k, eps, d), scale * eps, scale * eps / 2)


def _check_jk(grid: ReferenceGrid, j: int, k: int) -> None:
    if not 1 <= j <= grid.M:
        raise ValueError(f"j={j} outside [1, {grid.M}]")
    if not 1 <= k <= 2**grid.d - 1:
        raise ValueError(f"k={k} outside [1, {2**grid.d - 1}]")


def family_jk(j: int, k: int, grid: ReferenceGrid) -> BittenFunction:
    _check_jk(grid, j, k)
    d, q, top = grid.d, grid.q, 2**grid.d
    small = _apple(top, grid.eps(grid.M) / 3, d)
    pieces = [small] if j == grid.M else [_apple(k, grid.eps(j), d), small]
    return _bites(q, d, pieces, "f_jk", (j, k))


def family_jkl(j: int, k: int, l: int, grid: ReferenceGrid) -> BittenFunction:
    _check_jk(grid, j, k)
    d, q, top = grid.d, grid.q, 2**grid.d
    if not 1 <= l <= top:
        raise ValueError(f"l={l} outside [1, {top}]")
    s = 2.0 ** (1.0 / q)
    eps_j, eps_m = grid.eps(j), grid.eps(grid.M)
    small = _apple(top, eps_m / 3, d)
    if j < grid.M:
        if l == k:
            pieces = [_apple(k, eps_j, d), small]
        elif l < top:
            pieces = [_apple(k, eps_j, d), _apple(l, eps_j, d, s), small]
        else:
            pieces = [_apple(k, eps_j, d), _apple(top, eps_j, d, s)]
    else:
        pieces = [small] if l == top else [_apple(l, eps_m / 3, d, s), small]
    return _bites(q, d, pieces, "f_jkl", (j, k, l))


def family_k_eps(k: int, eps: float, q: float, d: int) -> BittenFunction:
    if not 1 <= k <= 2**d:
        raise ValueError(f"k={k} outside [1, {2**d}]")
    if not eps > 0:
        raise ValueError("eps must be positive")
    pieces = [] if k == 1 else [_apple(k, eps, d)]
    return _bites(q, d, pieces, "f_k", (k,))


def f_jk(j: int, k: int, grid: ReferenceGrid, x) -> np.ndarray | float:
    return _scalar_or_vec(family_jk(j, k, grid), x)


def f_jkl(j: int, k: int, l: int, grid: ReferenceGrid, x) -> np.ndarray | float:
    return _scalar_or_vec(family_jkl(j, k, l, grid), x)


def f_k_eps(k: int, eps: float, q: float, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    d = x.shape[-1] if x.ndim else 1
    return _scalar_or_vec(family_k_eps(k, eps, q, d), x)


def _scalar_or_vec(fn: BittenFunction, x):
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:
        return float(fn(x.reshape(1, fn.d))[0])
    return fn(x)


# ---------------------------------------------------------------------------
# sample sets
# ---------------------------------------------------------------------------


def grid_points(R: float, d: int, per_axis: int) -> np.ndarray:
    ax = np.linspace(-R, R, per_axis)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _halton(d: int, n: int) -> np.ndarray:
    return qmc.Halton(d, scramble=False).random(n + 1)[1:]


def region_samples(center, radius, inner, d, n=_SAMPLES_PER_REGION) -> np.ndarray:
    u = _halton(d, n)
    pts = np.asarray(center) + radius * (2 * u - 1)
    pts = pts[np.abs(pts).max(axis=1) > inner]
    # the exclusion ball itself is where the default branch takes over
    core = inner * (2 * _halton(d, max(n // 10, 16)) - 1)
    return np.vstack([pts, core, np.asarray(center)[None, :]])


def sample_set(fns: list[BittenFunction], R: float, per_axis: int | None = None,
               extra_balls: list[tuple[np.ndarray, float]] = ()) -> np.ndarray:
    d = fns[0].d
    if per_axis is None:
        per_axis = 401 if d <= 2 else 41
    parts = [grid_points(R, d, per_axis), np.zeros((1, d))]
    seen = set()
    for fn in fns:
        parts.append(fn.minimizer[None, :])
        for c, r, i in zip(fn.centers, fn.radii, fn.inner):
            key = (tuple(c), r, i)
            if key in seen:
                continue
            seen.add(key)
            parts.append(region_samples(c, r, i, d))
    for c, r in extra_balls:
        parts.append(np.asarray(c) + r * (2 * _halton(d, _SAMPLES_PER_REGION) - 1))
    return np.ascontiguousarray(np.vstack(parts))


def default_radius(grid: ReferenceGrid) -> float:
    # the largest bite reaches 2 * 2**(1/q) * eps_1 <= 4 eps_1
    return 5.0 * grid.eps(1)


# ---------------------------------------------------------------------------
# checkers
# ---------------------------------------------------------------------------


@dataclass
class PropertyReport:
    property: str
    indices: dict
    min_ratio: float
    max_ratio: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "property": self.property,
            "indices": self.indices,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "pass": self.passed,
        }
        out.update(self.extra)
        return out


def nondegen_constants(family: str, q: float) -> tuple[float, float]:
    if family == "f_jk":
        return 9.0 ** (-q), (2**q + 1) ** 2
    if family == "f_jkl":
        # new bite: 6**-q and (3**q + 1)**2; elsewhere the f_jk constants apply
        return 9.0 ** (-q), (3**q + 1) ** 2
    if family == "f_k":
        return 2.0 ** (-(q - 1)), 3.0 ** (q + 1)
    raise ValueError(f"unknown family {family!r}")


def ratio_extremes(fn: BittenFunction, pts: np.ndarray) -> tuple[float, float, float]:
    """min/max of (f(x) - f(x*)) / dist(x, x*)**q over ``pts`` (x* excluded),
    plus min over pts of f(x) - f(x*) (must be >= 0 for x* to be the minimizer)."""
    xstar = fn.minimizer
    vals = fn(pts)
    fmin = fn.min_value
    dist = np.abs(pts - xstar).max(axis=1)
    keep = dist > 1e-14
    ratio = (vals[keep] - fmin) / dist[keep] ** fn.q
    return float(ratio.min()), float(ratio.max()), float((vals - fmin).min())


def check_prop_nondegen(fn: BittenFunction, R: float, per_axis: int | None = None) -> PropertyReport:
    """Power-law sandwich around the minimizer with the explicit proof constants."""
    family = fn.label
    c_low, c_high = nondegen_constants(family, fn.q)
    pts = sample_set([fn], R, per_axis)
    lo, hi, min_gap = ratio_extremes(fn, pts)
    ok = lo >= c_low * (1 - SLACK) and hi <= c_high * (1 + SLACK) and min_gap >= -SLACK * abs(fn.min_value)
    return PropertyReport(
        f"nondegenerate[{family}]",
        dict(zip(("j", "k", "l") if family != "f_k" else ("k",), fn.indices)),
        lo, hi, bool(ok),
        {"c_low": c_low, "c_high": c_high, "points": int(pts.shape[0])},
    )


def _gap_report(name, indices, diff, inside, bound, n_points) -> PropertyReport:
    inside_max = float(np.abs(diff[inside]).max()) if inside.any() else 0.0
    outside_max = float(np.abs(diff[~inside]).max()) if (~inside).any() else 0.0
    ok = inside_max <= bound * (1 + SLACK) and outside_max == 0.0
    bound = float(bound)
    return PropertyReport(
        name, indices, outside_max / bound, inside_max / bound, bool(ok),
        {"bound": bound, "outside_max_abs": outside_max, "points": int(n_points)},
    )


def check_gap_jk(grid: ReferenceGrid, j: int, k: int, R: float | None = None) -> PropertyReport:
    """|f_jk - f_Mk| <= (2^q + 2) eps_j^q on the k-th bite, exactly 0 off it."""
    R = default_radius(grid) if R is None else R
    a, b = family_jk(j, k, grid), family_jk(grid.M, k, grid)
    pts = sample_set([a, b], R)
    region = BittenAppleRegion(*_apple(k, grid.eps(j), grid.d))
    bound = (2**grid.q + 2) * grid.eps_pow_q[j - 1]
    return _gap_report("gap[f_jk-f_Mk]", {"j": j, "k": k}, a(pts) - b(pts), region.contains(pts),
                       bound, pts.shape[0])


def _s_ball(grid: ReferenceGrid, j: int, l: int):
    s = 2.0 ** (1.0 / grid.q)
    eps = grid.eps(j)
    return corner_point(l, s * eps, grid.d), s * eps


def check_gap_jkl(grid: ReferenceGrid, j: int, k: int, l: int, R: float | None = None) -> PropertyReport:
    """|f_jkl - f_jk,ref| <= 2 (2^q + 2) eps_j^q inside S_l, 0 outside.

    The reference is f_jkk for j < M and f_Mk,2^d for j = M.
    """
    R = default_radius(grid) if R is None else R
    top = 2**grid.d
    ref_l = k if j < grid.M else top
    a, b = family_jkl(j, k, l, grid), family_jkl(j, k, ref_l, grid)
    c, r = _s_ball(grid, j, l)
    pts = sample_set([a, b], R, extra_balls=[(c, r)])
    bound = 2 * (2**grid.q + 2) * grid.eps_pow_q[j - 1]
    return _gap_report("gap[f_jkl-f_ref]", {"j": j, "k": k, "l": l}, a(pts) - b(pts),
                       in_ball(pts, c, r), bound, pts.shape[0])


def check_regret_floor(grid: ReferenceGrid, j: int, k: int, l: int, R: float | None = None) -> PropertyReport:
    """Any arm outside S_l costs at least eps_j^q / 3^q on instance (j, k, l)."""
    R = default_radius(grid) if R is None else R
    fn = family_jkl(j, k, l, grid)
    c, r = _s_ball(grid, j, l)
    pts = sample_set([fn], R, extra_balls=[(c, r * 1.05)])
    vals = fn(pts)
    fmin = fn.min_value
    floor = float(grid.eps_pow_q[j - 1] / 3**grid.q)
    outside = ~in_ball(pts, c, r)
    gaps = vals[outside] - fmin
    lo = float(gaps.min() / floor)
    ok = lo >= 1 - SLACK and float((vals - fmin).min()) >= -SLACK * abs(fmin)
    return PropertyReport("regret_floor[f_jkl]", {"j": j, "k": k, "l": l}, lo,
                          float(gaps.max() / floor), bool(ok), {"floor": floor, "points": int(pts.shape[0])})


def check_gap_props(grid: ReferenceGrid, R: float | None = None) -> list[PropertyReport]:
    """Every gap and regret-floor property for every index triple of ``grid``."""
    top = 2**grid.d
    out = []
    for j in range(1, grid.M + 1):
        for k in range(1, top):
            if j < grid.M:
                out.append(check_gap_jk(grid, j, k, R))
            for l in range(1, top + 1):
                if (j < grid.M and l != k) or (j == grid.M and l < top):
                    out.append(check_gap_jkl(grid, j, k, l, R))
                out.append(check_regret_floor(grid, j, k, l, R))
    return out


def check_u_partition(d: int, eps: float, R: float) -> PropertyReport:
    pts = sample_set([family_k_eps(top_k, eps, 1.0, d) for top_k in range(2, 2**d + 1)], R)
    member = np.stack([in_u_region(pts, k, eps) for k in range(1, 2**d + 1)], axis=1)
    counts = member.sum(axis=1)
    return PropertyReport("partition[U_k]", {"d": d}, float(counts.min()), float(counts.max()),
                          bool((counts == 1).all()), {"points": int(pts.shape[0])})


def check_orthant_gap(k: int, eps: float, q: float, d: int, R: float) -> PropertyReport:
    """|f_k - f_1| <= (2^q + 2) eps^q on U_k and 0 off U_k.

    Points with a zero coordinate are skipped: there the orthant a point belongs
    to is a convention, and a closed bite can touch a neighbouring orthant.
    """
    fk, f1 = family_k_eps(k, eps, q, d), family_k_eps(1, eps, q, d)
    pts = sample_set([fk], R)
    pts = pts[(pts != 0).all(axis=1)]
    bound = (2**q + 2) * eps**q
    return _gap_report("gap[f_k-f_1]", {"k": k}, fk(pts) - f1(pts), in_u_region(pts, k, eps),
                       bound, pts.shape[0])


def verify_reference_family(T: int, M: int, d: int, q: float) -> list[PropertyReport]:
    """Nondegeneracy of every f_jk and f_jkl, then all gap properties."""
    grid = reference_grid(T, M, d, q)
    R = default_radius(grid)
    top = 2**d
    reps = []
    for j in range(1, M + 1):
        for k in range(1, top):
            reps.append(check_prop_nondegen(family_jk(j, k, grid), R))
            for l in range(1, top + 1):
                reps.append(check_prop_nondegen(family_jkl(j, k, l, grid), R))
    reps.extend(check_gap_props(grid, R))
    for r in reps:
        r.extra.update({"T": T, "M": M, "d": d, "q": q})
    return reps


def verify_standard_family(T: int, d: int, q: float) -> list[PropertyReport]:
    eps = standard_epsilon(T, d, q)
    R = 5 * eps
    reps = [check_prop_nondegen(family_k_eps(k, eps, q, d), R) for k in range(1, 2**d + 1)]
    reps += [check_orthant_gap(k, eps, q, d, R) for k in range(2, 2**d + 1)]
    reps.append(check_u_partition(d, eps, R))
    for r in reps:
        r.extra.update({"T": T, "d": d, "q": q, "eps": eps})
    return reps


def as_instance(fn: BittenFunction, R: float):
    """Wrap a family member as a bandit instance on the box [-R, R]^d.

    The declared (lam, L) are the proof constants of the family.
    """
    lam, big_l = nondegen_constants(fn.label, fn.q)
    return NondegenerateInstance(
        name=fn.label,
        domain=MetricDomain.box(-R, R, fn.d),
        minimizer=fn.minimizer,
        lam=lam,
        big_l=big_l,
        q=fn.q,
        func=fn,
        params={"indices": list(fn.indices), "R": R},
    )
