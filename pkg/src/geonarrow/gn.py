"""Geometric Narrowing: batched successive elimination over shrinking ball covers.

Every ball is sampled at its center. Batch ``m`` pulls each active ball
``n_m`` times, keeps the balls whose set diameter to the empirically best one is
within ``(2 + ((lam + L) / lam)**(1/q)) * r_m`` and splits the survivors into
balls of the next radius. Whatever budget is left after the last elimination
batch goes to the center of the last empirical best ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .environment import BatchedEnvironment, BatchTrace, RunRecord
from .metric import MetricDomain, clipped_boxes, cover_centers, diameters_to, refine_centers, round_pow2
from .scheduler import RRSchedule, StaticGrid

_TOL = 1e-12


class InternalConsistencyError(RuntimeError):
    """Static batch allowance smaller than the active set: declared parameters are wrong."""


@dataclass(frozen=True)
class GNParams:
    lam: float
    big_l: float
    q: float
    variant: str = "adaptive"  # adaptive | static | simple-radii

    def __post_init__(self):
        if not (self.big_l >= self.lam > 0):
            raise ValueError("need big_l >= lam > 0")
        if not self.q >= 1:
            raise ValueError("need q >= 1")
        if self.variant not in ("adaptive", "static", "simple-radii"):
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def threshold_factor(self) -> float:
        return 2.0 + ((self.lam + self.big_l) / self.lam) ** (1.0 / self.q)


@dataclass(frozen=True)
class LSParams:
    lam: float
    ell: float

    def __post_init__(self):
        if not (self.lam > 0 and self.ell > 0):
            raise ValueError("need lam > 0 and ell > 0")

    def cap(self, d: int) -> int:
        """Number of balls GN' keeps per batch: [(9 ell + 2 lam) / lam]_2**d."""
        return int(round_pow2((9 * self.ell + 2 * self.lam) / self.lam)) ** d


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------


def _mean(ys: np.ndarray) -> float:
    if ys.strides == (0,):  # noiseless broadcast
        return float(ys[0])
    # offset by the first sample so a constant stream averages to itself exactly
    return float(ys[0] + (ys - ys[0]).mean())


def _means(groups) -> np.ndarray:
    return np.array([_mean(ys) for _, ys in groups])


def _argmin_lex(values: np.ndarray, centers: np.ndarray) -> int:
    ties = np.flatnonzero(values == values.min())
    if len(ties) == 1:
        return int(ties[0])
    sub = centers[ties]
    order = np.lexsort(sub.T[::-1])
    return int(ties[order[0]])


def _rank_lex(values: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Indices sorted by value, ties broken by lexicographic center."""
    keys = [centers[:, i] for i in range(centers.shape[1] - 1, -1, -1)]
    return np.lexsort(keys + [values])


def _covers(centers: np.ndarray, radius: float, domain: MetricDomain, x: np.ndarray) -> tuple[bool, float]:
    """Whether some ball contains ``x``, and the farthest point of the union from ``x``."""
    if len(centers) == 0:
        return False, 0.0
    lo, hi = clipped_boxes(centers, radius, domain)
    inside = bool(((x >= lo - _TOL) & (x <= hi + _TOL)).all(axis=1).any())
    reach = float(np.maximum(np.abs(hi - x), np.abs(x - lo)).max())
    return inside, reach


def _check_env(env: BatchedEnvironment, T: int, d: int, diameter: float) -> None:
    if env.pulled != 0:
        raise ValueError("environment has already been used")
    if T != env.T:
        raise ValueError(f"schedule horizon {T} does not match environment horizon {env.T}")
    if d != env.d:
        raise ValueError(f"schedule dimension {d} does not match environment dimension {env.d}")
    if not math.isclose(diameter, env.instance.domain.diameter, rel_tol=1e-12):
        raise ValueError("schedule was built for a domain of different diameter")


class _Run:
    """Book-keeping shared by all variants."""

    def __init__(self, env: BatchedEnvironment, name: str):
        self.env = env
        self.name = name
        self.dom = env.instance.domain
        self.x_star = env.instance.minimizer
        self.trace: list[BatchTrace] = []
        self.x_out: np.ndarray | None = None
        self.retained = True
        self.deviations = 0
        self.log_t = math.log(max(env.T, 2))

    def sample(self, centers: np.ndarray, counts) -> np.ndarray:
        for c, k in zip(centers, counts):
            self.env.pull_many(c, int(k))
        groups = self.env.flush_grouped()
        return _means(groups)

    def diagnose(self, centers, means, counts) -> int:
        # concentration event: |f_hat - f(center)| <= sqrt(4 ln T / n); decisions never see this
        truth = self.env.instance.eval_many(centers)
        width = np.sqrt(4 * self.log_t / np.asarray(counts, dtype=float))
        bad = int((np.abs(means - truth) > width).sum())
        self.deviations += bad
        return bad

    def record(self, centers, radius, n_pre, pulls, bad, extra=None) -> None:
        ok, reach = _covers(centers, radius, self.dom, self.x_star)
        self.retained &= ok
        self.trace.append(BatchTrace(float(radius), int(n_pre), int(len(centers)), int(pulls), ok,
                                     deviations=int(bad), reach=reach, **(extra or {})))

    def cleanup(self) -> None:
        left = self.env.remaining_budget()
        if left > 0:
            self.env.pull_many(self.x_out, left)
            self.env.flush_grouped()

    def finish(self, extra: dict | None = None) -> RunRecord:
        inst = self.env.instance
        simple = inst.eval(self.x_out) - inst.f_star
        return RunRecord(
            seed=self.env.seed,
            T=self.env.T,
            algorithm=self.name,
            instance=inst.name,
            batches_used=len(self.env.communication_points),
            communication_points=list(self.env.communication_points),
            cum_regret=float(self.env.cum_regret),
            simple_regret=float(simple),
            optimum_retained=bool(self.retained),
            x_out=[float(v) for v in self.x_out],
            elimination_trace=self.trace,
            pulls=int(self.env.pulled),
            extra={"deviations": self.deviations, **(extra or {})},
        )

    def truncated(self, centers: np.ndarray, n: int) -> None:
        """Last batch does not fit: pull balls in order until the budget ends."""
        left = self.env.remaining_budget()
        counts = []
        for c in centers:
            k = min(n, left)
            if k == 0:
                break
            self.env.pull_many(c, k)
            counts.append(k)
            left -= k
        means = _means(self.env.flush_grouped())
        if self.x_out is None:
            got = centers[: len(means)]
            self.x_out = got[_argmin_lex(means, got)].copy()


def _elimination_keep(centers, means, radius, domain, factor, nominal) -> tuple[np.ndarray, int]:
    j = _argmin_lex(means, centers)
    diam = diameters_to(centers, radius, domain, j)
    keep = diam <= factor * nominal * (1 + _TOL)
    return keep, j


def _rank_keep(centers, means, cap) -> tuple[np.ndarray, int]:
    order = _rank_lex(means, centers)
    keep = np.zeros(len(centers), dtype=bool)
    keep[order[:cap]] = True
    return keep, int(order[0])


# ---------------------------------------------------------------------------
# adaptive loop (GN and GN')
# ---------------------------------------------------------------------------


def _adaptive(env: BatchedEnvironment, schedule: RRSchedule, select, name: str) -> RunRecord:
    _check_env(env, schedule.T, schedule.d, schedule.diameter)
    run = _Run(env, name)
    dom = run.dom
    played = schedule.played()
    rho = schedule.radius(0)
    centers = cover_centers(dom, rho)
    for idx, m in enumerate(played):
        n = int(schedule.n[m])
        if len(centers) * n > env.remaining_budget():
            run.truncated(centers, n)
            run.record(centers, rho, len(centers), 0, 0, {"truncated": True})
            break
        means = run.sample(centers, [n] * len(centers))
        bad = run.diagnose(centers, means, [n] * len(centers))
        keep, j = select(centers, means, rho, schedule.radius(m))
        run.x_out = centers[j].copy()
        n_pre = len(centers)
        centers = centers[keep]
        run.record(centers, rho, n_pre, n_pre * n, bad, {"nominal_radius": schedule.radius(m)})
        if idx + 1 == len(played):
            break
        # refine to the next radius of the sequence, even when that index is skipped
        target = min(rho, schedule.radius(m + 1))
        children = refine_centers(centers, rho, target, dom)
        if env.pulled + len(children) * int(schedule.n[played[idx + 1]]) >= env.T:
            break
        centers, rho = children, target
    run.cleanup()
    return run.finish({"schedule": schedule.to_json()["radius_exponents"]})


def run_gn(env: BatchedEnvironment, params: GNParams, schedule: RRSchedule | StaticGrid) -> RunRecord:
    """Geometric Narrowing with the given radius schedule; a static grid is
    dispatched to :func:`run_gn_static`."""
    if isinstance(schedule, StaticGrid):
        return run_gn_static(env, params, schedule)
    factor = params.threshold_factor

    def select(centers, means, rho, nominal):
        return _elimination_keep(centers, means, rho, env.instance.domain, factor, nominal)

    name = "gn" if schedule.kind == "rr" else "gn-simple"
    return _adaptive(env, schedule, select, name)


def run_gn_prime(env: BatchedEnvironment, ls: LSParams, schedule: RRSchedule) -> RunRecord:
    """GN' for level-smooth losses: keep the ``ls.cap(d)`` best balls by estimate."""
    if schedule.q != 1:
        raise ValueError("GN' needs a schedule built with q = 1")
    cap = ls.cap(env.d)

    def select(centers, means, rho, nominal):
        return _rank_keep(centers, means, cap)

    rec = _adaptive(env, schedule, select, "gn-prime")
    rec.extra["cap"] = cap
    return rec


# ---------------------------------------------------------------------------
# static grid
# ---------------------------------------------------------------------------


def policy_rng(seed: int) -> np.random.Generator:
    """Generator for the algorithm's own randomness, independent of the noise stream."""
    return np.random.Generator(np.random.Philox(seed).jumped())


def run_gn_static(env: BatchedEnvironment, params: GNParams, grid: StaticGrid) -> RunRecord:
    """GN on predetermined deadlines; the surplus of each batch is spread uniformly at random."""
    sch = grid.schedule
    _check_env(env, sch.T, sch.d, sch.diameter)
    run = _Run(env, "gn-static")
    dom = run.dom
    rng = policy_rng(env.seed)
    factor = params.threshold_factor
    centers = cover_centers(dom, grid.radius(0))
    for m in range(grid.M_s):
        r = grid.radius(m)
        n = grid.count(m)
        budget = int(grid.tau[m + 1] - grid.tau[m])
        surplus = budget - len(centers) * n
        if surplus < 0:
            raise InternalConsistencyError(
                f"batch {m + 1}: {len(centers)} balls need {len(centers) * n} pulls, allowance {budget}"
            )
        counts = n + rng.multinomial(surplus, np.full(len(centers), 1.0 / len(centers)))
        means = run.sample(centers, counts)
        bad = run.diagnose(centers, means, counts)
        keep, j = _elimination_keep(centers, means, r, dom, factor, r)
        run.x_out = centers[j].copy()
        n_pre = len(centers)
        centers = centers[keep]
        run.record(centers, r, n_pre, budget, bad, {"surplus": int(surplus), "nominal_radius": r})
        if m + 1 < grid.M_s:
            centers = refine_centers(centers, r, grid.radius(m + 1), dom)
    run.cleanup()
    return run.finish({"tau": [int(t) for t in grid.tau]})


# ---------------------------------------------------------------------------
# baseline and level-set covering
# ---------------------------------------------------------------------------


def run_uniform_baseline(env: BatchedEnvironment, cover_radius: float) -> RunRecord:
    """Round-robin over a fixed cover, one communication point at the end."""
    if env.pulled != 0:
        raise ValueError("environment has already been used")
    run = _Run(env, "uniform")
    centers = cover_centers(run.dom, cover_radius)
    k = len(centers)
    counts = np.full(k, env.T // k)
    counts[: env.T % k] += 1
    live = counts > 0
    means = run.sample(centers[live], counts[live])
    run.x_out = centers[live][_argmin_lex(means, centers[live])].copy()
    run.record(centers, cover_radius, k, env.T, 0)
    return run.finish({"cover_size": k})


@dataclass(frozen=True)
class CoveringReport:
    N: int
    packing: int
    lower: int
    upper: int
    passed: bool


def level_set_points(f, domain: MetricDomain, eps: float, grid_per_axis: int, f_star: float | None = None):
    axes = [np.linspace(lo, hi, grid_per_axis) for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)  # lexicographic order
    vals = np.asarray(f(pts), dtype=float)
    base = float(vals.min()) if f_star is None else float(f_star)
    return np.ascontiguousarray(pts[vals <= base + eps + _TOL])


def check_ls_covering(f, lam: float, ell: float, eps: float, delta: float,
                      domain: MetricDomain, grid_per_axis: int | None = None,
                      f_star: float | None = None) -> CoveringReport:
    """Greedy delta-cover of the eps-level set against the covering-number sandwich.

    The greedy cover size bounds the covering number from above and a greedy
    2 delta-separated packing bounds it from below, so the check asks
    ``N <= upper`` and ``packing >= lower``.
    """
    if not (eps > 0 and delta > 0):
        raise ValueError("eps and delta must be positive")
    d = domain.d
    if grid_per_axis is None:
        grid_per_axis = 2001 if d == 1 else 201
    pts = level_set_points(f, domain, eps, grid_per_axis, f_star)
    if len(pts) == 0:
        raise ValueError("the level set is empty on this grid")
    n_cover = len(kernels.greedy_cover(pts, float(delta)))
    packing = int(kernels.greedy_packing(pts, 2.0 * float(delta)))
    lower = int(round_pow2(eps / (delta * ell))) ** d
    upper = int(round_pow2((2 * eps + delta * ell) / (delta * lam))) ** d
    return CoveringReport(n_cover, packing, lower, upper, bool(n_cover <= upper and packing >= lower))
