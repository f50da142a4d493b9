"""Rounded-radius schedules, per-batch sample counts and the static grid.

Radii are always exact powers of two, so they are stored as integer
exponents ``e`` with ``r = 2**-e``. All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metric import MetricDomain, round_pow2


class ScheduleInfeasible(ValueError):
    """The horizon is too short for even one batch of the static grid."""


def _check_T(T) -> None:
    if not T >= 8:
        raise ValueError(f"horizon T={T} is too small; need T >= 8")


def eta_hat(d: int, q: float) -> float:
    return (q + d) / (2 * q + d)


def choose_M(T: int, d: int, q: float) -> int:
    """ceil(ln ln(T / ln T) / ln(1 / eta)), at least 1."""
    _check_T(T)
    inner = math.log(math.log(T / math.log(T)))
    return max(1, math.ceil(inner / math.log(1.0 / eta_hat(d, q))))


N_MAX = 2**62  # saturation point; no horizon can afford a batch this large


def sample_count(T: int, lam: float, q: float, r: float) -> int:
    """n = ceil(16 ln T / (lam**2 r**(2q))), at least 1 and at most ``N_MAX``."""
    denom = lam**2 * r ** (2 * q)
    raw = 16.0 * math.log(T) / denom if denom > 0 else math.inf
    if not raw < N_MAX:
        return N_MAX
    return max(1, math.ceil(raw))


@dataclass(frozen=True, eq=False)
class RRSchedule:
    T: int
    d: int
    q: float
    lam: float
    M: int
    c_hat: np.ndarray
    eta_hat: float
    exponents: np.ndarray  # r_bar[m] = 2**-exponents[m]
    n: np.ndarray
    kind: str = "rr"
    diameter: float = 1.0  # radii and sample counts are for a domain of this diameter

    @property
    def r_bar(self) -> np.ndarray:
        return np.ldexp(1.0, -self.exponents)

    def radius(self, m: int) -> float:
        """Radius of batch ``m`` (0-based) in domain units."""
        return self.diameter * math.ldexp(1.0, -int(self.exponents[m]))

    @property
    def r_hat(self) -> np.ndarray:
        return 2.0 ** -np.cumsum(self.c_hat)

    def __len__(self) -> int:
        return len(self.exponents)

    def skipped(self, m: int) -> bool:
        """0-based: batch ``m`` is skipped when the next radius is larger."""
        return m + 1 < len(self) and self.exponents[m + 1] < self.exponents[m]

    def played(self) -> list[int]:
        return [m for m in range(len(self)) if not self.skipped(m)]

    def max_batches(self) -> int:
        """Elimination batches plus the cleanup batch."""
        return len(self.played()) + 1

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "T": self.T,
            "d": self.d,
            "q": self.q,
            "lambda": self.lam,
            "M": self.M,
            "c_hat": self.c_hat.tolist(),
            "eta_hat": self.eta_hat,
            "radius_exponents": [int(e) for e in self.exponents],
            "n": [int(v) for v in self.n],
            "diameter": self.diameter,
        }


def _counts(T, lam, q, exps, diameter) -> np.ndarray:
    return np.array([sample_count(T, lam, q, diameter * math.ldexp(1.0, -int(e))) for e in exps],
                    dtype=np.int64)


def rr_schedule(T: int, d: int, q: float, lam: float, diameter: float = 1.0) -> RRSchedule:
    """Rounded-radius schedule for a domain of the given diameter.

    The algorithm is stated for diameter one; on a box of diameter ``D`` every
    radius is multiplied by ``D``, which is the same as rescaling the box.
    """
    _check_T(T)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    M = choose_M(T, d, q)
    eta = eta_hat(d, q)
    c1 = math.log(T / math.log(T)) / (2 * (2 * q + d) * math.log(2))
    c_hat = c1 * eta ** np.arange(M)
    sums = np.cumsum(c_hat)
    exps = np.empty(2 * M, dtype=np.int64)
    exps[0::2] = np.floor(sums)
    exps[1::2] = np.ceil(sums)
    n = _counts(T, lam, q, exps, diameter)
    return RRSchedule(int(T), d, float(q), float(lam), M, c_hat, eta, exps, n, diameter=float(diameter))


def simple_schedule(T: int, lam: float, q: float, depth: int, d: int = 1,
                    diameter: float = 1.0) -> RRSchedule:
    """Halving radii 1/2, 1/4, ..., 2**-depth with the usual sample counts."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    _check_T(T)
    exps = np.arange(1, depth + 1, dtype=np.int64)
    n = _counts(T, lam, q, exps, diameter)
    return RRSchedule(int(T), d, float(q), float(lam), math.ceil(depth / 2), np.empty(0), eta_hat(d, q),
                      exps, n, kind="simple", diameter=float(diameter))


def b_const(lam: float, big_l: float, q: float) -> float:
    """[3 + 2 ((lam + L) / lam)**(1/q)]_2, the a-priori bound on retained balls per axis."""
    return round_pow2(3 + 2 * ((lam + big_l) / lam) ** (1.0 / q))


@dataclass(frozen=True, eq=False)
class StaticGrid:
    schedule: RRSchedule
    tau: np.ndarray  # tau_0 = 0, tau_1, ..., tau_{M_s}
    s: np.ndarray  # 0-based radius indices, one per batch
    B_const: float
    big_l: float

    @property
    def M_s(self) -> int:
        return len(self.s)

    @property
    def T(self) -> int:
        return self.schedule.T

    def radius(self, m: int) -> float:
        return self.schedule.radius(int(self.s[m]))

    def count(self, m: int) -> int:
        return int(self.schedule.n[self.s[m]])

    def to_json(self) -> dict:
        return {
            "schedule": self.schedule.to_json(),
            "tau": [int(t) for t in self.tau],
            "s": [int(k) + 1 for k in self.s],
            "B_const": self.B_const,
        }


def static_grid(T: int, d: int, q: float, lam: float, big_l: float,
                domain: MetricDomain | None = None) -> StaticGrid:
    """Deadlines fixed before any observation.

    ``s_{m+1} = min{k > m : r_k <= r_{s_m}}`` and every batch is budgeted as if
    ``B_const**d`` balls per parent survived. The first batch is sized by the
    actual number of balls in the initial cover of ``domain``.
    """
    if not big_l >= lam:
        raise ValueError("need big_l >= lambda")
    domain = MetricDomain.unit(d) if domain is None else domain
    sch = rr_schedule(T, d, q, lam, diameter=domain.diameter)
    B = b_const(lam, big_l, q)
    Bd = int(B) ** d
    r1 = sch.radius(0)
    cover = int(np.prod([max(1, math.ceil(side / (2 * r1) - 1e-12)) for side in domain.upper - domain.lower]))
    exps = sch.exponents
    s = [0]
    tau = [0, cover * Bd * int(sch.n[0])]
    if tau[1] > T:
        raise ScheduleInfeasible(f"first static batch needs {tau[1]} pulls but T={T}")
    K = len(exps)
    for m in range(1, K):  # 0-based m here is the 1-based m + 1
        nxt = next((k for k in range(m, K) if exps[k] >= exps[s[-1]]), None)
        if nxt is None:
            break
        ratio = 2 ** int(exps[nxt] - exps[s[-1]])
        t = tau[-1] + ratio**d * Bd * int(sch.n[nxt])
        if t > T:
            break
        s.append(nxt)
        tau.append(t)
    return StaticGrid(sch, np.array(tau, dtype=np.int64), np.array(s, dtype=np.int64), B, float(big_l))
