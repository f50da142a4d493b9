"""Batched bandit oracle.

Pulls are buffered and their noisy losses only come back at a communication
point (:meth:`BatchedEnvironment.flush`). Regret is booked against the
noiseless loss at pull time, so it never depends on the noise draw.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .instances import NondegenerateInstance, NoiseSpec
from .metric import as_point

RNG_ALGORITHM = "numpy.Philox"
SCHEMA_VERSION = 1


class BudgetExhausted(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


class BatchedEnvironment:
    def __init__(self, instance: NondegenerateInstance, T: int, seed: int,
                 noise: NoiseSpec | None = None, keep_log: bool = False):
        if not T >= 1:
            raise ValueError("horizon T must be positive")
        self.instance = instance
        self.noise = NoiseSpec() if noise is None else noise
        self.T = int(T)
        self.seed = int(seed)
        self._rng = make_rng(self.seed)
        self._f_star = instance.f_star
        self.pulled = 0
        self.cum_regret = 0.0
        self.communication_points: list[int] = []
        # pending observations: list of (points (k, d), losses (k,))
        self.__pending: list[tuple[np.ndarray, np.ndarray]] = []
        self._log: list[tuple[np.ndarray, int]] | None = [] if keep_log else None

    @property
    def d(self) -> int:
        return self.instance.d

    def remaining_budget(self) -> int:
        return self.T - self.pulled

    def pull(self, x) -> None:
        self.pull_many(x, 1)

    def pull_many(self, x, count: int) -> None:
        """``count`` pulls of the same arm ``x``."""
        count = int(count)
        if count <= 0:
            return
        x = as_point(x, self.d)
        if not self.instance.domain.contains(x):
            raise ValueError(f"arm {x} lies outside the domain")
        if count > self.remaining_budget():
            raise BudgetExhausted(f"{count} pulls requested, {self.remaining_budget()} left")
        fx = self.instance.eval(x)
        std = self.noise.effective_std
        if std > 0:
            ys = fx + std * self._rng.standard_normal(count)
        else:
            ys = np.broadcast_to(np.float64(fx), (count,))  # read-only, no allocation
        self.__pending.append((x, ys))
        self.pulled += count
        # count identical gaps; summed as a product to stay O(1) per call
        self.cum_regret += count * (fx - self._f_star)
        if self._log is not None:
            self._log.append((x, count))

    def flush(self) -> list[tuple[np.ndarray, float]]:
        """Release everything pulled since the last flush, in pull order."""
        out = [(x, float(y)) for x, ys in self.__pending for y in ys]
        self._release()
        return out

    def flush_grouped(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Same as :meth:`flush` but one ``(arm, losses)`` entry per ``pull_many`` call."""
        out = [(x, ys) for x, ys in self.__pending]
        self._release()
        return out

    def _release(self) -> None:
        self.__pending = []
        if not self.communication_points or self.communication_points[-1] != self.pulled:
            if self.pulled > 0:
                self.communication_points.append(self.pulled)

    def pull_log(self) -> list[tuple[np.ndarray, int]]:
        if self._log is None:
            raise RuntimeError("environment was created without keep_log=True")
        return list(self._log)


@dataclass
class BatchTrace:
    radius: float
    n_pre: int
    n_kept: int
    pulls: int = 0
    optimum_retained: bool = True
    deviations: int = 0
    reach: float = 0.0  # sup distance from x* to the retained balls (diagnostic)
    nominal_radius: float | None = None
    surplus: int | None = None
    truncated: bool = False


@dataclass
class RunRecord:
    seed: int
    T: int
    algorithm: str
    instance: str
    batches_used: int
    communication_points: list[int]
    cum_regret: float
    simple_regret: float
    optimum_retained: bool
    x_out: list[float]
    elimination_trace: list[BatchTrace] = field(default_factory=list)
    pulls: int = 0
    rng: str = RNG_ALGORITHM
    schema_version: int = SCHEMA_VERSION
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, allow_nan=False)
