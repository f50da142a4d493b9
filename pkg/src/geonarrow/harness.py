"""Experiment configuration, (T, seed) cells, aggregation and verifier dispatch.

A config is one JSON document::

    {
      "instance": {"name": "power", "d": 1, "x_star": [0.3], "q": 2, "scale": 1.0},
      "algorithm": "gn",
      "declared": {"lam": 1.0, "big_l": 1.0, "q": 2},
      "T": [16384, 65536, 262144],
      "seeds": [0, 1, 2],
      "noise": {"kind": "gaussian", "std": 1.0}
    }

``seeds`` may also be ``{"start": 0, "count": 20}``. Every seed is shifted by
the seed offset (``--seed-offset`` or ``GEONARROW_SEED_OFFSET``).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np
from scipy import stats

from . import gn, lowerbound
from .environment import SCHEMA_VERSION, BatchedEnvironment, RunRecord
from .instances import (
    NondegenerateInstance,
    NoiseSpec,
    audit_nondegeneracy,
    make_piecewise_interval_instance,
    make_power_instance,
)
from .metric import MetricDomain
from .scheduler import ScheduleInfeasible, choose_M, rr_schedule, simple_schedule, static_grid

SEED_ENV = "GEONARROW_SEED_OFFSET"
ALGORITHMS = ("gn", "gn-static", "gn-simple", "gn-prime", "uniform")
MIN_T = 8


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------


def make_ls_abs_instance(center: float = 0.4) -> NondegenerateInstance:
    """``|x - center|`` on [0, 1]: level-smooth with lam = ell = 1 (and nondegenerate with q = 1)."""

    def f(xs):
        return np.abs(xs[:, 0] - center)

    return NondegenerateInstance("ls-abs", MetricDomain.unit(1), np.array([center]), 1.0, 1.0, 1.0, f,
                                 {"center": center})


def build_instance(spec: dict) -> NondegenerateInstance:
    spec = dict(spec)
    name = spec.pop("name", None)
    try:
        if name == "power":
            d = int(spec.get("d", 1))
            lo, hi = spec.get("lower", 0.0), spec.get("upper", 1.0)
            dom = MetricDomain.box(lo, hi, d)
            x_star = spec.get("x_star", [0.3] * d)
            return make_power_instance(dom, x_star, float(spec.get("q", 2)), float(spec.get("scale", 1.0)))
        if name == "piecewise":
            return make_piecewise_interval_instance()
        if name == "ls-abs":
            return make_ls_abs_instance(float(spec.get("center", 0.4)))
        if name in ("f_jk", "f_jkl"):
            grid = lowerbound.reference_grid(int(spec["T_ref"]), int(spec["M"]), int(spec["d"]), float(spec["q"]))
            if name == "f_jk":
                fn = lowerbound.family_jk(int(spec["j"]), int(spec["k"]), grid)
            else:
                fn = lowerbound.family_jkl(int(spec["j"]), int(spec["k"]), int(spec["l"]), grid)
            return lowerbound.as_instance(fn, float(spec.get("R", lowerbound.default_radius(grid))))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad instance parameters for {name!r}: {exc}") from exc
    raise ConfigError(f"unknown instance {name!r}")


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    instance: dict
    algorithm: str
    T: list[int]
    seeds: list[int]
    declared: dict = field(default_factory=dict)
    noise: dict = field(default_factory=lambda: {"kind": "gaussian", "std": 1.0})
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        for key in ("instance", "algorithm", "T", "seeds"):
            if key not in raw:
                raise ConfigError(f"config is missing {key!r}")
        seeds = raw["seeds"]
        if isinstance(seeds, dict):
            seeds = list(range(int(seeds.get("start", 0)), int(seeds.get("start", 0)) + int(seeds["count"])))
        cfg = cls(
            instance=dict(raw["instance"]),
            algorithm=str(raw["algorithm"]),
            T=[int(t) for t in (raw["T"] if isinstance(raw["T"], list) else [raw["T"]])],
            seeds=[int(s) for s in seeds],
            declared=dict(raw.get("declared", {})),
            noise=dict(raw.get("noise", {"kind": "gaussian", "std": 1.0})),
            options=dict(raw.get("options", {})),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str) -> ExperimentConfig:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if not self.T:
            raise ConfigError("T list is empty")
        if min(self.T) < MIN_T:
            raise ConfigError(f"every T must be >= {MIN_T}, got {min(self.T)}")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be a non-empty list of distinct integers")
        try:
            NoiseSpec(**self.noise)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad noise spec: {exc}") from exc
        build_instance(self.instance)

    def to_json(self) -> dict:
        return {
            "instance": self.instance,
            "algorithm": self.algorithm,
            "T": self.T,
            "seeds": self.seeds,
            "declared": self.declared,
            "noise": self.noise,
            "options": self.options,
        }


def seed_offset(flag: int | None) -> int:
    if flag is not None:
        return int(flag)
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


# ---------------------------------------------------------------------------
# one cell
# ---------------------------------------------------------------------------


def _gn_params(inst: NondegenerateInstance, declared: dict, variant: str) -> gn.GNParams:
    return gn.GNParams(
        float(declared.get("lam", inst.lam)),
        float(declared.get("big_l", inst.big_l)),
        float(declared.get("q", inst.q)),
        variant,
    )


def run_cell(cfg: ExperimentConfig, T: int, seed: int, algorithm: str | None = None,
             noise: dict | None = None) -> RunRecord:
    algorithm = cfg.algorithm if algorithm is None else algorithm
    inst = build_instance(cfg.instance)
    env = BatchedEnvironment(inst, T, seed, NoiseSpec(**(cfg.noise if noise is None else noise)))
    dom = inst.domain
    if algorithm == "uniform":
        radius = float(cfg.options.get("cover_radius", dom.diameter / 8))
        return gn.run_uniform_baseline(env, radius)
    if algorithm == "gn-prime":
        ls = gn.LSParams(float(cfg.declared.get("lam", 1.0)), float(cfg.declared.get("ell", 1.0)))
        return gn.run_gn_prime(env, ls, rr_schedule(T, inst.d, 1.0, ls.lam, dom.diameter))
    params = _gn_params(inst, cfg.declared, {"gn": "adaptive", "gn-static": "static"}.get(algorithm, "simple-radii"))
    if algorithm == "gn":
        return gn.run_gn(env, params, rr_schedule(T, inst.d, params.q, params.lam, dom.diameter))
    if algorithm == "gn-static":
        grid = static_grid(T, inst.d, params.q, params.lam, params.big_l, dom)
        return gn.run_gn_static(env, params, grid)
    depth = int(cfg.options.get("depth", 2 * choose_M(T, inst.d, params.q)))
    return gn.run_gn(env, params, simple_schedule(T, params.lam, params.q, depth, inst.d, dom.diameter))


def _cell_worker(args):
    cfg_json, T, seed = args
    cfg = ExperimentConfig.from_dict(cfg_json)
    return run_cell(cfg, T, seed).dumps()


def cells(cfg: ExperimentConfig, offset: int = 0) -> list[tuple[int, int]]:
    return [(T, s + offset) for T in cfg.T for s in cfg.seeds]


def run_records(cfg: ExperimentConfig, workers: int = 1, offset: int = 0) -> list[str]:
    """JSON lines for every (T, seed) cell, in (T, seed) order."""
    jobs = [(cfg.to_json(), T, s) for T, s in cells(cfg, offset)]
    if workers <= 1 or len(jobs) <= 1:
        return [_cell_worker(j) for j in jobs]
    with get_context("spawn").Pool(min(workers, len(jobs))) as pool:
        return list(pool.imap(_cell_worker, jobs))  # imap keeps submission order


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


CSV_COLUMNS = ("T", "mean_regret", "sd_regret", "mean_simple_regret", "mean_batches", "retention_rate")


def aggregate(records: list[dict]) -> list[dict]:
    by_t: dict[int, list[dict]] = {}
    for r in records:
        by_t.setdefault(int(r["T"]), []).append(r)
    rows = []
    for T in sorted(by_t):
        rs = by_t[T]
        reg = np.array([r["cum_regret"] for r in rs])
        rows.append({
            "T": T,
            "mean_regret": float(reg.mean()),
            "sd_regret": float(reg.std(ddof=1)) if len(reg) > 1 else 0.0,
            "median_regret": float(np.median(reg)),
            "mean_simple_regret": float(np.mean([r["simple_regret"] for r in rs])),
            "mean_batches": float(np.mean([r["batches_used"] for r in rs])),
            "retention_rate": float(np.mean([bool(r["optimum_retained"]) for r in rs])),
            "runs": len(rs),
        })
    return rows


def loglog_slope(Ts, values) -> tuple[float, float]:
    """OLS slope of ln(value) on ln(T) and its standard error."""
    fit = stats.linregress(np.log(np.asarray(Ts, dtype=float)), np.log(np.asarray(values, dtype=float)))
    return float(fit.slope), float(fit.stderr)


def summarize(records: list[dict]) -> dict:
    rows = aggregate(records)
    if len(rows) < 3:
        raise ConfigError("a sweep needs at least 3 distinct T values")
    slope, se = loglog_slope([r["T"] for r in rows], [r["mean_regret"] for r in rows])
    return {"schema_version": SCHEMA_VERSION, "rows": rows, "slope": slope, "slope_se": se}


def _fmt(v) -> str:
    # repr gives the shortest string that round-trips a float
    return repr(float(v)) if isinstance(v, float) else str(v)


def rows_to_csv(rows: list[dict], columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def csv_to_rows(text: str) -> list[dict]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        out.append({k: (int(v) if k == "T" else float(v)) for k, v in r.items()})
    return out


# ---------------------------------------------------------------------------
# static vs adaptive
# ---------------------------------------------------------------------------


COMPARE_COLUMNS = (
    "T", "seed", "feasible", "adaptive_regret", "static_regret", "adaptive_batches", "static_batches",
    "adaptive_simple_regret", "static_simple_regret", "same_x_out",
)


def _compare_worker(args):
    cfg_json, T, seed = args
    cfg = ExperimentConfig.from_dict(cfg_json)
    a = run_cell(cfg, T, seed, "gn")
    row = {"T": T, "seed": seed, "adaptive_regret": a.cum_regret, "adaptive_batches": a.batches_used,
           "adaptive_simple_regret": a.simple_regret, "adaptive_comm": a.communication_points}
    try:
        s = run_cell(cfg, T, seed, "gn-static")
    except (ScheduleInfeasible, gn.InternalConsistencyError) as exc:
        row.update(feasible=False, static_regret=math.nan, static_batches=0, static_simple_regret=math.nan,
                   same_x_out=False, static_comm=[], note=str(exc))
        return row
    row.update(feasible=True, static_regret=s.cum_regret, static_batches=s.batches_used,
               static_simple_regret=s.simple_regret, same_x_out=a.x_out == s.x_out,
               static_comm=s.communication_points)
    return row


def compare_static(cfg: ExperimentConfig, workers: int = 1, offset: int = 0) -> dict:
    jobs = [(cfg.to_json(), T, s) for T, s in cells(cfg, offset)]
    if workers <= 1 or len(jobs) <= 1:
        rows = [_compare_worker(j) for j in jobs]
    else:
        with get_context("spawn").Pool(min(workers, len(jobs))) as pool:
            rows = list(pool.imap(_compare_worker, jobs))
    per_t = []
    for T in sorted(set(cfg.T)):
        ok = [r for r in rows if r["T"] == T and r["feasible"]]
        if not ok:
            per_t.append({"T": T, "feasible": False})
            continue
        a = float(np.mean([r["adaptive_regret"] for r in ok]))
        s = float(np.mean([r["static_regret"] for r in ok]))
        per_t.append({"T": T, "feasible": True, "adaptive_mean_regret": a, "static_mean_regret": s,
                      "ratio": s / a if a > 0 else math.inf})
    return {"schema_version": SCHEMA_VERSION, "rows": rows, "per_T": per_t}


# ---------------------------------------------------------------------------
# verifiers
# ---------------------------------------------------------------------------


def builder_instances() -> list[NondegenerateInstance]:
    out = []
    for d in (1, 2):
        for q in (1.0, 2.0):
            out.append(make_power_instance(MetricDomain.unit(d), [0.3, 0.7][:d], q, 1.0))
    out.append(make_piecewise_interval_instance())
    out.append(make_ls_abs_instance())
    return out


def verify_instances() -> list[dict]:
    reps = []
    for inst in builder_instances():
        g = 401 if inst.d == 1 else 101
        res = audit_nondegeneracy(inst, g)
        reps.append({"property": "nondegenerate[builder]", "indices": {"name": inst.name, "d": inst.d, "q": inst.q},
                     "min_ratio": res.lambda_hat, "max_ratio": res.big_l_hat, "pass": res.passed})
    return reps


LB_GRID = {"d": (1, 2), "q": (1.0, 2.0), "M": (2, 3), "T": (10_000, 1_000_000)}


def verify_lowerbound(grid: dict | None = None) -> list[dict]:
    g = dict(LB_GRID, **(grid or {}))
    reps = []
    for d in g["d"]:
        for q in g["q"]:
            for T in g["T"]:
                for M in g["M"]:
                    reps += [r.to_json() for r in lowerbound.verify_reference_family(T, M, d, q)]
                reps += [r.to_json() for r in lowerbound.verify_standard_family(T, d, q)]
    return reps


LS_EXAMPLES = (
    # (name, f, domain, lam, ell, eps, delta)
    ("abs-1d", lambda xs: np.abs(xs).max(axis=1), MetricDomain.box(-1, 1, 1), 1.0, 1.0, 0.5, 0.25),
    ("linf-2d", lambda xs: np.abs(xs).max(axis=1), MetricDomain.box(-1, 1, 2), 1.0, 1.0, 0.5, 0.25),
)


def verify_ls() -> list[dict]:
    reps = []
    for name, f, dom, lam, ell, eps, delta in LS_EXAMPLES:
        rep = gn.check_ls_covering(f, lam, ell, eps, delta, dom)
        reps.append({"property": "ls_covering", "indices": {"example": name, "eps": eps, "delta": delta},
                     "min_ratio": rep.packing / rep.lower, "max_ratio": rep.N / rep.upper, "pass": rep.passed,
                     "N": rep.N, "packing": rep.packing, "lower": rep.lower, "upper": rep.upper})
    return reps


SCOPES = {"instances": verify_instances, "lowerbound": verify_lowerbound, "ls": verify_ls}


def verify(scope: str) -> list[dict]:
    if scope == "all":
        return [r for name in SCOPES for r in SCOPES[name]()]
    if scope not in SCOPES:
        raise ConfigError(f"unknown verify scope {scope!r}")
    return SCOPES[scope]()
