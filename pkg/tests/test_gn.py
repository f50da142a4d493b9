import dataclasses

import numpy as np
import pytest

from geonarrow.environment import BatchedEnvironment
from geonarrow.gn import (
    GNParams,
    InternalConsistencyError,
    LSParams,
    check_ls_covering,
    run_gn,
    run_gn_prime,
    run_gn_static,
    run_uniform_baseline,
)
from geonarrow.harness import builder_instances, make_ls_abs_instance
from geonarrow.instances import NoiseSpec, make_power_instance
from geonarrow.metric import MetricDomain
from geonarrow.scheduler import b_const, rr_schedule, simple_schedule, static_grid

QUIET = NoiseSpec("none")
POWER = make_power_instance(MetricDomain.unit(1), [0.3], 2, 1.0)


def params(inst):
    return GNParams(inst.lam, inst.big_l, inst.q)


def adaptive(inst, T, seed=0, noise=None):
    env = BatchedEnvironment(inst, T, seed, noise)
    return run_gn(env, params(inst), rr_schedule(T, inst.d, inst.q, inst.lam, inst.domain.diameter))


def static(inst, T, seed=0, noise=None):
    env = BatchedEnvironment(inst, T, seed, noise)
    g = static_grid(T, inst.d, inst.q, inst.lam, inst.big_l, inst.domain)
    return run_gn_static(env, params(inst), g), g


@pytest.mark.parametrize("T", [10**3, 10**4, 2**16, 10**5, 2**20, 10**7])
@pytest.mark.parametrize("inst", builder_instances(), ids=lambda i: f"{i.name}-d{i.d}-q{i.q:g}")
def test_zero_noise_retains_optimum(inst, T):
    rec = adaptive(inst, T, noise=QUIET)
    assert rec.optimum_retained
    assert all(b.optimum_retained for b in rec.elimination_trace)
    assert rec.pulls == T


@pytest.mark.parametrize("T", [2**16, 2**20, 10**7, 10**9])
@pytest.mark.parametrize("inst", builder_instances(), ids=lambda i: f"{i.name}-d{i.d}-q{i.q:g}")
def test_zero_noise_diameter_shrinks(inst, T):
    rec = adaptive(inst, T, noise=QUIET)
    p = params(inst)
    bound = 2 + 2 * ((p.lam + p.big_l) / p.lam) ** (1 / p.q)
    for b in rec.elimination_trace:
        if b.nominal_radius is not None:
            assert b.reach <= bound * b.nominal_radius * (1 + 1e-12)


def test_single_ball_is_always_kept():
    rec = adaptive(POWER, 10**4, noise=QUIET)
    first = rec.elimination_trace[0]
    assert first.n_pre == first.n_kept == 1


@pytest.mark.parametrize("T", [8, 50, 10**3, 12345, 2**18])
def test_budget_exact(T):
    rec = adaptive(POWER, T, seed=2)
    assert rec.pulls == T
    cp = rec.communication_points
    assert cp[-1] == T and all(a < b for a, b in zip(cp, cp[1:]))
    assert rec.batches_used <= 2 * rr_schedule(T, 1, 2, 1.0).M + 1


def test_truncated_first_batch():
    rec = adaptive(POWER, 8)
    assert rec.elimination_trace[0].truncated
    assert rec.pulls == 8


def test_horizon_mismatch():
    env = BatchedEnvironment(POWER, 1000, 0)
    with pytest.raises(ValueError):
        run_gn(env, params(POWER), rr_schedule(2000, 1, 2, 1.0))


def test_seed_determinism():
    a = adaptive(POWER, 2**18, seed=9)
    b = adaptive(POWER, 2**18, seed=9)
    assert a.dumps() == b.dumps()


def test_no_leakage_within_batch():
    # decisions of batch m only see flushed data: pulls inside the first batch do not depend on noise
    from geonarrow.environment import BatchedEnvironment as Env

    seen = []

    class Spy(Env):
        def pull_many(self, x, count):
            seen.append((self.seed, len(self.communication_points), tuple(x), count))
            super().pull_many(x, count)

    inst = make_power_instance(MetricDomain.unit(2), [0.3, 0.7], 1, 1.0)
    T = 2**16
    for seed in (1, 2):
        run_gn(Spy(inst, T, seed), params(inst), rr_schedule(T, 2, 1, 1.0))
    first = [s[1:] for s in seen if s[0] == 1 and s[1] == 0]
    second = [s[1:] for s in seen if s[0] == 2 and s[1] == 0]
    assert first == second


def test_static_communication_points_follow_tau():
    rec, g = static(POWER, 2**20, seed=4)
    cp = rec.communication_points
    assert cp[: g.M_s] == g.tau[1:].tolist()
    assert cp[-1] == 2**20 and rec.pulls == 2**20
    assert all(b.surplus >= 0 for b in rec.elimination_trace)


@pytest.mark.parametrize("inst", builder_instances(), ids=lambda i: f"{i.name}-d{i.d}-q{i.q:g}")
def test_static_surplus_nonnegative_zero_noise(inst):
    for T in (2**18, 2**20, 10**7):
        try:
            rec, _ = static(inst, T, noise=QUIET)
        except ValueError:
            continue  # horizon too short for the static grid
        assert rec.optimum_retained
        assert all(b.surplus >= 0 for b in rec.elimination_trace)


def test_static_allowance_guard():
    # a deadline grid that cannot even cover the active set is rejected, not silently overrun
    g = static_grid(2**20, 1, 2.0, 1.0, 1.0)
    tight = dataclasses.replace(g, tau=np.array([0, 10] + g.tau[2:].tolist()))
    with pytest.raises(InternalConsistencyError):
        run_gn_static(BatchedEnvironment(POWER, 2**20, 0), params(POWER), tight)


def test_static_allowance_bounds_retained_balls():
    # per axis at most 3 + ((lam + L) / lam)**(1/q) balls survive, and B_const rounds that up
    for lam, big_l, q in [(1, 1, 2), (0.5, 2, 2), (1, 4, 1), (0.1, 10, 1)]:
        p = GNParams(lam, big_l, q)
        assert b_const(lam, big_l, q) >= 1 + p.threshold_factor


def test_static_and_adaptive_agree_at_equal_depth():
    agreed = 0
    for inst in builder_instances():
        for T in (2**16, 2**18, 2**20, 10**7):
            a = adaptive(inst, T, noise=QUIET)
            try:
                s, _ = static(inst, T, noise=QUIET)
            except ValueError:
                continue
            if a.elimination_trace[-1].radius == s.elimination_trace[-1].radius:
                assert a.x_out == s.x_out
                agreed += 1
    assert agreed >= 4


def test_simple_radii_variant():
    T = 2**18
    env = BatchedEnvironment(POWER, T, 0, QUIET)
    rec = run_gn(env, params(POWER), simple_schedule(T, 1.0, 2.0, 6))
    assert rec.algorithm == "gn-simple" and rec.pulls == T and rec.optimum_retained


def test_gn_prime_cap_and_retention():
    inst = make_ls_abs_instance()
    ls = LSParams(1.0, 1.0)
    assert ls.cap(1) == 16 and ls.cap(2) == 256
    for T in (2**14, 2**20, 10**9):
        rec = run_gn_prime(BatchedEnvironment(inst, T, 0, QUIET), ls, rr_schedule(T, 1, 1.0, 1.0))
        assert rec.optimum_retained
        for b in rec.elimination_trace:
            assert b.n_kept == min(b.n_pre, 16)
    with pytest.raises(ValueError):
        run_gn_prime(BatchedEnvironment(inst, 1000, 0), ls, rr_schedule(1000, 1, 2.0, 1.0))


def test_ls_covering_examples():
    f = lambda xs: np.abs(xs).max(axis=1)  # noqa: E731
    rep = check_ls_covering(f, 1, 1, 0.5, 0.25, MetricDomain.box(-1, 1, 1))
    assert (rep.N, rep.lower, rep.upper, rep.passed) == (2, 2, 8, True)
    rep = check_ls_covering(f, 1, 1, 0.5, 2.0, MetricDomain.box(-1, 1, 1))
    assert rep.N == 1
    rep = check_ls_covering(f, 1, 1, 0.5, 0.25, MetricDomain.box(-1, 1, 2))
    assert (rep.N, rep.lower, rep.upper, rep.passed) == (4, 4, 64, True)
    with pytest.raises(ValueError):
        check_ls_covering(f, 1, 1, 0.5, 0.25, MetricDomain.box(1, 2, 1), f_star=-1.0)


def test_uniform_baseline():
    rec = run_uniform_baseline(BatchedEnvironment(POWER, 1000, 0, QUIET), 0.125)
    assert rec.x_out == [0.375] and rec.pulls == 1000 and rec.batches_used == 1
    one = run_uniform_baseline(BatchedEnvironment(POWER, 100, 0, QUIET), 1.0)
    assert one.x_out == [0.5]
    assert one.cum_regret == pytest.approx(100 * 0.04)


def test_concentration_event_frequency():
    T = 10**4
    bad = checks = 0
    for seed in range(200):
        rec = adaptive(POWER, T, seed=seed)
        bad += rec.extra["deviations"]
        checks += sum(b.n_pre for b in rec.elimination_trace)
    assert bad / checks <= 5 * 2 / T
