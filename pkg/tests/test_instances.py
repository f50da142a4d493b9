import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geonarrow.instances import (
    NoiseSpec,
    audit_nondegeneracy,
    make_piecewise_interval_instance,
    make_power_instance,
)
from geonarrow.metric import MetricDomain


def test_power_instance_values():
    inst = make_power_instance(MetricDomain.unit(1), [0.3], 2, 1.0)
    assert inst.eval([0.8]) == pytest.approx(0.25)
    assert inst.f_star == 0.0
    assert (inst.lam, inst.big_l, inst.q) == (1.0, 1.0, 2.0)


def test_power_instance_rejects_outside_minimizer():
    with pytest.raises(ValueError):
        make_power_instance(MetricDomain.unit(1), [1.5], 2, 1.0)
    with pytest.raises(ValueError):
        make_power_instance(MetricDomain.unit(1), [0.5], 2, 0.0)


def test_piecewise_values():
    inst = make_piecewise_interval_instance()
    assert inst.eval([-1.5]) == 1.5
    assert inst.eval([0.5]) == 0.25
    assert inst.eval([1.5]) == 2.5
    assert inst.minimizer.tolist() == [0.0]


@pytest.mark.parametrize("d, q", [(1, 1.0), (1, 2.0), (2, 1.0), (2, 2.0)])
def test_audit_power(d, q):
    inst = make_power_instance(MetricDomain.unit(d), [0.3, 0.7][:d], q, 1.0)
    res = audit_nondegeneracy(inst, 101)
    assert res.passed
    assert res.lambda_hat == pytest.approx(1.0) and res.big_l_hat == pytest.approx(1.0)


def test_audit_piecewise():
    res = audit_nondegeneracy(make_piecewise_interval_instance(), 401)
    assert res.passed
    assert 0.5 <= res.lambda_hat and res.big_l_hat <= 2.0


def test_audit_flags_misdeclared_parameters():
    inst = make_power_instance(MetricDomain.unit(1), [0.3], 2, 1.0)
    wrong = dataclasses.replace(inst, lam=2.0, big_l=2.0)
    assert not audit_nondegeneracy(wrong, 101).passed


def test_audit_needs_two_points():
    inst = make_power_instance(MetricDomain.unit(1), [0.3], 2, 1.0)
    with pytest.raises(ValueError):
        audit_nondegeneracy(inst, 1)


@given(st.floats(0.1, 5.0), st.sampled_from([1.0, 2.0, 3.0]), st.floats(0.0, 1.0))
def test_power_sandwich_exact(scale, q, x0):
    inst = make_power_instance(MetricDomain.unit(1), [x0], q, scale)
    xs = np.linspace(0, 1, 33)[:, None]
    gap = inst.eval_many(xs) - inst.f_star
    assert np.allclose(gap, scale * np.abs(xs[:, 0] - x0) ** q)


def test_noise_spec_bounds():
    assert NoiseSpec("none", 1.0).effective_std == 0.0
    with pytest.raises(ValueError):
        NoiseSpec("gaussian", 1.5)
    with pytest.raises(ValueError):
        NoiseSpec("cauchy", 1.0)
